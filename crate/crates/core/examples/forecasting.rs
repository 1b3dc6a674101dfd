//! Holt smoothing on a noisy daily cycle, with periodic weight refits.
//!
//! `cargo run --example forecasting`

use greenfarm::policies::{refit_smoothing, ForecastState};

fn main() -> greenfarm::Result<()> {
    let series: Vec<f64> = (0..240)
        .map(|k| {
            let t = k as f64 * 0.5;
            let noise = ((k * 7919) % 13) as f64 - 6.0;
            600.0 + 0.4 * t + 120.0 * (t * std::f64::consts::TAU / 24.0).sin() + noise
        })
        .collect();

    let mut f = ForecastState::new(0.5, 0.5, 96)?;
    let mut sq = 0.0;
    let mut count = 0;
    for (k, &y) in series.iter().enumerate() {
        if let Some(pred) = f.forecast_next() {
            if k >= 2 {
                sq += (pred - y).powi(2);
                count += 1;
            }
        }
        f.update(y);
        if k > 0 && k % 24 == 0 {
            f.refit(0.05)?;
            println!("window {k:>3}: alpha {:.2}, gamma {:.2}", f.alpha(), f.gamma());
        }
    }
    println!("one-step RMSE {:.2} over {count} forecasts", (sq / count as f64).sqrt());
    println!("next forecast {:.1}", f.forecast_next().unwrap_or(0.0));

    let best = refit_smoothing(&series, 0.05)?;
    println!("weights fit on the whole series: {best:?}");
    Ok(())
}
