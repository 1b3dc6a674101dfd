//! Predicted revenue against the number of running servers on a 1000-server
//! farm, and the optimum the early-stopping search finds.
//!
//! `cargo run --example revenue_sweep`

use greenfarm::config::Config;
use greenfarm::experiments::sweep_revenue_vs_n;
use greenfarm::policies::optimal_policy;
use greenfarm::queueing::TrafficEstimate;

fn main() -> greenfarm::Result<()> {
    let config = Config::shipped();
    let loads = [0.3, 0.5, 0.7, 0.9];
    let curves = sweep_revenue_vs_n(&loads, &config)?;
    let model = config.revenue_model();
    let price = model.tariff.price_at(0.0);

    println!("{:>5} {:>9} {:>8} {:>12} {:>8}", "load", "lambda", "best n", "revenue $/h", "search n");
    for c in &curves {
        let traffic = TrafficEstimate::markovian(c.lambda, config.workload.mean_service_hours())?;
        let found = optimal_policy(&traffic, config.farm.capacity, 0.01, &model, price)?;
        println!(
            "{:>5} {:>9.1} {:>8} {:>12.3} {:>8}",
            c.load, c.lambda, c.best_n, c.best_revenue, found.n
        );
    }

    let c = &curves[1];
    println!("\nR(n) around the optimum at load {}", c.load);
    for p in c.points.iter().step_by(25).filter(|p| p.n + 150 >= c.best_n && p.n <= c.best_n + 150) {
        println!("  n {:>5}  blocking {:.5}  power {:>9.1} W  R {:>8.3} $/h", p.n, p.blocking, p.power_watts, p.revenue);
    }
    Ok(())
}
