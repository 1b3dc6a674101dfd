//! One simulated run of the adaptive policy, window by window.
//!
//! `cargo run --release --example single_simulation`

use greenfarm::config::Config;
use greenfarm::policies::{Policy, PolicySpec};
use greenfarm::simulator::{run, summarize};

fn main() -> greenfarm::Result<()> {
    let config = Config::shipped();
    let spec: PolicySpec = "adaptive:0.2".parse()?;
    let mut policy = Policy::new(spec, config.revenue_model(), config.policy.forecast)?;
    let workload = config.workload_spec(0.6);
    let result = run(&mut policy, workload, &config.sim_config(config.farm.window_hours))?;

    println!("{:>4} {:>6} {:>6} {:>8} {:>8} {:>9} {:>9}", "win", "hour", "n", "arrivals", "blocked", "busy/on", "revenue");
    for r in result.records.iter().take(12) {
        println!(
            "{:>4} {:>6} {:>6} {:>8} {:>8} {:>9.4} {:>9.3}",
            r.window_index, r.start_hour, r.n_used, r.arrivals, r.blocked, r.busy_running_ratio, r.revenue_dollars
        );
    }

    let s = summarize(&result);
    println!(
        "\n{} windows: loss {:.4}, {:.1} kWh, {:.3} $/h",
        s.windows, s.loss_fraction, s.total_energy_kwh, s.mean_revenue_per_hour
    );
    if let Some(ci) = s.revenue_ci95 {
        println!("95% interval on hourly revenue from 24 h blocks: [{:.3}, {:.3}]", ci.low, ci.high);
    }
    Ok(())
}
