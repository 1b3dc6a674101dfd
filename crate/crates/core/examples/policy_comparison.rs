//! Static, adaptive and optimal allocation compared on the same random
//! streams across loads.
//!
//! `cargo run --release --example policy_comparison`

use greenfarm::config::Config;
use greenfarm::experiments::{all_passed, compare_assertions, compare_policies};
use greenfarm::policies::PolicySpec;
use greenfarm::workload::Shape;

fn main() -> greenfarm::Result<()> {
    let config = Config::shipped();
    let policies: Vec<PolicySpec> = ["static:all", "static:half", "adaptive:0.2", "optimal"]
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, _>>()?;
    let loads = [0.05, 0.3, 0.6, 0.9];
    let runs = compare_policies(&policies, &loads, Shape::Exponential, Shape::Exponential, &config)?;

    println!("{:<14} {:>5} {:>11} {:>8} {:>9}", "policy", "load", "revenue $/h", "loss", "busy/on");
    for r in &runs {
        println!(
            "{:<14} {:>5} {:>11.3} {:>8.4} {:>9.4}",
            r.policy, r.load, r.summary.mean_revenue_per_hour, r.summary.loss_fraction, r.summary.busy_running_ratio
        );
    }
    let checks = compare_assertions(&runs, config.farm.capacity);
    for c in checks.iter().filter(|c| !c.passed) {
        println!("failed: {} ({})", c.name, c.detail);
    }
    println!("{} checks, all passed: {}", checks.len(), all_passed(&checks));
    Ok(())
}
