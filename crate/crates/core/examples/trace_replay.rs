//! A month of synthetic hourly demand replayed under static, adaptive,
//! predictive and oracle allocation with 30 minute windows.
//!
//! `cargo run --release --example trace_replay`

use greenfarm::config::Config;
use greenfarm::experiments::{resolve_trace, run_nonstationary, trace_assertions};
use greenfarm::policies::PolicySpec;

fn main() -> greenfarm::Result<()> {
    let config = Config::shipped();
    let trace = resolve_trace(&config)?;
    println!(
        "trace: {} h, peak {:.0}/h, mean {:.0}/h",
        trace.end(),
        trace.peak_rate(),
        trace.mean_rate(trace.start(), trace.end())
    );

    let policies: Vec<PolicySpec> = ["static:all", "adaptive:0.2", "predictive:0.2", "oracle"]
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, _>>()?;
    let t = run_nonstationary(&trace, &policies, 0.5, None, &config)?;

    println!("\n{:<15} {:>12} {:>12} {:>9}", "policy", "energy kWh", "revenue $", "busy/on");
    for r in &t.runs {
        println!(
            "{:<15} {:>12.1} {:>12.1} {:>9.4}",
            r.policy, r.summary.total_energy_kwh, r.summary.total_revenue, r.summary.busy_running_ratio
        );
    }
    for c in trace_assertions(&t, config.farm.capacity) {
        println!("[{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(())
}
