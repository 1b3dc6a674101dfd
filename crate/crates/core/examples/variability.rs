//! Log-normal interarrival and service times against the Markovian
//! baseline, plus a check of the generator's sample SCVs.
//!
//! `cargo run --release --example variability`

use greenfarm::config::Config;
use greenfarm::experiments::run_variability;
use greenfarm::policies::PolicySpec;
use greenfarm::workload::LogNormalParams;

fn main() -> greenfarm::Result<()> {
    let (ca2, cs2) = (2.0, 20.0);
    let p = LogNormalParams::from_mean_scv(50.0 / 60.0, cs2)?;
    println!("service log-normal: mu {:.4}, sigma {:.4}, mean {:.4} h", p.mu_ln, p.sigma_ln, p.mean());

    let config = Config::shipped();
    let policies: Vec<PolicySpec> = vec!["adaptive:0.2".parse()?, "optimal".parse()?];
    let v = run_variability(&policies, &[0.3, 0.6, 0.9], ca2, cs2, &config)?;

    println!("\n{:<14} {:>5} {:>12} {:>12}", "policy", "load", "log-normal", "markovian");
    for (ln, mk) in v.lognormal.iter().zip(&v.markovian) {
        println!(
            "{:<14} {:>5} {:>12.3} {:>12.3}",
            ln.policy, ln.load, ln.summary.mean_revenue_per_hour, mk.summary.mean_revenue_per_hour
        );
    }
    println!("\nsample ca2 {:.4} (target {ca2}), cs2 {:.4} (target {cs2})", v.sample_ca2, v.sample_cs2);
    Ok(())
}
