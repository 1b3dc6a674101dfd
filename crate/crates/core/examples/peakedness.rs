//! How arrival and service variability change blocking through the
//! peakedness correction `B(n / z, rho / z)`.
//!
//! `cargo run --example peakedness`

use greenfarm::queueing::{blocking_probability, eta, peakedness, TrafficEstimate};

fn main() -> greenfarm::Result<()> {
    println!("{:>6} {:>10}", "cs2", "eta");
    for cs2 in [0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0] {
        println!("{cs2:>6} {:>10.6}", eta(cs2)?);
    }

    let (lambda, mean_service, n) = (54.0, 1.0, 60u64);
    println!("\nlambda {lambda}/h, mean service {mean_service} h, {n} servers");
    println!("{:>5} {:>5} {:>8} {:>10}", "ca2", "cs2", "z", "blocking");
    for (ca2, cs2) in [(1.0, 1.0), (2.0, 1.0), (2.0, 20.0), (0.5, 0.5), (4.0, 4.0)] {
        let traffic = TrafficEstimate::new(lambda, mean_service, ca2, cs2)?;
        let z = peakedness(&traffic)?.z;
        println!("{ca2:>5} {cs2:>5} {z:>8.4} {:>10.6}", blocking_probability(&traffic, n)?);
    }
    Ok(())
}
