//! Erlang-B blocking for integer and fractional server counts, and the cost
//! of evaluating it on a full-size farm.
//!
//! `cargo run --example erlang_blocking`

use std::time::Instant;

use greenfarm::queueing::{erlang_b, erlang_b_fractional, erlang_b_interpolated, erlang_b_table};

fn main() -> greenfarm::Result<()> {
    let rho = 45.0;
    println!("offered load {rho}");
    println!("{:>4} {:>12}", "n", "B(n, rho)");
    for n in [40u64, 45, 50, 55, 60] {
        println!("{n:>4} {:>12.6}", erlang_b(n, rho)?);
    }

    // The whole curve B(0..=n) costs no more than its last point.
    let table = erlang_b_table(60, rho)?;
    assert_eq!(table[50], erlang_b(50, rho)?);

    println!("\nfractional server counts at rho = 3");
    println!("{:>5} {:>14} {:>14}", "x", "continuation", "interpolated");
    for x in [2.0, 2.25, 2.5, 2.75, 3.0] {
        println!(
            "{x:>5} {:>14.8} {:>14.8}",
            erlang_b_fractional(x, 3.0)?,
            erlang_b_interpolated(x, 3.0)?
        );
    }

    let start = Instant::now();
    let b = erlang_b(100_000, 90_000.0)?;
    println!("\nB(100000, 90000) = {b:.3e} in {:?}", start.elapsed());
    Ok(())
}
