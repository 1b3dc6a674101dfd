//! Energy-aware server allocation for cloud farms.
//!
//! A provider runs `n` of `S` identical servers, charges customers for the
//! time their jobs occupy a server, and pays for the electricity every
//! powered-on server draws. This crate provides:
//!
//! * [`queueing`]: Erlang-B loss analytics with a peakedness correction for
//!   non-Poisson arrivals.
//! * [`energy`] and [`economics`]: the linear power model and revenue rate.
//! * [`policies`]: static, revenue-optimal, square-root (QED) staffing,
//!   forecast-driven and oracle allocation.
//! * [`workload`] and [`simulator`]: an event-driven loss-system simulator
//!   with per-window reconfiguration and energy/revenue accounting.
//! * [`experiments`]: the revenue sweep, policy comparison, high-variability
//!   and trace-driven experiment suites.
//!
//! ```
//! use greenfarm::queueing::{erlang_b, TrafficEstimate};
//! use greenfarm::policies::{optimal_policy, RevenueModel};
//!
//! assert!((erlang_b(2, 1.0).unwrap() - 0.2).abs() < 1e-15);
//!
//! let traffic = TrafficEstimate::markovian(720.0, 50.0 / 60.0).unwrap();
//! let decision = optimal_policy(&traffic, 1000, 0.01, &RevenueModel::default(), 0.1).unwrap();
//! assert!(decision.n > 600 && decision.n < 700);
//! ```

pub mod cli;
pub mod config;
pub mod economics;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod policies;
pub mod queueing;
pub mod simulator;
pub mod workload;

pub use error::{Error, Result};
