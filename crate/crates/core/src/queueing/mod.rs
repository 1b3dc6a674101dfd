//! Loss-system analytics: Erlang-B blocking, peakedness correction for
//! non-Poisson arrivals, and carried throughput.

mod erlang;
mod peakedness;
pub mod quadrature;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use erlang::{
    erlang_b, erlang_b_fractional, erlang_b_interpolated, erlang_b_table, FractionalMethod,
};
pub use peakedness::{
    eta, eta_normal_quadrature, peakedness, peakedness_update, PeakednessState,
    ETA_QUADRATURE_ORDER, ETA_TAIL_SIGMAS,
};

/// Per-window traffic statistics. Rates are per hour, times in hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficEstimate {
    pub lambda: f64,
    pub mean_service: f64,
    pub ca2: f64,
    pub cs2: f64,
}

impl TrafficEstimate {
    pub fn new(lambda: f64, mean_service: f64, ca2: f64, cs2: f64) -> Result<Self> {
        let t = TrafficEstimate {
            lambda,
            mean_service,
            ca2,
            cs2,
        };
        t.validate()?;
        Ok(t)
    }

    /// Poisson arrivals with exponential service.
    pub fn markovian(lambda: f64, mean_service: f64) -> Result<Self> {
        Self::new(lambda, mean_service, 1.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.lambda) {
            return Err(Error::domain(format!("arrival rate {} is invalid", self.lambda)));
        }
        if !(self.mean_service.is_finite() && self.mean_service > 0.0) {
            return Err(Error::domain(format!(
                "mean service time {} must be positive",
                self.mean_service
            )));
        }
        if !ok(self.ca2) || !ok(self.cs2) {
            return Err(Error::domain(format!(
                "squared coefficients of variation ({}, {}) must be non-negative",
                self.ca2, self.cs2
            )));
        }
        if !self.rho().is_finite() {
            return Err(Error::domain("offered load overflows"));
        }
        Ok(())
    }

    /// Offered load in server units.
    pub fn rho(&self) -> f64 {
        self.lambda * self.mean_service
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }
}

/// Blocking probability `B(n / z, rho / z)` for `n` servers.
pub fn blocking_probability(traffic: &TrafficEstimate, n: u64) -> Result<f64> {
    blocking_probability_with(traffic, n, FractionalMethod::default())
}

pub fn blocking_probability_with(
    traffic: &TrafficEstimate,
    n: u64,
    method: FractionalMethod,
) -> Result<f64> {
    traffic.validate()?;
    let rho = traffic.rho();
    if rho == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let z = peakedness(traffic)?.z;
    if z == 1.0 {
        return erlang_b(n, rho);
    }
    method.evaluate(n as f64 / z, rho / z)
}

/// Carried throughput `lambda (1 - p_n)` in jobs per hour.
pub fn throughput(traffic: &TrafficEstimate, n: u64) -> Result<f64> {
    let p = blocking_probability(traffic, n)?;
    Ok(traffic.lambda * (1.0 - p))
}

pub fn throughput_with(traffic: &TrafficEstimate, n: u64, method: FractionalMethod) -> Result<f64> {
    let p = blocking_probability_with(traffic, n, method)?;
    Ok(traffic.lambda * (1.0 - p))
}
