//! Asymptotic peakedness of a renewal arrival stream offered to an
//! infinite-server system, used to correct Erlang-B for non-Poisson traffic.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::quadrature::GaussLegendre;
use super::TrafficEstimate;
use crate::error::{Error, Result};

/// Nodes per panel of the Gauss-Legendre rule used for `eta`.
pub const ETA_QUADRATURE_ORDER: usize = 64;

/// Standard deviations past the mean at which the survival function is cut off.
pub const ETA_TAIL_SIGMAS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakednessState {
    pub z: f64,
    pub eta: f64,
}

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(ETA_QUADRATURE_ORDER))
}

/// `eta = mu * integral_0^inf [1 - G(t)]^2 dt` with `G` the normal CDF of mean
/// `1/mu` and variance `cs2 / mu^2`.
///
/// In units of the mean service time the integral no longer depends on `mu`,
/// so this is a function of `cs2` alone. Exponential service (`cs2 = 1`) is
/// the closed form `1/2`; deterministic service (`cs2 = 0`) gives `1`.
pub fn eta(cs2: f64) -> Result<f64> {
    if !cs2.is_finite() || cs2 < 0.0 {
        return Err(Error::domain(format!(
            "service SCV must be finite and non-negative, got {cs2}"
        )));
    }
    if cs2 == 1.0 {
        return Ok(0.5);
    }
    if cs2 == 0.0 {
        return Ok(1.0);
    }
    Ok(eta_normal_quadrature(cs2).clamp(f64::MIN_POSITIVE, 1.0))
}

/// Raw quadrature value of the normal-surrogate `eta` integral, before clamping.
pub fn eta_normal_quadrature(cs2: f64) -> f64 {
    let sd = cs2.sqrt();
    let survival = |s: f64| {
        let tail = 0.5 * erfc((s - 1.0) / (sd * std::f64::consts::SQRT_2));
        tail * tail
    };
    // Panels split at the mean so the rule never straddles the steepest
    // part of the survival curve when `sd` is small.
    let lo = (1.0 - ETA_TAIL_SIGMAS * sd).max(0.0);
    let hi = 1.0 + ETA_TAIL_SIGMAS * sd;
    let gl = rule();
    let mut total = 0.0;
    if lo > 0.0 {
        total += gl.integrate(0.0, lo, survival);
    }
    total += gl.integrate(lo, 1.0, survival);
    total += gl.integrate(1.0, hi, survival);
    total
}

/// Peakedness `z = 1 + (ca2 - 1) eta` of the traffic described by `traffic`.
pub fn peakedness(traffic: &TrafficEstimate) -> Result<PeakednessState> {
    let eta = eta(traffic.cs2)?;
    let z = if traffic.ca2 == 1.0 {
        1.0
    } else {
        1.0 + (traffic.ca2 - 1.0) * eta
    };
    Ok(PeakednessState { z, eta })
}

/// Rescales a previous peakedness when a new `eta` estimate arrives:
/// `z' = 1 + (z - 1) eta_new / eta_prev`.
pub fn peakedness_update(z_prev: f64, eta_prev: f64, eta_new: f64) -> Result<f64> {
    if eta_prev == 0.0 || !eta_prev.is_finite() {
        return Err(Error::domain(format!(
            "previous eta must be non-zero and finite, got {eta_prev}"
        )));
    }
    Ok(1.0 + (z_prev - 1.0) * eta_new / eta_prev)
}
