//! Linear server power model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-server power draw. `idle_watts` and `busy_watts` are direct draws at
/// the server; `pue` scales them to facility power and is applied exactly once,
/// by the accessors below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyProfile {
    pub idle_watts: f64,
    pub busy_watts: f64,
    pub pue: f64,
    /// Mean CPU utilization of a server while it runs a job.
    pub busy_utilization: f64,
}

impl Default for EnergyProfile {
    /// 35-55 W direct draw per core at a PUE of 1.7 (about 59 and 94 W at the
    /// facility), with jobs keeping the CPU 70% busy.
    fn default() -> Self {
        EnergyProfile {
            idle_watts: 34.7,
            busy_watts: 55.3,
            pue: 1.7,
            busy_utilization: 0.7,
        }
    }
}

impl EnergyProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.idle_watts.is_finite() && self.idle_watts > 0.0) {
            return Err(Error::config("energy.idle_watts", "must be positive"));
        }
        if !(self.busy_watts.is_finite() && self.busy_watts >= self.idle_watts) {
            return Err(Error::config("energy.busy_watts", "must be at least idle_watts"));
        }
        if !(self.pue.is_finite() && self.pue >= 1.0) {
            return Err(Error::config("energy.pue", "must be at least 1"));
        }
        if !(self.busy_utilization > 0.0 && self.busy_utilization <= 1.0) {
            return Err(Error::config("energy.busy_utilization", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Facility power of an idle running server (`e1`).
    pub fn idle_draw(&self) -> f64 {
        self.idle_watts * self.pue
    }

    /// Facility power of a busy server (`e2`).
    pub fn busy_draw(&self) -> f64 {
        self.busy_watts * self.pue
    }

    /// Facility power of a server running a job at `busy_utilization`,
    /// read off the linear idle-to-peak line.
    pub fn loaded_draw(&self) -> f64 {
        self.idle_draw() + self.busy_utilization * (self.busy_draw() - self.idle_draw())
    }

    /// Energy in watt-hours consumed running a job of `hours` at `loaded_draw`.
    pub fn energy_per_job_wh(&self, hours: f64) -> f64 {
        self.loaded_draw() * hours
    }
}

/// Expected number of busy servers, `ceil(T / mu)`.
pub fn busy_servers(throughput: f64, mean_service: f64) -> u64 {
    let m = throughput * mean_service;
    if m <= 0.0 {
        0
    } else {
        m.ceil() as u64
    }
}

/// Average power `n e1 + m (e2 - e1)` in watts for `n` running servers of
/// which `busy` (possibly fractional) are serving jobs.
pub fn average_power(n: u64, busy: f64, profile: &EnergyProfile) -> Result<f64> {
    if !(busy >= 0.0 && busy <= n as f64) {
        return Err(Error::domain(format!(
            "busy servers ({busy}) must lie in [0, {n}]"
        )));
    }
    let e1 = profile.idle_draw();
    let e2 = profile.busy_draw();
    Ok(n as f64 * e1 + busy * (e2 - e1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(e1: f64, e2: f64) -> EnergyProfile {
        EnergyProfile {
            idle_watts: e1,
            busy_watts: e2,
            pue: 1.0,
            busy_utilization: 0.7,
        }
    }

    #[test]
    fn busy_server_count_rounds_up() {
        assert_eq!(busy_servers(8.0, 0.5), 4);
        assert_eq!(busy_servers(0.0, 3.0), 0);
        assert_eq!(busy_servers(8.1, 0.5), 5);
    }

    #[test]
    fn power_examples() {
        let p = flat(59.0, 94.0);
        assert_eq!(average_power(10, 4.0, &p).unwrap(), 730.0);
        assert_eq!(average_power(0, 0.0, &p).unwrap(), 0.0);
        assert!((average_power(100_000, 100_000.0, &p).unwrap() - 9.4e6).abs() < 1e-6);
        assert!(average_power(3, 4.0, &p).is_err());
    }

    #[test]
    fn default_profile_reproduces_facility_draws() {
        let p = EnergyProfile::default();
        p.validate().unwrap();
        assert!((p.idle_draw() - 59.0).abs() < 0.05);
        assert!((p.busy_draw() - 94.0).abs() < 0.05);
    }

    #[test]
    fn fifty_minute_job_energy() {
        // A 70%-loaded server over a 50-minute job uses about 69.58 Wh.
        let wh = EnergyProfile::default().energy_per_job_wh(50.0 / 60.0);
        assert!((wh - 69.58).abs() / 69.58 < 0.01, "{wh}");
    }

    #[test]
    fn validation() {
        let mut p = EnergyProfile::default();
        p.pue = 0.9;
        assert!(p.validate().is_err());
        let mut p = EnergyProfile::default();
        p.busy_watts = 10.0;
        assert!(p.validate().is_err());
    }
}
