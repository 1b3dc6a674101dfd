//! Arrival and service processes driving the simulator.
//!
//! Each generator owns two independent random streams, one for arrivals and
//! one for service times, both derived from the workload seed. Service times
//! are drawn for every arrival, admitted or not, so two runs with the same
//! seed see the same customers regardless of the policy being evaluated.

mod trace;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::queueing::TrafficEstimate;

pub use trace::{
    load_trace, parse_trace, scale_for_load, synthetic_trace, RateTrace, SyntheticTraceSpec,
    LAST_SEGMENT_HOURS,
};

const ARRIVAL_STREAM: u64 = 1;
const SERVICE_STREAM: u64 = 2;

/// Location/scale of a log-normal with a given mean and squared coefficient
/// of variation: `sigma^2 = ln(1 + scv)`, `mu = ln(mean) - sigma^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalParams {
    pub mu_ln: f64,
    pub sigma_ln: f64,
}

impl LogNormalParams {
    pub fn from_mean_scv(mean: f64, scv: f64) -> Result<Self> {
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::domain(format!("log-normal mean {mean} must be positive")));
        }
        if !(scv > 0.0 && scv.is_finite()) {
            return Err(Error::domain(format!("log-normal SCV {scv} must be positive")));
        }
        let var_ln = scv.ln_1p();
        Ok(LogNormalParams {
            mu_ln: mean.ln() - 0.5 * var_ln,
            sigma_ln: var_ln.sqrt(),
        })
    }

    pub fn mean(&self) -> f64 {
        (self.mu_ln + 0.5 * self.sigma_ln * self.sigma_ln).exp()
    }

    pub fn scv(&self) -> f64 {
        (self.sigma_ln * self.sigma_ln).exp_m1()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        (self.mu_ln + self.sigma_ln * z).exp()
    }
}

/// Shape of an interarrival or service-time distribution; the mean comes
/// from the rate or the mean service time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Exponential,
    LogNormal { scv: f64 },
}

impl Shape {
    pub fn scv(&self) -> f64 {
        match *self {
            Shape::Exponential => 1.0,
            Shape::LogNormal { scv } => scv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ArrivalRate {
    Constant(f64),
    Trace(RateTrace),
}

impl ArrivalRate {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            ArrivalRate::Constant(r) => *r,
            ArrivalRate::Trace(tr) => tr.rate(t),
        }
    }

    pub fn mean_over(&self, t0: f64, t1: f64) -> f64 {
        match self {
            ArrivalRate::Constant(r) => *r,
            ArrivalRate::Trace(tr) => tr.mean_rate(t0, t1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub arrival_shape: Shape,
    pub rate: ArrivalRate,
    pub service_shape: Shape,
    /// Mean job length in hours.
    pub mean_service: f64,
    pub seed: u64,
}

impl WorkloadSpec {
    pub fn markovian(lambda: f64, mean_service: f64, seed: u64) -> Self {
        WorkloadSpec {
            arrival_shape: Shape::Exponential,
            rate: ArrivalRate::Constant(lambda),
            service_shape: Shape::Exponential,
            mean_service,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_service > 0.0 && self.mean_service.is_finite()) {
            return Err(Error::config("workload.mean_service_minutes", "must be positive"));
        }
        for (key, shape) in [("workload.arrival", self.arrival_shape), ("workload.service", self.service_shape)] {
            if let Shape::LogNormal { scv } = shape {
                if !(scv > 0.0 && scv.is_finite()) {
                    return Err(Error::config(format!("{key}.scv"), "must be positive"));
                }
            }
        }
        match &self.rate {
            ArrivalRate::Constant(r) if !(r.is_finite() && *r >= 0.0) => {
                Err(Error::config("workload.rate", "must be non-negative"))
            }
            ArrivalRate::Trace(_) if self.arrival_shape != Shape::Exponential => Err(Error::config(
                "workload.arrival",
                "trace-driven arrivals must be Poisson (exponential)",
            )),
            _ => Ok(()),
        }
    }

    /// What a perfectly informed observer would estimate at time `t`.
    pub fn nominal_estimate(&self, t: f64) -> TrafficEstimate {
        TrafficEstimate {
            lambda: self.rate.at(t),
            mean_service: self.mean_service,
            ca2: self.arrival_shape.scv(),
            cs2: self.service_shape.scv(),
        }
    }
}

/// Source of interarrival and service times for one simulation run.
#[derive(Debug, Clone)]
pub struct WorkloadGenerator {
    spec: WorkloadSpec,
    arrivals: ChaCha8Rng,
    services: ChaCha8Rng,
    interarrival_ln: Option<LogNormalParams>,
    service_ln: Option<LogNormalParams>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl WorkloadGenerator {
    pub fn new(spec: WorkloadSpec) -> Result<Self> {
        spec.validate()?;
        let interarrival_ln = match (spec.arrival_shape, &spec.rate) {
            (Shape::LogNormal { scv }, ArrivalRate::Constant(r)) if *r > 0.0 => {
                Some(LogNormalParams::from_mean_scv(1.0 / r, scv)?)
            }
            _ => None,
        };
        let service_ln = match spec.service_shape {
            Shape::LogNormal { scv } => Some(LogNormalParams::from_mean_scv(spec.mean_service, scv)?),
            Shape::Exponential => None,
        };
        Ok(WorkloadGenerator {
            arrivals: stream(spec.seed, ARRIVAL_STREAM),
            services: stream(spec.seed, SERVICE_STREAM),
            spec,
            interarrival_ln,
            service_ln,
        })
    }

    pub fn spec(&self) -> &WorkloadSpec {
        &self.spec
    }

    /// Time from `now` to the next arrival, or `None` when no further
    /// arrivals will ever occur.
    pub fn next_interarrival(&mut self, now: f64) -> Option<f64> {
        match &self.spec.rate {
            ArrivalRate::Constant(r) => {
                if *r <= 0.0 {
                    return None;
                }
                Some(match &self.interarrival_ln {
                    Some(ln) => ln.sample(&mut self.arrivals),
                    None => {
                        let e: f64 = self.arrivals.sample(Exp1);
                        e / r
                    }
                })
            }
            ArrivalRate::Trace(trace) => {
                // Thinning against the peak rate; zero-rate stretches are
                // skipped outright since the process is memoryless.
                let peak = trace.peak_rate();
                if peak <= 0.0 {
                    return None;
                }
                let mut t = now;
                loop {
                    if trace.rate(t) <= 0.0 {
                        t = trace.next_positive_after(t)?;
                    }
                    let e: f64 = self.arrivals.sample(Exp1);
                    t += e / peak;
                    let u: f64 = self.arrivals.random();
                    if u * peak < trace.rate(t) {
                        return Some(t - now);
                    }
                }
            }
        }
    }

    /// Length of the next job in hours.
    pub fn next_service_time(&mut self) -> f64 {
        match &self.service_ln {
            Some(ln) => ln.sample(&mut self.services),
            None => {
                let e: f64 = self.services.sample(Exp1);
                e * self.spec.mean_service
            }
        }
    }
}
