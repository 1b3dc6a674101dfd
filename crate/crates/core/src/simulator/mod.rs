//! Event-driven simulation of a loss system whose server count is
//! reconfigured at every observation-window boundary.
//!
//! Events at equal timestamps are ordered completions, then the window
//! boundary, then arrivals.

mod stats;

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policies::{DecisionContext, Policy, RevenueModel};
use crate::workload::{WorkloadGenerator, WorkloadSpec};

pub use stats::{t_interval_95, ConfidenceInterval, Moments, WindowStats};

/// Length of the blocks whose mean revenues feed the confidence interval.
pub const REVENUE_BLOCK_HOURS: f64 = 24.0;

/// What happens to servers that are still running a job when a
/// reconfiguration asks for fewer servers than are busy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleDown {
    /// The meter treats the excess servers as off at once; their jobs still
    /// finish and are paid for.
    #[default]
    Idealized,
    /// Excess busy servers keep drawing busy power until their job
    /// completes, then power off.
    CompletionHonoring,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub capacity: u64,
    pub window_hours: f64,
    pub duration_hours: f64,
    pub model: RevenueModel,
    #[serde(default)]
    pub scale_down: ScaleDown,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_hours > 0.0 && self.window_hours.is_finite()) {
            return Err(Error::config("farm.window_hours", "must be positive"));
        }
        if !(self.duration_hours > 0.0 && self.duration_hours.is_finite()) {
            return Err(Error::config("farm.duration_hours", "must be positive"));
        }
        let windows = self.duration_hours / self.window_hours;
        if (windows - windows.round()).abs() > 1e-9 {
            return Err(Error::config(
                "farm.duration_hours",
                "must be a whole number of windows",
            ));
        }
        self.model.energy.validate()?;
        self.model.tariff.validate()
    }

    pub fn windows(&self) -> usize {
        (self.duration_hours / self.window_hours).round() as usize
    }
}

/// Server bookkeeping. `running` is the admission capacity set by the last
/// reconfiguration; `pending_shutdown` counts busy servers beyond it that
/// power off when their job completes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FarmState {
    pub running: u64,
    pub busy: u64,
    pub pending_shutdown: u64,
}

impl FarmState {
    pub fn can_admit(&self) -> bool {
        self.busy < self.running
    }

    pub fn admit(&mut self) {
        debug_assert!(self.can_admit());
        self.busy += 1;
    }

    pub fn complete(&mut self) {
        debug_assert!(self.busy > 0);
        self.busy -= 1;
        self.pending_shutdown = self.busy.saturating_sub(self.running);
    }

    /// Powered-on servers.
    pub fn powered(&self, mode: ScaleDown) -> u64 {
        match mode {
            ScaleDown::Idealized => self.running,
            ScaleDown::CompletionHonoring => self.running + self.pending_shutdown,
        }
    }

    /// Busy servers that the power meter sees.
    pub fn metered_busy(&self, mode: ScaleDown) -> u64 {
        match mode {
            ScaleDown::Idealized => self.busy.min(self.running),
            ScaleDown::CompletionHonoring => self.busy,
        }
    }
}

/// Sets the admission capacity to `n_new`. Scale-up is immediate; idle
/// servers power off immediately; busy servers beyond `n_new` become
/// pending-shutdown and admit nothing further.
pub fn apply_reconfiguration(state: FarmState, n_new: u64) -> FarmState {
    FarmState {
        running: n_new,
        busy: state.busy,
        pending_shutdown: state.busy.saturating_sub(n_new),
    }
}

/// Realized metrics of one observation window. Field order is the CSV
/// column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub window_index: usize,
    pub start_hour: f64,
    pub n_used: u64,
    pub arrivals: u64,
    pub admitted: u64,
    pub blocked: u64,
    pub completions: u64,
    pub lambda_hat: f64,
    pub mean_service_hat: f64,
    pub ca2_hat: f64,
    pub cs2_hat: f64,
    pub mean_busy: f64,
    pub mean_powered: f64,
    pub busy_running_ratio: f64,
    pub energy_kwh: f64,
    pub charges: f64,
    pub energy_cost: f64,
    pub revenue_dollars: f64,
    pub predicted_blocking: f64,
    pub predicted_revenue: f64,
    pub cumulative_energy_kwh: f64,
    pub cumulative_revenue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub policy: String,
    pub capacity: u64,
    pub window_hours: f64,
    pub duration_hours: f64,
    pub records: Vec<WindowRecord>,
    pub in_service_at_end: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub policy: String,
    pub capacity: u64,
    pub duration_hours: f64,
    pub windows: usize,
    pub arrivals: u64,
    pub admitted: u64,
    pub blocked: u64,
    pub completions: u64,
    pub in_service_at_end: u64,
    pub loss_fraction: f64,
    pub total_energy_kwh: f64,
    pub mean_power_watts: f64,
    pub total_revenue: f64,
    pub mean_revenue_per_hour: f64,
    /// Mean revenue per hour of each complete 24 h block.
    pub block_revenue_per_hour: Vec<f64>,
    /// `None` when fewer than two blocks completed.
    pub revenue_ci95: Option<ConfidenceInterval>,
    /// Busy server-hours over powered server-hours.
    pub busy_running_ratio: f64,
    /// Mean busy servers over capacity.
    pub mean_utilization: f64,
    pub mean_powered: f64,
    pub cumulative_revenue: Vec<f64>,
    pub cumulative_energy_kwh: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Completion {
    at: f64,
    service: f64,
}

impl Eq for Completion {}

impl PartialOrd for Completion {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Completion {
    fn cmp(&self, other: &Self) -> Ordering {
        self.at
            .total_cmp(&other.at)
            .then(self.service.total_cmp(&other.service))
    }
}

#[derive(Debug, Default)]
struct WindowAccumulator {
    stats: WindowStats,
    admitted: u64,
    blocked: u64,
    completions: u64,
    busy_hours: f64,
    metered_busy_hours: f64,
    powered_hours: f64,
    energy_kwh: f64,
    energy_cost: f64,
    charges: f64,
}

/// Runs `policy` against `workload` for `config.duration_hours`.
pub fn run(policy: &mut Policy, workload: WorkloadSpec, config: &SimConfig) -> Result<RunResult> {
    config.validate()?;
    let mut gen = WorkloadGenerator::new(workload)?;
    let spec = gen.spec().clone();
    let mode = config.scale_down;
    let energy = config.model.energy;
    let tariff = &config.model.tariff;
    let w = config.window_hours;
    let windows = config.windows();
    let e1 = energy.idle_draw();
    let e2 = energy.busy_draw();

    let mut state = FarmState::default();
    let mut clock = 0.0_f64;
    let mut completions: BinaryHeap<Reverse<Completion>> = BinaryHeap::new();
    let mut next_arrival = gen.next_interarrival(0.0);
    let mut fallback = spec.nominal_estimate(0.0);

    let first = policy.decide(&DecisionContext {
        window: 0,
        time: 0.0,
        estimate: fallback,
        measured: false,
        next_lambda: spec.rate.mean_over(0.0, w),
        capacity: config.capacity,
    })?;
    clamp_decision(first.n, config.capacity)?;
    state = apply_reconfiguration(state, first.n);
    let mut decision = first;

    let mut acc = WindowAccumulator::default();
    let mut records = Vec::with_capacity(windows);
    let mut cum_energy = 0.0;
    let mut cum_revenue = 0.0;
    let mut window = 0usize;

    loop {
        let boundary = (window + 1) as f64 * w;
        let t_completion = completions.peek().map(|c| c.0.at);
        let t_arrival = next_arrival;

        // Completions win ties with the boundary, which wins ties with arrivals.
        let (t, kind) = match (t_completion, t_arrival) {
            (Some(tc), _) if tc <= boundary && t_arrival.is_none_or(|ta| tc <= ta) => (tc, Event::Completion),
            (_, Some(ta)) if ta < boundary => (ta, Event::Arrival),
            _ => (boundary, Event::Boundary),
        };

        let dt = t - clock;
        if dt > 0.0 {
            let powered = state.powered(mode) as f64;
            let metered = state.metered_busy(mode) as f64;
            let watts = powered * e1 + metered * (e2 - e1);
            acc.busy_hours += state.busy as f64 * dt;
            acc.metered_busy_hours += metered * dt;
            acc.powered_hours += powered * dt;
            acc.energy_kwh += watts * dt / 1000.0;
            acc.energy_cost += tariff.energy_cost(watts, clock, t);
        }
        clock = t;

        match kind {
            Event::Completion => {
                let Reverse(c) = completions.pop().expect("peeked completion");
                state.complete();
                acc.completions += 1;
                acc.charges += tariff.charge_rate * c.service;
                acc.stats.record_completion(c.service);
            }
            Event::Arrival => {
                acc.stats.record_arrival(t);
                let service = gen.next_service_time();
                if state.can_admit() {
                    state.admit();
                    acc.admitted += 1;
                    completions.push(Reverse(Completion { at: t + service, service }));
                } else {
                    acc.blocked += 1;
                }
                next_arrival = gen.next_interarrival(t).map(|d| t + d);
            }
            Event::Boundary => {
                let estimate = acc.stats.estimate(w, &fallback);
                let revenue = acc.charges - acc.energy_cost;
                cum_energy += acc.energy_kwh;
                cum_revenue += revenue;
                records.push(WindowRecord {
                    window_index: window,
                    start_hour: window as f64 * w,
                    n_used: decision.n,
                    arrivals: acc.stats.arrivals,
                    admitted: acc.admitted,
                    blocked: acc.blocked,
                    completions: acc.completions,
                    lambda_hat: estimate.lambda,
                    mean_service_hat: estimate.mean_service,
                    ca2_hat: estimate.ca2,
                    cs2_hat: estimate.cs2,
                    mean_busy: acc.busy_hours / w,
                    mean_powered: acc.powered_hours / w,
                    busy_running_ratio: if acc.powered_hours > 0.0 {
                        acc.metered_busy_hours / acc.powered_hours
                    } else {
                        0.0
                    },
                    energy_kwh: acc.energy_kwh,
                    charges: acc.charges,
                    energy_cost: acc.energy_cost,
                    revenue_dollars: revenue,
                    predicted_blocking: decision.predicted_blocking,
                    predicted_revenue: decision.predicted_revenue,
                    cumulative_energy_kwh: cum_energy,
                    cumulative_revenue: cum_revenue,
                });
                fallback = estimate;
                window += 1;
                if window >= windows {
                    break;
                }
                let next = policy.decide(&DecisionContext {
                    window,
                    time: boundary,
                    estimate,
                    measured: true,
                    next_lambda: spec.rate.mean_over(boundary, boundary + w),
                    capacity: config.capacity,
                })?;
                clamp_decision(next.n, config.capacity)?;
                state = apply_reconfiguration(state, next.n);
                decision = next;
                acc = WindowAccumulator {
                    stats: WindowStats::carry_over(&acc.stats),
                    ..WindowAccumulator::default()
                };
            }
        }
    }

    Ok(RunResult {
        policy: policy.name(),
        capacity: config.capacity,
        window_hours: w,
        duration_hours: config.duration_hours,
        records,
        in_service_at_end: state.busy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    Completion,
    Boundary,
    Arrival,
}

fn clamp_decision(n: u64, capacity: u64) -> Result<()> {
    if n > capacity {
        return Err(Error::domain(format!(
            "policy chose {n} servers but the farm has {capacity}"
        )));
    }
    Ok(())
}

/// Aggregates a run into totals, 24 h block means and a Student-t interval.
pub fn summarize(result: &RunResult) -> Summary {
    let r = &result.records;
    let sum_u = |f: fn(&WindowRecord) -> u64| r.iter().map(f).sum::<u64>();
    let sum_f = |f: fn(&WindowRecord) -> f64| r.iter().map(f).sum::<f64>();
    let arrivals = sum_u(|x| x.arrivals);
    let blocked = sum_u(|x| x.blocked);
    let total_energy = sum_f(|x| x.energy_kwh);
    let total_revenue = sum_f(|x| x.revenue_dollars);
    let duration = result.duration_hours;
    let w = result.window_hours;

    let full_blocks = (duration / REVENUE_BLOCK_HOURS + 1e-9).floor() as usize;
    let mut block_revenue = vec![0.0; full_blocks];
    for rec in r {
        let b = ((rec.start_hour + 0.5 * w) / REVENUE_BLOCK_HOURS).floor() as usize;
        if b < full_blocks {
            block_revenue[b] += rec.revenue_dollars;
        }
    }
    let block_revenue_per_hour: Vec<f64> = block_revenue
        .iter()
        .map(|v| v / REVENUE_BLOCK_HOURS)
        .collect();

    let powered_hours: f64 = r.iter().map(|x| x.mean_powered * w).sum();
    let metered_busy_hours: f64 = r
        .iter()
        .map(|x| x.busy_running_ratio * x.mean_powered * w)
        .sum();
    let busy_hours: f64 = r.iter().map(|x| x.mean_busy * w).sum();

    Summary {
        policy: result.policy.clone(),
        capacity: result.capacity,
        duration_hours: duration,
        windows: r.len(),
        arrivals,
        admitted: sum_u(|x| x.admitted),
        blocked,
        completions: sum_u(|x| x.completions),
        in_service_at_end: result.in_service_at_end,
        loss_fraction: if arrivals > 0 { blocked as f64 / arrivals as f64 } else { 0.0 },
        total_energy_kwh: total_energy,
        mean_power_watts: total_energy * 1000.0 / duration,
        total_revenue,
        mean_revenue_per_hour: total_revenue / duration,
        revenue_ci95: t_interval_95(&block_revenue_per_hour),
        block_revenue_per_hour,
        busy_running_ratio: if powered_hours > 0.0 { metered_busy_hours / powered_hours } else { 0.0 },
        mean_utilization: if result.capacity > 0 {
            busy_hours / duration / result.capacity as f64
        } else {
            0.0
        },
        mean_powered: powered_hours / duration,
        cumulative_revenue: r.iter().map(|x| x.cumulative_revenue).collect(),
        cumulative_energy_kwh: r.iter().map(|x| x.cumulative_energy_kwh).collect(),
    }
}

/// Writes one CSV row per window.
pub fn write_records_csv<W: std::io::Write>(records: &[WindowRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for rec in records {
        w.serialize(rec)?;
    }
    w.flush()?;
    Ok(())
}
