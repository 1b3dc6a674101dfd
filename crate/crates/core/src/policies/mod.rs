//! Per-window allocation policies: how many servers to keep powered on.

mod forecast;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::economics::{revenue_rate_at_price, Tariff};
use crate::energy::{average_power, busy_servers, EnergyProfile};
use crate::error::{Error, Result};
use crate::queueing::{erlang_b_table, peakedness, FractionalMethod, TrafficEstimate};

pub use forecast::{one_step_sse, refit_smoothing, weight_grid, ForecastState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyDecision {
    pub n: u64,
    pub predicted_rho: f64,
    pub predicted_blocking: f64,
    /// $/hour expected at `n` servers.
    pub predicted_revenue: f64,
}

/// How the busy-server count entering the power model is formed from the
/// carried load `T / mu`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BusyCount {
    /// The carried load itself (the time-average number of busy servers).
    #[default]
    Expected,
    /// `ceil(T / mu)`.
    Ceiling,
}

/// Everything needed to turn a traffic estimate and a server count into a
/// predicted revenue rate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RevenueModel {
    pub energy: EnergyProfile,
    pub tariff: Tariff,
    #[serde(default)]
    pub busy_count: BusyCount,
    #[serde(default)]
    pub fractional: FractionalMethod,
}

/// Predicted operating point of the farm at one server count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub n: u64,
    pub blocking: f64,
    pub throughput: f64,
    pub busy: f64,
    pub power_watts: f64,
    pub revenue: f64,
}

impl RevenueModel {
    /// Evaluates `R(n)` at electricity price `price`.
    pub fn evaluate(&self, traffic: &TrafficEstimate, n: u64, price: f64) -> Result<OperatingPoint> {
        let curve = RevenueCurve::new(self, traffic, price)?;
        curve.point(n)
    }

    /// Predicted revenue for every `n` in `0..=capacity`.
    pub fn revenue_curve(
        &self,
        traffic: &TrafficEstimate,
        capacity: u64,
        price: f64,
    ) -> Result<Vec<OperatingPoint>> {
        let curve = RevenueCurve::new(self, traffic, price)?;
        (0..=capacity).map(|n| curve.point(n)).collect()
    }
}

// Caches what does not depend on `n` across a scan of server counts.
struct RevenueCurve<'a> {
    model: &'a RevenueModel,
    traffic: TrafficEstimate,
    price: f64,
    z: f64,
    // Exact Erlang-B values for Poisson traffic, grown on demand.
    table: std::cell::RefCell<Vec<f64>>,
}

impl<'a> RevenueCurve<'a> {
    fn new(model: &'a RevenueModel, traffic: &TrafficEstimate, price: f64) -> Result<Self> {
        traffic.validate()?;
        let z = if traffic.rho() == 0.0 {
            1.0
        } else {
            peakedness(traffic)?.z
        };
        Ok(RevenueCurve {
            model,
            traffic: *traffic,
            price,
            z,
            table: std::cell::RefCell::new(Vec::new()),
        })
    }

    fn blocking(&self, n: u64) -> Result<f64> {
        let rho = self.traffic.rho();
        if rho == 0.0 {
            return Ok(if n == 0 { 1.0 } else { 0.0 });
        }
        if self.z == 1.0 {
            let mut table = self.table.borrow_mut();
            if table.len() <= n as usize {
                let want = (n as usize + 1).max(2 * table.len());
                *table = erlang_b_table(want as u64 - 1, rho)?;
            }
            return Ok(table[n as usize]);
        }
        self.model.fractional.evaluate(n as f64 / self.z, rho / self.z)
    }

    fn point(&self, n: u64) -> Result<OperatingPoint> {
        let blocking = self.blocking(n)?;
        let throughput = self.traffic.lambda * (1.0 - blocking);
        let carried = throughput * self.traffic.mean_service;
        let busy = match self.model.busy_count {
            BusyCount::Expected => carried.min(n as f64),
            BusyCount::Ceiling => (busy_servers(throughput, self.traffic.mean_service) as f64).min(n as f64),
        };
        let power_watts = average_power(n, busy, &self.model.energy)?;
        let revenue = revenue_rate_at_price(
            throughput,
            self.traffic.mean_service,
            power_watts,
            &self.model.tariff,
            self.price,
        );
        Ok(OperatingPoint {
            n,
            blocking,
            throughput,
            busy,
            power_watts,
            revenue,
        })
    }
}

impl OperatingPoint {
    fn decision(&self, rho: f64) -> PolicyDecision {
        PolicyDecision {
            n: self.n,
            predicted_rho: rho,
            predicted_blocking: self.blocking,
            predicted_revenue: self.revenue,
        }
    }
}

/// Always runs `n_fixed` servers.
pub fn static_policy(n_fixed: u64, capacity: u64) -> Result<PolicyDecision> {
    if n_fixed > capacity {
        return Err(Error::config(
            "policy.static",
            format!("{n_fixed} servers exceeds the farm capacity of {capacity}"),
        ));
    }
    Ok(PolicyDecision {
        n: n_fixed,
        predicted_rho: f64::NAN,
        predicted_blocking: f64::NAN,
        predicted_revenue: f64::NAN,
    })
}

/// Revenue-maximizing server count by forward scan.
///
/// The scan starts at `max(0, ceil(rho - sqrt(rho)))` and walks upward,
/// stopping at the first `n` where revenue does not increase, where the
/// increase falls below `epsilon`, or at `capacity`. If revenue is already
/// falling at the starting point the scan restarts from zero. Equal revenues
/// resolve to the smaller `n`.
pub fn optimal_policy(
    traffic: &TrafficEstimate,
    capacity: u64,
    epsilon: f64,
    model: &RevenueModel,
    price: f64,
) -> Result<PolicyDecision> {
    if !(epsilon > 0.0) {
        return Err(Error::config("policy.epsilon", "must be positive"));
    }
    let curve = RevenueCurve::new(model, traffic, price)?;
    let rho = traffic.rho();
    if rho == 0.0 {
        return Ok(curve.point(0)?.decision(rho));
    }
    let start = ((rho - rho.sqrt()).ceil().max(0.0) as u64).min(capacity);
    let first = curve.point(start)?;
    let from = if start > 0 && start < capacity && curve.point(start + 1)?.revenue <= first.revenue {
        curve.point(0)?
    } else {
        first
    };
    let mut best = from;
    for n in from.n + 1..=capacity {
        let p = curve.point(n)?;
        let gain = p.revenue - best.revenue;
        if gain <= 0.0 {
            break;
        }
        best = p;
        if gain < epsilon {
            break;
        }
    }
    Ok(best.decision(rho))
}

/// Argmax of predicted revenue over every `n` in `0..=capacity`, smallest `n`
/// on ties. Used to audit the early-stopped search.
pub fn exhaustive_optimum(
    traffic: &TrafficEstimate,
    capacity: u64,
    model: &RevenueModel,
    price: f64,
) -> Result<PolicyDecision> {
    let rho = traffic.rho();
    let points = model.revenue_curve(traffic, capacity, price)?;
    let best = points
        .iter()
        .fold(points[0], |best, p| if p.revenue > best.revenue { *p } else { best });
    Ok(best.decision(rho))
}

/// True when `values` rises (weakly) to a single peak and then falls (weakly).
pub fn is_unimodal(values: &[f64]) -> bool {
    let mut falling = false;
    for w in values.windows(2) {
        if w[1] < w[0] {
            falling = true;
        } else if w[1] > w[0] && falling {
            return false;
        }
    }
    true
}

fn check_beta(beta: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&beta) {
        return Err(Error::config("policy.beta", format!("{beta} must lie in [-1, 1]")));
    }
    Ok(())
}

/// Square-root staffing `min(S, ceil(rho + beta sqrt(rho)))`, floored at zero.
pub fn qed_staffing(rho: f64, beta: f64, capacity: u64) -> Result<u64> {
    check_beta(beta)?;
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::domain(format!("offered load {rho} is invalid")));
    }
    let n = (rho + beta * rho.sqrt()).ceil().max(0.0);
    Ok((n as u64).min(capacity))
}

/// Square-root staffing on the observed load, with diagnostics from `model`.
pub fn adaptive_policy(
    traffic: &TrafficEstimate,
    beta: f64,
    capacity: u64,
    model: &RevenueModel,
    price: f64,
) -> Result<PolicyDecision> {
    let n = qed_staffing(traffic.rho(), beta, capacity)?;
    Ok(model.evaluate(traffic, n, price)?.decision(traffic.rho()))
}

/// Square-root staffing on the Holt forecast of the next window's arrival
/// rate. Falls back to the observed rate before the smoother has data.
pub fn predictive_policy(
    state: &ForecastState,
    traffic: &TrafficEstimate,
    beta: f64,
    capacity: u64,
    model: &RevenueModel,
    price: f64,
) -> Result<PolicyDecision> {
    let lambda = state.forecast_next().unwrap_or(traffic.lambda);
    adaptive_policy(&traffic.with_lambda(lambda), beta, capacity, model, price)
}

/// How the oracle turns the known next-window rate into a server count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    /// Revenue-maximizing search.
    Optimal,
    /// Square-root staffing with the given slack.
    Qed { beta: f64 },
}

/// `optimal_policy` (or square-root staffing) evaluated on the true arrival
/// rate of the coming window.
pub fn oracle_policy(
    true_next_lambda: f64,
    traffic_shape: &TrafficEstimate,
    capacity: u64,
    epsilon: f64,
    mode: OracleMode,
    model: &RevenueModel,
    price: f64,
) -> Result<PolicyDecision> {
    let traffic = traffic_shape.with_lambda(true_next_lambda);
    match mode {
        OracleMode::Optimal => optimal_policy(&traffic, capacity, epsilon, model, price),
        OracleMode::Qed { beta } => adaptive_policy(&traffic, beta, capacity, model, price),
    }
}

/// Named policy with its parameters, as selected on the command line or in
/// the config file (`static:all`, `static:half`, `static:<n>`,
/// `adaptive[:beta]`, `predictive[:beta]`, `optimal[:epsilon]`,
/// `oracle[:epsilon]`, `oracle-qed[:beta]`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    Static { servers: StaticLevel },
    Adaptive { beta: f64 },
    Predictive { beta: f64 },
    Optimal { epsilon: f64 },
    Oracle { mode: OracleMode, epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StaticLevel {
    All,
    Half,
    Count(u64),
}

impl StaticLevel {
    pub fn resolve(self, capacity: u64) -> u64 {
        match self {
            StaticLevel::All => capacity,
            StaticLevel::Half => capacity / 2,
            StaticLevel::Count(n) => n,
        }
    }
}

pub const DEFAULT_BETA: f64 = 0.2;
pub const DEFAULT_EPSILON: f64 = 0.01;

impl FromStr for PolicySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::config("policy", msg);
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let real = |default: f64| -> Result<f64> {
            arg.map_or(Ok(default), |a| a.parse::<f64>().map_err(|_| bad("expected a number")))
        };
        let spec = match kind {
            "static" => {
                let level = match arg {
                    Some("all") => StaticLevel::All,
                    Some("half") => StaticLevel::Half,
                    Some(a) => StaticLevel::Count(a.parse().map_err(|_| bad("expected a server count"))?),
                    None => return Err(bad("static needs `all`, `half` or a server count")),
                };
                PolicySpec::Static { servers: level }
            }
            "static-all" => PolicySpec::Static { servers: StaticLevel::All },
            "static-half" => PolicySpec::Static { servers: StaticLevel::Half },
            "adaptive" => PolicySpec::Adaptive { beta: real(DEFAULT_BETA)? },
            "predictive" => PolicySpec::Predictive { beta: real(DEFAULT_BETA)? },
            "optimal" => PolicySpec::Optimal { epsilon: real(DEFAULT_EPSILON)? },
            "oracle" => PolicySpec::Oracle {
                mode: OracleMode::Optimal,
                epsilon: real(DEFAULT_EPSILON)?,
            },
            "oracle-qed" => PolicySpec::Oracle {
                mode: OracleMode::Qed { beta: real(DEFAULT_BETA)? },
                epsilon: DEFAULT_EPSILON,
            },
            _ => return Err(bad("unknown policy")),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for PolicySpec {
    /// File-name friendly label, e.g. `static-1000` or `adaptive-0.2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Static { servers: StaticLevel::All } => write!(f, "static-all"),
            PolicySpec::Static { servers: StaticLevel::Half } => write!(f, "static-half"),
            PolicySpec::Static { servers: StaticLevel::Count(n) } => write!(f, "static-{n}"),
            PolicySpec::Adaptive { beta } => write!(f, "adaptive-{beta}"),
            PolicySpec::Predictive { beta } => write!(f, "predictive-{beta}"),
            PolicySpec::Optimal { .. } => write!(f, "optimal"),
            PolicySpec::Oracle { mode: OracleMode::Optimal, .. } => write!(f, "oracle"),
            PolicySpec::Oracle { mode: OracleMode::Qed { beta }, .. } => write!(f, "oracle-qed-{beta}"),
        }
    }
}

impl PolicySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PolicySpec::Adaptive { beta } | PolicySpec::Predictive { beta } => check_beta(beta),
            PolicySpec::Optimal { epsilon } | PolicySpec::Oracle { epsilon, .. } if !(epsilon > 0.0) => {
                Err(Error::config("policy.epsilon", "must be positive"))
            }
            PolicySpec::Oracle { mode: OracleMode::Qed { beta }, .. } => check_beta(beta),
            _ => Ok(()),
        }
    }
}

/// Smoother settings for the predictive policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastSettings {
    pub initial_alpha: f64,
    pub initial_gamma: f64,
    /// Refit the weights every this many windows.
    pub refit_every: usize,
    pub grid_step: f64,
    /// Windows of history kept for refitting.
    pub history_len: usize,
}

impl Default for ForecastSettings {
    fn default() -> Self {
        ForecastSettings {
            initial_alpha: 0.5,
            initial_gamma: 0.5,
            refit_every: 24,
            grid_step: 0.05,
            history_len: 96,
        }
    }
}

/// What a policy sees at a window boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionContext {
    /// Index of the window about to start.
    pub window: usize,
    /// Start of that window, in hours.
    pub time: f64,
    /// Statistics of the window that just closed (or the workload's nominal
    /// values before the first window).
    pub estimate: TrafficEstimate,
    /// Whether `estimate` was measured rather than nominal.
    pub measured: bool,
    /// True mean arrival rate over the coming window.
    pub next_lambda: f64,
    pub capacity: u64,
}

/// A policy instance owned by one simulation run.
#[derive(Debug, Clone)]
pub struct Policy {
    spec: PolicySpec,
    model: RevenueModel,
    forecast: ForecastState,
    settings: ForecastSettings,
    observed: usize,
}

impl Policy {
    pub fn new(spec: PolicySpec, model: RevenueModel, settings: ForecastSettings) -> Result<Self> {
        spec.validate()?;
        let forecast = ForecastState::new(settings.initial_alpha, settings.initial_gamma, settings.history_len)?;
        weight_grid(settings.grid_step)?;
        Ok(Policy {
            spec,
            model,
            forecast,
            settings,
            observed: 0,
        })
    }

    pub fn spec(&self) -> &PolicySpec {
        &self.spec
    }

    pub fn name(&self) -> String {
        self.spec.to_string()
    }

    pub fn forecast_state(&self) -> &ForecastState {
        &self.forecast
    }

    pub fn decide(&mut self, ctx: &DecisionContext) -> Result<PolicyDecision> {
        let price = self.model.tariff.price_at(ctx.time);
        let s = ctx.capacity;
        match self.spec {
            PolicySpec::Static { servers } => static_policy(servers.resolve(s), s),
            PolicySpec::Adaptive { beta } => adaptive_policy(&ctx.estimate, beta, s, &self.model, price),
            PolicySpec::Optimal { epsilon } => optimal_policy(&ctx.estimate, s, epsilon, &self.model, price),
            PolicySpec::Oracle { mode, epsilon } => {
                oracle_policy(ctx.next_lambda, &ctx.estimate, s, epsilon, mode, &self.model, price)
            }
            PolicySpec::Predictive { beta } => {
                if ctx.measured {
                    self.forecast.update(ctx.estimate.lambda);
                    self.observed += 1;
                    let every = self.settings.refit_every;
                    if every > 0 && self.observed.is_multiple_of(every) {
                        self.forecast.refit(self.settings.grid_step)?;
                    }
                }
                predictive_policy(&self.forecast, &ctx.estimate, beta, s, &self.model, price)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const JOB: f64 = 50.0 / 60.0;

    fn model() -> RevenueModel {
        RevenueModel::default()
    }

    #[test]
    fn static_examples() {
        assert_eq!(static_policy(100_000, 100_000).unwrap().n, 100_000);
        assert_eq!(static_policy(50_000, 100_000).unwrap().n, 50_000);
        assert_eq!(static_policy(0, 100_000).unwrap().n, 0);
        assert!(static_policy(11, 10).is_err());
    }

    #[test]
    fn qed_examples() {
        assert_eq!(qed_staffing(100.0, 0.0, 1000).unwrap(), 100);
        assert_eq!(qed_staffing(100.0, 0.2, 1000).unwrap(), 102);
        assert_eq!(qed_staffing(90_000.0 * JOB, 0.2, 100_000).unwrap(), 75_055);
        assert_eq!(qed_staffing(100.0, 0.2, 50).unwrap(), 50);
        assert_eq!(qed_staffing(0.5, -1.0, 50).unwrap(), 0);
        assert!(qed_staffing(100.0, 1.5, 1000).is_err());
    }

    #[test]
    fn optimal_with_no_traffic_runs_nothing() {
        let t = TrafficEstimate::markovian(0.0, JOB).unwrap();
        let d = optimal_policy(&t, 1000, DEFAULT_EPSILON, &model(), 0.1).unwrap();
        assert_eq!(d.n, 0);
        assert_eq!(d.predicted_revenue, 0.0);
    }

    #[test]
    fn optimal_switches_off_when_jobs_do_not_pay() {
        let mut m = model();
        m.tariff.charge_rate = 0.001;
        let t = TrafficEstimate::markovian(600.0, JOB).unwrap();
        assert_eq!(optimal_policy(&t, 1000, DEFAULT_EPSILON, &m, 0.1).unwrap().n, 0);
        assert_eq!(exhaustive_optimum(&t, 1000, &m, 0.1).unwrap().n, 0);
    }

    #[test]
    fn early_stop_matches_exhaustive_scan() {
        let m = model();
        for load in [0.05, 0.3, 0.6, 0.9, 0.995] {
            let t = TrafficEstimate::markovian(load * 1000.0 / JOB, JOB).unwrap();
            let fast = optimal_policy(&t, 1000, 1e-12, &m, 0.1).unwrap();
            let full = exhaustive_optimum(&t, 1000, &m, 0.1).unwrap();
            assert_eq!(fast.n, full.n, "load {load}");
        }
    }

    #[test]
    fn default_epsilon_stays_close_to_the_optimum() {
        let m = model();
        let t = TrafficEstimate::markovian(720.0, JOB).unwrap();
        let fast = optimal_policy(&t, 1000, DEFAULT_EPSILON, &m, 0.1).unwrap();
        let full = exhaustive_optimum(&t, 1000, &m, 0.1).unwrap();
        assert!(fast.n <= full.n);
        let gap = full.predicted_revenue - fast.predicted_revenue;
        assert!(gap >= 0.0 && gap <= DEFAULT_EPSILON * (full.n - fast.n) as f64 + 1e-12);
    }

    #[test]
    fn unimodality_helper() {
        assert!(is_unimodal(&[0.0, 1.0, 2.0, 2.0, 1.0]));
        assert!(is_unimodal(&[3.0, 2.0, 1.0]));
        assert!(!is_unimodal(&[0.0, 2.0, 1.0, 3.0]));
    }

    #[test]
    fn predictive_falls_back_to_adaptive() {
        let m = model();
        let t = TrafficEstimate::markovian(300.0, JOB).unwrap();
        let empty = ForecastState::new(0.5, 0.5, 10).unwrap();
        let a = adaptive_policy(&t, 0.2, 1000, &m, 0.1).unwrap();
        assert_eq!(predictive_policy(&empty, &t, 0.2, 1000, &m, 0.1).unwrap(), a);
        let level = ForecastState::initialized(300.0, 0.0, 0.5, 0.5).unwrap();
        assert_eq!(predictive_policy(&level, &t, 0.2, 1000, &m, 0.1).unwrap(), a);
    }

    #[test]
    fn oracle_on_stationary_traffic_is_optimal() {
        let m = model();
        let t = TrafficEstimate::markovian(500.0, JOB).unwrap();
        let o = oracle_policy(500.0, &t, 1000, DEFAULT_EPSILON, OracleMode::Optimal, &m, 0.1).unwrap();
        assert_eq!(o, optimal_policy(&t, 1000, DEFAULT_EPSILON, &m, 0.1).unwrap());
        let stepped = oracle_policy(900.0, &t, 1000, DEFAULT_EPSILON, OracleMode::Optimal, &m, 0.1).unwrap();
        assert!(stepped.n > o.n);
    }

    #[test]
    fn policy_spec_round_trip() {
        for s in ["static:all", "static:half", "static:1000", "adaptive:0.2", "predictive", "optimal", "oracle", "oracle-qed:0.1"] {
            let spec: PolicySpec = s.parse().unwrap();
            let again: PolicySpec = spec.to_string().replace("static-", "static:").replace("adaptive-", "adaptive:").replace("predictive-", "predictive:").replace("oracle-qed-", "oracle-qed:").parse().unwrap();
            assert_eq!(spec.to_string(), again.to_string());
        }
        assert!("adaptive:3".parse::<PolicySpec>().is_err());
        assert!("bogus".parse::<PolicySpec>().is_err());
        assert!("static".parse::<PolicySpec>().is_err());
        assert!("optimal:0".parse::<PolicySpec>().is_err());
    }
}
