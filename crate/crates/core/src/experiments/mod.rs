//! Experiment suites: analytic revenue sweeps, stationary policy
//! comparisons (Markovian and high-variability), and trace-driven runs.
//!
//! Every suite returns its raw results together with a list of checked
//! properties; [`write_outputs`] turns those into per-run CSV files, a
//! `summary.json` and an `assertions.json`.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::policies::{is_unimodal, OperatingPoint, Policy, PolicySpec, StaticLevel};
use crate::queueing::TrafficEstimate;
use crate::simulator::{run, summarize, write_records_csv, RunResult, Summary};
use crate::workload::{
    load_trace, scale_for_load, synthetic_trace, ArrivalRate, LogNormalParams, RateTrace, Shape,
    WorkloadGenerator, WorkloadSpec,
};

/// One checked property of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Assertion {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

pub fn all_passed(assertions: &[Assertion]) -> bool {
    assertions.iter().all(|a| a.passed)
}

/// Label used in file names, e.g. `0.3`.
pub fn load_label(load: f64) -> String {
    format!("{load}")
}

// ---------------------------------------------------------------------------
// Revenue versus running servers

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub load: f64,
    pub lambda: f64,
    pub best_n: u64,
    pub best_revenue: f64,
    #[serde(skip)]
    pub points: Vec<OperatingPoint>,
}

/// Predicted revenue for every `n` in `0..=S` at each load, with its argmax.
pub fn sweep_revenue_vs_n(loads: &[f64], config: &Config) -> Result<Vec<SweepCurve>> {
    let model = config.revenue_model();
    let price = model.tariff.price_at(0.0);
    let capacity = config.farm.capacity;
    let mean_service = config.workload.mean_service_hours();
    loads
        .par_iter()
        .map(|&load| {
            let lambda = config.lambda_for_load(load);
            let traffic = TrafficEstimate::markovian(lambda, mean_service)?;
            let points = model.revenue_curve(&traffic, capacity, price)?;
            let best = points
                .iter()
                .fold(points[0], |b, p| if p.revenue > b.revenue { *p } else { b });
            Ok(SweepCurve {
                load,
                lambda,
                best_n: best.n,
                best_revenue: best.revenue,
                points,
            })
        })
        .collect()
}

pub fn sweep_assertions(curves: &[SweepCurve]) -> Vec<Assertion> {
    let mut out = Vec::new();
    for c in curves {
        let revenues: Vec<f64> = c.points.iter().map(|p| p.revenue).collect();
        out.push(Assertion::new(
            format!("unimodal@{}", load_label(c.load)),
            is_unimodal(&revenues),
            format!("argmax n = {}", c.best_n),
        ));
        let tail_falls = revenues[c.best_n as usize..].windows(2).all(|w| w[1] <= w[0]);
        out.push(Assertion::new(
            format!("decreasing_above_optimum@{}", load_label(c.load)),
            tail_falls,
            "R(n) non-increasing for n > n_opt",
        ));
        out.push(Assertion::new(
            format!("zero_servers_zero_revenue@{}", load_label(c.load)),
            revenues[0] == 0.0,
            format!("R(0) = {}", revenues[0]),
        ));
    }
    let mut sorted: Vec<&SweepCurve> = curves.iter().collect();
    sorted.sort_by(|a, b| a.load.total_cmp(&b.load));
    let ns: Vec<u64> = sorted.iter().map(|c| c.best_n).collect();
    let rs: Vec<f64> = sorted.iter().map(|c| c.best_revenue).collect();
    out.push(Assertion::new(
        "argmax_increases_with_load",
        ns.windows(2).all(|w| w[1] > w[0]),
        format!("{ns:?}"),
    ));
    out.push(Assertion::new(
        "max_revenue_increases_with_load",
        rs.windows(2).all(|w| w[1] > w[0]),
        format!("{rs:?}"),
    ));
    out
}

// ---------------------------------------------------------------------------
// Stationary policy comparison

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointResult {
    pub policy: String,
    pub load: f64,
    pub summary: Summary,
    #[serde(skip)]
    pub run: RunResult,
}

/// Simulates every (policy, load) pair on the same workload seed.
pub fn compare_policies(
    policies: &[PolicySpec],
    loads: &[f64],
    arrival: Shape,
    service: Shape,
    config: &Config,
) -> Result<Vec<PointResult>> {
    let grid: Vec<(PolicySpec, f64)> = policies
        .iter()
        .flat_map(|p| loads.iter().map(move |l| (*p, *l)))
        .collect();
    let sim = config.sim_config(config.farm.window_hours);
    grid.par_iter()
        .map(|&(spec, load)| {
            let mut workload = config.workload_spec(load);
            workload.arrival_shape = arrival;
            workload.service_shape = service;
            let mut policy = Policy::new(spec, config.revenue_model(), config.policy.forecast)?;
            let result = run(&mut policy, workload, &sim)?;
            Ok(PointResult {
                policy: spec.to_string(),
                load,
                summary: summarize(&result),
                run: result,
            })
        })
        .collect()
}

fn find<'a>(results: &'a [PointResult], policy: &str, load: f64) -> Option<&'a PointResult> {
    results
        .iter()
        .find(|r| r.policy == policy && r.load == load)
}

fn policy_label(results: &[PointResult], pred: impl Fn(&str) -> bool) -> Option<String> {
    results.iter().map(|r| r.policy.clone()).find(|p| pred(p))
}

fn ci_or_mean_ge(a: &Summary, b: &Summary) -> bool {
    if a.mean_revenue_per_hour >= b.mean_revenue_per_hour {
        return true;
    }
    match (&a.revenue_ci95, &b.revenue_ci95) {
        (Some(x), Some(y)) => x.overlaps(y),
        _ => false,
    }
}

/// Relative gap `|a - b| / |b|`.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Properties of the Markovian comparison.
pub fn compare_assertions(results: &[PointResult], capacity: u64) -> Vec<Assertion> {
    let mut out = Vec::new();
    let mut loads: Vec<f64> = results.iter().map(|r| r.load).collect();
    loads.sort_by(f64::total_cmp);
    loads.dedup();
    let all = PolicySpec::Static { servers: StaticLevel::All }.to_string();
    let all_n = format!("static-{capacity}");
    let half = PolicySpec::Static { servers: StaticLevel::Half }.to_string();
    let half_n = format!("static-{}", capacity / 2);
    let static_all = policy_label(results, |p| p == all || p == all_n);
    let static_half = policy_label(results, |p| p == half || p == half_n);
    let adaptive = policy_label(results, |p| p.starts_with("adaptive"));
    let optimal = policy_label(results, |p| p == "optimal");

    if let (Some(sa), Some(&low)) = (&static_all, loads.first()) {
        if low <= 0.05 + 1e-12 {
            let s = &find(results, sa, low).unwrap().summary;
            out.push(Assertion::new(
                format!("static_all_negative@{}", load_label(low)),
                s.mean_revenue_per_hour < 0.0,
                format!("{:.3} $/h", s.mean_revenue_per_hour),
            ));
        }
    }
    if let (Some(a), Some(o)) = (&adaptive, &optimal) {
        for &load in &loads {
            let (Some(ar), Some(or)) = (find(results, a, load), find(results, o, load)) else { continue };
            if [0.3, 0.6, 0.9].iter().any(|l| (l - load).abs() < 1e-9) {
                let gap = relative_gap(ar.summary.mean_revenue_per_hour, or.summary.mean_revenue_per_hour);
                out.push(Assertion::new(
                    format!("adaptive_within_5pct_of_optimal@{}", load_label(load)),
                    gap <= 0.05,
                    format!(
                        "adaptive {:.3}, optimal {:.3} $/h, gap {:.4}",
                        ar.summary.mean_revenue_per_hour, or.summary.mean_revenue_per_hour, gap
                    ),
                ));
            }
            if load >= 0.3 - 1e-12 {
                out.push(Assertion::new(
                    format!("adaptive_busy_running_ge_0.9@{}", load_label(load)),
                    ar.summary.busy_running_ratio >= 0.9,
                    format!("{:.4}", ar.summary.busy_running_ratio),
                ));
            }
        }
    }
    if let Some(o) = &optimal {
        for st in [&static_all, &static_half].into_iter().flatten() {
            for &load in &loads {
                let (Some(or), Some(sr)) = (find(results, o, load), find(results, st, load)) else { continue };
                out.push(Assertion::new(
                    format!("optimal_ge_{st}@{}", load_label(load)),
                    ci_or_mean_ge(&or.summary, &sr.summary),
                    format!(
                        "optimal {:.3}, {st} {:.3} $/h",
                        or.summary.mean_revenue_per_hour, sr.summary.mean_revenue_per_hour
                    ),
                ));
            }
        }
    }
    if let (Some(sh), Some(&top)) = (&static_half, loads.last()) {
        if top >= 0.6 {
            let half_rev = find(results, sh, top).unwrap().summary.mean_revenue_per_hour;
            for dynamic in [&adaptive, &optimal].into_iter().flatten() {
                if let Some(d) = find(results, dynamic, top) {
                    out.push(Assertion::new(
                        format!("static_half_below_{dynamic}@{}", load_label(top)),
                        half_rev < d.summary.mean_revenue_per_hour,
                        format!("{half_rev:.3} vs {:.3} $/h", d.summary.mean_revenue_per_hour),
                    ));
                }
            }
        }
    }
    if let Some(sa) = &static_all {
        for dynamic in [&adaptive, &optimal].into_iter().flatten() {
            let ok = loads.iter().all(|&l| match (find(results, dynamic, l), find(results, sa, l)) {
                (Some(d), Some(s)) => d.summary.mean_power_watts <= s.summary.mean_power_watts,
                _ => true,
            });
            out.push(Assertion::new(
                format!("{dynamic}_power_le_static_all"),
                ok,
                "mean power at every load",
            ));
        }
    }
    out
}

/// Sample SCVs of the log-normal generators over `draws` variates.
pub fn generator_scvs(mean_service: f64, ca2: f64, cs2: f64, seed: u64, draws: usize) -> Result<(f64, f64)> {
    let spec = WorkloadSpec {
        arrival_shape: Shape::LogNormal { scv: ca2 },
        rate: ArrivalRate::Constant(1.0),
        service_shape: Shape::LogNormal { scv: cs2 },
        mean_service,
        seed,
    };
    let mut gen = WorkloadGenerator::new(spec)?;
    let scv = |xs: &[f64]| {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) / (m * m)
    };
    let inter: Vec<f64> = (0..draws).map(|_| gen.next_interarrival(0.0).unwrap_or(0.0)).collect();
    let serv: Vec<f64> = (0..draws).map(|_| gen.next_service_time()).collect();
    Ok((scv(&inter), scv(&serv)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariabilityResults {
    pub lognormal: Vec<PointResult>,
    pub markovian: Vec<PointResult>,
    pub sample_ca2: f64,
    pub sample_cs2: f64,
}

/// High-variability runs plus their Markovian counterparts at the same loads.
pub fn run_variability(
    policies: &[PolicySpec],
    loads: &[f64],
    ca2: f64,
    cs2: f64,
    config: &Config,
) -> Result<VariabilityResults> {
    LogNormalParams::from_mean_scv(1.0, ca2)?;
    LogNormalParams::from_mean_scv(1.0, cs2)?;
    let lognormal = compare_policies(
        policies,
        loads,
        Shape::LogNormal { scv: ca2 },
        Shape::LogNormal { scv: cs2 },
        config,
    )?;
    let markovian = compare_policies(policies, loads, Shape::Exponential, Shape::Exponential, config)?;
    let (sample_ca2, sample_cs2) = generator_scvs(
        config.workload.mean_service_hours(),
        ca2,
        cs2,
        config.workload.seed,
        1_000_000,
    )?;
    Ok(VariabilityResults {
        lognormal,
        markovian,
        sample_ca2,
        sample_cs2,
    })
}

pub fn variability_assertions(v: &VariabilityResults, ca2: f64, cs2: f64) -> Vec<Assertion> {
    let mut out = Vec::new();
    for ln in &v.lognormal {
        if !(ln.policy.starts_with("adaptive") || ln.policy == "optimal") {
            continue;
        }
        if let Some(mk) = find(&v.markovian, &ln.policy, ln.load) {
            out.push(Assertion::new(
                format!("{}_lower_than_markovian@{}", ln.policy, load_label(ln.load)),
                ln.summary.mean_revenue_per_hour < mk.summary.mean_revenue_per_hour,
                format!(
                    "{:.3} vs {:.3} $/h",
                    ln.summary.mean_revenue_per_hour, mk.summary.mean_revenue_per_hour
                ),
            ));
        }
    }
    out.push(Assertion::new(
        "interarrival_scv_within_10pct",
        relative_gap(v.sample_ca2, ca2) <= 0.10,
        format!("sample {:.4}, target {ca2}", v.sample_ca2),
    ));
    out.push(Assertion::new(
        "service_scv_within_10pct",
        relative_gap(v.sample_cs2, cs2) <= 0.10,
        format!("sample {:.4}, target {cs2}", v.sample_cs2),
    ));
    out
}

// ---------------------------------------------------------------------------
// Trace-driven runs

/// The configured trace file, or the synthetic trace, scaled to the
/// configured mean load.
pub fn resolve_trace(config: &Config) -> Result<RateTrace> {
    let e = &config.experiment;
    let capacity = config.farm.capacity;
    let mean_service = config.workload.mean_service_hours();
    match &e.trace_file {
        Some(path) => load_trace(path, e.trace_load, capacity, mean_service),
        None => {
            let raw = synthetic_trace(&e.synthetic_trace)?;
            let scale = scale_for_load(&raw, e.trace_load, capacity, mean_service)?;
            Ok(raw.with_scale(scale))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceResults {
    pub horizon_hours: f64,
    pub runs: Vec<PointResult>,
}

/// Replays `trace` (Poisson arrivals at the trace rate) under each policy,
/// reconfiguring every `window_hours`, for the whole trace horizon or the
/// first `max_windows` windows of it.
pub fn run_nonstationary(
    trace: &RateTrace,
    policies: &[PolicySpec],
    window_hours: f64,
    max_windows: Option<usize>,
    config: &Config,
) -> Result<TraceResults> {
    let mut windows = (trace.end() / window_hours).floor();
    if let Some(w) = max_windows {
        windows = windows.min(w as f64);
    }
    let horizon = windows * window_hours;
    if horizon <= 0.0 {
        return Err(Error::config("experiment.trace_window_hours", "longer than the trace"));
    }
    let mut sim = config.sim_config(window_hours);
    sim.duration_hours = horizon;
    let runs = policies
        .par_iter()
        .map(|&spec| {
            let workload = WorkloadSpec {
                arrival_shape: Shape::Exponential,
                rate: ArrivalRate::Trace(trace.clone()),
                service_shape: config.workload.service,
                mean_service: config.workload.mean_service_hours(),
                seed: config.workload.seed,
            };
            let mut policy = Policy::new(spec, config.revenue_model(), config.policy.forecast)?;
            let result = run(&mut policy, workload, &sim)?;
            Ok(PointResult {
                policy: spec.to_string(),
                load: config.experiment.trace_load,
                summary: summarize(&result),
                run: result,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TraceResults {
        horizon_hours: horizon,
        runs,
    })
}

/// Percentile by nearest rank.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let idx = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    v[idx]
}

pub fn trace_assertions(t: &TraceResults, capacity: u64) -> Vec<Assertion> {
    let mut out = Vec::new();
    let all = PolicySpec::Static { servers: StaticLevel::All }.to_string();
    let all_n = format!("static-{capacity}");
    let Some(stat) = t.runs.iter().find(|r| r.policy == all || r.policy == all_n) else {
        return out;
    };
    let dynamic: Vec<&PointResult> = t
        .runs
        .iter()
        .filter(|r| !r.policy.starts_with("static"))
        .collect();
    let static_energy = &stat.summary.cumulative_energy_kwh;
    for d in &dynamic {
        let end_ok = d.summary.total_energy_kwh < stat.summary.total_energy_kwh;
        let every_ok = d
            .summary
            .cumulative_energy_kwh
            .iter()
            .zip(static_energy)
            .all(|(a, b)| a < b);
        out.push(Assertion::new(
            format!("{}_energy_below_static_all", d.policy),
            end_ok && every_ok,
            format!(
                "{:.1} vs {:.1} kWh at horizon",
                d.summary.total_energy_kwh, stat.summary.total_energy_kwh
            ),
        ));
    }
    if dynamic.len() >= 2 {
        let revs: Vec<f64> = dynamic.iter().map(|d| d.summary.total_revenue).collect();
        let max = revs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = revs.iter().cloned().fold(f64::INFINITY, f64::min);
        out.push(Assertion::new(
            "dynamic_revenues_within_5pct",
            (max - min) / max.abs() <= 0.05,
            format!("{revs:?}"),
        ));
    }
    let util: Vec<f64> = stat.run.records.iter().map(|r| r.busy_running_ratio).collect();
    let p05 = percentile(&util, 0.05);
    let p95 = percentile(&util, 0.95);
    for d in &dynamic {
        out.push(Assertion::new(
            format!("static_all_utilization_below_{}", d.policy),
            p95 < d.summary.busy_running_ratio,
            format!(
                "static band [{p05:.3}, {p95:.3}] vs {:.3}",
                d.summary.busy_running_ratio
            ),
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Output files

pub fn experiment_dir(out: &Path, experiment: &str) -> Result<PathBuf> {
    let dir = out.join(experiment);
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// `<dir>/<policy>_<load>.csv` for each run.
pub fn write_runs(dir: &Path, runs: &[PointResult], suffix: &str) -> Result<()> {
    for r in runs {
        let name = format!("{}_{}{suffix}.csv", r.policy, load_label(r.load));
        let file = fs::File::create(dir.join(name))?;
        write_records_csv(&r.run.records, std::io::BufWriter::new(file))?;
    }
    Ok(())
}

pub fn write_sweep_curves(dir: &Path, curves: &[SweepCurve]) -> Result<()> {
    for c in curves {
        let file = fs::File::create(dir.join(format!("analytic_{}.csv", load_label(c.load))))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        w.write_record(["load", "n", "blocking", "throughput", "power_watts", "revenue"])?;
        for p in &c.points {
            w.serialize((c.load, p.n, p.blocking, p.throughput, p.power_watts, p.revenue))?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Writes `summary.json` and `assertions.json` into `dir`.
pub fn write_outputs<T: Serialize>(dir: &Path, summary: &T, assertions: &[Assertion]) -> Result<()> {
    write_json(&dir.join("summary.json"), summary)?;
    write_json(&dir.join("assertions.json"), &assertions)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_percentile() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.05), 1.0);
        assert_eq!(percentile(&v, 0.95), 19.0);
        assert_eq!(percentile(&v, 1.0), 20.0);
    }

    #[test]
    fn labels() {
        assert_eq!(load_label(0.3), "0.3");
        assert_eq!(load_label(0.995), "0.995");
    }

    #[test]
    fn sweep_at_desk_scale() {
        let cfg = Config::default();
        let curves = sweep_revenue_vs_n(&[0.3, 0.6, 0.9], &cfg).unwrap();
        let checks = sweep_assertions(&curves);
        assert!(all_passed(&checks), "{checks:#?}");
    }
}
