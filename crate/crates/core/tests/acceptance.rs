//! One test per acceptance criterion. Each prints a single
//! `criterion N: PASS|FAIL ...` line before asserting.
//!
//! Run with `cargo test -p greenfarm --test acceptance -- --nocapture`.

use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

use greenfarm::config::Config;
use greenfarm::experiments::{
    compare_policies, percentile, relative_gap, resolve_trace, run_nonstationary, run_variability,
    sweep_revenue_vs_n, PointResult, TraceResults, VariabilityResults,
};
use greenfarm::policies::{
    is_unimodal, refit_smoothing, ForecastSettings, ForecastState, Policy, PolicySpec, RevenueModel,
    StaticLevel,
};
use greenfarm::queueing::{erlang_b, peakedness, TrafficEstimate};
use greenfarm::simulator::{run, ScaleDown, SimConfig};
use greenfarm::workload::{Shape, WorkloadSpec};

fn verdict(n: u32, passed: bool, detail: &str) {
    println!("criterion {n}: {} {detail}", if passed { "PASS" } else { "FAIL" });
    assert!(passed, "criterion {n} failed: {detail}");
}

// Criterion 1 tolerance and time budget.
const ERLANG_REL_TOL: f64 = 1e-12;
const LARGE_FARM_BUDGET_SECS: f64 = 1.0;

#[test]
fn criterion_01_erlang_b() {
    let mut worst: f64 = 0.0;
    for rho in [0.1, 1.0, 5.0, 10.0] {
        for n in 0..=30u64 {
            // Direct normalized summation of rho^k / k!.
            let terms: Vec<f64> = (0..=n)
                .scan(1.0, |t, k| {
                    if k > 0 {
                        *t *= rho / k as f64;
                    }
                    Some(*t)
                })
                .collect();
            let direct = terms[n as usize] / terms.iter().sum::<f64>();
            let rel = ((erlang_b(n, rho).unwrap() - direct) / direct).abs();
            worst = worst.max(rel);
        }
    }
    let start = Instant::now();
    let big = erlang_b(100_000, 90_000.0).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let passed = worst <= ERLANG_REL_TOL && secs < LARGE_FARM_BUDGET_SECS && big > 0.0 && big < 1.0;
    verdict(
        1,
        passed,
        &format!("max rel err {worst:.2e} (tol {ERLANG_REL_TOL:e}); B(100000, 90000) = {big:.3e} in {secs:.4} s"),
    );
}

// Criterion 2 tolerance and oracle resolution.
const ETA_ABS_TOL: f64 = 1e-6;
const TRAPEZOID_POINTS: usize = 1_000_000;

fn eta_trapezoid(cs2: f64) -> f64 {
    let sd = cs2.sqrt();
    let f = |s: f64| {
        let tail = 0.5 * erfc((s - 1.0) / (sd * std::f64::consts::SQRT_2));
        tail * tail
    };
    let upper = 1.0 + 12.0 * sd;
    let h = upper / (TRAPEZOID_POINTS - 1) as f64;
    let inner: f64 = (1..TRAPEZOID_POINTS - 1).map(|i| f(i as f64 * h)).sum();
    h * (inner + 0.5 * (f(0.0) + f(upper)))
}

#[test]
fn criterion_02_peakedness() {
    let z = |ca2: f64, cs2: f64| peakedness(&TrafficEstimate::new(10.0, 1.0, ca2, cs2).unwrap()).unwrap();
    let case1 = [0.3, 1.0, 20.0].iter().all(|&cs2| z(1.0, cs2).z == 1.0);
    let case2 = z(2.0, 1.0).z == 1.5;
    let mut worst: f64 = 0.0;
    for cs2 in [0.04, 0.25, 2.0, 5.0, 20.0] {
        let got = z(2.0, cs2).eta;
        worst = worst.max((got - eta_trapezoid(cs2)).abs());
    }
    let passed = case1 && case2 && worst <= ETA_ABS_TOL;
    verdict(
        2,
        passed,
        &format!("case1 z=1: {case1}; case2 z=1.5: {case2}; case3 max |d eta| {worst:.2e} (tol {ETA_ABS_TOL:e})"),
    );
}

// Criterion 3: standard errors allowed and sample size.
const SIM_SIGMAS: f64 = 3.0;
const MIN_ARRIVALS: u64 = 1_000_000;

#[test]
fn criterion_03_simulator_vs_analytics() {
    let (n, rho) = (50u64, 45.0);
    let batch_hours = 100.0;
    let config = SimConfig {
        capacity: n,
        window_hours: batch_hours,
        duration_hours: 24_000.0,
        model: RevenueModel::default(),
        scale_down: ScaleDown::Idealized,
    };
    let mut policy = Policy::new(
        PolicySpec::Static { servers: StaticLevel::All },
        RevenueModel::default(),
        ForecastSettings::default(),
    )
    .unwrap();
    let result = run(&mut policy, WorkloadSpec::markovian(rho, 1.0, 2024), &config).unwrap();
    // The first batch starts from an empty farm.
    let batches = &result.records[1..];
    let arrivals: u64 = result.records.iter().map(|r| r.arrivals).sum();
    let mean_sd = |xs: &[f64]| {
        let k = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / k;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1.0);
        (m, (var / k).sqrt())
    };
    let blocking: Vec<f64> = batches.iter().map(|r| r.blocked as f64 / r.arrivals as f64).collect();
    let busy: Vec<f64> = batches.iter().map(|r| r.mean_busy).collect();
    let (b_hat, b_se) = mean_sd(&blocking);
    let (busy_hat, busy_se) = mean_sd(&busy);
    let b = erlang_b(n, rho).unwrap();
    let busy_exact = rho * (1.0 - b);
    let b_ok = (b_hat - b).abs() <= SIM_SIGMAS * b_se;
    let busy_ok = (busy_hat - busy_exact).abs() <= SIM_SIGMAS * busy_se;
    let passed = arrivals >= MIN_ARRIVALS && b_ok && busy_ok;
    verdict(
        3,
        passed,
        &format!(
            "{arrivals} arrivals; blocking {b_hat:.5} +- {b_se:.5} vs {b:.5}; busy {busy_hat:.3} +- {busy_se:.3} vs {busy_exact:.3}"
        ),
    );
}

#[test]
fn criterion_04_revenue_curve_shape() {
    let config = Config::shipped();
    assert_eq!(config.farm.capacity, 1000);
    let loads = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
    let curves = sweep_revenue_vs_n(&loads, &config).unwrap();
    let unimodal = curves
        .iter()
        .all(|c| is_unimodal(&c.points.iter().map(|p| p.revenue).collect::<Vec<_>>()));
    let ns: Vec<u64> = curves.iter().map(|c| c.best_n).collect();
    let rs: Vec<f64> = curves.iter().map(|c| c.best_revenue).collect();
    let n_up = ns.windows(2).all(|w| w[1] > w[0]);
    let r_up = rs.windows(2).all(|w| w[1] > w[0]);
    verdict(
        4,
        unimodal && n_up && r_up,
        &format!("unimodal {unimodal}; argmax {ns:?}; max revenue rising {r_up}"),
    );
}

const STATIONARY_LOADS: [f64; 8] = [0.05, 0.15, 0.3, 0.45, 0.6, 0.75, 0.9, 0.995];

fn stationary_policies() -> Vec<PolicySpec> {
    ["static:all", "static:half", "adaptive:0.2", "optimal"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect()
}

fn markovian_runs() -> &'static Vec<PointResult> {
    static RUNS: OnceLock<Vec<PointResult>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let config = Config::shipped();
        assert_eq!((config.farm.duration_hours, config.farm.window_hours), (264.0, 2.0));
        compare_policies(
            &stationary_policies(),
            &STATIONARY_LOADS,
            Shape::Exponential,
            Shape::Exponential,
            &config,
        )
        .unwrap()
    })
}

fn find<'a>(runs: &'a [PointResult], policy: &str, load: f64) -> &'a PointResult {
    runs.iter()
        .find(|r| r.policy == policy && r.load == load)
        .unwrap_or_else(|| panic!("no run for {policy} at {load}"))
}

// Criterion 5 tolerance on the adaptive/optimal revenue gap.
const ADAPTIVE_GAP_TOL: f64 = 0.05;

#[test]
fn criterion_05_stationary_comparison() {
    let runs = markovian_runs();
    let low = find(runs, "static-all", 0.05).summary.mean_revenue_per_hour;
    let mut gaps = Vec::new();
    for load in [0.3, 0.6, 0.9] {
        let a = find(runs, "adaptive-0.2", load).summary.mean_revenue_per_hour;
        let o = find(runs, "optimal", load).summary.mean_revenue_per_hour;
        gaps.push(relative_gap(a, o));
    }
    let mut dominated = Vec::new();
    for load in STATIONARY_LOADS {
        let o = &find(runs, "optimal", load).summary;
        for st in ["static-all", "static-half"] {
            let s = &find(runs, st, load).summary;
            let overlap = match (&o.revenue_ci95, &s.revenue_ci95) {
                (Some(x), Some(y)) => x.overlaps(y),
                _ => false,
            };
            if !(o.mean_revenue_per_hour >= s.mean_revenue_per_hour || overlap) {
                dominated.push(format!("{st}@{load}"));
            }
        }
    }
    let passed = low < 0.0 && gaps.iter().all(|g| *g <= ADAPTIVE_GAP_TOL) && dominated.is_empty();
    verdict(
        5,
        passed,
        &format!(
            "static-all @5% {low:.3} $/h; adaptive gaps {:?} (tol {ADAPTIVE_GAP_TOL}); optimal beaten at {dominated:?}",
            gaps.iter().map(|g| format!("{g:.4}")).collect::<Vec<_>>()
        ),
    );
}

// Criterion 6 floor on the busy/running ratio.
const BUSY_RUNNING_FLOOR: f64 = 0.9;

#[test]
fn criterion_06_adaptive_efficiency() {
    let runs = markovian_runs();
    let ratios: Vec<(f64, f64)> = STATIONARY_LOADS
        .iter()
        .filter(|&&l| l >= 0.3)
        .map(|&l| (l, find(runs, "adaptive-0.2", l).summary.busy_running_ratio))
        .collect();
    let passed = ratios.iter().all(|(_, r)| *r >= BUSY_RUNNING_FLOOR);
    verdict(6, passed, &format!("busy/running {ratios:.4?} (floor {BUSY_RUNNING_FLOOR})"));
}

// Criterion 7 targets and tolerance on sample SCVs.
const CA2: f64 = 2.0;
const CS2: f64 = 20.0;
const SCV_TOL: f64 = 0.10;

#[test]
fn criterion_07_high_variability() {
    let config = Config::shipped();
    let policies: Vec<PolicySpec> = ["adaptive:0.2", "optimal"].iter().map(|s| s.parse().unwrap()).collect();
    let loads = [0.3, 0.6, 0.9];
    let v: VariabilityResults = run_variability(&policies, &loads, CA2, CS2, &config).unwrap();
    let markov = markovian_runs();
    let mut pairs = Vec::new();
    let mut lower = true;
    for r in &v.lognormal {
        let m = find(markov, &r.policy, r.load);
        // Common random numbers: the reference inside the suite is the same run.
        assert_eq!(find(&v.markovian, &r.policy, r.load).summary, m.summary);
        lower &= r.summary.mean_revenue_per_hour < m.summary.mean_revenue_per_hour;
        pairs.push(format!(
            "{}@{}: {:.2} < {:.2}",
            r.policy, r.load, r.summary.mean_revenue_per_hour, m.summary.mean_revenue_per_hour
        ));
    }
    let scv_ok = relative_gap(v.sample_ca2, CA2) <= SCV_TOL && relative_gap(v.sample_cs2, CS2) <= SCV_TOL;
    verdict(
        7,
        lower && scv_ok,
        &format!(
            "{pairs:?}; sample ca2 {:.4}, cs2 {:.4} (tol {SCV_TOL})",
            v.sample_ca2, v.sample_cs2
        ),
    );
}

// Criterion 8 tolerance on the spread of dynamic cumulative revenues.
const DYNAMIC_REVENUE_SPREAD_TOL: f64 = 0.05;

#[test]
fn criterion_08_trace_driven() {
    let config = Config::shipped();
    assert_eq!(config.experiment.trace_window_hours, 0.5);
    let trace = resolve_trace(&config).unwrap();
    let policies: Vec<PolicySpec> = ["static:all", "adaptive:0.2", "predictive:0.2", "oracle"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    let t: TraceResults = run_nonstationary(&trace, &policies, 0.5, None, &config).unwrap();
    let stat = t.runs.iter().find(|r| r.policy == "static-all").unwrap();
    let dynamic: Vec<&PointResult> = t.runs.iter().filter(|r| r.policy != "static-all").collect();
    let energy_ok = dynamic
        .iter()
        .all(|d| d.summary.total_energy_kwh < stat.summary.total_energy_kwh);
    let revs: Vec<f64> = dynamic.iter().map(|d| d.summary.total_revenue).collect();
    let (lo, hi) = revs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &r| (l.min(r), h.max(r)));
    let spread = (hi - lo) / hi.abs();
    let util: Vec<f64> = stat.run.records.iter().map(|r| r.busy_running_ratio).collect();
    let band = (percentile(&util, 0.05), percentile(&util, 0.95));
    let dyn_util: Vec<f64> = dynamic.iter().map(|d| d.summary.busy_running_ratio).collect();
    let band_ok = dyn_util.iter().all(|&u| band.1 < u);
    let passed = t.horizon_hours == 720.0 && energy_ok && spread <= DYNAMIC_REVENUE_SPREAD_TOL && band_ok;
    verdict(
        8,
        passed,
        &format!(
            "energy below static-all {energy_ok}; revenue spread {spread:.4} (tol {DYNAMIC_REVENUE_SPREAD_TOL}); \
             static utilization band [{:.3}, {:.3}] vs dynamic {dyn_util:.3?}",
            band.0, band.1
        ),
    );
}

// Criterion 9: ramp tolerance and refit series count.
const RAMP_TOL: f64 = 1e-9;
const REFIT_SERIES: usize = 20;

fn oracle_sse(series: &[f64], alpha: f64, gamma: f64) -> f64 {
    let mut level = series[1];
    let mut trend = series[1] - series[0];
    let mut sse = 0.0;
    for &y in &series[2..] {
        let e = y - (level + trend);
        sse += e * e;
        let next = alpha * y + (1.0 - alpha) * (level + trend);
        trend = gamma * (next - level) + (1.0 - gamma) * trend;
        level = next;
    }
    sse
}

#[test]
fn criterion_09_forecasting() {
    let mut ramp_err: f64 = 0.0;
    for (a, g) in [(0.1, 0.9), (0.5, 0.5), (0.95, 0.05)] {
        let mut f = ForecastState::new(a, g, 96).unwrap();
        for k in 0..200 {
            let y = 40.0 + 2.5 * k as f64;
            if let (Some(pred), true) = (f.forecast_next(), k >= 2) {
                ramp_err = ramp_err.max((pred - y).abs() / y);
            }
            f.update(y);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut mismatches = 0;
    for _ in 0..REFIT_SERIES {
        let len = rng.random_range(10..97);
        let series: Vec<f64> = (0..len)
            .map(|k| 100.0 + 0.8 * k as f64 + rng.random_range(-15.0..15.0))
            .collect();
        let (mut best, mut best_sse) = ((0.0, 0.0), f64::INFINITY);
        for i in 0..=20 {
            for j in 0..=20 {
                let (a, g) = (i as f64 * 0.05, j as f64 * 0.05);
                let sse = oracle_sse(&series, a, g);
                if sse < best_sse {
                    best_sse = sse;
                    best = (a, g);
                }
            }
        }
        let got = refit_smoothing(&series, 0.05).unwrap().unwrap();
        if (got.0 - best.0).abs() > 1e-12 || (got.1 - best.1).abs() > 1e-12 {
            mismatches += 1;
        }
    }
    let passed = ramp_err <= RAMP_TOL && mismatches == 0;
    verdict(
        9,
        passed,
        &format!("ramp max rel one-step error {ramp_err:.2e} (tol {RAMP_TOL:e}); refit mismatches {mismatches}/{REFIT_SERIES}"),
    );
}

fn snapshot(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for sub in std::fs::read_dir(dir).unwrap() {
        let sub = sub.unwrap().path();
        for f in std::fs::read_dir(&sub).unwrap() {
            let f = f.unwrap().path();
            files.push((f.display().to_string().replace(&dir.display().to_string(), ""), std::fs::read(&f).unwrap()));
        }
    }
    files.sort();
    files
}

#[test]
fn criterion_10_determinism() {
    let invoke = |out: &std::path::Path| {
        let out = out.to_str().unwrap();
        let compare = [
            "greenfarm", "compare", "--policies", "static:1000,adaptive:0.2,optimal", "--loads", "0.3,0.9",
            "--seed", "42", "--out", out,
        ];
        let trace = ["greenfarm", "trace", "--windows", "96", "--seed", "42", "--out", out];
        (greenfarm::cli::run(compare), greenfarm::cli::run(trace))
    };
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let codes = (invoke(first.path()), invoke(second.path()));
    let a = snapshot(first.path());
    let b = snapshot(second.path());
    let csvs = a.iter().filter(|(n, _)| n.ends_with(".csv")).count();
    let identical = a == b;
    let exits_ok = codes.0 .0 != 1 && codes.0 .1 != 1 && codes.0 == codes.1;
    verdict(
        10,
        identical && exits_ok && csvs == 10,
        &format!("{} files ({csvs} CSV) byte-identical: {identical}; exit codes {codes:?}", a.len()),
    );
}
