//! Cross-module invariants as property tests.

use proptest::prelude::*;

use greenfarm::economics::{revenue_rate, Tariff};
use greenfarm::energy::{average_power, EnergyProfile};
use greenfarm::policies::{
    adaptive_policy, optimal_policy, predictive_policy, ForecastSettings, ForecastState, Policy, PolicySpec,
    RevenueModel,
};
use greenfarm::queueing::{erlang_b, erlang_b_fractional, throughput, TrafficEstimate};
use greenfarm::simulator::{run, ScaleDown, SimConfig};
use greenfarm::workload::{ArrivalRate, LogNormalParams, RateTrace, Shape, WorkloadGenerator, WorkloadSpec};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn erlang_b_rises_with_load(n in 0u64..300, rho in 0.0f64..400.0, d in 0.0f64..50.0) {
        prop_assert!(erlang_b(n, rho + d).unwrap() >= erlang_b(n, rho).unwrap());
    }

    #[test]
    fn fractional_agrees_with_integer_path(n in 0u64..500, rho in 0.0f64..600.0) {
        prop_assert_eq!(erlang_b_fractional(n as f64, rho).unwrap(), erlang_b(n, rho).unwrap());
    }

    #[test]
    fn throughput_is_bounded_and_non_decreasing(
        lambda in 0.1f64..2000.0, ca2 in 0.2f64..5.0, cs2 in 0.2f64..25.0, n in 0u64..1500,
    ) {
        let t = TrafficEstimate::new(lambda, 0.8, ca2, cs2).unwrap();
        let a = throughput(&t, n).unwrap();
        let b = throughput(&t, n + 1).unwrap();
        prop_assert!(a <= b + 1e-9 * lambda);
        prop_assert!(b <= lambda * (1.0 + 1e-12));
    }

    #[test]
    fn power_is_linear_and_bracketed(n in 1u64..5000, frac in 0.0f64..=1.0, extra in 0u64..100) {
        let p = EnergyProfile::default();
        let busy = frac * n as f64;
        let w = average_power(n, busy, &p).unwrap();
        prop_assert!(w >= n as f64 * p.idle_draw() * (1.0 - 1e-12));
        prop_assert!(w <= n as f64 * p.busy_draw() * (1.0 + 1e-12));
        let more = average_power(n + extra, busy, &p).unwrap();
        prop_assert!((more - w - extra as f64 * p.idle_draw()).abs() <= 1e-9 * more);
    }

    #[test]
    fn revenue_is_linear_in_throughput_and_power(t in 0.0f64..1000.0, w in 0.0f64..1e6, dt in 0.0f64..100.0, dw in 0.0f64..1e4) {
        let tariff = Tariff::default();
        let r = revenue_rate(t, 0.8, w, &tariff);
        let up = revenue_rate(t + dt, 0.8, w, &tariff);
        let down = revenue_rate(t, 0.8, w + dw, &tariff);
        prop_assert!((up - r - tariff.charge_rate * 0.8 * dt).abs() <= 1e-9 * up.abs().max(1.0));
        prop_assert!(down <= r);
    }

    #[test]
    fn decisions_stay_in_range(lambda in 0.0f64..3000.0, beta in -1.0f64..=1.0, capacity in 1u64..1200) {
        let model = RevenueModel::default();
        let t = TrafficEstimate::markovian(lambda, 50.0 / 60.0).unwrap();
        prop_assert!(adaptive_policy(&t, beta, capacity, &model, 0.1).unwrap().n <= capacity);
        prop_assert!(optimal_policy(&t, capacity, 0.01, &model, 0.1).unwrap().n <= capacity);
    }

    #[test]
    fn adaptive_is_monotone(rho in 0.0f64..900.0, d in 0.0f64..100.0, beta in -1.0f64..0.9, db in 0.0f64..0.1) {
        let model = RevenueModel::default();
        let at = |rho: f64, beta: f64| {
            let t = TrafficEstimate::markovian(rho, 1.0).unwrap();
            adaptive_policy(&t, beta, 1000, &model, 0.1).unwrap().n
        };
        prop_assert!(at(rho + d, beta) >= at(rho, beta));
        prop_assert!(at(rho, beta + db) >= at(rho, beta));
    }

    #[test]
    fn predictive_matches_adaptive_on_a_flat_forecast(level in 1.0f64..1500.0, beta in -1.0f64..=1.0) {
        let model = RevenueModel::default();
        let t = TrafficEstimate::markovian(level, 50.0 / 60.0).unwrap();
        let state = ForecastState::initialized(level, 0.0, 0.5, 0.5).unwrap();
        prop_assert_eq!(
            predictive_policy(&state, &t, beta, 1000, &model, 0.1).unwrap(),
            adaptive_policy(&t, beta, 1000, &model, 0.1).unwrap()
        );
    }

    #[test]
    fn lognormal_solve_round_trips(mean in 1e-3f64..1e3, scv in 1e-3f64..100.0) {
        let p = LogNormalParams::from_mean_scv(mean, scv).unwrap();
        prop_assert!(((p.mean() - mean) / mean).abs() <= 1e-12);
        prop_assert!(((p.scv() - scv) / scv).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulated_counts_are_conserved(
        seed in 0u64..1000,
        load in 0.05f64..0.99,
        which in 0usize..5,
        honoring in any::<bool>(),
    ) {
        let spec: PolicySpec = ["static:all", "static:half", "adaptive:0.2", "optimal", "predictive:-0.5"][which]
            .parse()
            .unwrap();
        let config = SimConfig {
            capacity: 60,
            window_hours: 1.0,
            duration_hours: 48.0,
            model: RevenueModel::default(),
            scale_down: if honoring { ScaleDown::CompletionHonoring } else { ScaleDown::Idealized },
        };
        let mut policy = Policy::new(spec, RevenueModel::default(), ForecastSettings::default()).unwrap();
        let workload = WorkloadSpec::markovian(load * 60.0 / 0.8, 0.8, seed);
        let r = run(&mut policy, workload, &config).unwrap();
        let arrivals: u64 = r.records.iter().map(|w| w.arrivals).sum();
        let admitted: u64 = r.records.iter().map(|w| w.admitted).sum();
        let blocked: u64 = r.records.iter().map(|w| w.blocked).sum();
        let completions: u64 = r.records.iter().map(|w| w.completions).sum();
        prop_assert_eq!(arrivals, admitted + blocked);
        prop_assert_eq!(admitted, completions + r.in_service_at_end);
        for w in &r.records {
            prop_assert!(w.n_used <= 60);
            prop_assert!(w.busy_running_ratio <= 1.0 + 1e-12 || w.mean_powered == 0.0);
        }
    }
}

#[test]
fn thinned_arrivals_follow_the_trace_hour_by_hour() {
    // Hourly rates between 0 and 400 on a 2000 h cycle.
    let points: Vec<(f64, f64)> = (0..2000)
        .map(|h| (h as f64, 200.0 + 200.0 * ((h as f64) * 0.37).sin()))
        .collect();
    let trace = RateTrace::new(points.clone(), 1.0).unwrap();
    let spec = WorkloadSpec {
        arrival_shape: Shape::Exponential,
        rate: ArrivalRate::Trace(trace),
        service_shape: Shape::Exponential,
        mean_service: 1.0,
        seed: 5,
    };
    let mut gen = WorkloadGenerator::new(spec).unwrap();
    let mut counts = vec![0u64; points.len()];
    let mut t = 0.0;
    while let Some(dt) = gen.next_interarrival(t) {
        t += dt;
        if t >= points.len() as f64 {
            break;
        }
        counts[t as usize] += 1;
    }
    let inside = points
        .iter()
        .zip(&counts)
        .filter(|((_, rate), &c)| (c as f64 - rate).abs() <= 3.0 * rate.sqrt() + 1e-9)
        .count();
    let share = inside as f64 / points.len() as f64;
    assert!(share >= 0.95, "only {share:.3} of hours inside the 3 sigma band");
}
