mod common;

use common::simpson;
use levybridge::bridge::BridgeSpec;
use levybridge::passage::{
    crossing_curve, crossing_probability, crossing_probability_unconditioned, first_passage_histogram,
    gaussian_bridge_discrete_crossing_prob, gaussian_bridge_fp_cdf, gaussian_bridge_fp_density, threshold_sweep,
    CrossingExperiment, Monitoring, SamplerKind, SweepConfig, Target, ThresholdUnit,
};
use levybridge::stable::StableParams;
use proptest::prelude::*;

fn bridge_exp(alpha: f64, l: f64, d: f64, depth: u32, n_paths: usize, seed: u64) -> CrossingExperiment {
    let spec = BridgeSpec::new(StableParams::new(alpha, 1.0).unwrap(), 1.0, l).unwrap();
    CrossingExperiment {
        target: Target::Bridge { spec },
        boundary: d,
        sampler: SamplerKind::Recursive { depth },
        monitoring: Monitoring::Sampled,
        n_paths,
        seed,
    }
}

fn within(a: f64, b: f64, se: f64, k: f64) -> bool {
    (a - b).abs() <= k * se
}

#[test]
fn bridge_crosses_less_than_the_free_process() {
    let params = StableParams::new(0.5, 1.0).unwrap();
    let bridge = crossing_probability(&bridge_exp(0.5, 0.0, 1.0, 8, 20_000, 1)).unwrap();
    let free = crossing_probability_unconditioned(params, 1.0, 1.0, 1.0 / 256.0, 20_000, 1).unwrap();
    assert!(bridge.estimate + 5.0 * bridge.std_error < free.estimate - 5.0 * free.std_error);
}

#[test]
fn standard_errors_are_binomial() {
    let e = crossing_probability(&bridge_exp(1.2, 0.5, 1.0, 6, 5_000, 2)).unwrap();
    let p = e.crossings as f64 / 5_000.0;
    assert_eq!(e.estimate, p);
    assert!((e.std_error - (p * (1.0 - p) / 5_000.0).sqrt()).abs() < 1e-15);
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let exp = bridge_exp(1.6, 1.0, 1.2, 7, 3_000, 11);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| crossing_probability(&exp).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn gaussian_bridge_matches_the_discrete_grid_oracle() {
    let (l, d, depth, n) = (0.3, 1.0, 3, 200_000);
    let e = crossing_probability(&bridge_exp(2.0, l, d, depth, n, 5)).unwrap();
    let exact = gaussian_bridge_discrete_crossing_prob(d, l, 1.0, 1.0, 1 << depth, 600).unwrap();
    assert!(within(e.estimate, exact, e.std_error, 4.0), "{} vs {exact}", e.estimate);
}

#[test]
fn continuous_monitoring_matches_the_reflection_formula() {
    let (l, d, n) = (0.3, 1.0, 100_000);
    let mut exp = bridge_exp(2.0, l, d, 4, n, 6);
    exp.monitoring = Monitoring::ContinuousGaussian;
    let e = crossing_probability(&exp).unwrap();
    // variance 2 sigma^2 t: P = exp(-d (d - L) / (sigma^2 T))
    let exact = (-d * (d - l)).exp();
    assert!(within(e.estimate, exact, e.std_error, 4.0), "{} vs {exact}", e.estimate);
}

#[test]
fn refinement_leaves_estimates_unchanged() {
    for alpha in [1.0, 1.5] {
        let a = crossing_probability(&bridge_exp(alpha, 0.0, 1.0, 10, 20_000, 21)).unwrap();
        let b = crossing_probability(&bridge_exp(alpha, 0.0, 1.0, 12, 20_000, 22)).unwrap();
        let se = a.std_error.hypot(b.std_error);
        assert!(within(a.estimate, b.estimate, se, 2.0), "alpha {alpha}: {} vs {}", a.estimate, b.estimate);
    }
}

#[test]
fn gaussian_first_passage_density_integrates_to_the_crossing_probability() {
    for &(d, l, sigma, t) in &[(1.0, 0.3, 0.8, 1.5), (0.7, -1.0, 1.0, 1.0), (0.5, 1.0, 1.0, 1.0)] {
        let total = simpson(|s| gaussian_bridge_fp_density(d, l, sigma, t, s).unwrap_or(0.0), 1e-12, t - 1e-12, 200_000);
        let want = if d > l { (-d * (d - l) / (sigma * sigma * t)).exp() } else { 1.0 };
        assert!((total - want).abs() < 1e-8, "{d} {l}: {total} vs {want}");
        for frac in [0.2, 0.5, 0.9] {
            let u = frac * t;
            let part = simpson(|s| gaussian_bridge_fp_density(d, l, sigma, t, s).unwrap_or(0.0), 1e-12, u, 100_000);
            assert!((part - gaussian_bridge_fp_cdf(d, l, sigma, t, u).unwrap()).abs() < 1e-8);
        }
    }
}

#[test]
fn sweep_cells_fail_independently() {
    let cfg = SweepConfig {
        alphas: vec![1.5],
        thresholds: vec![f64::INFINITY, 1e-9],
        unit: ThresholdUnit::Absolute,
        sigma: 1.0,
        total_time: 1.0,
        arrival: 0.0,
        boundary_scale: 1.0,
        depth: 6,
        n_paths: 200,
        seed: 0,
        max_attempts: 50,
    };
    let table = threshold_sweep(&cfg).unwrap();
    let failed: Vec<_> = table.cells.iter().filter(|c| c.error.is_some()).collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0].error_code, Some(4));
    assert!(table.cells.iter().filter(|c| c.error.is_none()).all(|c| c.estimate.is_some()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn crossing_curves_are_monotone(alpha in 0.6f64..2.0, l in -2.0f64..2.0, seed in 0u64..100) {
        let exp = bridge_exp(alpha, l, 1.0, 6, 400, seed);
        let ds = [0.25, 0.5, 1.0, 2.0, 4.0];
        let curve = crossing_curve(&exp, &ds).unwrap();
        for w in curve.windows(2) {
            prop_assert!(w[1].crossings <= w[0].crossings);
        }
        let single = crossing_probability(&CrossingExperiment { boundary: 1.0, ..exp }).unwrap();
        prop_assert_eq!(single.crossings, curve[2].crossings);
    }

    #[test]
    fn histograms_count_every_crosser(alpha in 0.6f64..2.0, l in 0.0f64..3.0, bins in 2usize..30, seed in 0u64..100) {
        let h = first_passage_histogram(&bridge_exp(alpha, l, 0.8, 6, 300, seed), bins).unwrap();
        prop_assert_eq!(h.counts.iter().sum::<u64>(), h.crossers());
        prop_assert_eq!(h.edges.len(), bins + 1);
        let p: f64 = h.uniform_step_expectation().iter().sum();
        prop_assert!((p - 1.0).abs() < 1e-12);
    }
}
