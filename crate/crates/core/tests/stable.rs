mod common;

use common::*;
use levybridge::rng::RngStream;
use levybridge::stable::{
    stable_cdf, stable_pdf, stable_pdf_derivative, stable_quantile, standard_variate, StableParams,
};
use proptest::prelude::*;

fn p(alpha: f64, sigma: f64) -> StableParams {
    StableParams::new(alpha, sigma).unwrap()
}

#[test]
fn densities_normalize() {
    for alpha in [0.5, 0.8, 1.0, 1.3, 1.5, 1.8, 1.95, 1.99999, 2.0] {
        let f = |x: f64| stable_pdf(p(alpha, 1.0), 1.0, x).unwrap();
        let s_max: f64 = 30.0;
        let x_max = s_max.sinh();
        let core = sinh_integral(f, 0.0, 1.0, s_max, 60_000);
        let tail = if alpha < 2.0 {
            2.0 * tail_constant(alpha) * x_max.powf(-alpha) / alpha
        } else {
            0.0
        };
        assert!((core + tail - 1.0).abs() < 1e-6, "alpha {alpha}: {}", core + tail);
    }
}

#[test]
fn chapman_kolmogorov() {
    for &(alpha, t1, t2) in &[(0.8, 0.3, 0.7), (1.5, 1.0, 2.0), (1.9, 0.25, 0.25)] {
        let q = p(alpha, 1.3);
        for x in [0.0, 0.7, 2.5] {
            let conv = sinh_integral(
                |y| stable_pdf(q, t1, y).unwrap() * stable_pdf(q, t2, x - y).unwrap(),
                0.5 * x,
                1.0,
                25.0,
                20_000,
            );
            let direct = stable_pdf(q, t1 + t2, x).unwrap();
            assert!((conv - direct).abs() < 1e-4 * direct.max(1e-3), "{alpha} {x}: {conv} {direct}");
        }
    }
}

#[test]
fn tails_follow_the_power_law() {
    for alpha in [0.5, 1.2, 1.7, 1.9] {
        for x in [1e3, 1e5] {
            let f = stable_pdf(p(alpha, 1.0), 1.0, x).unwrap();
            let r = f / tail_series(alpha, x, 3);
            assert!((r - 1.0).abs() < 1e-6, "alpha {alpha}, x {x}: ratio {r}");
        }
        let x: f64 = 1e8;
        let r = stable_pdf(p(alpha, 1.0), 1.0, x).unwrap() * x.powf(1.0 + alpha) / tail_constant(alpha);
        assert!((r - 1.0).abs() < 1e-3, "alpha {alpha}: ratio {r}");
    }
}

#[test]
fn cms_variates_pass_ks() {
    for (k, alpha) in [0.6, 1.0, 1.5, 1.95].into_iter().enumerate() {
        let mut rng = RngStream::new(20_240 + k as u64, 0);
        let xs: Vec<f64> = (0..20_000).map(|_| standard_variate(alpha, &mut rng)).collect();
        let (d, pv) = ks_one_sample(&xs, |x| stable_cdf(p(alpha, 1.0), 1.0, x).unwrap());
        assert!(pv > 0.01, "alpha {alpha}: D = {d}, p = {pv}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_forms(sigma in 0.2f64..5.0, t in 0.05f64..4.0, x in -20.0f64..20.0) {
        let c = stable_pdf(p(1.0, sigma), t, x).unwrap();
        prop_assert!((c - cauchy_pdf(sigma, t, x)).abs() <= 1e-12 * cauchy_pdf(sigma, t, x).max(1e-300) + 1e-15);
        let g = stable_pdf(p(2.0, sigma), t, x).unwrap();
        prop_assert!((g - gaussian_pdf(sigma, t, x)).abs() <= 1e-10 * gaussian_pdf(sigma, t, x) + 1e-300);
    }

    #[test]
    fn scaling_covariance(alpha in 0.4f64..2.0, sigma in 0.2f64..5.0, t in 0.05f64..4.0, x in -30.0f64..30.0) {
        let s = sigma * t.powf(1.0 / alpha);
        let lhs = stable_pdf(p(alpha, sigma), t, x).unwrap();
        let rhs = stable_pdf(p(alpha, 1.0), 1.0, x / s).unwrap() / s;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
    }

    #[test]
    fn symmetric_and_monotone_cdf(alpha in 0.4f64..2.0, x in 0.0f64..50.0) {
        let q = p(alpha, 1.0);
        let a = stable_cdf(q, 1.0, x).unwrap();
        let b = stable_cdf(q, 1.0, -x).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-9);
        prop_assert!(stable_cdf(q, 1.0, x + 0.1).unwrap() >= a);
        prop_assert!(stable_pdf(q, 1.0, x + 0.1).unwrap() <= stable_pdf(q, 1.0, x).unwrap());
    }

    #[test]
    fn derivatives_match_finite_differences(alpha in 0.5f64..2.0, x in -6.0f64..6.0, order in 1usize..=4) {
        let q = p(alpha, 1.0);
        // near the origin at small alpha the high derivatives are huge, so the
        // stencil step has to be small for its h^4 error to stay below 1e-5
        let h = 2e-5;
        let lower = |y: f64| if order == 1 {
            stable_pdf(q, 1.0, y).unwrap()
        } else {
            stable_pdf_derivative(q, 1.0, y, order - 1).unwrap()
        };
        let fd = (lower(x - 2.0 * h) - 8.0 * lower(x - h) + 8.0 * lower(x + h) - lower(x + 2.0 * h)) / (12.0 * h);
        let exact = stable_pdf_derivative(q, 1.0, x, order).unwrap();
        prop_assert!((fd - exact).abs() < 1e-5, "order {}: fd {} exact {}", order, fd, exact);
    }

    #[test]
    fn quantile_inverts_cdf(alpha in 0.4f64..2.0, prob in 0.001f64..0.999, t in 0.1f64..3.0) {
        let q = p(alpha, 0.7);
        let x = stable_quantile(q, t, prob).unwrap();
        prop_assert!((stable_cdf(q, t, x).unwrap() - prob).abs() < 1e-9);
    }
}
