//! Tabulated evaluator for the standard law, built once per index.
//!
//! On `[0, Z]` (Z = tail-series threshold) the log-density and the survival
//! function are stored as quintic Hermite pieces on a grid uniform in
//! `s = asinh(z / a)`, with `a` the core width. Beyond `Z` both are evaluated
//! from the truncated tail series in `w = z^-alpha`, which keeps relative
//! accuracy arbitrarily far into the tails.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_PI, PI};
use std::sync::{Arc, Mutex, OnceLock};

use libm::erfc;
use rayon::prelude::*;

use super::law::StandardLaw;
use crate::error::Result;

/// Grid step in the asinh coordinate.
const GRID_STEP: f64 = 0.01;
/// Longest tail series evaluated beyond the tabulated core.
const MAX_TAIL_TERMS: usize = 10;

#[derive(Debug)]
enum Body {
    Gaussian,
    Cauchy,
    Tabulated(Grid),
}

#[derive(Debug)]
struct Grid {
    width: f64,
    step: f64,
    z_max: f64,
    /// Monomial coefficients (in the local coordinate t in [0,1]) per interval.
    log_pdf: Vec<[f64; 6]>,
    survival: Vec<[f64; 6]>,
    survival_nodes: Vec<f64>,
    /// Tail series coefficients in powers of w = z^-alpha.
    tail_pdf: Vec<f64>,
    tail_survival: Vec<f64>,
}

/// Fast evaluator of the standard symmetric stable law at one index.
#[derive(Debug)]
pub struct StandardTable {
    alpha: f64,
    law: Arc<StandardLaw>,
    pdf_zero: f64,
    body: Body,
}

fn cache() -> &'static Mutex<HashMap<u64, Arc<StandardTable>>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<StandardTable>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn law_cache() -> &'static Mutex<HashMap<u64, Arc<StandardLaw>>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<StandardLaw>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Shared direct evaluator for `alpha`.
pub fn standard_law(alpha: f64) -> Result<Arc<StandardLaw>> {
    if let Some(l) = law_cache().lock().unwrap().get(&alpha.to_bits()) {
        return Ok(l.clone());
    }
    let law = Arc::new(StandardLaw::new(alpha)?);
    law_cache()
        .lock()
        .unwrap()
        .insert(alpha.to_bits(), law.clone());
    Ok(law)
}

/// Shared table for `alpha`; built on first use, immutable afterwards.
pub fn standard_table(alpha: f64) -> Result<Arc<StandardTable>> {
    if let Some(t) = cache().lock().unwrap().get(&alpha.to_bits()) {
        return Ok(t.clone());
    }
    // Built outside the lock; a racing duplicate build is discarded.
    let table = Arc::new(StandardTable::build(standard_law(alpha)?)?);
    let mut guard = cache().lock().unwrap();
    Ok(guard.entry(alpha.to_bits()).or_insert(table).clone())
}

fn hermite5(p0: f64, d0: f64, c0: f64, p1: f64, d1: f64, c1: f64, h: f64) -> [f64; 6] {
    let (d0, d1) = (d0 * h, d1 * h);
    let (c0, c1) = (c0 * h * h, c1 * h * h);
    [
        p0,
        d0,
        0.5 * c0,
        -10.0 * p0 - 6.0 * d0 - 1.5 * c0 + 10.0 * p1 - 4.0 * d1 + 0.5 * c1,
        15.0 * p0 + 8.0 * d0 + 1.5 * c0 - 15.0 * p1 + 7.0 * d1 - c1,
        -6.0 * p0 - 3.0 * d0 - 0.5 * c0 + 6.0 * p1 - 3.0 * d1 + 0.5 * c1,
    ]
}

#[inline]
fn horner6(c: &[f64; 6], t: f64) -> f64 {
    ((((c[5] * t + c[4]) * t + c[3]) * t + c[2]) * t + c[1]) * t + c[0]
}

#[inline]
fn horner6_deriv(c: &[f64; 6], t: f64) -> f64 {
    (((5.0 * c[5] * t + 4.0 * c[4]) * t + 3.0 * c[3]) * t + 2.0 * c[2]) * t + c[1]
}

/// Polynomial value and derivative in w.
#[inline]
fn poly(c: &[f64], w: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut d = 0.0;
    for &a in c.iter().rev() {
        d = d * w + v;
        v = v * w + a;
    }
    (v, d)
}

impl StandardTable {
    fn build(law: Arc<StandardLaw>) -> Result<Self> {
        let alpha = law.alpha();
        let pdf_zero = law.pdf_at_zero();
        let body = if alpha == 2.0 {
            Body::Gaussian
        } else if alpha == 1.0 {
            Body::Cauchy
        } else {
            Body::Tabulated(Self::build_grid(&law)?)
        };
        Ok(StandardTable {
            alpha,
            law,
            pdf_zero,
            body,
        })
    }

    fn build_grid(law: &StandardLaw) -> Result<Grid> {
        let alpha = law.alpha();
        let curvature = libm::tgamma(3.0 / alpha) / alpha * FRAC_1_PI;
        let width = (law.pdf_at_zero() / curvature).sqrt();
        // push the core out until the tail series is short
        let mut z_max = law.series_threshold();
        while law.tail_terms(z_max) > MAX_TAIL_TERMS && z_max < 1e6 {
            z_max *= 1.5;
        }
        let s_max = (z_max / width).asinh();
        let n = (s_max / GRID_STEP).ceil() as usize;
        let step = s_max / n as f64;

        let nodes: Vec<Result<[f64; 6]>> = (0..=n)
            .into_par_iter()
            .map(|i| {
                let s = i as f64 * step;
                let z = if i == n { z_max } else { width * s.sinh() };
                let (d, surv) = law.checked_values(z, 2)?;
                let zp = width * s.cosh();
                let zpp = z;
                let l1 = d[1] / d[0];
                let l2 = d[2] / d[0] - l1 * l1;
                Ok([
                    d[0].ln(),
                    l1 * zp,
                    l2 * zp * zp + l1 * zpp,
                    surv,
                    -d[0] * zp,
                    -(d[1] * zp * zp + d[0] * zpp),
                ])
            })
            .collect();
        let nodes: Vec<[f64; 6]> = nodes.into_iter().collect::<Result<_>>()?;

        let mut log_pdf = Vec::with_capacity(n);
        let mut survival = Vec::with_capacity(n);
        for w in nodes.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            log_pdf.push(hermite5(a[0], a[1], a[2], b[0], b[1], b[2], step));
            survival.push(hermite5(a[3], a[4], a[5], b[3], b[4], b[5], step));
        }
        let survival_nodes = nodes.iter().map(|v| v[3]).collect();

        let terms = law.tail_terms(z_max);
        let coef = law.tail_coefficients();
        let tail_pdf: Vec<f64> = coef[..terms].to_vec();
        let tail_survival: Vec<f64> = coef[..terms]
            .iter()
            .enumerate()
            .map(|(k, b)| b / ((k + 1) as f64 * alpha))
            .collect();

        Ok(Grid {
            width,
            step,
            z_max,
            log_pdf,
            survival,
            survival_nodes,
            tail_pdf,
            tail_survival,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn law(&self) -> &Arc<StandardLaw> {
        &self.law
    }

    pub fn pdf_at_zero(&self) -> f64 {
        self.pdf_zero
    }

    /// Edge of the tabulated core; the tail series takes over beyond it.
    pub fn core_edge(&self) -> f64 {
        match &self.body {
            Body::Tabulated(g) => g.z_max,
            _ => f64::INFINITY,
        }
    }

    #[inline]
    pub fn pdf(&self, z: f64) -> f64 {
        let z = z.abs();
        match &self.body {
            Body::Gaussian => (-0.25 * z * z).exp() * (0.5 / PI.sqrt()),
            Body::Cauchy => FRAC_1_PI / (1.0 + z * z),
            Body::Tabulated(g) => {
                if z < g.z_max {
                    let (i, t) = g.locate(z);
                    horner6(&g.log_pdf[i], t).exp()
                } else {
                    let w = z.powf(-self.alpha);
                    w / z * poly(&g.tail_pdf, w).0
                }
            }
        }
    }

    pub fn log_pdf(&self, z: f64) -> f64 {
        let z = z.abs();
        match &self.body {
            Body::Gaussian => -0.25 * z * z + (0.5 / PI.sqrt()).ln(),
            Body::Cauchy => -(PI * (1.0 + z * z)).ln(),
            Body::Tabulated(g) => {
                if z < g.z_max {
                    let (i, t) = g.locate(z);
                    horner6(&g.log_pdf[i], t)
                } else {
                    let w = z.powf(-self.alpha);
                    (w / z * poly(&g.tail_pdf, w).0).ln()
                }
            }
        }
    }

    /// Derivative of the log-density.
    pub fn dlog_pdf(&self, z: f64) -> f64 {
        let sign = if z < 0.0 { -1.0 } else { 1.0 };
        let z = z.abs();
        let d = match &self.body {
            Body::Gaussian => -0.5 * z,
            Body::Cauchy => -2.0 * z / (1.0 + z * z),
            Body::Tabulated(g) => {
                if z < g.z_max {
                    let (i, t) = g.locate(z);
                    let ds = horner6_deriv(&g.log_pdf[i], t) / g.step;
                    ds / (g.width * (z / g.width).asinh().cosh())
                } else {
                    let w = z.powf(-self.alpha);
                    let (h, dh) = poly(&g.tail_pdf, w);
                    -(1.0 + self.alpha) / z - dh / h * self.alpha * w / z
                }
            }
        };
        sign * d
    }

    /// `P(Z > z)`, accurate in relative terms for large positive z.
    #[inline]
    pub fn survival(&self, z: f64) -> f64 {
        if z < 0.0 {
            return 1.0 - self.survival(-z);
        }
        match &self.body {
            Body::Gaussian => 0.5 * erfc(0.5 * z),
            Body::Cauchy => {
                if z == 0.0 {
                    0.5
                } else {
                    (1.0 / z).atan() * FRAC_1_PI
                }
            }
            Body::Tabulated(g) => {
                if z < g.z_max {
                    let (i, t) = g.locate(z);
                    horner6(&g.survival[i], t)
                } else {
                    let w = z.powf(-self.alpha);
                    w * poly(&g.tail_survival, w).0
                }
            }
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        if z < 0.0 {
            self.survival(-z)
        } else {
            1.0 - self.survival(z)
        }
    }

    /// Inverse of the survival function for `q` in (0, 1/2]; returns z >= 0.
    pub fn inverse_survival(&self, q: f64) -> f64 {
        debug_assert!(q > 0.0 && q <= 0.5);
        if q >= 0.5 {
            return 0.0;
        }
        match &self.body {
            Body::Gaussian => {
                let mut z = 2.0 * erfc_inv(2.0 * q);
                // Newton polish against the forward erfc.
                for _ in 0..3 {
                    let f = 0.5 * erfc(0.5 * z) - q;
                    let d = -(-0.25 * z * z).exp() * (0.5 / PI.sqrt());
                    if d == 0.0 {
                        break;
                    }
                    z -= f / d;
                }
                z
            }
            Body::Cauchy => 1.0 / (PI * q).tan(),
            Body::Tabulated(g) => {
                let edge = *g.survival_nodes.last().unwrap();
                if q >= edge {
                    g.invert_core(q)
                } else {
                    self.invert_tail(g, q)
                }
            }
        }
    }

    /// Quantile for `p` in (0, 1).
    pub fn quantile(&self, p: f64) -> f64 {
        if p < 0.5 {
            -self.inverse_survival(p)
        } else if p > 0.5 {
            self.inverse_survival(1.0 - p)
        } else {
            0.0
        }
    }

    fn invert_tail(&self, g: &Grid, q: f64) -> f64 {
        let w_max = g.z_max.powf(-self.alpha);
        let (c1, _) = poly(&g.tail_survival, 0.0);
        let mut w = (q / c1).min(w_max);
        let (mut lo, mut hi) = (0.0, w_max);
        for _ in 0..60 {
            let (c, dc) = poly(&g.tail_survival, w);
            let f = w * c - q;
            if f > 0.0 {
                hi = w;
            } else {
                lo = w;
            }
            let step = f / (c + w * dc);
            let mut next = w - step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - w).abs() <= 1e-15 * w {
                w = next;
                break;
            }
            w = next;
        }
        w.powf(-1.0 / self.alpha)
    }
}

impl Grid {
    #[inline]
    fn locate(&self, z: f64) -> (usize, f64) {
        // asinh for x >= 0; only absolute accuracy in s matters here
        let x = z / self.width;
        let s = (x + (x * x + 1.0).sqrt()).ln() / self.step;
        let i = (s as usize).min(self.log_pdf.len() - 1);
        (i, s - i as f64)
    }

    fn invert_core(&self, q: f64) -> f64 {
        // survival_nodes is decreasing
        let nodes = &self.survival_nodes;
        let mut lo = 0usize;
        let mut hi = nodes.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if nodes[mid] >= q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let c = &self.survival[lo];
        let (s0, s1) = (nodes[lo], nodes[lo + 1]);
        let mut t = if s0 != s1 { (s0 - q) / (s0 - s1) } else { 0.5 };
        let (mut tl, mut th) = (0.0, 1.0);
        for _ in 0..50 {
            let f = horner6(c, t) - q;
            if f > 0.0 {
                tl = t;
            } else {
                th = t;
            }
            let d = horner6_deriv(c, t);
            let mut next = if d != 0.0 { t - f / d } else { 0.5 * (tl + th) };
            if !(next >= tl && next <= th) {
                next = 0.5 * (tl + th);
            }
            if (next - t).abs() < 1e-15 {
                t = next;
                break;
            }
            t = next;
        }
        let s = (lo as f64 + t) * self.step;
        self.width * s.sinh()
    }
}

/// Inverse complementary error function (rational start + Newton on `erfc`).
fn erfc_inv(y: f64) -> f64 {
    // Solve erfc(x) = y for x; y in (0, 2).
    if y <= 0.0 {
        return f64::INFINITY;
    }
    if y >= 2.0 {
        return f64::NEG_INFINITY;
    }
    let mut x = {
        // Giles' single-precision approximation as a starting point.
        let w = -((2.0 - y) * y).ln();
        if w < 5.0 {
            let w = w - 2.5;
            let mut p = 2.810_226_36e-08;
            p = 3.432_739_39e-07 + p * w;
            p = -3.523_387_7e-06 + p * w;
            p = -4.391_506_54e-06 + p * w;
            p = 0.000_218_580_87 + p * w;
            p = -0.001_253_725_03 + p * w;
            p = -0.004_177_681_64 + p * w;
            p = 0.246_640_727 + p * w;
            p = 1.501_409_41 + p * w;
            p * (1.0 - y)
        } else {
            let w = w.sqrt() - 3.0;
            let mut p = -0.000_200_214_257;
            p = 0.000_100_950_558 + p * w;
            p = 0.001_349_343_22 + p * w;
            p = -0.003_673_428_44 + p * w;
            p = 0.005_739_507_73 + p * w;
            p = -0.007_622_461_3 + p * w;
            p = 0.009_438_870_47 + p * w;
            p = 1.001_674_06 + p * w;
            p = 2.832_976_82 + p * w;
            p * (1.0 - y)
        }
    };
    for _ in 0..4 {
        let f = erfc(x) - y;
        let d = -2.0 / PI.sqrt() * (-x * x).exp();
        if d == 0.0 {
            break;
        }
        x -= f / d;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_against_law(alpha: f64) {
        let table = standard_table(alpha).unwrap();
        let law = table.law().clone();
        let edge = table.core_edge().min(50.0);
        let mut worst_log: f64 = 0.0;
        let mut worst_surv: f64 = 0.0;
        for i in 0..400 {
            // off-node points across the core and into the tail
            let z = (i as f64 + 0.37) / 400.0 * 3.0 * edge;
            let (d, s) = law.checked_values(z, 0).unwrap();
            // relative accuracy, or absolute 1e-15 where quadrature noise dominates
            let rel = (table.log_pdf(z) - d[0].ln()).abs();
            if (table.pdf(z) - d[0]).abs() > 1e-15 {
                worst_log = worst_log.max(rel);
            }
            let abs = (table.survival(z) - s).abs();
            if abs > 1e-15 {
                worst_surv = worst_surv.max(abs / s.min(0.5));
            }
        }
        assert!(worst_log < 1e-9, "alpha={alpha} log-pdf err {worst_log:e}");
        assert!(worst_surv < 1e-9, "alpha={alpha} survival rel err {worst_surv:e}");
    }

    #[test]
    fn table_matches_direct_evaluation() {
        for &a in &[0.5, 0.8, 1.3, 1.5, 1.9, 1.99, 1.99999] {
            check_against_law(a);
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &a in &[0.5, 1.0, 1.5, 2.0, 1.99999] {
            let t = standard_table(a).unwrap();
            for &p in &[1e-9, 1e-4, 0.01, 0.2, 0.4999, 0.5, 0.7, 0.99] {
                let z = t.quantile(p);
                assert!((t.cdf(z) - p).abs() < 1e-12 * p.max(1e-3) + 1e-15, "alpha={a} p={p}");
            }
        }
    }

    #[test]
    fn log_derivative_matches_direct() {
        let t = standard_table(1.5).unwrap();
        for &z in &[0.3, 2.0, 9.0, 40.0] {
            let d = t.law().derivs(z, 1);
            assert!((t.dlog_pdf(z) - d[1] / d[0]).abs() < 1e-7 * (1.0 + (d[1] / d[0]).abs()), "z={z}");
            assert_eq!(t.dlog_pdf(-z), -t.dlog_pdf(z));
        }
    }
}
