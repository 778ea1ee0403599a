//! Direct evaluation of the standard symmetric stable law, whose
//! characteristic function is `exp(-|k|^alpha)`.
//!
//! Three routes are combined:
//! - closed forms for alpha = 2 (Gaussian with variance 2) and alpha = 1 (Cauchy);
//! - the large-|z| power series in `z^-alpha`, convergent for alpha < 1 and
//!   asymptotic for 1 < alpha < 2, used once its error estimate is negligible;
//! - adaptive Gauss-Kronrod quadrature of the inversion integral
//!   `(1/pi) int_0^inf cos(kz) exp(-k^alpha) dk` and its z-derivatives elsewhere.

use std::f64::consts::{FRAC_1_PI, PI};

use libm::{erfc, lgamma as ln_gamma, tgamma as gamma};

use crate::error::{Error, Result};
use crate::quadrature;

const MAX_TERMS: usize = 400;
/// Relative error accepted from the tail series before falling back to quadrature.
const SERIES_REL_TOL: f64 = 1e-13;
/// Absolute quadrature target, relative to `int k^m exp(-k^alpha) dk`.
const QUAD_REL_TOL: f64 = 2e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Kind {
    Gaussian,
    Cauchy,
    General,
}

/// Evaluator for the standard law at a fixed index.
#[derive(Clone, Debug)]
pub struct StandardLaw {
    alpha: f64,
    kind: Kind,
    /// pdf series: sum_n pdf_coef[n] z^-(n alpha + 1), n = 1..
    pdf_coef: Vec<f64>,
    /// |pdf_coef| without the sine factor, used for truncation control.
    envelope: Vec<f64>,
    /// Derivative-kernel scales `int k^m exp(-k^alpha) dk / pi` for m = 0..4.
    moment: [f64; 5],
    cutoff: f64,
    series_from: f64,
}

/// Values of the density and its first four derivatives at one point.
pub type Derivs = [f64; 5];

impl StandardLaw {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 2], got {alpha}")));
        }
        let kind = if alpha == 2.0 {
            Kind::Gaussian
        } else if alpha == 1.0 {
            Kind::Cauchy
        } else {
            Kind::General
        };
        let mut pdf_coef = Vec::with_capacity(MAX_TERMS + 1);
        let mut envelope = Vec::with_capacity(MAX_TERMS + 1);
        pdf_coef.push(0.0);
        envelope.push(0.0);
        for n in 1..=MAX_TERMS {
            let nf = n as f64;
            let mag = (ln_gamma(nf * alpha + 1.0) - ln_gamma(nf + 1.0)).exp() * FRAC_1_PI;
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            let s = (nf * PI * alpha / 2.0).sin();
            pdf_coef.push(sign * s * mag);
            envelope.push(mag);
        }
        let mut moment = [0.0; 5];
        for (m, slot) in moment.iter_mut().enumerate() {
            *slot = gamma((m as f64 + 1.0) / alpha) / alpha * FRAC_1_PI;
        }
        // exp(-K^alpha) K^4 is far below double precision beyond K.
        let mut cutoff = 50f64.powf(1.0 / alpha);
        for _ in 0..20 {
            cutoff = (50.0 + 5.0 * (cutoff + 1.0).ln()).powf(1.0 / alpha);
        }
        let mut law = StandardLaw {
            alpha,
            kind,
            pdf_coef,
            envelope,
            moment,
            cutoff,
            series_from: f64::INFINITY,
        };
        if kind == Kind::General {
            law.series_from = law.find_series_threshold();
        }
        Ok(law)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Smallest |z| beyond which the tail series is used.
    pub fn series_threshold(&self) -> f64 {
        self.series_from
    }

    /// Density at the origin, `Gamma(1 + 1/alpha) / pi`.
    pub fn pdf_at_zero(&self) -> f64 {
        gamma(1.0 + 1.0 / self.alpha) * FRAC_1_PI
    }

    /// Coefficients `b_n` of the tail expansion `pdf(z) ~ sum b_n z^-(n alpha + 1)`.
    pub fn tail_coefficients(&self) -> &[f64] {
        &self.pdf_coef[1..]
    }

    /// Stable tail constant: `pdf(z) |z|^(alpha+1) -> Gamma(alpha+1) sin(pi alpha/2) / pi`.
    pub fn tail_constant(&self) -> f64 {
        self.pdf_coef[1]
    }

    pub fn pdf(&self, z: f64) -> f64 {
        self.derivs(z, 0)[0]
    }

    /// Density and derivatives up to `max_order` (at most 4). Higher entries are zero.
    pub fn derivs(&self, z: f64, max_order: usize) -> Derivs {
        let max_order = max_order.min(4);
        let za = z.abs();
        let mut d = match self.kind {
            Kind::Gaussian => gaussian_derivs(za),
            Kind::Cauchy => cauchy_derivs(za),
            Kind::General => {
                if za >= self.series_from {
                    let mut out = [0.0; 5];
                    for (m, slot) in out.iter_mut().enumerate().take(max_order + 1) {
                        *slot = self.series_pdf(za, m).0;
                    }
                    out
                } else {
                    let q = self.quadrature(za, max_order);
                    [q[0], q[1], q[2], q[3], q[4]]
                }
            }
        };
        for (m, slot) in d.iter_mut().enumerate() {
            if m > max_order {
                *slot = 0.0;
            } else if z < 0.0 && m % 2 == 1 {
                *slot = -*slot;
            }
        }
        d
    }

    /// Upper tail probability `P(Z > z)`.
    pub fn survival(&self, z: f64) -> f64 {
        if z < 0.0 {
            return 1.0 - self.survival(-z);
        }
        match self.kind {
            Kind::Gaussian => 0.5 * erfc(z / 2.0),
            Kind::Cauchy => {
                if z == 0.0 {
                    0.5
                } else {
                    (1.0 / z).atan() * FRAC_1_PI
                }
            }
            Kind::General => {
                if z == 0.0 {
                    0.5
                } else if z >= self.series_from {
                    self.series_survival(z).0
                } else {
                    0.5 - self.quadrature(z, 0)[5]
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

    /// Tail series for the m-th derivative at z > 0: (value, error estimate).
    pub(crate) fn series_pdf(&self, z: f64, m: usize) -> (f64, f64) {
        self.series(z, |n| {
            let nf = n as f64 * self.alpha;
            let mut d = 1.0;
            for j in 1..=m {
                d *= nf + j as f64;
            }
            let sign = if m % 2 == 1 { -1.0 } else { 1.0 };
            (sign * d, -(nf + 1.0 + m as f64))
        }, m)
    }

    /// Tail series for the survival function at z > 0: (value, error estimate).
    pub(crate) fn series_survival(&self, z: f64) -> (f64, f64) {
        self.series(z, |n| {
            let nf = n as f64 * self.alpha;
            (1.0 / nf, -nf)
        }, 0)
    }

    fn series<F>(&self, z: f64, factor: F, order: usize) -> (f64, f64)
    where
        F: Fn(usize) -> (f64, f64),
    {
        let lz = z.ln();
        let asymptotic = self.alpha > 1.0;
        let mut sum = 0.0;
        let mut abs_sum = 0.0;
        let mut prev_env = f64::INFINITY;
        let mut err = f64::INFINITY;
        for n in 1..=MAX_TERMS {
            let (mult, power) = factor(n);
            let scale = (power * lz).exp() * mult;
            let env = (self.envelope[n] * scale).abs();
            if asymptotic && n > 1 && env > prev_env {
                err = env;
                break;
            }
            let term = self.pdf_coef[n] * scale;
            sum += term;
            abs_sum += term.abs();
            if env < 1e-17 * sum.abs() {
                err = env;
                break;
            }
            prev_env = env;
        }
        err += 4.0 * f64::EPSILON * abs_sum;
        if asymptotic {
            // Exponentially small remainder invisible to the power series.
            let expo = (self.alpha - 1.0) * (z / self.alpha).powf(self.alpha / (self.alpha - 1.0));
            err += (-expo).exp() * (1.0 + z).powi(order as i32);
        }
        (sum, err)
    }

    fn series_ok(&self, z: f64) -> bool {
        let (s, e) = self.series_survival(z);
        if !(e <= SERIES_REL_TOL * s.abs()) {
            return false;
        }
        (0..=4).all(|m| {
            let (v, e) = self.series_pdf(z, m);
            e <= SERIES_REL_TOL * v.abs()
        })
    }

    fn find_series_threshold(&self) -> f64 {
        let mut z = 0.05;
        while z < 1e6 {
            if self.series_ok(z) && self.series_ok(1.5 * z) && self.series_ok(3.0 * z) {
                return z;
            }
            z *= 1.05;
        }
        f64::INFINITY
    }

    /// Density derivatives and survival at z >= 0 in one pass; reports an
    /// accuracy error if the quadrature did not converge.
    pub fn checked_values(&self, z: f64, max_order: usize) -> Result<(Derivs, f64)> {
        let za = z.abs();
        if self.kind != Kind::General || za >= self.series_from {
            return Ok((self.derivs(z, max_order), self.survival(z)));
        }
        let (q, err, converged) = self.quadrature_with_error(za, max_order);
        if !converged {
            return Err(Error::Accuracy {
                what: format!("inversion integral at alpha={}, z={z}", self.alpha),
                bound: err,
            });
        }
        let mut d = [q[0], q[1], q[2], q[3], q[4]];
        for (m, slot) in d.iter_mut().enumerate() {
            if m > max_order {
                *slot = 0.0;
            } else if z < 0.0 && m % 2 == 1 {
                *slot = -*slot;
            }
        }
        let surv = if z < 0.0 { 0.5 + q[5] } else { 0.5 - q[5] };
        Ok((d, surv))
    }

    /// Number of tail-series terms needed at `z` for the density and survival.
    pub(crate) fn tail_terms(&self, z: f64) -> usize {
        let lz = z.ln();
        let mut needed = 1;
        for (n, env) in self.envelope.iter().enumerate().skip(1) {
            let nf = n as f64 * self.alpha;
            let e = env * (-(nf + 1.0) * lz).exp();
            let prev = self.envelope[n - 1] * (-(nf - self.alpha + 1.0) * lz).exp();
            if self.alpha > 1.0 && n > 1 && e > prev {
                break;
            }
            needed = n;
            if e < 1e-18 * self.envelope[1] * (-(self.alpha + 1.0) * lz).exp() {
                break;
            }
        }
        needed
    }

    /// Quadrature of the inversion integral at z >= 0.
    /// Returns [pdf, d1, d2, d3, d4, cdf - 1/2].
    pub(crate) fn quadrature(&self, z: f64, max_order: usize) -> [f64; 6] {
        self.quadrature_with_error(z, max_order).0
    }

    fn quadrature_with_error(&self, z: f64, max_order: usize) -> ([f64; 6], f64, bool) {
        let alpha = self.alpha;
        let integrand = |k: f64| -> [f64; 6] {
            let e = (-k.powf(alpha)).exp();
            let (s, c) = (k * z).sin_cos();
            let k2 = k * k;
            let sinc = if k * z < 1e-8 { z } else { s / k };
            [
                c * e,
                -k * s * e,
                -k2 * c * e,
                k2 * k * s * e,
                k2 * k2 * c * e,
                sinc * e,
            ]
        };
        let mut tol = [0.0; 6];
        for m in 0..5 {
            tol[m] = if m <= max_order {
                QUAD_REL_TOL * self.moment[m] * PI
            } else {
                f64::INFINITY
            };
        }
        tol[5] = QUAD_REL_TOL * PI * (1.0 + z);

        let mut total = [0.0; 6];
        let mut edges = vec![0.0];
        // Geometric grading resolves the k^alpha behaviour at the origin.
        let mut k = 1e-10;
        while k < 1.0 {
            edges.push(k);
            k *= 4.0;
        }
        let mut k = 1.0;
        let period = if z > 0.0 { PI / z } else { f64::INFINITY };
        while k < self.cutoff {
            edges.push(k);
            let w = period.min((0.5 * k).max(0.5));
            k += w;
        }
        edges.push(self.cutoff);
        let n_panels = edges.len() - 1;
        let mut panel_tol = tol;
        for t in panel_tol.iter_mut() {
            *t /= n_panels as f64;
        }
        let mut converged = true;
        let mut err: f64 = 0.0;
        for w in edges.windows(2) {
            let r = quadrature::integrate(&integrand, w[0], w[1], panel_tol, 16);
            converged &= r.converged;
            for i in 0..6 {
                total[i] += r.value[i];
            }
            err = err.max(r.error[0]);
        }
        for v in total.iter_mut() {
            *v *= FRAC_1_PI;
        }
        (total, err * FRAC_1_PI, converged)
    }
}

fn gaussian_derivs(z: f64) -> Derivs {
    // pdf = phi(u)/sqrt(2) with u = z/sqrt(2); d^m/dz^m = (1/sqrt 2)^(m+1) phi^(m)(u)
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let u = z * r;
    let phi = (-0.5 * u * u).exp() / (2.0 * PI).sqrt();
    let he = [1.0, u, u * u - 1.0, u * u * u - 3.0 * u, u.powi(4) - 6.0 * u * u + 3.0];
    let mut out = [0.0; 5];
    let mut f = r;
    for m in 0..5 {
        let sign = if m % 2 == 1 { -1.0 } else { 1.0 };
        out[m] = sign * he[m] * phi * f;
        f *= r;
    }
    out
}

fn cauchy_derivs(z: f64) -> Derivs {
    let q = 1.0 + z * z;
    let z2 = z * z;
    [
        FRAC_1_PI / q,
        -2.0 * z * FRAC_1_PI / (q * q),
        (6.0 * z2 - 2.0) * FRAC_1_PI / q.powi(3),
        -24.0 * z * (z2 - 1.0) * FRAC_1_PI / q.powi(4),
        24.0 * (5.0 * z2 * z2 - 10.0 * z2 + 1.0) * FRAC_1_PI / q.powi(5),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms_at_origin() {
        let g = StandardLaw::new(2.0).unwrap();
        assert!((g.pdf(0.0) - 0.5 / PI.sqrt()).abs() < 1e-15);
        let c = StandardLaw::new(1.0).unwrap();
        assert!((c.pdf(0.0) - FRAC_1_PI).abs() < 1e-15);
        assert!((c.derivs(0.0, 2)[2] + 2.0 * FRAC_1_PI).abs() < 1e-15);
        assert!((c.cdf(1.0) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn quadrature_reproduces_closed_forms() {
        // The General route is forced by evaluating the integrals directly.
        let mut g = StandardLaw::new(2.0).unwrap();
        g.kind = Kind::General;
        for &z in &[0.0, 0.3, 1.7, 4.0] {
            let q = g.quadrature(z, 4);
            let exact = gaussian_derivs(z);
            for m in 0..5 {
                assert!((q[m] - exact[m]).abs() < 1e-12, "m={m} z={z}");
            }
            let s = 0.5 - q[5];
            assert!((s - 0.5 * erfc(z / 2.0)).abs() < 1e-13, "z={z} {s} {}", 0.5 * erfc(z / 2.0));
        }
        let mut c = StandardLaw::new(1.0).unwrap();
        c.kind = Kind::General;
        for &z in &[0.0, 0.5, 2.0, 7.0] {
            let q = c.quadrature(z, 4);
            let exact = cauchy_derivs(z);
            for m in 0..5 {
                assert!((q[m] - exact[m]).abs() < 1e-11, "m={m} z={z} {} {}", q[m], exact[m]);
            }
        }
    }

    #[test]
    fn zero_argument_identity() {
        for &a in &[0.5, 0.8, 1.3, 1.5, 1.9, 1.99] {
            let law = StandardLaw::new(a).unwrap();
            assert!((law.pdf(0.0) - law.pdf_at_zero()).abs() < 1e-12, "alpha={a}");
        }
        let law = StandardLaw::new(1.5).unwrap();
        assert!((law.pdf(0.0) - 0.287_352_751_452_164_5).abs() < 1e-12);
    }

    #[test]
    fn series_and_quadrature_agree_near_threshold() {
        for &a in &[0.5, 0.7, 1.2, 1.5, 1.8, 1.95] {
            let law = StandardLaw::new(a).unwrap();
            let z = law.series_threshold() * 1.1;
            let q = law.quadrature(z, 4);
            for m in 0..5 {
                let (s, _) = law.series_pdf(z, m);
                assert!((s - q[m]).abs() < 1e-11 * law.moment[m].max(1.0), "alpha={a} m={m} {s} {}", q[m]);
            }
            let (s, _) = law.series_survival(z);
            assert!((s - (0.5 - q[5])).abs() < 1e-12, "alpha={a}");
        }
    }

    #[test]
    fn symmetry_of_derivatives() {
        let law = StandardLaw::new(1.3).unwrap();
        let p = law.derivs(0.8, 4);
        let n = law.derivs(-0.8, 4);
        for m in 0..5 {
            let s = if m % 2 == 1 { -1.0 } else { 1.0 };
            assert_eq!(p[m], s * n[m]);
        }
        assert_eq!(law.derivs(0.0, 1)[1], 0.0);
    }
}
