use std::f64::consts::{FRAC_1_PI, PI, SQRT_2};
use std::sync::Arc;

use libm::erfc;

use super::BridgeSpec;
use crate::error::{Error, Result};
use crate::quadrature::{gk31, integrate};
use crate::rng::RngStream;
use crate::stable::{standard_table, StandardTable};

/// Linear spacing of the CDF nodes near the modes and the centre, in half-time scale units.
const NODE_STEP: f64 = 0.05;
/// Half-width of the linearly spaced node patches.
const PATCH: f64 = 6.0;
/// Growth factor of the node spacing outside the patches.
const GROWTH: f64 = 1.1;
/// Standard-law survival at which the tabulation stops.
const TAIL_CUT: f64 = 1e-14;

/// The law of `x(T/2)` given `x(T) = L`, proportional to
/// `f(x; T/2) f(L - x; T/2)`.
///
/// Internally everything is expressed in the normalized variable `u = x / s`
/// (with the sign of `L` folded in), where `s` is the scale of the law at `T/2`.
/// In those units the density is `g(u) g(lambda - u) / g2(lambda)` with `g` the
/// standard law, `g2` its two-fold convolution and `lambda = |L| / s`.
#[derive(Clone, Debug)]
pub struct MidpointDensity {
    spec: BridgeSpec,
    table: Arc<StandardTable>,
    scale: f64,
    sign: f64,
    lambda: f64,
    norm: f64,
    cdf: Option<CdfTable>,
}

#[derive(Clone, Debug)]
struct CdfTable {
    /// Increasing nodes ending at `lambda / 2`.
    nodes: Vec<f64>,
    /// Cumulative probability at each node; the last entry is exactly 1/2.
    cum: Vec<f64>,
}

#[inline]
fn convolved_pdf(table: &StandardTable, lambda: f64) -> f64 {
    // the law at doubled time, in units of the half-time scale
    let c = 0.5f64.powf(1.0 / table.alpha());
    c * table.pdf(c * lambda)
}

impl MidpointDensity {
    /// Prepares the density and its inverse-CDF tabulation.
    pub fn new(spec: BridgeSpec) -> Result<Self> {
        let mut m = Self::evaluator(spec)?;
        if spec.alpha() != 2.0 {
            m.cdf = Some(m.build_cdf()?);
        }
        Ok(m)
    }

    /// Density-only evaluator; no tabulation is built.
    fn evaluator(spec: BridgeSpec) -> Result<Self> {
        let alpha = spec.alpha();
        let table = standard_table(alpha)?;
        let scale = spec.params.scale(0.5 * spec.total_time);
        let sign = if spec.arrival < 0.0 { -1.0 } else { 1.0 };
        let lambda = spec.arrival.abs() / scale;
        let norm = if alpha == 2.0 {
            1.0
        } else {
            convolved_pdf(&table, lambda)
        };
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Accuracy {
                what: format!("normalizer f(L; T) underflows at L = {}", spec.arrival),
                bound: norm,
            });
        }
        Ok(MidpointDensity {
            spec,
            table,
            scale,
            sign,
            lambda,
            norm,
            cdf: None,
        })
    }

    pub fn spec(&self) -> &BridgeSpec {
        &self.spec
    }

    /// Scale of the law at `T/2`.
    pub fn half_scale(&self) -> f64 {
        self.scale
    }

    /// `|L|` in units of the half-time scale.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    #[inline]
    fn to_u(&self, x: f64) -> f64 {
        self.sign * x / self.scale
    }

    #[inline]
    fn to_x(&self, u: f64) -> f64 {
        self.sign * u * self.scale
    }

    /// Density in normalized units.
    #[inline]
    fn density_u(&self, u: f64) -> f64 {
        let lam = self.lambda;
        if self.spec.alpha() == 2.0 {
            let v = u - 0.5 * lam;
            return (-0.5 * v * v).exp() / (2.0 * PI).sqrt();
        }
        if self.spec.alpha() == 1.0 {
            // Cauchy closed form: (4/pi) (1 + lam^2/4) / ((1 + u^2)(1 + (lam - u)^2)) in half units
            let r = lam - u;
            return 2.0 * FRAC_1_PI * (4.0 + lam * lam) / (4.0 * (1.0 + u * u) * (1.0 + r * r));
        }
        self.table.pdf(u) * self.table.pdf(lam - u) / self.norm
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.density_u(self.to_u(x)) / self.scale
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let u = self.to_u(x);
        let p = self.cdf_u(u);
        if self.sign < 0.0 {
            1.0 - p
        } else {
            p
        }
    }

    fn cdf_u(&self, u: f64) -> f64 {
        let half = 0.5 * self.lambda;
        if u > half {
            return 1.0 - self.cdf_u(self.lambda - u);
        }
        match &self.cdf {
            None => 0.5 * erfc(-(u - half) / SQRT_2),
            Some(c) => {
                if u <= c.nodes[0] {
                    return c.cum[0] * self.table.survival(-u) / self.table.survival(-c.nodes[0]);
                }
                let k = c.nodes.partition_point(|&n| n <= u) - 1;
                if u == c.nodes[k] {
                    return c.cum[k];
                }
                c.cum[k] + self.partial(c.nodes[k], u)
            }
        }
    }

    /// Probability mass on `[a, b]` in normalized units, for a short interval.
    fn partial(&self, a: f64, b: f64) -> f64 {
        let f = |u: f64| [self.density_u(u)];
        gk31(&f, a, b).0[0]
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("probability must lie in (0, 1), got {p}")));
        }
        let p = if self.sign < 0.0 { 1.0 - p } else { p };
        Ok(self.to_x(self.quantile_u(p)))
    }

    fn quantile_u(&self, p: f64) -> f64 {
        if p > 0.5 {
            return self.lambda - self.quantile_u(1.0 - p);
        }
        let half = 0.5 * self.lambda;
        let c = match &self.cdf {
            None => return half + self.table.quantile(p) / SQRT_2,
            Some(c) => c,
        };
        if p <= c.cum[0] {
            // beyond the tabulated range the shape of the standard law is used
            let q = self.table.survival(-c.nodes[0]) * p / c.cum[0];
            return -self.table.inverse_survival(q.min(0.5));
        }
        let k = (c.cum.partition_point(|&v| v < p) - 1).min(c.nodes.len() - 2);
        let (a, b) = (c.nodes[k], c.nodes[k + 1]);
        let target = p - c.cum[k];
        let span = c.cum[k + 1] - c.cum[k];
        let (mut lo, mut hi) = (a, b);
        let mut u = if span > 0.0 { a + (b - a) * target / span } else { 0.5 * (a + b) };
        for _ in 0..60 {
            let f = self.partial(a, u) - target;
            if f > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let d = self.density_u(u);
            let mut next = if d > 0.0 { u - f / d } else { 0.5 * (lo + hi) };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - u).abs() <= 1e-14 * (1.0 + u.abs()) || hi - lo <= 1e-15 * (1.0 + u.abs()) {
                return next;
            }
            u = next;
        }
        u
    }

    /// Inverse-CDF draw.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let p = rng.open01();
        self.to_x(self.quantile_u(if self.sign < 0.0 { 1.0 - p } else { p }))
    }

    fn build_cdf(&self) -> Result<CdfTable> {
        let half = 0.5 * self.lambda;
        let u_min = -self.table.inverse_survival(TAIL_CUT);
        let mut nodes = Vec::new();
        // patches around the mode at 0 and around the centre, geometric elsewhere
        for centre in [0.0, half] {
            let mut k = 0;
            loop {
                let d = k as f64 * NODE_STEP;
                if d > PATCH {
                    break;
                }
                nodes.push(centre - d);
                nodes.push(centre + d);
                k += 1;
            }
            let mut d = PATCH;
            while centre - d > u_min || centre + d < half {
                d *= GROWTH;
                nodes.push(centre - d);
                nodes.push(centre + d);
            }
        }
        nodes.push(u_min);
        nodes.retain(|&u| u >= u_min && u <= half);
        nodes.push(half);
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
        let n = nodes.len();
        nodes[n - 1] = half;

        let f = |u: f64| [self.density_u(u)];
        let mut pieces = Vec::with_capacity(n - 1);
        for w in nodes.windows(2) {
            let r = integrate(&f, w[0], w[1], [1e-15], 12);
            pieces.push(r.value[0]);
        }
        let body: f64 = pieces.iter().sum();
        let left = 0.5 - body;
        if !(left > -1e-9) {
            return Err(Error::Accuracy {
                what: "midpoint CDF tabulation exceeds one half".into(),
                bound: -left,
            });
        }
        let mut cum = Vec::with_capacity(n);
        let mut acc = left.max(0.0);
        cum.push(acc);
        for p in &pieces {
            acc += p;
            cum.push(acc);
        }
        cum[n - 1] = 0.5;
        Ok(CdfTable { nodes, cum })
    }
}

/// Conditional density of `x(T/2)` given `x(T) = L`.
pub fn midpoint_pdf(spec: BridgeSpec, x_half: f64) -> Result<f64> {
    Ok(MidpointDensity::evaluator(spec)?.pdf(x_half))
}

/// Midpoint density on a set of points, sharing one evaluator.
pub fn midpoint_pdf_grid(spec: BridgeSpec, xs: &[f64]) -> Result<Vec<f64>> {
    let m = MidpointDensity::evaluator(spec)?;
    Ok(xs.iter().map(|&x| m.pdf(x)).collect())
}

/// One inverse-CDF draw of the midpoint. Builds the tabulation on every call;
/// use [`MidpointDensity::sample`] for repeated draws.
pub fn sample_midpoint(spec: BridgeSpec, rng: &mut RngStream) -> Result<f64> {
    Ok(MidpointDensity::new(spec)?.sample(rng))
}
