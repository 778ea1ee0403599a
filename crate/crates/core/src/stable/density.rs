use std::f64::consts::PI;
use std::sync::Arc;

use super::params::{check_time, StableParams};
use super::table::{standard_law, standard_table, StandardTable};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Prepared evaluator of `f_alpha(x; t)` at fixed `(alpha, sigma, t)`.
///
/// All evaluations are rescalings of the shared standard table for `alpha`,
/// so constructing many of these at different times is cheap.
#[derive(Clone, Debug)]
pub struct StableDensity {
    params: StableParams,
    t: f64,
    scale: f64,
    table: Arc<StandardTable>,
}

impl StableDensity {
    pub fn new(params: StableParams, t: f64) -> Result<Self> {
        check_time(t)?;
        Ok(StableDensity {
            params,
            t,
            scale: params.scale(t),
            table: standard_table(params.alpha())?,
        })
    }

    pub fn params(&self) -> StableParams {
        self.params
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Length scale `sigma t^(1/alpha)`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn table(&self) -> &Arc<StandardTable> {
        &self.table
    }

    #[inline]
    pub fn pdf(&self, x: f64) -> f64 {
        self.table.pdf(x / self.scale) / self.scale
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        self.table.log_pdf(x / self.scale) - self.scale.ln()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.table.cdf(x / self.scale)
    }

    pub fn survival(&self, x: f64) -> f64 {
        self.table.survival(x / self.scale)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("probability must lie in (0, 1), got {p}")));
        }
        Ok(self.table.quantile(p) * self.scale)
    }

    /// Tabulation edge in x units; the analytic tail takes over beyond it.
    pub fn support_edge(&self) -> f64 {
        self.table.core_edge() * self.scale
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        self.scale * standard_variate(self.params.alpha(), rng)
    }
}

/// `f_alpha(x; t)` by direct evaluation (closed forms, tail series or quadrature).
pub fn stable_pdf(params: StableParams, t: f64, x: f64) -> Result<f64> {
    stable_pdf_derivative(params, t, x, 0)
}

/// n-th derivative in x of `f_alpha(x; t)`, for n in 0..=4.
pub fn stable_pdf_derivative(params: StableParams, t: f64, x: f64, order: usize) -> Result<f64> {
    check_time(t)?;
    if order > 4 {
        return Err(Error::domain(format!("derivative order must be at most 4, got {order}")));
    }
    let s = params.scale(t);
    let law = standard_law(params.alpha())?;
    let (d, _) = law.checked_values(x / s, order)?;
    Ok(d[order] / s.powi(order as i32 + 1))
}

/// All derivatives 0..=4 in one evaluation.
pub fn stable_pdf_derivatives(params: StableParams, t: f64, x: f64) -> Result<[f64; 5]> {
    check_time(t)?;
    let s = params.scale(t);
    let law = standard_law(params.alpha())?;
    let (mut d, _) = law.checked_values(x / s, 4)?;
    let mut f = s;
    for v in d.iter_mut() {
        *v /= f;
        f *= s;
    }
    Ok(d)
}

pub fn stable_cdf(params: StableParams, t: f64, x: f64) -> Result<f64> {
    check_time(t)?;
    if x == 0.0 {
        return Ok(0.5);
    }
    let s = params.scale(t);
    let law = standard_law(params.alpha())?;
    let (_, surv) = law.checked_values(x / s, 0)?;
    Ok(1.0 - surv)
}

pub fn stable_quantile(params: StableParams, t: f64, p: f64) -> Result<f64> {
    StableDensity::new(params, t)?.quantile(p)
}

/// One increment over `dt` (Chambers-Mallows-Stuck).
pub fn sample_stable_increment(params: StableParams, dt: f64, rng: &mut RngStream) -> Result<f64> {
    check_time(dt)?;
    Ok(params.scale(dt) * standard_variate(params.alpha(), rng))
}

/// Standard symmetric variate with characteristic function `exp(-|k|^alpha)`.
#[inline]
pub fn standard_variate(alpha: f64, rng: &mut RngStream) -> f64 {
    let v = PI * (rng.open01() - 0.5);
    if alpha == 1.0 {
        return v.tan();
    }
    let w = rng.exp1();
    cms_transform(alpha, v, w)
}

/// Chambers-Mallows-Stuck map from a uniform angle `v` in (-pi/2, pi/2) and a
/// unit exponential `w` to a standard symmetric stable variate.
#[inline]
pub fn cms_transform(alpha: f64, v: f64, w: f64) -> f64 {
    if alpha == 1.0 {
        v.tan()
    } else if alpha == 2.0 {
        2.0 * v.sin() * w.sqrt()
    } else {
        let c = v.cos();
        (alpha * v).sin() / c.powf(1.0 / alpha)
            * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
    }
}
