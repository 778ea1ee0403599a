use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::extrema::{log_derivs, Extremum, LogLaw, Psi};
use crate::error::{Error, Result};
use crate::roots::{bracketed, golden_max};
use crate::stable::{StableParams, StandardLaw};

/// Which structural change of the midpoint density defines `L_b`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// The centre changes curvature.
    #[default]
    Curvature,
    /// Side peaks are born.
    Tangent,
    /// Side peaks reach the height of the centre.
    EqualHeight,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Curvature, Criterion::Tangent, Criterion::EqualHeight];

    pub fn name(&self) -> &'static str {
        match self {
            Criterion::Curvature => "curvature",
            Criterion::Tangent => "tangent",
            Criterion::EqualHeight => "equal_height",
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "curvature" => Ok(Criterion::Curvature),
            "tangent" => Ok(Criterion::Tangent),
            "equal_height" | "equal-height" => Ok(Criterion::EqualHeight),
            _ => Err(Error::domain(format!("unknown criterion {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BifurcationLength {
    pub criterion: Criterion,
    pub length: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub total_time: f64,
    /// Defining residual at the solution, relative to the local scale.
    pub residual: f64,
}

/// Smallest `z > 0` where `(log g)''` changes sign, by outward scan and polish.
pub(crate) fn log_inflection(law: &StandardLaw) -> Result<f64> {
    let l2 = |z: f64| log_derivs(law, z, 2)[2];
    // small alpha concentrates the core, so start close enough to the origin
    let mut a = 1e-2;
    let mut fa = l2(a);
    while fa >= 0.0 && a > 1e-8 {
        a *= 0.1;
        fa = l2(a);
    }
    if fa >= 0.0 {
        return Err(Error::Resolution("log-density not concave at the origin".into()));
    }
    while a < 1e6 {
        let b = a * 1.05;
        let fb = l2(b);
        if fb > 0.0 {
            return bracketed(l2, a, b, 1e-14 * b);
        }
        a = b;
        fa = fb;
    }
    let _ = fa;
    Err(Error::Resolution("no inflection of the log-density below z = 1e6".into()))
}

fn check(alpha: f64, sigma: f64, total_time: f64) -> Result<f64> {
    let p = StableParams::new(alpha, sigma)?;
    crate::stable::check_time(total_time)?;
    if alpha == 2.0 {
        return Err(Error::Divergence("the bifurcation length diverges at alpha = 2".into()));
    }
    Ok(p.scale(0.5 * total_time))
}

/// `L_b` for the given criterion; the tangent and equal-height criteria exist
/// only above the critical index.
pub fn bifurcation_length(alpha: f64, sigma: f64, total_time: f64, criterion: Criterion) -> Result<BifurcationLength> {
    let s = check(alpha, sigma, total_time)?;
    let (lambda, residual) = match criterion {
        Criterion::Curvature => curvature_lambda(alpha)?,
        Criterion::Tangent | Criterion::EqualHeight => {
            let ac = alpha_critical()?;
            if alpha <= ac {
                return Err(Error::domain(format!(
                    "the {} criterion needs alpha above {ac:.7}, got {alpha}",
                    criterion.name()
                )));
            }
            let log = LogLaw::new(alpha)?;
            let (lc, _) = curvature_lambda(alpha)?;
            let (lt, rt) = tangent_lambda(&log, lc)?;
            if criterion == Criterion::Tangent {
                (lt, rt)
            } else {
                equal_height_lambda(&log, lt, lc)?
            }
        }
    };
    Ok(BifurcationLength {
        criterion,
        length: lambda * s,
        alpha,
        sigma,
        total_time,
        residual,
    })
}

/// Curvature criterion in half-time units: `lambda = 2 z*`.
fn curvature_lambda(alpha: f64) -> Result<(f64, f64)> {
    if alpha == 1.0 {
        return Ok((2.0, 0.0));
    }
    let law = crate::stable::standard_law(alpha)?;
    let z = log_inflection(&law)?;
    let d = log_derivs(&law, z, 2);
    Ok((2.0 * z, d[2].abs()))
}

/// Largest local maximum of `psi'` right of the centre, excluding the centre
/// region itself: `(position, value)`.
fn side_slope_peak(psi: &Psi) -> Result<Option<(f64, f64)>> {
    let half = 0.5 * psi.lambda;
    let n = ((half / 0.05).ceil() as usize).clamp(60, 4000);
    let grid: Vec<f64> = (1..n).map(|k| half + half * k as f64 / n as f64).collect();
    let curv: Vec<f64> = grid.iter().map(|&u| psi.d2(u)).collect();
    let mut best: Option<(f64, f64)> = None;
    for k in 1..grid.len() {
        // psi'' going from + to - marks a local max of psi'
        if curv[k - 1] > 0.0 && curv[k] <= 0.0 {
            let u = bracketed(|u| psi.d2(u), grid[k - 1], grid[k], 1e-14 * half)?;
            let v = psi.d1(u);
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((u, v));
            }
        }
    }
    Ok(best)
}

/// Tangent criterion: the smallest lambda at which `psi'` touches zero off the centre.
fn tangent_lambda(log: &LogLaw, lc: f64) -> Result<(f64, f64)> {
    let h = |lam: f64| -> Result<f64> {
        let psi = Psi { log, lambda: lam };
        Ok(side_slope_peak(&psi)?.map_or(f64::NEG_INFINITY, |(_, v)| v))
    };
    let hi = lc;
    if h(hi)? <= 0.0 {
        return Err(Error::Resolution(format!("no side peaks at the curvature length {lc}")));
    }
    let mut lo = hi;
    loop {
        lo *= 0.97;
        if lo < 1e-3 * lc {
            return Err(Error::Resolution("tangent length not bracketed".into()));
        }
        if h(lo)? < 0.0 {
            break;
        }
    }
    let (mut a, mut b) = (lo, lo / 0.97);
    while b - a > 1e-12 * b {
        let m = 0.5 * (a + b);
        if h(m)? < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    // residual: psi' and psi'' at the touching point
    let psi = Psi { log, lambda: b };
    let res = match side_slope_peak(&psi)? {
        Some((u, v)) => v.abs().max(psi.d2(u).abs()),
        None => f64::NAN,
    };
    Ok((b, res))
}

/// Highest side maximum right of the centre: `(position, psi)`.
fn side_peak(psi: &Psi) -> Result<Option<(f64, f64)>> {
    let mut best: Option<(f64, f64)> = None;
    for (u, kind) in psi.right_roots()? {
        if kind == Extremum::Max {
            let v = psi.value(u);
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((u, v));
            }
        }
    }
    Ok(best)
}

/// Equal-height criterion, bracketed between the tangent and curvature lengths.
fn equal_height_lambda(log: &LogLaw, lt: f64, lc: f64) -> Result<(f64, f64)> {
    let e = |lam: f64| -> Result<f64> {
        let psi = Psi { log, lambda: lam };
        let centre = psi.value(0.5 * lam);
        // just above the tangent length the side peak is barely resolved
        let peak = match side_peak(&psi)? {
            Some(p) => p,
            None => {
                let (u, _) = side_slope_peak(&psi)?.ok_or_else(|| Error::Resolution("side peak lost".into()))?;
                let (_, v) = golden_max(|x| psi.value(x), u - 0.5, u + 0.5, 1e-10);
                (u, v)
            }
        };
        Ok(peak.1 - centre)
    };
    // close to alpha_c the tangent and curvature lengths nearly coincide
    let (mut a, mut b) = (lt + 1e-3 * (lc - lt), lc);
    let (ea, eb) = (e(a)?, e(b)?);
    if !(ea < 0.0 && eb > 0.0) {
        return Err(Error::Resolution(format!(
            "equal-height length not bracketed on [{a}, {b}] ({ea:e}, {eb:e})"
        )));
    }
    while b - a > 1e-12 * b {
        let m = 0.5 * (a + b);
        if e(m)? < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok((b, e(b)?.abs()))
}

/// Solution of the critical-index system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalIndex {
    pub alpha: f64,
    /// Curvature length at `alpha`, for `sigma = T = 1`.
    pub length: f64,
    /// Second and fourth derivatives of the midpoint density at the centre,
    /// relative to its value there.
    pub residual_second: f64,
    pub residual_fourth: f64,
}

/// `(g g'' - g'^2, g g'''' - 4 g' g''' + 3 g''^2) / g^2` at `z`.
fn centre_pair(law: &StandardLaw, z: f64) -> (f64, f64) {
    let d = law.derivs(z, 4);
    let g2 = d[0] * d[0];
    (
        (d[0] * d[2] - d[1] * d[1]) / g2,
        (d[0] * d[4] - 4.0 * d[1] * d[3] + 3.0 * d[2] * d[2]) / g2,
    )
}

fn fourth_at_inflection(alpha: f64) -> Result<f64> {
    let law = StandardLaw::new(alpha)?;
    let z = log_inflection(&law)?;
    Ok(centre_pair(&law, z).1)
}

/// Index at which the second and fourth derivatives of the midpoint density
/// vanish together at the centre. Solved once and cached.
pub fn alpha_critical_solution() -> Result<CriticalIndex> {
    static CACHE: OnceLock<Result<CriticalIndex>> = OnceLock::new();
    CACHE.get_or_init(solve_critical).clone()
}

pub fn alpha_critical() -> Result<f64> {
    alpha_critical_solution().map(|c| c.alpha)
}

fn solve_critical() -> Result<CriticalIndex> {
    let alpha = bracketed(|a| fourth_at_inflection(a).unwrap_or(f64::NAN), 1.7, 1.9, 1e-11)?;
    let law = StandardLaw::new(alpha)?;
    let z = log_inflection(&law)?;
    // G'' = 2 g^2 r2 and G'''' = 2 g^2 r4 at the centre, relative to G = g^2
    let (r2, r4) = centre_pair(&law, z);
    let s = 0.5f64.powf(1.0 / alpha);
    Ok(CriticalIndex {
        alpha,
        length: 2.0 * z * s,
        residual_second: 2.0 * r2.abs(),
        residual_fourth: 2.0 * r4.abs(),
    })
}
