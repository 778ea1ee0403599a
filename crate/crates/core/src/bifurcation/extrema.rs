use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bridge::BridgeSpec;
use crate::error::{Error, Result};
use crate::roots::{bracketed, golden_max};
use crate::stable::{standard_law, standard_table, StandardLaw, StandardTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extremum {
    Max,
    Min,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub x: f64,
    pub kind: Extremum,
}

/// Magnitude of `psi'` that cannot be told apart from rounding: an absolute
/// floor plus a part relative to the two log-slopes being subtracted.
const SLOPE_NOISE: f64 = 1e-11;
const SLOPE_REL_NOISE: f64 = 1e-9;

/// Log-density derivatives of the standard law, `l = log g`.
#[derive(Clone, Debug)]
pub(crate) struct LogLaw {
    pub law: Arc<StandardLaw>,
    pub table: Arc<StandardTable>,
}

impl LogLaw {
    pub fn new(alpha: f64) -> Result<Self> {
        Ok(LogLaw {
            law: standard_law(alpha)?,
            table: standard_table(alpha)?,
        })
    }

    /// `[l, l', l'', l''']` at `z`, from the direct evaluator.
    pub fn derivs(&self, z: f64) -> [f64; 4] {
        log_derivs(&self.law, z, 3)
    }
}

pub(crate) fn log_derivs(law: &StandardLaw, z: f64, order: usize) -> [f64; 4] {
    let d = law.derivs(z, order);
    let l1 = d[1] / d[0];
    let r2 = d[2] / d[0];
    let l2 = r2 - l1 * l1;
    let l3 = d[3] / d[0] - 3.0 * l1 * r2 + 2.0 * l1 * l1 * l1;
    [d[0].ln(), l1, l2, l3]
}

/// `psi(u) = l(u) + l(lambda - u)`, the log of the unnormalized midpoint law in
/// half-time units.
#[derive(Clone, Debug)]
pub(crate) struct Psi<'a> {
    pub log: &'a LogLaw,
    pub lambda: f64,
}

impl Psi<'_> {
    pub fn value(&self, u: f64) -> f64 {
        self.log.derivs(u)[0] + self.log.derivs(self.lambda - u)[0]
    }

    pub fn d1(&self, u: f64) -> f64 {
        self.log.derivs(u)[1] - self.log.derivs(self.lambda - u)[1]
    }

    /// `psi'(u)` with its noise level.
    pub fn d1_noisy(&self, u: f64) -> (f64, f64) {
        let (a, b) = (self.log.derivs(u)[1], self.log.derivs(self.lambda - u)[1]);
        (a - b, SLOPE_NOISE.max(SLOPE_REL_NOISE * (a.abs() + b.abs())))
    }

    pub fn d2(&self, u: f64) -> f64 {
        self.log.derivs(u)[2] + self.log.derivs(self.lambda - u)[2]
    }

    /// Fast first derivative from the table, for scanning.
    pub fn d1_fast(&self, u: f64) -> f64 {
        self.log.table.dlog_pdf(u) - self.log.table.dlog_pdf(self.lambda - u)
    }

    /// `psi''` and `psi''''` at the centre.
    pub fn centre_taylor(&self) -> (f64, f64) {
        let d = self.log.law.derivs(0.5 * self.lambda, 4);
        let r: Vec<f64> = d.iter().map(|x| x / d[0]).collect();
        let l2 = r[2] - r[1] * r[1];
        let l4 = r[4] - 4.0 * r[1] * r[3] - 3.0 * r[2] * r[2] + 12.0 * r[1] * r[1] * r[2] - 6.0 * r[1].powi(4);
        (2.0 * l2, 2.0 * l4)
    }

    /// Roots of `psi'` in `(lambda/2, lambda)`, increasing, with their type.
    pub fn right_roots(&self) -> Result<Vec<(f64, Extremum)>> {
        let half = 0.5 * self.lambda;
        if half <= 0.0 {
            return Ok(Vec::new());
        }
        let n = ((half / 0.01).ceil() as usize).clamp(400, 200_000);
        let eps0 = half / n as f64;
        let kind = |f: f64| if f > 0.0 { Extremum::Max } else { Extremum::Min };
        // next to the centre psi' is odd in the offset e, psi''(h) e + psi''''(h) e^3 / 6,
        // and the direct difference of log-slopes loses everything to cancellation
        let (c2, c4) = self.centre_taylor();
        let taylor = |e: f64| c2 * e + c4 * e * e * e / 6.0;
        let d1 = |u: f64| if u - half <= eps0 { taylor(u - half) } else { self.d1(u) };
        let noisy = |u: f64| if u - half <= eps0 { (taylor(u - half), 0.0) } else { self.d1_noisy(u) };
        let mut roots = Vec::new();
        if c2 * c4 < 0.0 {
            let e = (-6.0 * c2 / c4).sqrt();
            if e < eps0 {
                roots.push((half + e, kind(c2)));
            }
        }
        // psi'(lambda) = l'(lambda) < 0 and every root lies below lambda, so the
        // grid runs up to lambda itself; at large lambda the outer maximum sits
        // about 1/lambda from it
        let grid: Vec<f64> = (1..=n).map(|k| half + half * k as f64 / n as f64).collect();
        let mut vals: Vec<f64> = grid.iter().map(|&u| self.d1_fast(u)).collect();
        vals[0] = taylor(eps0);
        let mut brackets = Vec::new();
        for k in 1..grid.len() {
            let (a, b) = (vals[k - 1], vals[k]);
            if a.signum() != b.signum() {
                brackets.push((grid[k - 1], grid[k]));
            } else if k + 1 < grid.len() {
                // a near-touching extremum of psi' may hide a pair of roots
                let c = vals[k + 1];
                let peak = (b > a && b > c && b < 0.0 && b > -1e-6) || (b < a && b < c && b > 0.0 && b < 1e-6);
                if peak {
                    // vm > 0 means psi' changes sign around the extremum
                    let sgn = b.signum();
                    let (um, vm) = golden_max(|u| -sgn * d1(u), grid[k - 1], grid[k + 1], 1e-12 * half);
                    if vm <= noisy(um).1 {
                        continue;
                    }
                    brackets.push((grid[k - 1], um));
                    brackets.push((um, grid[k + 1]));
                }
            }
        }
        let tol = 1e-15 * half.max(1.0);
        for (a, b) in brackets {
            let (fa, na) = noisy(a);
            let (fb, nb) = noisy(b);
            if fa.abs() < na && fb.abs() < nb {
                continue;
            }
            if fa.signum() != fb.signum() {
                roots.push((bracketed(d1, a, b, tol)?, kind(fa)));
                continue;
            }
            // the table saw a sign change that the direct derivative does not:
            // either a close pair of roots or table noise next to a touching point
            let sgn = fa.signum();
            let (um, vm) = golden_max(|u| -sgn * d1(u), a, b, 1e-12 * half);
            if vm <= noisy(um).1 {
                continue;
            }
            roots.push((bracketed(d1, a, um, tol)?, kind(fa)));
            roots.push((bracketed(d1, um, b, tol)?, kind(-fa)));
        }
        Ok(roots)
    }

    /// Type of the centre, from the curvature (fourth order when it vanishes).
    pub fn centre_kind(&self) -> Extremum {
        let c = self.d2(0.5 * self.lambda);
        if c < 0.0 {
            Extremum::Max
        } else if c > 0.0 {
            Extremum::Min
        } else {
            let d = self.log.law.derivs(0.5 * self.lambda, 4);
            let r4 = d[4] * d[0] - 4.0 * d[1] * d[3] + 3.0 * d[2] * d[2];
            if r4 <= 0.0 {
                Extremum::Max
            } else {
                Extremum::Min
            }
        }
    }
}

/// All critical points of the midpoint density, sorted by position. Points
/// off the centre come in pairs `x`, `L - x`.
pub fn midpoint_extrema(spec: BridgeSpec) -> Result<Vec<CriticalPoint>> {
    let log = LogLaw::new(spec.alpha())?;
    let s = spec.params.scale(0.5 * spec.total_time);
    let l = spec.arrival;
    let sign = if l < 0.0 { -1.0 } else { 1.0 };
    let psi = Psi {
        log: &log,
        lambda: l.abs() / s,
    };
    let centre = psi.centre_kind();
    let right = psi.right_roots()?;
    // going outward the types alternate and the last one is a maximum
    let kinds: Vec<Extremum> = std::iter::once(centre).chain(right.iter().map(|r| r.1)).collect();
    if kinds.windows(2).any(|w| w[0] == w[1]) || kinds[kinds.len() - 1] != Extremum::Max {
        return Err(Error::Resolution(format!(
            "critical points near the centre not resolved (lambda = {})",
            psi.lambda
        )));
    }
    let mut out = vec![CriticalPoint { x: 0.5 * l, kind: centre }];
    for (u, kind) in right {
        let x = sign * s * u;
        out.push(CriticalPoint { x, kind });
        out.push(CriticalPoint { x: l - x, kind });
    }
    out.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
    Ok(out)
}
