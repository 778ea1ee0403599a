//! Near-Gaussian asymptotics: `f(x; 1) ~ f2(x; 1) + delta |x|^(delta - 3)` for
//! `delta = 2 - alpha` small and `|x|` large.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::roots::bracketed;
use crate::stable::{check_time, standard_law, StandardLaw};

/// Largest `delta` accepted by the asymptotic formulas.
pub const MAX_DELTA: f64 = 0.05;
/// Relative agreement that defines the crossover point.
const CROSSOVER_TOL: f64 = 0.01;
const SCAN_STEP: f64 = 0.01;

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= MAX_DELTA {
        Ok(())
    } else {
        Err(Error::domain(format!("delta must lie in (0, {MAX_DELTA}], got {delta}")))
    }
}

/// Unchecked asymptotic density and its first two derivatives at `z > 0`.
fn raw(delta: f64, z: f64) -> [f64; 3] {
    let a = (-0.25 * z * z).exp() * (0.5 / PI.sqrt());
    let b = delta * z.powf(delta - 3.0);
    [
        a + b,
        -0.5 * z * a + (delta - 3.0) * b / z,
        (0.25 * z * z - 0.5) * a + (delta - 3.0) * (delta - 4.0) * b / (z * z),
    ]
}

/// Crossover point: the upper end of the first window, scanning out from the
/// core, in which the asymptotic form agrees with the exact density to 1%.
pub fn nagaev_cutoff(delta: f64) -> Result<f64> {
    check_delta(delta)?;
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&v) = cache.lock().unwrap().get(&delta.to_bits()) {
        return Ok(v);
    }
    let law = standard_law(2.0 - delta)?;
    let gap = |z: f64| {
        let e = law.pdf(z);
        (raw(delta, z)[0] - e).abs() / e
    };
    let mut z = 0.5;
    let mut inside = false;
    let mut last_inside = f64::NAN;
    while z < 60.0 {
        let ok = gap(z) <= CROSSOVER_TOL;
        if ok {
            inside = true;
            last_inside = z;
        } else if inside {
            break;
        }
        z += SCAN_STEP;
    }
    if !inside {
        return Err(Error::Resolution(format!("no crossover window for delta = {delta}")));
    }
    cache.lock().unwrap().insert(delta.to_bits(), last_inside);
    Ok(last_inside)
}

/// Asymptotic near-Gaussian density at unit time, valid beyond [`nagaev_cutoff`].
pub fn nagaev_pdf(delta: f64, x: f64) -> Result<f64> {
    let cut = nagaev_cutoff(delta)?;
    if x.abs() < cut {
        return Err(Error::domain(format!(
            "|x| = {} is below the crossover {cut} for delta = {delta}",
            x.abs()
        )));
    }
    Ok(raw(delta, x.abs())[0])
}

/// `[-4 sigma^2 T log(pi delta^2 / 2)]^(1/2)`.
pub fn lb_asymptote(delta: f64, sigma: f64, total_time: f64) -> Result<f64> {
    check_delta(delta)?;
    check_time(total_time)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    Ok((-4.0 * sigma * sigma * total_time * (PI * delta * delta / 2.0).ln()).sqrt())
}

/// `(log f)''` of the corrected density: exact below the crossover, asymptotic beyond.
fn hybrid_log_curvature(law: &StandardLaw, delta: f64, cut: f64, z: f64) -> f64 {
    let d = if z <= cut {
        let d = law.derivs(z, 2);
        [d[0], d[1], d[2]]
    } else {
        raw(delta, z)
    };
    let l1 = d[1] / d[0];
    d[2] / d[0] - l1 * l1
}

/// Curvature bifurcation length computed from the corrected density.
pub fn nagaev_bifurcation_length(delta: f64, sigma: f64, total_time: f64) -> Result<f64> {
    let cut = nagaev_cutoff(delta)?;
    check_time(total_time)?;
    let law = standard_law(2.0 - delta)?;
    let c = |z: f64| hybrid_log_curvature(&law, delta, cut, z);
    let mut a = 0.05;
    while a < 200.0 {
        let b = a + 0.05;
        if c(a) < 0.0 && c(b) > 0.0 {
            let z = bracketed(c, a, b, 1e-13 * b)?;
            let alpha = 2.0 - delta;
            return Ok(2.0 * z * sigma * (0.5 * total_time).powf(1.0 / alpha));
        }
        a = b;
    }
    Err(Error::Resolution(format!("no inflection of the corrected density for delta = {delta}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn asymptote_value_and_monotonicity() {
        let v = lb_asymptote(0.01, 1.0, 1.0).unwrap();
        assert!((v - (-4.0 * (PI * 1e-4 / 2.0).ln()).sqrt()).abs() < 1e-12);
        assert!((v - 5.9190).abs() < 1e-4);
        assert!(lb_asymptote(0.001, 1.0, 1.0).unwrap() > v);
        assert!(lb_asymptote(0.06, 1.0, 1.0).is_err());
    }

    #[test]
    fn pdf_formula_and_domain() {
        let v = nagaev_pdf(0.01, 10.0).unwrap();
        let tail = 0.01 * 10f64.powf(-2.99);
        assert!((v - tail).abs() < 1e-3 * tail);
        assert!(nagaev_pdf(0.01, 0.5).is_err());
    }

    #[test]
    fn raw_derivatives_match_differences() {
        let (d, z, h) = (0.003, 5.3, 1e-4);
        let r = raw(d, z);
        let fd1 = (raw(d, z + h)[0] - raw(d, z - h)[0]) / (2.0 * h);
        let fd2 = (raw(d, z + h)[0] - 2.0 * r[0] + raw(d, z - h)[0]) / (h * h);
        assert!((r[1] - fd1).abs() < 1e-8 * r[1].abs());
        assert!((r[2] - fd2).abs() < 1e-5 * r[2].abs());
    }
}
