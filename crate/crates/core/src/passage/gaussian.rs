//! Exact first-passage results for the Gaussian case `alpha = 2`, where the
//! process is Brownian motion with variance `2 sigma^2 t`.

use std::f64::consts::{PI, SQRT_2};

use libm::erfc;

use crate::error::{Error, Result};

/// `log Phi(z)` for the standard normal CDF, accurate far into the lower tail.
pub(crate) fn ln_norm_cdf(z: f64) -> f64 {
    if z > -30.0 {
        (0.5 * erfc(-z / SQRT_2)).ln()
    } else {
        let r = 1.0 / (z * z);
        -0.5 * z * z - (-z * (2.0 * PI).sqrt()).ln() + (1.0 - r + 3.0 * r * r - 15.0 * r * r * r).ln()
    }
}

fn norm_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// Probability that a Brownian bridge from `a` to `b` over a time `span`,
/// with variance rate `v`, exceeds `d` somewhere. `a <= d` is assumed.
pub(crate) fn bridge_cross_prob(a: f64, b: f64, d: f64, v: f64, span: f64) -> f64 {
    if b > d {
        return 1.0;
    }
    (-2.0 * (d - a) * (d - b) / (v * span)).exp().min(1.0)
}

/// `P(tau <= t)` for the first time `tau` a Brownian bridge from `a` (time 0)
/// to `b` (time `span`) exceeds `d`, variance rate `v`, `a < d`.
///
/// Conditioning on the position `y` at time `t`, the crossing probability of
/// the sub-bridge on `[0, t]` is `exp(-2 (d - a)(d - y) / (v t))`; the Gaussian
/// integral over `y < d` is then done in closed form.
pub(crate) fn bridge_hit_cdf(a: f64, b: f64, d: f64, v: f64, span: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= span {
        return bridge_cross_prob(a, b, d, v, span);
    }
    let mu = a + (t / span) * (b - a);
    let var = v * t * (span - t) / span;
    let sd = var.sqrt();
    let k = 2.0 * (d - a) / (v * t);
    let direct = norm_sf((d - mu) / sd);
    let log_reflected = -k * (d - mu) + 0.5 * k * k * var + ln_norm_cdf((d - mu - k * var) / sd);
    (direct + log_reflected.exp()).min(1.0)
}

/// Crossing time within one step, given that the step crosses: inverts the
/// conditional CDF at `u` in (0, 1) by bisection. Returned as an offset in `(0, span]`.
pub(crate) fn sample_hit_time(a: f64, b: f64, d: f64, v: f64, span: f64, u: f64) -> f64 {
    let total = bridge_cross_prob(a, b, d, v, span);
    let target = u * total;
    let (mut lo, mut hi) = (0.0, span);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if bridge_hit_cdf(a, b, d, v, span, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn check(d: f64, sigma: f64, total_time: f64) -> Result<()> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::domain(format!("boundary must be positive and finite, got {d}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    crate::stable::check_time(total_time)
}

/// First-passage density of level `d > 0` at time `t` for the Brownian bridge
/// from 0 to `arrival` over `[0, T]`, variance `2 sigma^2 t`.
///
/// For `d < arrival` crossing is certain and the density integrates to one.
pub fn gaussian_bridge_fp_density(d: f64, arrival: f64, sigma: f64, total_time: f64, t: f64) -> Result<f64> {
    check(d, sigma, total_time)?;
    if !(t > 0.0 && t < total_time) {
        return Err(Error::domain(format!("t must lie in (0, T), got {t}")));
    }
    let v = 2.0 * sigma * sigma;
    let rest = total_time - t;
    let log_hit = d.ln() - 0.5 * (2.0 * PI * v * t * t * t).ln() - d * d / (2.0 * v * t);
    let log_after = -(arrival - d).powi(2) / (2.0 * v * rest) - 0.5 * (2.0 * PI * v * rest).ln();
    let log_total = -arrival * arrival / (2.0 * v * total_time) - 0.5 * (2.0 * PI * v * total_time).ln();
    Ok((log_hit + log_after - log_total).exp())
}

/// `P(tau <= t)` for the same bridge, in closed form.
pub fn gaussian_bridge_fp_cdf(d: f64, arrival: f64, sigma: f64, total_time: f64, t: f64) -> Result<f64> {
    check(d, sigma, total_time)?;
    Ok(bridge_hit_cdf(0.0, arrival, d, 2.0 * sigma * sigma, total_time, t.clamp(0.0, total_time)))
}

/// Probability that the bridge exceeds `d`: `exp(-d (d - L) / (sigma^2 T))`
/// for `d > L`, one otherwise.
pub fn gaussian_bridge_crossing_prob(d: f64, arrival: f64, sigma: f64, total_time: f64) -> Result<f64> {
    check(d, sigma, total_time)?;
    Ok(bridge_cross_prob(0.0, arrival, d, 2.0 * sigma * sigma, total_time))
}

/// Probability that Brownian motion (variance `2 sigma^2 t`) exceeds `d` before `T`.
pub fn gaussian_crossing_prob(d: f64, sigma: f64, total_time: f64) -> Result<f64> {
    check(d, sigma, total_time)?;
    Ok(erfc(d / (2.0 * sigma * total_time.sqrt())))
}

/// Crossing probability of the bridge watched only at `j T / n_steps`,
/// `j = 1..n_steps`, by propagating the killed transition density on a grid
/// of `grid` points below `d`. Cost is `O(n_steps grid^2)`.
pub fn gaussian_bridge_discrete_crossing_prob(
    d: f64,
    arrival: f64,
    sigma: f64,
    total_time: f64,
    n_steps: usize,
    grid: usize,
) -> Result<f64> {
    check(d, sigma, total_time)?;
    if n_steps == 0 || grid < 16 {
        return Err(Error::domain("need at least one step and 16 grid points"));
    }
    if arrival > d {
        return Ok(1.0);
    }
    let v = 2.0 * sigma * sigma;
    let dt = total_time / n_steps as f64;
    let step_var = v * dt;
    let phi = |x: f64| (-x * x / (2.0 * step_var)).exp() / (2.0 * PI * step_var).sqrt();
    if n_steps == 1 {
        return Ok(0.0);
    }
    let lo = arrival.min(0.0) - 12.0 * (v * total_time).sqrt();
    let h = (d - lo) / (grid - 1) as f64;
    let xs: Vec<f64> = (0..grid).map(|k| lo + h * k as f64).collect();
    let w: Vec<f64> = (0..grid).map(|k| if k == 0 || k == grid - 1 { 0.5 * h } else { h }).collect();
    let kernel: Vec<f64> = (0..grid).map(|k| phi(h * k as f64)).collect();
    let mut f: Vec<f64> = xs.iter().map(|&x| phi(x)).collect();
    let mut next = vec![0.0; grid];
    for _ in 1..n_steps - 1 {
        for (i, out) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..grid {
                acc += w[j] * f[j] * kernel[i.abs_diff(j)];
            }
            *out = acc;
        }
        std::mem::swap(&mut f, &mut next);
    }
    let survive: f64 = (0..grid).map(|j| w[j] * f[j] * phi(arrival - xs[j])).sum();
    let total = (-arrival * arrival / (2.0 * v * total_time)).exp() / (2.0 * PI * v * total_time).sqrt();
    Ok((1.0 - survive / total).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_scalar;

    #[test]
    fn density_integrates_to_crossing_probability() {
        for &(d, l) in &[(1.0, 0.0), (1.3, 0.4), (0.5, 1.0), (2.0, -1.0)] {
            let (q, _) = integrate_scalar(|t| gaussian_bridge_fp_density(d, l, 1.0, 1.0, t).unwrap_or(0.0), 0.0, 1.0, 1e-13);
            let want = if d > l { (-d * (d - l)).exp() } else { 1.0 };
            assert!((q - want).abs() < 1e-8, "{d} {l}: {q} vs {want}");
            assert!((gaussian_bridge_crossing_prob(d, l, 1.0, 1.0).unwrap() - want).abs() < 1e-15);
        }
    }

    #[test]
    fn cdf_matches_integrated_density() {
        let (d, l, s, tt) = (0.8, 0.3, 0.7, 1.5);
        for &t in &[0.05, 0.4, 0.75, 1.2, 1.49] {
            let (q, _) = integrate_scalar(|u| gaussian_bridge_fp_density(d, l, s, tt, u).unwrap_or(0.0), 0.0, t, 1e-14);
            let c = gaussian_bridge_fp_cdf(d, l, s, tt, t).unwrap();
            assert!((q - c).abs() < 1e-9, "t = {t}: {q} vs {c}");
        }
    }

    #[test]
    fn hit_cdf_matches_direct_integral_over_position() {
        // independent route: integrate the sub-bridge crossing probability over y
        let (a, b, d, v, span, t) = (-0.2, 0.1, 0.3, 2.0, 0.05, 0.02);
        let mu = a + t / span * (b - a);
        let var = v * t * (span - t) / span;
        let dens = |y: f64| (-(y - mu).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
        let cross = |y: f64| if y > d { 1.0 } else { (-2.0 * (d - a) * (d - y) / (v * t)).exp() };
        let sd = var.sqrt();
        let (lo, _) = integrate_scalar(|y| dens(y) * cross(y), mu - 12.0 * sd, d, 1e-15);
        let (hi, _) = integrate_scalar(dens, d, mu + 12.0 * sd, 1e-15);
        let c = bridge_hit_cdf(a, b, d, v, span, t);
        assert!((lo + hi - c).abs() < 1e-12, "{} vs {c}", lo + hi);
    }

    #[test]
    fn sampled_hit_time_inverts_cdf() {
        let (a, b, d, v, span) = (0.0, 0.05, 0.1, 2.0, 0.01);
        let total = bridge_cross_prob(a, b, d, v, span);
        for &u in &[0.1, 0.5, 0.9] {
            let t = sample_hit_time(a, b, d, v, span, u);
            assert!((bridge_hit_cdf(a, b, d, v, span, t) / total - u).abs() < 1e-10);
        }
    }

    #[test]
    fn unconditioned_reflection() {
        let p = gaussian_crossing_prob(1.0, 1.0, 1.0).unwrap();
        assert!((p - 2.0 * norm_sf(1.0 / 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn discrete_oracle_limits() {
        // one observation, at the arrival point below d
        assert_eq!(gaussian_bridge_discrete_crossing_prob(1.0, 0.0, 1.0, 1.0, 1, 64).unwrap(), 0.0);
        // two observations: only the midpoint can cross, N(0, sigma^2 T / 2)
        let p = gaussian_bridge_discrete_crossing_prob(1.0, 0.0, 1.0, 1.0, 2, 800).unwrap();
        assert!((p - norm_sf(2f64.sqrt())).abs() < 1e-4, "{p}");
        // finer monitoring approaches the continuous value from below
        let p16 = gaussian_bridge_discrete_crossing_prob(1.0, 0.0, 1.0, 1.0, 16, 600).unwrap();
        let exact = (-1.0f64).exp();
        assert!(p16 < exact && p16 > p);
    }

    #[test]
    fn domain_errors() {
        assert!(gaussian_bridge_fp_density(0.0, 0.0, 1.0, 1.0, 0.5).is_err());
        assert!(gaussian_bridge_fp_density(1.0, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(gaussian_bridge_crossing_prob(1.0, 0.0, -1.0, 1.0).is_err());
    }
}
