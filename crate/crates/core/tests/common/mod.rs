//! Oracles shared by the integration tests. Nothing here calls into the
//! crate's own quadrature or statistics code.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// Integral over `x = c + w sinh(s)`, `s` in `[-s_max, s_max]`, with
/// `n` Simpson panels. Heavy tails become smooth and short in `s`.
pub fn sinh_integral<F: Fn(f64) -> f64>(f: F, c: f64, w: f64, s_max: f64, n: usize) -> f64 {
    simpson(|s| f(c + w * s.sinh()) * w * s.cosh(), -s_max, s_max, n)
}

/// `lim x^(1+alpha) g(x)` for the standard symmetric law, `alpha < 2`.
pub fn tail_constant(alpha: f64) -> f64 {
    statrs::function::gamma::gamma(1.0 + alpha) * (PI * alpha / 2.0).sin() / PI
}

/// First `terms` of the large-`x` series of the standard density,
/// `(1/pi) sum (-1)^(k+1) Gamma(alpha k + 1) / k! sin(pi alpha k / 2) x^(-alpha k - 1)`.
pub fn tail_series(alpha: f64, x: f64, terms: usize) -> f64 {
    let mut s = 0.0;
    let mut fact = 1.0;
    for k in 1..=terms {
        let k = k as f64;
        fact *= k;
        let sign = if k as usize % 2 == 1 { 1.0 } else { -1.0 };
        s += sign * statrs::function::gamma::gamma(alpha * k + 1.0) / fact * (PI * alpha * k / 2.0).sin()
            * x.powf(-alpha * k - 1.0);
    }
    s / PI
}

/// Tabulated CDF of a density, by trapezoid on the sinh grid.
pub struct GridCdf {
    c: f64,
    w: f64,
    s0: f64,
    ds: f64,
    cum: Vec<f64>,
}

impl GridCdf {
    pub fn new<F: Fn(f64) -> f64>(f: F, c: f64, w: f64, s_max: f64, n: usize) -> Self {
        let ds = 2.0 * s_max / n as f64;
        let g: Vec<f64> = (0..=n)
            .map(|k| {
                let s = -s_max + k as f64 * ds;
                f(c + w * s.sinh()) * w * s.cosh()
            })
            .collect();
        let mut cum = vec![0.0; n + 1];
        for k in 1..=n {
            cum[k] = cum[k - 1] + 0.5 * ds * (g[k - 1] + g[k]);
        }
        let total = cum[n];
        for v in &mut cum {
            *v /= total;
        }
        GridCdf { c, w, s0: -s_max, ds, cum }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let s = ((x - self.c) / self.w).asinh();
        let r = (s - self.s0) / self.ds;
        if r <= 0.0 {
            return 0.0;
        }
        let k = r.floor() as usize;
        if k + 1 >= self.cum.len() {
            return 1.0;
        }
        let t = r - k as f64;
        self.cum[k] * (1.0 - t) + self.cum[k + 1] * t
    }
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        s += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

/// One-sample KS statistic and asymptotic p-value.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> (f64, f64) {
    let mut x = samples.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let en = n.sqrt();
    (d, kolmogorov_sf((en + 0.12 + 0.11 / en) * d))
}

/// Two-sample KS statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0, 0, 0f64);
    while i < n && j < m {
        let v = a[i].min(b[j]);
        while i < n && a[i] <= v {
            i += 1;
        }
        while j < m && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = (n as f64 * m as f64 / (n + m) as f64).sqrt();
    (d, kolmogorov_sf((en + 0.12 + 0.11 / en) * d))
}

/// Normal law with variance `2 sigma^2 t`, the `alpha = 2` member.
pub fn gaussian_pdf(sigma: f64, t: f64, x: f64) -> f64 {
    let v = 2.0 * sigma * sigma * t;
    (-x * x / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()
}

pub fn cauchy_pdf(sigma: f64, t: f64, x: f64) -> f64 {
    let s = sigma * t;
    s / (PI * (s * s + x * x))
}
