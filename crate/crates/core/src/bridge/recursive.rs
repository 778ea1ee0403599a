use std::sync::Arc;

use rayon::prelude::*;

use super::io::{Ensemble, EnsembleHeader, Schedule};
use super::{BridgeSpec, Path};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stable::{standard_table, standard_variate, StandardTable};

/// Below this acceptance rate the simple proposals give way to the piecewise envelope.
const MIN_ACCEPTANCE: f64 = 0.1;
const MAX_TRIES: u32 = 1_000_000;
/// Deepest supported bisection (2^26 + 1 points per path).
pub const MAX_DEPTH: u32 = 26;

/// Exact sampler for the normalized midpoint law `g(u) g(lambda - u)`, `g` the
/// standard law.
///
/// The proposal is the equal mixture of `g(u)` and `g(lambda - u)`. Where that
/// would accept rarely, a piecewise envelope on the left half is used instead,
/// followed by a reflection about `lambda / 2`.
#[derive(Clone, Debug)]
pub struct MidpointSampler {
    alpha: f64,
    table: Arc<StandardTable>,
    g0: f64,
    c: f64,
}

#[derive(Clone, Copy, Debug)]
struct Piece {
    a: f64,
    b: f64,
    mass: f64,
    /// Envelope `g(u) * k` when true, `k * g(lambda - u)` otherwise.
    left_factor: bool,
    k: f64,
}

impl MidpointSampler {
    pub fn new(alpha: f64) -> Result<Self> {
        let table = standard_table(alpha)?;
        Ok(MidpointSampler {
            alpha,
            g0: table.pdf(0.0),
            c: 0.5f64.powf(1.0 / alpha),
            table,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Density of the doubled-time law at `lambda`, which normalizes the target.
    #[inline]
    fn g2(&self, lambda: f64) -> f64 {
        self.c * self.table.pdf(self.c * lambda)
    }

    /// Draws `u` with density proportional to `g(u) g(lambda - u)`, `lambda >= 0`.
    pub fn sample(&self, lambda: f64, rng: &mut RngStream) -> Result<f64> {
        if self.alpha == 2.0 {
            return Ok(0.5 * lambda + rng.standard_normal());
        }
        let t = &*self.table;
        let g2 = self.g2(lambda);
        let gh = t.pdf(0.5 * lambda);
        // g(u) g(lambda - u) = H (g(u) + g(lambda - u)) / 2 with H the harmonic
        // mean, which is increasing in both values; one of them is at most
        // g(lambda / 2) and both are at most g(0).
        let bound = 2.0 * self.g0 * gh / (self.g0 + gh);
        if g2 / bound < MIN_ACCEPTANCE {
            return self.sample_enveloped(lambda, rng);
        }
        for _ in 0..MAX_TRIES {
            let mut u = standard_variate(self.alpha, rng);
            if rng.open01() < 0.5 {
                u = lambda - u;
            }
            let (p, q) = (t.pdf(u), t.pdf(lambda - u));
            if rng.open01() * bound * (p + q) <= 2.0 * p * q {
                return Ok(u);
            }
        }
        Err(self.exhausted(lambda))
    }

    fn exhausted(&self, lambda: f64) -> Error {
        Error::Accuracy {
            what: format!("midpoint rejection stalled at alpha = {}, lambda = {lambda}", self.alpha),
            bound: 0.0,
        }
    }

    /// `P(a < Z < b)` for the standard law, with `a, b` on one side of zero.
    #[inline]
    fn mass(&self, a: f64, b: f64) -> f64 {
        let t = &*self.table;
        if a >= 0.0 {
            t.survival(a) - t.survival(b)
        } else {
            t.survival(-b) - t.survival(-a)
        }
    }

    /// Standard-law draw restricted to `[a, b]`, both on one side of zero.
    fn restricted(&self, a: f64, b: f64, rng: &mut RngStream) -> f64 {
        if b <= 0.0 {
            return -self.restricted(-b, -a, rng);
        }
        let t = &*self.table;
        let (sa, sb) = (t.survival(a), t.survival(b));
        let q = sb + rng.open01() * (sa - sb);
        t.inverse_survival(q.clamp(f64::MIN_POSITIVE, 0.5)).clamp(a, b)
    }

    fn sample_enveloped(&self, lambda: f64, rng: &mut RngStream) -> Result<f64> {
        let t = &*self.table;
        let half = 0.5 * lambda;
        let slope = t.dlog_pdf(half).abs().max(t.dlog_pdf(lambda).abs());
        let m = ((half * slope).ceil() as usize + 1).min(256);
        let mut edges = vec![f64::NEG_INFINITY, -4.0, -1.0];
        for j in 0..=m {
            edges.push(half * j as f64 / m as f64);
        }
        let mut pieces = Vec::with_capacity(edges.len() - 1);
        let mut total = 0.0;
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            if !(b > a) {
                continue;
            }
            let sup_left = if b <= 0.0 { t.pdf(b) } else { t.pdf(a) };
            let ka = t.pdf(lambda - b);
            let mass_a = ka * self.mass(a, b);
            let mass_b = sup_left * self.mass(lambda - b, lambda - a);
            let piece = if mass_a <= mass_b {
                Piece { a, b, mass: mass_a, left_factor: true, k: ka }
            } else {
                Piece { a, b, mass: mass_b, left_factor: false, k: sup_left }
            };
            total += piece.mass;
            pieces.push(piece);
        }
        for _ in 0..MAX_TRIES {
            let mut pick = rng.open01() * total;
            let mut chosen = pieces[pieces.len() - 1];
            for p in &pieces {
                if pick < p.mass {
                    chosen = *p;
                    break;
                }
                pick -= p.mass;
            }
            let p = chosen;
            let (u, ratio) = if p.left_factor {
                let u = self.restricted(p.a, p.b, rng);
                (u, t.pdf(lambda - u) / p.k)
            } else {
                let u = lambda - self.restricted(lambda - p.b, lambda - p.a, rng);
                (u, t.pdf(u) / p.k)
            };
            if rng.open01() <= ratio {
                return Ok(if rng.open01() < 0.5 { u } else { lambda - u });
            }
        }
        Err(self.exhausted(lambda))
    }
}

/// Bisection sampler for bridges of fixed index, width, duration and depth.
///
/// Every bisection draws the midpoint of a sub-bridge from its exact
/// conditional law. Midpoints are drawn parent-first but handed to the visitor
/// in time order, so a walk can stop at the first point of interest.
#[derive(Clone, Debug)]
pub struct RecursiveSampler {
    spec: BridgeSpec,
    depth: u32,
    sampler: MidpointSampler,
    /// Half-interval scale at each bisection level.
    scales: Vec<f64>,
}

impl RecursiveSampler {
    pub fn new(spec: BridgeSpec, depth: u32) -> Result<Self> {
        if depth > MAX_DEPTH {
            return Err(Error::domain(format!("depth must be at most {MAX_DEPTH}, got {depth}")));
        }
        let scales = (0..depth)
            .map(|k| spec.params.scale(spec.total_time / 2f64.powi(k as i32 + 1)))
            .collect();
        Ok(RecursiveSampler {
            spec,
            depth,
            sampler: MidpointSampler::new(spec.alpha())?,
            scales,
        })
    }

    pub fn spec(&self) -> &BridgeSpec {
        &self.spec
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn n_points(&self) -> usize {
        (1usize << self.depth) + 1
    }

    pub fn times(&self) -> Vec<f64> {
        Path::grid(self.spec.total_time, 1 << self.depth)
    }

    /// Fills `buf` (length `2^depth + 1`) with one bridge to `arrival`,
    /// calling `visit(index, position)` for indices 1, 2, ... in order until it
    /// returns true. Returns the index at which the walk stopped. Entries past
    /// that index are left unspecified.
    pub fn walk<F>(&self, arrival: f64, rng: &mut RngStream, buf: &mut [f64], mut visit: F) -> Result<Option<usize>>
    where
        F: FnMut(usize, f64) -> bool,
    {
        let n = 1usize << self.depth;
        assert_eq!(buf.len(), n + 1, "buffer length must be 2^depth + 1");
        buf[0] = 0.0;
        buf[n] = arrival;
        self.fill(0, n, 0, rng, buf, &mut visit)
    }

    fn fill<F>(&self, lo: usize, hi: usize, level: usize, rng: &mut RngStream, buf: &mut [f64], visit: &mut F) -> Result<Option<usize>>
    where
        F: FnMut(usize, f64) -> bool,
    {
        if hi - lo == 1 {
            return Ok(if visit(hi, buf[hi]) { Some(hi) } else { None });
        }
        let mid = (lo + hi) / 2;
        let (xl, xr) = (buf[lo], buf[hi]);
        let span = xr - xl;
        let s = self.scales[level];
        let u = self.sampler.sample(span.abs() / s, rng)?;
        buf[mid] = if span < 0.0 { xl - s * u } else { xl + s * u };
        if let Some(i) = self.fill(lo, mid, level + 1, rng, buf, visit)? {
            return Ok(Some(i));
        }
        self.fill(mid, hi, level + 1, rng, buf, visit)
    }

    /// Samples a complete path into `buf`.
    pub fn fill_path(&self, rng: &mut RngStream, buf: &mut [f64]) -> Result<()> {
        self.walk(self.spec.arrival, rng, buf, |_, _| false).map(|_| ())
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<Path> {
        let mut buf = vec![0.0; self.n_points()];
        self.fill_path(rng, &mut buf)?;
        Ok(Path {
            times: self.times(),
            positions: buf,
        })
    }
}

/// Bridge on the dyadic grid `j T / 2^depth` by recursive midpoint sampling.
pub fn sample_bridge_recursive(spec: BridgeSpec, depth: u32, rng: &mut RngStream) -> Result<Path> {
    RecursiveSampler::new(spec, depth)?.sample(rng)
}

/// `n_paths` bridges in parallel; path `i` uses stream `i` of `seed`.
pub fn sample_ensemble(spec: BridgeSpec, depth: u32, n_paths: usize, seed: u64) -> Result<Ensemble> {
    let sampler = RecursiveSampler::new(spec, depth)?;
    let n = sampler.n_points();
    let mut positions = vec![0.0; n * n_paths];
    positions
        .par_chunks_mut(n)
        .enumerate()
        .try_for_each(|(i, chunk)| {
            let mut rng = RngStream::new(seed, i as u64);
            sampler.fill_path(&mut rng, chunk)
        })?;
    Ok(Ensemble {
        header: EnsembleHeader {
            spec,
            schedule: Schedule::Dyadic { depth },
            seed,
            n_points: n,
            n_paths,
        },
        positions,
    })
}
