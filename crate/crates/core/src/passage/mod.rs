//! Boundary crossing and first-passage statistics by Monte Carlo.
//!
//! A path crosses when a position strictly exceeds the boundary `d`. Paths are
//! watched at their sampled times, except under [`Monitoring::ContinuousGaussian`]
//! at `alpha = 2`, where each step is treated as a Brownian bridge and its
//! crossing (and crossing time) is drawn exactly.

mod gaussian;
mod histogram;
mod sweep;

pub use gaussian::{
    gaussian_bridge_crossing_prob, gaussian_bridge_discrete_crossing_prob, gaussian_bridge_fp_cdf,
    gaussian_bridge_fp_density, gaussian_crossing_prob,
};
pub use histogram::{chi_square, first_passage_histogram, ChiSquare, FirstPassageHistogram};
pub use sweep::{threshold_sweep, SweepCell, SweepConfig, SweepTable, ThresholdUnit};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bridge::{BridgeSpec, Path, RecursiveSampler, StretchedSampler, DEFAULT_MAX_ATTEMPTS};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stable::{check_time, standard_variate, StableParams};

/// Paths evaluated per parallel batch; bounds memory for very large runs.
const BATCH: usize = 1 << 14;
/// Stream offset for the uniforms used by continuous monitoring, kept apart
/// from the path streams so monitored and unmonitored runs share paths.
const MONITOR_STREAMS: u64 = 1 << 63;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    Bridge { spec: BridgeSpec },
    Unconditioned { params: StableParams, total_time: f64 },
}

impl Target {
    pub fn params(&self) -> StableParams {
        match self {
            Target::Bridge { spec } => spec.params,
            Target::Unconditioned { params, .. } => *params,
        }
    }

    pub fn total_time(&self) -> f64 {
        match self {
            Target::Bridge { spec } => spec.total_time,
            Target::Unconditioned { total_time, .. } => *total_time,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplerKind {
    /// Exact bridges on a dyadic grid of `2^depth` steps.
    Recursive { depth: u32 },
    /// Stretched bridges from increment paths with endpoint rejection.
    Stretched { dt: f64, threshold: f64, max_attempts: u64 },
    /// Plain increment paths, for unconditioned targets.
    Increments { dt: f64 },
}

impl SamplerKind {
    pub fn stretched(dt: f64, threshold: f64) -> Self {
        SamplerKind::Stretched {
            dt,
            threshold,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitoring {
    /// Crossings are detected at the sampled times only.
    #[default]
    Sampled,
    /// Exact Brownian crossing between samples; `alpha = 2` only.
    ContinuousGaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingExperiment {
    pub target: Target,
    pub boundary: f64,
    pub sampler: SamplerKind,
    #[serde(default)]
    pub monitoring: Monitoring,
    pub n_paths: usize,
    pub seed: u64,
}

/// How the estimate was discretized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub n_steps: usize,
    pub dt: f64,
    pub monitoring: Monitoring,
    /// Strict exceedance is always used; recorded for the manifest.
    pub strict: bool,
    /// Accepted paths per attempt, for the stretched sampler.
    pub acceptance_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    /// `sqrt(p (1 - p) / n)`.
    pub std_error: f64,
    pub n_paths: usize,
    pub crossings: u64,
    pub discretization: Discretization,
}

impl McEstimate {
    pub(crate) fn from_counts(crossings: u64, n_paths: usize, discretization: Discretization) -> Self {
        let p = crossings as f64 / n_paths as f64;
        McEstimate {
            estimate: p,
            std_error: (p * (1.0 - p) / n_paths as f64).sqrt(),
            n_paths,
            crossings,
            discretization,
        }
    }

    /// `|a - b|` in units of the combined standard error.
    pub fn z_score(&self, other: &McEstimate) -> f64 {
        let se = self.std_error.hypot(other.std_error);
        let diff = (self.estimate - other.estimate).abs();
        if se > 0.0 {
            diff / se
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Outcome of one path: the first-passage time, if any, and sampler attempts.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Outcome {
    pub time: Option<f64>,
    pub attempts: u64,
}

enum Engine {
    Recursive(RecursiveSampler),
    Stretched(StretchedSampler),
    Increments { alpha: f64, step_scale: f64 },
}

pub(crate) struct Runner {
    engine: Engine,
    times: Vec<f64>,
    boundary: f64,
    arrival: f64,
    /// Variance rate `2 sigma^2` when monitoring continuously.
    gauss_rate: Option<f64>,
    seed: u64,
    n_paths: usize,
}

impl Runner {
    pub fn new(exp: &CrossingExperiment) -> Result<Self> {
        if exp.boundary.is_nan() || exp.boundary <= 0.0 {
            return Err(Error::domain(format!("boundary must be positive, got {}", exp.boundary)));
        }
        if exp.n_paths == 0 {
            return Err(Error::domain("n_paths must be positive"));
        }
        let params = exp.target.params();
        check_time(exp.target.total_time())?;
        let (engine, times, arrival) = match (exp.target, exp.sampler) {
            (Target::Bridge { spec }, SamplerKind::Recursive { depth }) => {
                let s = RecursiveSampler::new(spec, depth)?;
                let t = s.times();
                (Engine::Recursive(s), t, spec.arrival)
            }
            (Target::Bridge { spec }, SamplerKind::Stretched { dt, threshold, max_attempts }) => {
                let s = StretchedSampler::new(spec, dt, threshold, max_attempts)?;
                let t = s.times();
                (Engine::Stretched(s), t, spec.arrival)
            }
            (Target::Unconditioned { total_time, .. }, SamplerKind::Increments { dt }) => {
                let n = crate::bridge::steps_for(total_time, dt)?;
                let engine = Engine::Increments {
                    alpha: params.alpha(),
                    step_scale: params.scale(total_time / n as f64),
                };
                (engine, Path::grid(total_time, n), f64::NAN)
            }
            (Target::Bridge { .. }, SamplerKind::Increments { .. }) => {
                return Err(Error::domain("bridges need the recursive or stretched sampler"))
            }
            (Target::Unconditioned { .. }, _) => {
                return Err(Error::domain("unconditioned paths use the increments sampler"))
            }
        };
        let gauss_rate = match exp.monitoring {
            Monitoring::Sampled => None,
            Monitoring::ContinuousGaussian => {
                if params.alpha() != 2.0 {
                    return Err(Error::domain("continuous monitoring needs alpha = 2"));
                }
                Some(2.0 * params.sigma() * params.sigma())
            }
        };
        Ok(Runner {
            engine,
            times,
            boundary: exp.boundary,
            arrival,
            gauss_rate,
            seed: exp.seed,
            n_paths: exp.n_paths,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn discretization(&self, acceptance_rate: Option<f64>) -> Discretization {
        let n = self.n_steps();
        Discretization {
            n_steps: n,
            dt: self.times[n] / n as f64,
            monitoring: if self.gauss_rate.is_some() {
                Monitoring::ContinuousGaussian
            } else {
                Monitoring::Sampled
            },
            strict: true,
            acceptance_rate,
        }
    }

    /// Checks the step from `a` (index `j - 1`, not above the boundary) to `b` (index `j`).
    fn step(&self, j: usize, a: f64, b: f64, monitor: &mut Option<RngStream>) -> Option<f64> {
        let d = self.boundary;
        match (self.gauss_rate, monitor.as_mut()) {
            (Some(v), Some(rng)) => {
                let span = self.times[j] - self.times[j - 1];
                let p = gaussian::bridge_cross_prob(a, b, d, v, span);
                if p > 0.0 && rng.open01() < p {
                    let u = rng.open01();
                    Some(self.times[j - 1] + gaussian::sample_hit_time(a, b, d, v, span, u))
                } else {
                    None
                }
            }
            _ => (b > d).then(|| self.times[j]),
        }
    }

    fn scan(&self, buf: &[f64], monitor: &mut Option<RngStream>) -> Option<f64> {
        (1..buf.len()).find_map(|j| self.step(j, buf[j - 1], buf[j], monitor))
    }

    pub fn path(&self, i: usize, buf: &mut Vec<f64>) -> Result<Outcome> {
        let mut rng = RngStream::new(self.seed, i as u64);
        let mut monitor = self.gauss_rate.map(|_| RngStream::new(self.seed, MONITOR_STREAMS | i as u64));
        buf.resize(self.times.len(), 0.0);
        match &self.engine {
            Engine::Recursive(s) => {
                let mut prev = 0.0;
                let mut time = None;
                s.walk(self.arrival, &mut rng, buf, |j, x| {
                    time = self.step(j, prev, x, &mut monitor);
                    prev = x;
                    time.is_some()
                })?;
                Ok(Outcome { time, attempts: 1 })
            }
            Engine::Stretched(s) => {
                let attempts = s.fill(&mut rng, buf)?;
                Ok(Outcome {
                    time: self.scan(buf, &mut monitor),
                    attempts,
                })
            }
            Engine::Increments { alpha, step_scale } => {
                let mut x = 0.0;
                buf[0] = 0.0;
                for j in 1..self.times.len() {
                    let next = x + step_scale * standard_variate(*alpha, &mut rng);
                    buf[j] = next;
                    if let Some(t) = self.step(j, x, next, &mut monitor) {
                        return Ok(Outcome { time: Some(t), attempts: 1 });
                    }
                    x = next;
                }
                Ok(Outcome { time: None, attempts: 1 })
            }
        }
    }

    /// Runs every path in index order of batches, feeding outcomes to `sink`.
    /// Returns the total number of sampler attempts.
    pub fn run<S: FnMut(Outcome)>(&self, mut sink: S) -> Result<u64> {
        let mut attempts = 0u64;
        let mut done = 0usize;
        let mut start = 0;
        while start < self.n_paths {
            let end = (start + BATCH).min(self.n_paths);
            let batch: Vec<Result<Outcome>> = (start..end)
                .into_par_iter()
                .map_init(Vec::new, |buf, i| self.path(i, buf))
                .collect();
            for r in batch {
                match r {
                    Ok(o) => {
                        attempts += o.attempts;
                        done += 1;
                        sink(o);
                    }
                    Err(e) => return Err(self.partial(e, done, attempts)),
                }
            }
            start = end;
        }
        Ok(attempts)
    }

    fn partial(&self, e: Error, done: usize, attempts: u64) -> Error {
        let source = match e {
            Error::RejectionExhausted { attempts: a, .. } => {
                let total = attempts + a;
                Error::RejectionExhausted {
                    attempts: a,
                    acceptance_rate: done as f64 / total as f64,
                }
            }
            other => other,
        };
        Error::Partial {
            completed: done,
            total: self.n_paths,
            source: Box::new(source),
        }
    }

    pub fn acceptance(&self, attempts: u64) -> Option<f64> {
        matches!(self.engine, Engine::Stretched(_)).then(|| self.n_paths as f64 / attempts as f64)
    }
}

/// Fraction of paths that strictly exceed the boundary, with its binomial
/// standard error. Deterministic in the seed and independent of thread count.
pub fn crossing_probability(exp: &CrossingExperiment) -> Result<McEstimate> {
    let runner = Runner::new(exp)?;
    let mut crossings = 0u64;
    let attempts = runner.run(|o| crossings += o.time.is_some() as u64)?;
    Ok(McEstimate::from_counts(
        crossings,
        exp.n_paths,
        runner.discretization(runner.acceptance(attempts)),
    ))
}

/// Crossing probability of the unconditioned process over `[0, T]`, watched every `dt`.
pub fn crossing_probability_unconditioned(
    params: StableParams,
    total_time: f64,
    d: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    crossing_probability(&CrossingExperiment {
        target: Target::Unconditioned { params, total_time },
        boundary: d,
        sampler: SamplerKind::Increments { dt },
        monitoring: Monitoring::Sampled,
        n_paths,
        seed,
    })
}

/// Crossing probabilities for several boundaries from one set of paths.
/// Each path is sampled in full, so the estimates share random numbers and
/// are monotone in `d` path by path.
pub fn crossing_curve(exp: &CrossingExperiment, boundaries: &[f64]) -> Result<Vec<McEstimate>> {
    if boundaries.iter().any(|d| d.is_nan() || *d <= 0.0) {
        return Err(Error::domain("boundaries must be positive"));
    }
    if exp.monitoring != Monitoring::Sampled {
        return Err(Error::domain("crossing curves use sampled monitoring"));
    }
    // the running maximum is the only statistic needed
    let runner = Runner::new(&CrossingExperiment {
        boundary: f64::INFINITY,
        ..*exp
    })?;
    let mut maxima = Vec::with_capacity(exp.n_paths);
    let mut attempts = 0u64;
    let mut start = 0;
    while start < exp.n_paths {
        let end = (start + BATCH).min(exp.n_paths);
        let batch: Vec<Result<(f64, u64)>> = (start..end)
            .into_par_iter()
            .map_init(Vec::new, |buf, i| {
                let o = runner.path(i, buf)?;
                Ok((buf[1..].iter().copied().fold(f64::NEG_INFINITY, f64::max), o.attempts))
            })
            .collect();
        for r in batch {
            let (m, a) = r.map_err(|e| runner.partial(e, maxima.len(), attempts))?;
            maxima.push(m);
            attempts += a;
        }
        start = end;
    }
    let disc = runner.discretization(runner.acceptance(attempts));
    Ok(boundaries
        .iter()
        .map(|&d| {
            let c = maxima.iter().filter(|&&m| m > d).count() as u64;
            McEstimate::from_counts(c, exp.n_paths, disc.clone())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bridge(alpha: f64, l: f64) -> Target {
        Target::Bridge {
            spec: BridgeSpec::new(StableParams::new(alpha, 1.0).unwrap(), 1.0, l).unwrap(),
        }
    }

    fn exp(target: Target, d: f64, sampler: SamplerKind) -> CrossingExperiment {
        CrossingExperiment {
            target,
            boundary: d,
            sampler,
            monitoring: Monitoring::Sampled,
            n_paths: 2000,
            seed: 7,
        }
    }

    #[test]
    fn boundary_limits() {
        let far = crossing_probability(&exp(bridge(1.2, 0.5), f64::INFINITY, SamplerKind::Recursive { depth: 6 })).unwrap();
        assert_eq!(far.estimate, 0.0);
        let near = crossing_probability(&exp(bridge(1.2, 0.5), 1e-12, SamplerKind::Recursive { depth: 6 })).unwrap();
        assert_eq!(near.estimate, 1.0);
        assert_eq!(near.std_error, 0.0);
    }

    #[test]
    fn mismatched_sampler_is_rejected() {
        assert!(Runner::new(&exp(bridge(1.2, 0.0), 1.0, SamplerKind::Increments { dt: 0.1 })).is_err());
        let mut e = exp(bridge(1.2, 0.0), 1.0, SamplerKind::Recursive { depth: 3 });
        e.monitoring = Monitoring::ContinuousGaussian;
        assert!(Runner::new(&e).is_err());
    }

    #[test]
    fn deterministic_in_seed() {
        let e = exp(bridge(0.9, 0.0), 0.5, SamplerKind::Recursive { depth: 5 });
        let a = crossing_probability(&e).unwrap();
        let b = crossing_probability(&e).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn curve_agrees_with_single_estimates() {
        let e = exp(bridge(1.5, 0.2), 1.0, SamplerKind::Recursive { depth: 5 });
        let ds = [0.3, 0.8, 1.5];
        let curve = crossing_curve(&e, &ds).unwrap();
        for (d, c) in ds.iter().zip(&curve) {
            let single = crossing_probability(&CrossingExperiment { boundary: *d, ..e }).unwrap();
            assert_eq!(single.crossings, c.crossings);
        }
    }

    #[test]
    fn exhaustion_reports_partial_progress() {
        let e = exp(
            bridge(0.5, 0.0),
            1.0,
            SamplerKind::Stretched {
                dt: 0.25,
                threshold: 1e-9,
                max_attempts: 3,
            },
        );
        match crossing_probability(&e) {
            Err(Error::Partial { total, source, .. }) => {
                assert_eq!(total, 2000);
                assert!(matches!(*source, Error::RejectionExhausted { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
