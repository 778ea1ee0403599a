use super::{BridgeSpec, Path};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stable::standard_variate;

pub const DEFAULT_MAX_ATTEMPTS: u64 = 1_000_000;

/// Bridges built from unconditioned increment paths: a path is accepted when
/// its endpoint lands within `threshold` of `L`, then sheared linearly in time
/// so that it ends exactly at `L`.
#[derive(Clone, Debug)]
pub struct StretchedSampler {
    spec: BridgeSpec,
    n_steps: usize,
    step_scale: f64,
    threshold: f64,
    max_attempts: u64,
}

impl StretchedSampler {
    /// `threshold` may be infinite (accept every path).
    pub fn new(spec: BridgeSpec, dt: f64, threshold: f64, max_attempts: u64) -> Result<Self> {
        let n_steps = steps_for(spec.total_time, dt)?;
        if !(threshold > 0.0) {
            return Err(Error::domain(format!("threshold must be positive, got {threshold}")));
        }
        if max_attempts == 0 {
            return Err(Error::domain("max_attempts must be positive"));
        }
        Ok(StretchedSampler {
            spec,
            n_steps,
            step_scale: spec.params.scale(spec.total_time / n_steps as f64),
            threshold,
            max_attempts,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn times(&self) -> Vec<f64> {
        Path::grid(self.spec.total_time, self.n_steps)
    }

    /// Fills `buf` (length `n_steps + 1`) with one accepted, stretched path and
    /// returns the number of attempts used.
    pub fn fill(&self, rng: &mut RngStream, buf: &mut [f64]) -> Result<u64> {
        let n = self.n_steps;
        assert_eq!(buf.len(), n + 1, "buffer length must be n_steps + 1");
        let alpha = self.spec.alpha();
        let l = self.spec.arrival;
        for attempt in 1..=self.max_attempts {
            buf[0] = 0.0;
            let mut x = 0.0;
            for slot in buf[1..].iter_mut() {
                x += self.step_scale * standard_variate(alpha, rng);
                *slot = x;
            }
            let miss = l - x;
            if miss.abs() <= self.threshold {
                let nf = n as f64;
                for (j, slot) in buf.iter_mut().enumerate().skip(1) {
                    *slot += miss * (j as f64 / nf);
                }
                buf[n] = l;
                return Ok(attempt);
            }
        }
        Err(Error::RejectionExhausted {
            attempts: self.max_attempts,
            acceptance_rate: 0.0,
        })
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<(Path, u64)> {
        let mut buf = vec![0.0; self.n_steps + 1];
        let attempts = self.fill(rng, &mut buf)?;
        Ok((
            Path {
                times: self.times(),
                positions: buf,
            },
            attempts,
        ))
    }
}

/// Number of steps of size `dt` in `total`, rejecting `dt` that does not divide it.
pub(crate) fn steps_for(total: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt <= total) {
        return Err(Error::domain(format!("dt must lie in (0, T], got {dt}")));
    }
    let n = (total / dt).round();
    if (n * dt - total).abs() > 1e-9 * total || n > 1e9 {
        return Err(Error::domain(format!("dt = {dt} does not divide T = {total}")));
    }
    Ok(n as usize)
}

/// One stretched bridge and the number of attempts it took.
pub fn sample_bridge_stretched(
    spec: BridgeSpec,
    dt: f64,
    threshold: f64,
    rng: &mut RngStream,
    max_attempts: u64,
) -> Result<(Path, u64)> {
    StretchedSampler::new(spec, dt, threshold, max_attempts)?.sample(rng)
}
