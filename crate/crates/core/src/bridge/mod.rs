//! Stable bridges: the midpoint law, recursive bisection and stretched paths.

mod census;
mod io;
mod midpoint;
mod recursive;
mod stretched;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stable::{check_time, StableParams};

pub use census::{effective_jump_census, JumpCensus, JumpRule};
pub use io::{read_ensemble, read_path_csv, write_ensemble, write_path_csv, Ensemble, EnsembleHeader, Schedule};
pub use midpoint::{midpoint_pdf, midpoint_pdf_grid, sample_midpoint, MidpointDensity};
pub use recursive::{sample_bridge_recursive, sample_ensemble, MidpointSampler, RecursiveSampler};
pub use stretched::{sample_bridge_stretched, StretchedSampler, DEFAULT_MAX_ATTEMPTS};
pub(crate) use stretched::steps_for;

/// A process started at 0 and conditioned on `x(T) = L`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeSpec {
    pub params: StableParams,
    #[serde(rename = "T")]
    pub total_time: f64,
    #[serde(rename = "L")]
    pub arrival: f64,
}

impl BridgeSpec {
    pub fn new(params: StableParams, total_time: f64, arrival: f64) -> Result<Self> {
        check_time(total_time)?;
        if !arrival.is_finite() {
            return Err(Error::domain(format!("arrival must be finite, got {arrival}")));
        }
        Ok(BridgeSpec {
            params,
            total_time,
            arrival,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.params.alpha()
    }

    pub fn sigma(&self) -> f64 {
        self.params.sigma()
    }

    /// The same bridge with a different arrival point.
    pub fn with_arrival(&self, arrival: f64) -> Result<Self> {
        BridgeSpec::new(self.params, self.total_time, arrival)
    }
}

/// A sampled trajectory on strictly increasing times.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
}

impl Path {
    pub fn new(times: Vec<f64>, positions: Vec<f64>) -> Result<Self> {
        if times.len() != positions.len() {
            return Err(Error::domain("times and positions differ in length"));
        }
        if times.len() < 2 {
            return Err(Error::domain("a path needs at least two points"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("times must be strictly increasing"));
        }
        Ok(Path { times, positions })
    }

    /// `n + 1` equally spaced times on `[0, T]`, with the last one exactly `T`.
    pub fn grid(total_time: f64, n: usize) -> Vec<f64> {
        let mut t: Vec<f64> = (0..=n).map(|j| j as f64 * total_time / n as f64).collect();
        t[n] = total_time;
        t
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn increments(&self) -> Vec<f64> {
        self.positions.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// First index whose position strictly exceeds `d`.
    pub fn first_exceedance(&self, d: f64) -> Option<usize> {
        self.positions.iter().position(|&x| x > d)
    }
}
