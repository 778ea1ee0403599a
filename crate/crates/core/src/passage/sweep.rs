use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{crossing_probability, CrossingExperiment, McEstimate, Monitoring, SamplerKind, Target};
use crate::bifurcation::{bifurcation_length, Criterion};
use crate::bridge::BridgeSpec;
use crate::error::{Error, Result};
use crate::stable::StableParams;

/// Unit in which sweep thresholds are given.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdUnit {
    /// Multiples of the curvature bifurcation length. At `alpha = 2`, where it
    /// diverges, multiples of `sigma T^(1/alpha)` instead.
    #[default]
    BifurcationLength,
    Absolute,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
    /// Strictly decreasing; may start at infinity.
    pub thresholds: Vec<f64>,
    pub unit: ThresholdUnit,
    pub sigma: f64,
    #[serde(rename = "T")]
    pub total_time: f64,
    #[serde(rename = "L")]
    pub arrival: f64,
    /// Boundary in units of `sigma T^(1/alpha)`.
    pub boundary_scale: f64,
    /// Both samplers watch the path on `2^depth` equal steps.
    pub depth: u32,
    pub n_paths: usize,
    pub seed: u64,
    pub max_attempts: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    /// `recursive` for the exact reference, `stretched` otherwise.
    pub sampler: String,
    pub alpha: f64,
    /// Absolute threshold; `None` for the reference.
    pub threshold: Option<f64>,
    /// Threshold as given in the config.
    pub threshold_units: Option<f64>,
    /// Length that one threshold unit stands for.
    pub unit_length: f64,
    pub boundary: f64,
    pub estimate: Option<McEstimate>,
    pub error: Option<String>,
    /// Exit-code class of `error`.
    pub error_code: Option<i32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub config: SweepConfig,
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    pub fn reference(&self, alpha: f64) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.alpha == alpha && c.threshold.is_none())
    }

    pub fn stretched(&self, alpha: f64) -> impl Iterator<Item = &SweepCell> {
        self.cells.iter().filter(move |c| c.alpha == alpha && c.threshold.is_some())
    }

    /// First failed cell, if any.
    pub fn first_failure(&self) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.error.is_some())
    }

    /// CSV with columns `sampler, alpha, L_thresh, L_thresh_units, estimate,
    /// stderr, n, acceptance_rate, error`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "sampler",
            "alpha",
            "L_thresh",
            "L_thresh_units",
            "estimate",
            "stderr",
            "n",
            "acceptance_rate",
            "error",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in &self.cells {
            let e = c.estimate.as_ref();
            w.write_record([
                c.sampler.clone(),
                c.alpha.to_string(),
                opt(c.threshold),
                opt(c.threshold_units),
                opt(e.map(|e| e.estimate)),
                opt(e.map(|e| e.std_error)),
                e.map(|e| e.n_paths.to_string()).unwrap_or_default(),
                opt(e.and_then(|e| e.discretization.acceptance_rate)),
                c.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn unit_length(alpha: f64, cfg: &SweepConfig) -> Result<f64> {
    match cfg.unit {
        ThresholdUnit::Absolute => Ok(1.0),
        ThresholdUnit::BifurcationLength => match bifurcation_length(alpha, cfg.sigma, cfg.total_time, Criterion::Curvature) {
            Ok(b) => Ok(b.length),
            Err(Error::Divergence(_)) => Ok(StableParams::new(alpha, cfg.sigma)?.scale(cfg.total_time)),
            Err(e) => Err(e),
        },
    }
}

/// Stretched-bridge crossing probabilities over a grid of rejection
/// thresholds, with the exact recursive estimate per index as reference.
///
/// Every cell of one index uses the same seed, so cells share random numbers.
/// A failing cell records its error and the sweep moves on.
pub fn threshold_sweep(cfg: &SweepConfig) -> Result<SweepTable> {
    if cfg.thresholds.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::domain("thresholds must be strictly decreasing"));
    }
    if cfg.thresholds.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::domain("thresholds must be positive"));
    }
    let dt = cfg.total_time / 2f64.powi(cfg.depth as i32);
    let mut cells = Vec::new();
    for &alpha in &cfg.alphas {
        let params = StableParams::new(alpha, cfg.sigma)?;
        let spec = BridgeSpec::new(params, cfg.total_time, cfg.arrival)?;
        let boundary = cfg.boundary_scale * params.scale(cfg.total_time);
        let unit = unit_length(alpha, cfg)?;
        let base = CrossingExperiment {
            target: Target::Bridge { spec },
            boundary,
            sampler: SamplerKind::Recursive { depth: cfg.depth },
            monitoring: Monitoring::Sampled,
            n_paths: cfg.n_paths,
            seed: cfg.seed,
        };
        let mut cell = |sampler: SamplerKind, threshold: Option<f64>, units: Option<f64>| {
            let r = crossing_probability(&CrossingExperiment { sampler, ..base });
            let (estimate, error, error_code) = match r {
                Ok(e) => (Some(e), None, None),
                Err(e) => (None, Some(e.to_string()), Some(e.exit_code())),
            };
            cells.push(SweepCell {
                sampler: if threshold.is_some() { "stretched" } else { "recursive" }.into(),
                alpha,
                threshold,
                threshold_units: units,
                unit_length: unit,
                boundary,
                estimate,
                error,
                error_code,
            });
        };
        cell(base.sampler, None, None);
        for &t in &cfg.thresholds {
            let abs = t * unit;
            let sampler = SamplerKind::Stretched {
                dt,
                threshold: abs,
                max_attempts: cfg.max_attempts,
            };
            cell(sampler, Some(abs), Some(t));
        }
    }
    Ok(SweepTable {
        config: cfg.clone(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SweepConfig {
        SweepConfig {
            alphas: vec![2.0, 1.0],
            thresholds: vec![f64::INFINITY, 1.0, 1e-12],
            unit: ThresholdUnit::BifurcationLength,
            sigma: 1.0,
            total_time: 1.0,
            arrival: 0.0,
            boundary_scale: 1.0,
            depth: 4,
            n_paths: 300,
            seed: 11,
            max_attempts: 50,
        }
    }

    #[test]
    fn records_failures_per_cell() {
        let t = threshold_sweep(&cfg()).unwrap();
        assert_eq!(t.cells.len(), 8);
        for &a in &[1.0, 2.0] {
            assert!(t.reference(a).unwrap().estimate.is_some());
            let cells: Vec<_> = t.stretched(a).collect();
            assert!(cells[0].estimate.is_some());
            // a threshold of 1e-12 cannot be met in 50 attempts
            assert!(cells[2].error.as_deref().unwrap().contains("rejection exhausted"));
            assert_eq!(cells[2].error_code, Some(4));
        }
        assert_eq!(t.stretched(1.0).nth(1).unwrap().threshold, Some(1.0));
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 9);
        assert!(text.starts_with("sampler,alpha,L_thresh"));
    }

    #[test]
    fn rejects_unsorted_grid() {
        let mut c = cfg();
        c.thresholds = vec![1.0, 2.0];
        assert!(threshold_sweep(&c).is_err());
    }
}
