use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{CrossingExperiment, McEstimate, Runner};
use crate::error::{Error, Result};

/// First-passage times of the crossing paths, binned on `[0, T]`.
///
/// Bins are closed on the right: under sampled monitoring a crossing seen at
/// `t_j` happened in `(t_{j-1}, t_j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstPassageHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub n_paths: usize,
    pub crossing: McEstimate,
    /// No path crossed; `density` is then all zeros.
    pub empty: bool,
    /// Sampling times of the paths, for grid-aware expectations.
    pub n_steps: usize,
}

impl FirstPassageHistogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn crossers(&self) -> u64 {
        self.crossing.crossings
    }

    /// Fraction of crossers in each bin.
    pub fn fractions(&self) -> Vec<f64> {
        let n = self.crossers();
        self.counts
            .iter()
            .map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
            .collect()
    }

    /// Binomial standard error of each bin fraction.
    pub fn fraction_errors(&self) -> Vec<f64> {
        let n = self.crossers() as f64;
        self.fractions()
            .iter()
            .map(|&p| if n == 0.0 { 0.0 } else { (p * (1.0 - p) / n).sqrt() })
            .collect()
    }

    /// Density over crossers: integrates to one unless the histogram is empty.
    pub fn density(&self) -> Vec<f64> {
        self.fractions()
            .iter()
            .zip(self.edges.windows(2))
            .map(|(p, e)| p / (e[1] - e[0]))
            .collect()
    }

    /// Expected bin fractions when the crossing step is uniform over the
    /// `n_steps` sampling steps.
    pub fn uniform_step_expectation(&self) -> Vec<f64> {
        let t_end = self.edges[self.edges.len() - 1];
        let mut p = vec![0.0; self.n_bins()];
        for j in 1..=self.n_steps {
            let t = t_end * j as f64 / self.n_steps as f64;
            p[bin_of(&self.edges, t)] += 1.0 / self.n_steps as f64;
        }
        p
    }

    /// Chi-square test of the counts against expected bin fractions.
    pub fn chi_square(&self, expected: &[f64]) -> Result<ChiSquare> {
        chi_square(&self.counts, expected)
    }
}

/// Bin index for a right-closed binning; times at or below the first edge go to bin 0.
fn bin_of(edges: &[f64], t: f64) -> usize {
    let n = edges.len() - 1;
    let k = edges.partition_point(|&e| e < t);
    k.saturating_sub(1).min(n - 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square of `counts` against the probabilities `expected`
/// (renormalized). Bins with zero probability and no counts are left out;
/// the degrees of freedom are the remaining bins minus one.
pub fn chi_square(counts: &[u64], expected: &[f64]) -> Result<ChiSquare> {
    if counts.len() != expected.len() || counts.len() < 2 {
        return Err(Error::domain("counts and expectations must have the same length >= 2"));
    }
    let total: f64 = expected.iter().sum();
    if expected.iter().any(|&p| !(p >= 0.0)) || !(total > 0.0) {
        return Err(Error::domain("expected probabilities must be non-negative with a positive sum"));
    }
    let n: u64 = counts.iter().sum();
    let used: Vec<(u64, f64)> = counts
        .iter()
        .zip(expected)
        .filter(|(&c, &p)| c > 0 || p > 0.0)
        .map(|(&c, &p)| (c, p))
        .collect();
    if used.len() < 2 {
        return Err(Error::domain("need at least 2 bins with positive probability"));
    }
    let statistic = used
        .iter()
        .map(|&(c, p)| {
            let e = n as f64 * p / total;
            if e > 0.0 {
                (c as f64 - e).powi(2) / e
            } else {
                f64::INFINITY
            }
        })
        .sum();
    let dof = used.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::domain(e.to_string()))?;
    Ok(ChiSquare {
        statistic,
        dof,
        p_value: dist.sf(statistic),
    })
}

/// Histogram of first strict-exceedance times over `n_bins` equal bins of `[0, T]`.
pub fn first_passage_histogram(exp: &CrossingExperiment, n_bins: usize) -> Result<FirstPassageHistogram> {
    if n_bins < 2 {
        return Err(Error::domain(format!("need at least 2 bins, got {n_bins}")));
    }
    let runner = Runner::new(exp)?;
    let total = exp.target.total_time();
    let mut edges: Vec<f64> = (0..=n_bins).map(|k| total * k as f64 / n_bins as f64).collect();
    edges[n_bins] = total;
    let mut counts = vec![0u64; n_bins];
    let mut crossings = 0u64;
    let attempts = runner.run(|o| {
        if let Some(t) = o.time {
            counts[bin_of(&edges, t)] += 1;
            crossings += 1;
        }
    })?;
    Ok(FirstPassageHistogram {
        edges,
        counts,
        n_paths: exp.n_paths,
        crossing: McEstimate::from_counts(crossings, exp.n_paths, runner.discretization(runner.acceptance(attempts))),
        empty: crossings == 0,
        n_steps: runner.n_steps(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::BridgeSpec;
    use crate::passage::{Monitoring, SamplerKind, Target};
    use crate::stable::StableParams;

    fn exp(depth: u32, l: f64, d: f64) -> CrossingExperiment {
        CrossingExperiment {
            target: Target::Bridge {
                spec: BridgeSpec::new(StableParams::new(1.3, 1.0).unwrap(), 1.0, l).unwrap(),
            },
            boundary: d,
            sampler: SamplerKind::Recursive { depth },
            monitoring: Monitoring::Sampled,
            n_paths: 500,
            seed: 3,
        }
    }

    #[test]
    fn right_closed_bins() {
        let e = [0.0, 0.5, 1.0];
        assert_eq!(bin_of(&e, 0.5), 0);
        assert_eq!(bin_of(&e, 0.50001), 1);
        assert_eq!(bin_of(&e, 1.0), 1);
        assert_eq!(bin_of(&e, 1e-9), 0);
    }

    #[test]
    fn single_step_lands_in_last_bin() {
        let h = first_passage_histogram(&exp(0, 1.0, 0.5), 4).unwrap();
        assert_eq!(h.counts, vec![0, 0, 0, 500]);
        let h = first_passage_histogram(&exp(0, 0.2, 0.5), 4).unwrap();
        assert!(h.empty);
        assert_eq!(h.counts.iter().sum::<u64>(), 0);
    }

    #[test]
    fn counts_match_crossings_and_density_normalizes() {
        let h = first_passage_histogram(&exp(6, 0.3, 0.6), 10).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), h.crossers());
        let mass: f64 = h.density().iter().zip(h.edges.windows(2)).map(|(f, e)| f * (e[1] - e[0])).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_expectation_counts_grid_points() {
        let h = first_passage_histogram(&exp(3, 1.0, 0.5), 3).unwrap();
        // 8 steps over 3 bins: times 1/8..8/8 fall 2, 3, 3
        let p = h.uniform_step_expectation();
        assert_eq!(p, vec![2.0 / 8.0, 3.0 / 8.0, 3.0 / 8.0]);
    }

    #[test]
    fn chi_square_of_perfect_fit() {
        let c = chi_square(&[10, 20, 30], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(c.statistic, 0.0);
        assert!((c.p_value - 1.0).abs() < 1e-12);
        assert_eq!(c.dof, 2);
        assert!(chi_square(&[1, 2], &[-0.5, 1.0]).is_err());
        assert!(chi_square(&[0, 2], &[0.0, 1.0]).is_err());
        let c = chi_square(&[0, 20, 30], &[0.0, 2.0, 3.0]).unwrap();
        assert_eq!(c.dof, 1);
        assert!(chi_square(&[1, 20, 30], &[0.0, 2.0, 3.0]).unwrap().statistic.is_infinite());
    }
}
