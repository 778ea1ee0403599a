use serde::{Deserialize, Serialize};

use super::Path;
use crate::bifurcation::{bifurcation_length, Criterion};
use crate::error::Result;
use crate::stable::StableParams;

/// Per-step threshold above which an increment counts as a long jump.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum JumpRule {
    /// Same threshold for every step.
    Fixed(f64),
    /// `L_b (dt / T)^(1/alpha)` for a step of duration `dt`.
    Scaled { l_b: f64, total_time: f64, alpha: f64 },
}

impl JumpRule {
    /// The scaled rule with the curvature bifurcation length of `(params, T)`.
    pub fn from_bifurcation(params: StableParams, total_time: f64) -> Result<Self> {
        let l_b = bifurcation_length(params.alpha(), params.sigma(), total_time, Criterion::Curvature)?.length;
        Ok(JumpRule::Scaled {
            l_b,
            total_time,
            alpha: params.alpha(),
        })
    }

    pub fn threshold(&self, dt: f64) -> f64 {
        match *self {
            JumpRule::Fixed(v) => v,
            JumpRule::Scaled { l_b, total_time, alpha } => l_b * (dt / total_time).powf(1.0 / alpha),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JumpCensus {
    /// Index `j` of each long increment `x[j+1] - x[j]`.
    pub steps: Vec<usize>,
    pub sizes: Vec<f64>,
}

impl JumpCensus {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }
}

/// Increments whose magnitude exceeds the rule's threshold for their step.
pub fn effective_jump_census(path: &Path, rule: JumpRule) -> JumpCensus {
    let mut census = JumpCensus::default();
    for j in 0..path.len().saturating_sub(1) {
        let dx = path.positions[j + 1] - path.positions[j];
        let dt = path.times[j + 1] - path.times[j];
        if dx.abs() > rule.threshold(dt) {
            census.steps.push(j);
            census.sizes.push(dx);
        }
    }
    census
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_path_has_no_jumps() {
        let p = Path::new(vec![0.0, 0.5, 1.0], vec![0.0; 3]).unwrap();
        assert_eq!(effective_jump_census(&p, JumpRule::Fixed(0.1)).count(), 0);
    }

    #[test]
    fn single_step_path() {
        let p = Path::new(vec![0.0, 1.0], vec![0.0, 3.0]).unwrap();
        let rule = JumpRule::Scaled {
            l_b: 1.0,
            total_time: 1.0,
            alpha: 1.0,
        };
        let c = effective_jump_census(&p, rule);
        assert_eq!(c.steps, vec![0]);
        assert_eq!(c.sizes, vec![3.0]);
    }

    #[test]
    fn scaled_threshold() {
        let rule = JumpRule::Scaled {
            l_b: 2.0,
            total_time: 4.0,
            alpha: 0.5,
        };
        assert!((rule.threshold(1.0) - 0.125).abs() < 1e-15);
    }
}
