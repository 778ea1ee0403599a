use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index and width of a symmetric stable process.
///
/// The process has characteristic function `exp(-t sigma^alpha |k|^alpha)` at
/// time `t`, so increments over `dt` are `sigma * dt^(1/alpha)` times a
/// standard variate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    alpha: f64,
    sigma: f64,
}

impl StableParams {
    pub fn new(alpha: f64, sigma: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 2], got {alpha}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
        }
        Ok(StableParams { alpha, sigma })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Length scale `sigma * t^(1/alpha)` of the law at time `t`.
    pub fn scale(&self, t: f64) -> f64 {
        self.sigma * t.powf(1.0 / self.alpha)
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("time must be positive and finite, got {t}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(StableParams::new(0.0, 1.0).is_err());
        assert!(StableParams::new(2.0001, 1.0).is_err());
        assert!(StableParams::new(1.5, 0.0).is_err());
        assert!(StableParams::new(f64::NAN, 1.0).is_err());
        assert!(StableParams::new(2.0, 1.0).is_ok());
    }

    #[test]
    fn scale_follows_time_power() {
        let p = StableParams::new(0.5, 2.0).unwrap();
        assert!((p.scale(3.0) - 18.0).abs() < 1e-12);
    }
}
