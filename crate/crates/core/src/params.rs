use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The `(d, beta, B)` point every computation is parameterized by.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub beta: f64,
    pub field: f64,
}

impl ModelParams {
    pub fn new(d: usize, beta: f64, field: f64) -> Result<Self> {
        if d < 3 {
            return Err(Error::DegreeTooSmall(d));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be finite and >= 0, got {beta}")));
        }
        if !field.is_finite() {
            return Err(Error::InvalidParameter(format!("field must be finite, got {field}")));
        }
        Ok(Self { d, beta, field })
    }

    /// Same point with a different external field.
    pub fn with_field(self, field: f64) -> Self {
        Self { field, ..self }
    }

    pub fn with_beta(self, beta: f64) -> Self {
        Self { beta, ..self }
    }

    /// Uniqueness threshold of the zero-field model, `atanh(1/(d-1))`.
    pub fn beta_c(&self) -> f64 {
        critical_beta(self.d)
    }

    pub fn is_low_temperature(&self) -> bool {
        self.beta > self.beta_c()
    }

    pub(crate) fn degree(&self) -> f64 {
        self.d as f64
    }
}

pub fn critical_beta(d: usize) -> f64 {
    (1.0 / (d as f64 - 1.0)).atanh()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_c_matches_closed_form() {
        // e^{2 beta_c} = d / (d - 2)
        for d in 3..8 {
            let bc = critical_beta(d);
            let lhs = (2.0 * bc).exp();
            assert!((lhs - d as f64 / (d as f64 - 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(ModelParams::new(2, 1.0, 0.0), Err(Error::DegreeTooSmall(2)));
        assert!(ModelParams::new(3, -0.1, 0.0).is_err());
        assert!(ModelParams::new(3, 0.5, f64::NAN).is_err());
    }
}
