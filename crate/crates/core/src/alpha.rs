use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Stability index `α`, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    pub const HALF: Alpha = Alpha(0.5);

    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 0.0 && alpha < 1.0 {
            Ok(Alpha(alpha))
        } else {
            domain(format!(
                "alpha must lie in the open interval (0, 1), got {alpha}"
            ))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// `1 - α`.
    #[inline]
    pub fn complement(self) -> f64 {
        1.0 - self.0
    }
}

impl TryFrom<f64> for Alpha {
    type Error = crate::Error;

    fn try_from(value: f64) -> Result<Self> {
        Alpha::new(value)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> f64 {
        a.0
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_boundary_values() {
        assert!(Alpha::new(0.0).is_err());
        assert!(Alpha::new(1.0).is_err());
        assert!(Alpha::new(f64::NAN).is_err());
        assert!(Alpha::new(-0.2).is_err());
        assert_eq!(Alpha::new(0.3).unwrap().get(), 0.3);
    }
}
