use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

/// A real number in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Probability<T>(T);

impl<T: Real> Probability<T> {
    pub fn new(value: T) -> Result<Self> {
        if value >= T::zero() && value <= T::one() {
            Ok(Probability(value))
        } else {
            Err(Error::domain(
                "probability",
                format!("{value} not in [0, 1]"),
            ))
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to 0.5.
    pub fn clamped(value: T) -> Self {
        if value.is_nan() {
            Probability(T::half())
        } else {
            Probability(value.max(T::zero()).min(T::one()))
        }
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }

    pub fn complement(self) -> Self {
        Probability(T::one() - self.0)
    }

    pub fn zero() -> Self {
        Probability(T::zero())
    }
}

impl<T: Real> From<Probability<T>> for f64 {
    fn from(p: Probability<T>) -> f64 {
        p.0.as_f64()
    }
}
