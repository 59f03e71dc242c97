use crate::error::{input_err, Result};
use crate::scalar::Scalar;

/// Step-size schedule `eta_t`, indexed from `t = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningRateSchedule<F> {
    Constant(F),
    /// `eta_t = base / t^exponent`.
    Decaying { base: F, exponent: F },
}

impl<F: Scalar> LearningRateSchedule<F> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Constant(eta) if !(eta > F::zero() && eta.is_finite()) => {
                input_err(format!("constant learning rate must be > 0, got {eta}"))
            }
            Self::Decaying { base, exponent } => {
                if !(base > F::zero() && base.is_finite()) {
                    return input_err(format!("decay base must be > 0, got {base}"));
                }
                if !(exponent > F::zero() && exponent < F::one()) {
                    return input_err(format!("decay exponent must lie in (0, 1), got {exponent}"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eta(&self, t: usize) -> F {
        debug_assert!(t >= 1);
        match *self {
            Self::Constant(eta) => eta,
            Self::Decaying { base, exponent } => base / F::from_count(t).powf(exponent),
        }
    }

    /// Largest step over `1..=t_max` (the first step for decaying schedules).
    pub fn max_eta(&self, t_max: usize) -> F {
        match *self {
            Self::Constant(eta) => eta,
            Self::Decaying { .. } if t_max == 0 => F::zero(),
            Self::Decaying { .. } => self.eta(1),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Constant(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decaying_values() {
        let s = LearningRateSchedule::Decaying { base: 1.0_f64, exponent: 0.6 };
        assert_eq!(s.eta(1), 1.0);
        assert!((s.eta(32) - 32f64.powf(-0.6)).abs() < 1e-15);
        assert_eq!(s.max_eta(100), 1.0);
        assert!(s.validate().is_ok());
        assert!(LearningRateSchedule::Decaying { base: 1.0_f64, exponent: 1.0 }.validate().is_err());
        assert!(LearningRateSchedule::Constant(0.0_f64).validate().is_err());
        assert!(LearningRateSchedule::Constant(0.05_f64).validate().is_ok());
    }
}
