//! Floating-point scalar abstraction shared by the numerical kernels,
//! the data generators and the estimators.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used throughout the crate. Implemented for `f32` and `f64`.
pub trait Real: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static {
    /// Lossy conversion from an `f64` constant.
    #[inline]
    fn c(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 constant representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Indicator value for a binary flag.
    #[inline]
    fn indicator(flag: u8) -> Self {
        if flag != 0 {
            Self::one()
        } else {
            Self::zero()
        }
    }
}

impl<T> Real for T where T: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{}

/// Logistic function `1 / (1 + exp(-x))`, evaluated without overflow.
pub fn expit<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `log(1 + exp(x))` without overflow.
pub fn softplus<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expit_values() {
        assert_eq!(expit(0.0f64), 0.5);
        let e = std::f64::consts::E;
        assert!((expit(-1.0f64) - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((expit(-1.0f64) - 0.26894).abs() < 1e-5);
        assert!((expit(2.5f64) - (1.0 - expit(-2.5f64))).abs() < 1e-15);
        assert!(expit(800.0f64) == 1.0 && expit(-800.0f64) >= 0.0);
        assert_eq!(expit(0.0f32), 0.5f32);
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0f64) - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(1000.0f64) - 1000.0).abs() < 1e-12);
        assert!(softplus(-1000.0f64) >= 0.0);
    }
}
