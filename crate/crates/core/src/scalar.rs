//! Numeric abstractions shared by the energy, decision and world models.
//!
//! [`Scalar`] covers every type the energy and weight arithmetic runs on:
//! `f32`, `f64` and the exact [`Exact`] rational. [`Real`] adds the
//! transcendental functions the 2D world needs and is only implemented for
//! the floating-point types.

use std::fmt::{Debug, Display};

use num_rational::Ratio;
use num_traits::{Float, FloatConst, Num, Signed};

/// Exact rational scalar. Weight updates stay dyadic, so histories of up to
/// ~60 updates per channel are represented without rounding.
pub type Exact = Ratio<i64>;

pub trait Scalar:
    Num + Signed + Copy + PartialOrd + Debug + Display + Send + Sync + 'static
{
    /// Converts a literal. Rationals use the closest small-denominator fraction.
    fn lit(x: f64) -> Self;

    fn to_f64(self) -> f64;

    /// Slack applied to closed-boundary comparisons. Zero for exact types.
    fn comparison_slack() -> Self;

    fn two() -> Self {
        Self::one() + Self::one()
    }

    fn half(self) -> Self {
        self / Self::two()
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn clamp_to(self, lo: Self, hi: Self) -> Self {
        self.max_of(lo).min_of(hi)
    }

    fn is_finite_value(self) -> bool;
}

impl Scalar for f32 {
    fn lit(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn comparison_slack() -> Self {
        1e-5
    }
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

impl Scalar for f64 {
    fn lit(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn comparison_slack() -> Self {
        1e-9
    }
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Exact {
    fn lit(x: f64) -> Self {
        // Continued-fraction approximation recovers 1/10 from 0.1 etc.
        Ratio::approximate_float(x).unwrap_or_else(|| {
            if x > 0.0 {
                Ratio::from_integer(i64::MAX)
            } else {
                Ratio::from_integer(i64::MIN + 1)
            }
        })
    }
    fn to_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
    fn comparison_slack() -> Self {
        Ratio::from_integer(0)
    }
    fn is_finite_value(self) -> bool {
        true
    }
}

/// Floating-point scalar with the geometry the world model needs.
pub trait Real: Scalar + Float + FloatConst {}

impl Real for f32 {}
impl Real for f64 {}
