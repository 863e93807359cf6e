//! Scalar abstraction for pheromone quantities.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// A real number type able to carry pheromone levels and peer weights.
///
/// Implemented for `f32` and `f64`. Every engine and graph type is generic
/// over it; the crate root exposes `f64` aliases for the common case.
pub trait Pheromone:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 constant representable in pheromone scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Pheromone for f32 {}
impl Pheromone for f64 {}

/// Values at or below this level are treated as zero and clamped on evaporation.
pub const PHEROMONE_FLOOR: f64 = 1e-6;

#[inline]
pub(crate) fn floor<P: Pheromone>() -> P {
    P::lit(PHEROMONE_FLOOR)
}

#[inline]
pub(crate) fn above_floor<P: Pheromone>(value: P) -> bool {
    value > floor::<P>()
}
