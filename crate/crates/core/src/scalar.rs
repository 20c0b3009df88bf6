//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the library is generic over.
///
/// Implemented for `f32` and `f64`. The tolerances are type specific so that
/// atom merging and mass checks stay meaningful at single precision.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Distance under which two support points are treated as one atom.
    fn merge_tol() -> Self;
    /// Allowed deviation of total mass from one.
    fn mass_tol() -> Self;

    /// Converts an `f64` literal. Panics only for values the type cannot hold.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn merge_tol() -> f64 {
        1e-12
    }
    fn mass_tol() -> f64 {
        1e-12
    }
}

impl Scalar for f32 {
    fn merge_tol() -> f32 {
        1e-6
    }
    fn mass_tol() -> f32 {
        1e-5
    }
}
