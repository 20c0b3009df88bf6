//! Extended real numbers with explicit infinities.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Neg;

use crate::scalar::Scalar;

/// A value in `[-inf, +inf]`.
///
/// Sums follow the convention `inf - inf = -inf`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub enum Extended<T> {
    NegInf,
    Finite(T),
    PosInf,
}

impl<T: Scalar> Extended<T> {
    /// Maps a float to the extended line, sending float infinities to the
    /// matching variant. NaN is mapped to `NegInf`.
    pub fn from_float(x: T) -> Self {
        if x.is_nan() {
            Extended::NegInf
        } else if x == T::infinity() {
            Extended::PosInf
        } else if x == T::neg_infinity() {
            Extended::NegInf
        } else {
            Extended::Finite(x)
        }
    }

    pub fn to_float(self) -> T {
        match self {
            Extended::NegInf => T::neg_infinity(),
            Extended::Finite(x) => x,
            Extended::PosInf => T::infinity(),
        }
    }

    pub fn finite(self) -> Option<T> {
        match self {
            Extended::Finite(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    /// Sum with `inf - inf = -inf`.
    #[allow(clippy::should_implement_trait)]
    pub fn add(self, other: Self) -> Self {
        use Extended::*;
        match (self, other) {
            (NegInf, _) | (_, NegInf) => NegInf,
            (PosInf, _) | (_, PosInf) => PosInf,
            (Finite(a), Finite(b)) => Extended::from_float(a + b),
        }
    }

    pub fn add_finite(self, b: T) -> Self {
        self.add(Extended::Finite(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, other: Self) -> Self {
        self.add(-other)
    }

    pub fn max(self, other: Self) -> Self {
        if self.total_cmp(&other) == Ordering::Less {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self.total_cmp(&other) == Ordering::Greater {
            other
        } else {
            self
        }
    }

    pub fn total_cmp(&self, other: &Self) -> Ordering {
        self.partial_cmp(other).unwrap_or(Ordering::Equal)
    }

    /// Equality up to an absolute-or-relative tolerance; equal infinities match.
    pub fn approx_eq(self, other: Self, tol: T) -> bool {
        match (self, other) {
            (Extended::Finite(a), Extended::Finite(b)) => (a - b).abs() <= tol * T::one().max(a.abs()).max(b.abs()),
            (a, b) => a == b,
        }
    }

    /// `self <= other` up to the same tolerance as [`Extended::approx_eq`].
    pub fn approx_le(self, other: Self, tol: T) -> bool {
        self <= other || self.approx_eq(other, tol)
    }
}

impl<T: Scalar> Neg for Extended<T> {
    type Output = Self;
    fn neg(self) -> Self {
        match self {
            Extended::NegInf => Extended::PosInf,
            Extended::Finite(x) => Extended::Finite(-x),
            Extended::PosInf => Extended::NegInf,
        }
    }
}

impl<T: Scalar> From<T> for Extended<T> {
    fn from(x: T) -> Self {
        Extended::from_float(x)
    }
}

impl<T: Scalar> fmt::Display for Extended<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::NegInf => write!(f, "-inf"),
            Extended::Finite(x) => write!(f, "{x}"),
            Extended::PosInf => write!(f, "+inf"),
        }
    }
}

/// Supremum of a possibly empty collection; the empty supremum is `-inf`.
pub fn sup<T: Scalar>(it: impl IntoIterator<Item = Extended<T>>) -> Extended<T> {
    it.into_iter().fold(Extended::NegInf, Extended::max)
}

/// Infimum of a possibly empty collection; the empty infimum is `+inf`.
pub fn inf<T: Scalar>(it: impl IntoIterator<Item = Extended<T>>) -> Extended<T> {
    it.into_iter().fold(Extended::PosInf, Extended::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    type E = Extended<f64>;

    #[test]
    fn infinity_cancellation_is_negative() {
        assert_eq!(E::PosInf.add(E::NegInf), E::NegInf);
        assert_eq!(E::NegInf.add(E::PosInf), E::NegInf);
        assert_eq!(E::PosInf.sub(E::PosInf), E::NegInf);
    }

    #[test]
    fn ordering_places_infinities_at_the_ends() {
        assert!(E::NegInf < E::Finite(-1e300));
        assert!(E::Finite(1e300) < E::PosInf);
        assert!(E::Finite(1.0) < E::Finite(2.0));
    }

    #[test]
    fn empty_sup_and_inf() {
        assert_eq!(sup::<f64>(vec![]), E::NegInf);
        assert_eq!(inf::<f64>(vec![]), E::PosInf);
        assert_eq!(sup(vec![E::Finite(1.0), E::Finite(3.0)]), E::Finite(3.0));
    }

    #[test]
    fn float_round_trip() {
        assert_eq!(E::from_float(f64::INFINITY), E::PosInf);
        assert_eq!(E::from_float(f64::NEG_INFINITY).to_float(), f64::NEG_INFINITY);
        assert_eq!((-E::Finite(2.0)).finite(), Some(-2.0));
    }
}
