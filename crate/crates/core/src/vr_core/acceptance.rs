//! Value-and-risk measures generated by families of acceptance sets.

use std::fmt;
use std::sync::Arc;

use super::{sup_of_downset, BisectOptions};
use crate::dist_core::Distribution;
use crate::error::{Result, VnrError};
use crate::extended::Extended;
use crate::scalar::Scalar;

/// Membership `law ∈ A^p`.
pub type MemberFn<T> = Arc<dyn Fn(T, &Distribution<T>) -> bool + Send + Sync>;
/// A law-invariant functional `β`.
pub type BetaFn<T> = Arc<dyn Fn(&Distribution<T>) -> Result<Extended<T>> + Send + Sync>;
/// Membership of the translated law: `(p, m, law) -> T_m law ∈ A^p`.
pub type GenericMember<T> = Arc<dyn Fn(T, T, &Distribution<T>) -> bool + Send + Sync>;

/// The four ways of turning acceptance sets into a value-and-risk measure.
#[derive(Clone)]
pub enum AcceptanceFamily<T> {
    /// `R(p, X) = inf{m : T_m P_X ∈ A^p}`; the sets must be closed under
    /// first-order increases so that membership is monotone in `m`.
    CashAdditive(MemberFn<T>),
    /// `R(p, X) = p + β(P_X)`.
    Affine(BetaFn<T>),
    /// `R(p, X) = β(T_{-p} P_X)`.
    DeltaInvariant(BetaFn<T>),
    /// `R(p, X) = inf{m : T_m P_X ∈ A^p}` for arbitrary sets. Without
    /// monotonicity in `m` the infimum is taken over `m_grid`.
    Generic { member: GenericMember<T>, monotone_in_m: bool, m_grid: Option<Vec<T>> },
}

impl<T> fmt::Debug for AcceptanceFamily<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            AcceptanceFamily::CashAdditive(_) => "CashAdditive",
            AcceptanceFamily::Affine(_) => "Affine",
            AcceptanceFamily::DeltaInvariant(_) => "DeltaInvariant",
            AcceptanceFamily::Generic { .. } => "Generic",
        };
        write!(f, "AcceptanceFamily::{name}")
    }
}

/// Evaluates the value-and-risk measure of an acceptance family.
pub fn acceptance_r<T: Scalar>(
    fam: &AcceptanceFamily<T>,
    p: T,
    d: &Distribution<T>,
    opts: &BisectOptions<T>,
) -> Result<Extended<T>> {
    match fam {
        AcceptanceFamily::CashAdditive(member) => sup_of_downset(|m: T| Ok(!member(p, &d.translate(m))), opts),
        AcceptanceFamily::Affine(beta) => Ok(beta(d)?.add_finite(p)),
        AcceptanceFamily::DeltaInvariant(beta) => beta(&d.translate(-p)),
        AcceptanceFamily::Generic { member, monotone_in_m, m_grid } => {
            if *monotone_in_m {
                return sup_of_downset(|m: T| Ok(!member(p, m, d)), opts);
            }
            let grid = m_grid
                .as_ref()
                .ok_or_else(|| VnrError::Contract("non-monotone acceptance family needs an m-grid".into()))?;
            Ok(grid.iter().filter(|&&m| member(p, m, d)).fold(Extended::PosInf, |acc, &m| acc.min(Extended::Finite(m))))
        }
    }
}
