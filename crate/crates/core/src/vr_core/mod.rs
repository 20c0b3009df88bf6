//! Value-and-risk measures built from test families: the pricing functional,
//! its generalised inverse, the acceptance-set constructions and the
//! property-based verification harness.

mod acceptance;
mod axioms;
mod dependence;

pub use acceptance::{acceptance_r, AcceptanceFamily, BetaFn, GenericMember, MemberFn};
pub use axioms::{
    axiom_check, Axiom, AxiomReport, FnRisk, Implication, ImplicationStatus, Instance, InstanceGenerator,
    IntrinsicRisk, PnlRisk, RandomInstances, ShiftedLawRisk, SuiteReport, VnRMeasure,
};
pub use dependence::{
    cash_check, dependence_k_check, CashCondition, CashReport, CheckStatus, DependenceReport, ItemReport, PwlClaim,
};

use crate::dist_core::{Distribution, ScenarioSpace};
use crate::error::Result;
use crate::extended::Extended;
use crate::scalar::Scalar;
use crate::test_families::{FamilyKind, TestFamily};

/// Settings of the bracketed bisection used to invert monotone maps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BisectOptions<T> {
    pub tolerance: T,
    pub bracket: (T, T),
    pub max_doublings: u32,
}

impl<T: Scalar> Default for BisectOptions<T> {
    fn default() -> Self {
        Self { tolerance: T::lit(1e-9), bracket: (-T::one(), T::one()), max_doublings: 60 }
    }
}

/// `sup{s : pred(s)}` for a predicate that holds on a down-set of the line.
///
/// The bracket is doubled away from its start until it straddles the
/// boundary; after `max_doublings` unsuccessful steps the supremum is taken
/// to be infinite. The result is the midpoint of the final interval.
pub fn sup_of_downset<T: Scalar>(pred: impl Fn(T) -> Result<bool>, opts: &BisectOptions<T>) -> Result<Extended<T>> {
    let (mut lo, mut hi) = opts.bracket;
    let mut step = (hi - lo).max(T::one());
    if !pred(lo)? {
        hi = lo;
        let mut found = false;
        for _ in 0..opts.max_doublings {
            lo = hi - step;
            step = step + step;
            if pred(lo)? {
                found = true;
                break;
            }
            hi = lo;
        }
        if !found {
            return Ok(Extended::NegInf);
        }
    } else if pred(hi)? {
        let mut found = false;
        for _ in 0..opts.max_doublings {
            lo = hi;
            hi = hi + step;
            step = step + step;
            if !pred(hi)? {
                found = true;
                break;
            }
        }
        if !found {
            return Ok(Extended::PosInf);
        }
    }
    while hi - lo > opts.tolerance {
        let mid = lo + (hi - lo) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Extended::Finite(lo + (hi - lo) / T::lit(2.0)))
}

/// Evaluation context: a family priced under a named measure on a named variable.
#[derive(Clone, Debug)]
pub struct VnRContext<T> {
    pub family: TestFamily<T>,
    pub scenario: ScenarioSpace<T>,
    pub variable: String,
    pub measure: String,
    pub options: BisectOptions<T>,
}

impl<T: Scalar> VnRContext<T> {
    pub fn new(family: TestFamily<T>, scenario: ScenarioSpace<T>, measure: &str, variable: &str) -> Result<Self> {
        scenario.pushforward(measure, variable)?;
        Ok(Self {
            family,
            scenario,
            variable: variable.to_string(),
            measure: measure.to_string(),
            options: BisectOptions::default(),
        })
    }

    pub fn law(&self) -> Result<Distribution<T>> {
        self.scenario.pushforward(&self.measure, &self.variable)
    }
}

/// `Π(r, X; Q)`; `+inf` when no claim reaches the level `r`.
pub fn pi<T: Scalar>(ctx: &VnRContext<T>, r: T) -> Result<Extended<T>> {
    ctx.family.pi(&ctx.law()?, r)
}

/// `R(p, X; Q) = sup{s : Π(s) <= p}`.
pub fn r_measure<T: Scalar>(ctx: &VnRContext<T>, p: T) -> Result<Extended<T>> {
    r_measure_law(&ctx.family, &ctx.law()?, p, &ctx.options)
}

/// [`r_measure`] on a law.
pub fn r_measure_law<T: Scalar>(
    family: &TestFamily<T>,
    d: &Distribution<T>,
    p: T,
    opts: &BisectOptions<T>,
) -> Result<Extended<T>> {
    let target = Extended::Finite(p);
    sup_of_downset(|s| Ok(family.pi(d, s)? <= target), opts)
}

/// `H(p) = sup{c(α) : E f_α(X) <= p}`.
pub fn h_function<T: Scalar>(ctx: &VnRContext<T>, p: T) -> Result<Extended<T>> {
    h_law(&ctx.family, &ctx.law()?, p, &ctx.options)
}

/// [`h_function`] on a law.
///
/// For families whose price and risk reduction move together in the
/// parameter, the feasible parameters form a half-line and its end is found by
/// bisection on the price. The insured put price is not monotone in the
/// strike, so its lower monotone envelope is used instead; the envelope has
/// the same feasible supremum.
pub fn h_law<T: Scalar>(
    family: &TestFamily<T>,
    d: &Distribution<T>,
    p: T,
    opts: &BisectOptions<T>,
) -> Result<Extended<T>> {
    let sigma = T::from_i32(family.orientation()).expect("sign");
    let (tlo, thi) =
        if sigma > T::zero() { (family.lo, family.hi) } else { (family.hi.map(|h| -h), family.lo.map(|l| -l)) };
    let target = Extended::Finite(p);
    let price = |theta: T| -> Result<Extended<T>> {
        let theta = tlo.map_or(theta, |l| theta.max(l));
        let alpha = sigma * theta;
        match family.kind {
            FamilyKind::InsuredPut(_) => family.pi(d, family.risk_reduction(alpha)?),
            _ => family.price(alpha, d),
        }
    };
    let feasible = |theta: T| -> Result<bool> {
        if thi.is_some_and(|h| theta > h) {
            return Ok(false);
        }
        Ok(price(theta)? <= target)
    };
    // Exponential claims price strictly above their floor.
    if matches!(family.kind, FamilyKind::ExpConcave(_)) && tlo.is_none() && target <= family.price_floor(d) {
        return Ok(Extended::NegInf);
    }
    if let Some(l) = tlo {
        if !feasible(l)? {
            return Ok(Extended::NegInf);
        }
    }
    let theta = match sup_of_downset(feasible, opts)? {
        Extended::Finite(t) => {
            let t = thi.map_or(t, |h| t.min(h));
            tlo.map_or(t, |l| t.max(l))
        }
        other => return Ok(other),
    };
    Ok(Extended::Finite(family.risk_reduction(sigma * theta)?))
}

/// Right limit `H(p+)`, approximated by `H(p + delta)`.
pub fn h_plus_law<T: Scalar>(
    family: &TestFamily<T>,
    d: &Distribution<T>,
    p: T,
    delta: T,
    opts: &BisectOptions<T>,
) -> Result<Extended<T>> {
    h_law(family, d, p + delta, opts)
}

/// Which curve to tabulate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveKind {
    Pi,
    R,
    H,
}

impl CurveKind {
    /// CSV header of the curve.
    pub fn header(self) -> &'static str {
        match self {
            CurveKind::Pi => "r,pi",
            CurveKind::R => "p,r_measure",
            CurveKind::H => "p,h",
        }
    }
}

/// Tabulates `Π`, `R` or `H` on the given abscissae.
pub fn export_curve<T: Scalar>(ctx: &VnRContext<T>, kind: CurveKind, points: &[T]) -> Result<Vec<(T, Extended<T>)>> {
    let d = ctx.law()?;
    points
        .iter()
        .map(|&s| {
            let v = match kind {
                CurveKind::Pi => ctx.family.pi(&d, s)?,
                CurveKind::R => r_measure_law(&ctx.family, &d, s, &ctx.options)?,
                CurveKind::H => h_law(&ctx.family, &d, s, &ctx.options)?,
            };
            Ok((s, v))
        })
        .collect()
}
