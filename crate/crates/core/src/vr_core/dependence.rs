//! How `Π` and `R` depend on the class of test claims, and how they react to
//! cash added to the price or the payoff.

use serde_json::{json, Value};

use super::{r_measure_law, BisectOptions, VnRContext};
use crate::dist_core::{Distribution, Payoff};
use crate::error::{Result, VnrError};
use crate::extended::Extended;
use crate::io;
use crate::scalar::Scalar;
use crate::test_families::{FamilyKind, Level, PhiVariant, TestFamily};

/// Continuous piecewise-linear claim with linear tails; closed under linear
/// combinations, which makes sums and mixtures of classes exact.
#[derive(Clone, Debug, PartialEq)]
pub struct PwlClaim<T> {
    knots: Vec<(T, T)>,
    left_slope: T,
    right_slope: T,
}

impl<T: Scalar> PwlClaim<T> {
    pub fn new(knots: Vec<(T, T)>, left_slope: T, right_slope: T) -> Result<Self> {
        if knots.is_empty() {
            return Err(VnrError::validation("knots", "at least one knot is required"));
        }
        if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(VnrError::validation("knots", "knots must be strictly increasing"));
        }
        Ok(Self { knots, left_slope, right_slope })
    }

    /// The claim `f_α` of a family with piecewise-linear payoffs.
    pub fn from_family(fam: &TestFamily<T>, alpha: T) -> Result<Option<Self>> {
        let c = fam.risk_reduction(alpha)?;
        let (one, zero) = (T::one(), T::zero());
        let claim = match fam.kind {
            FamilyKind::Call => Some(Self { knots: vec![(alpha, zero)], left_slope: zero, right_slope: one }),
            FamilyKind::InsuredPut(_) => Some(Self { knots: vec![(alpha, c)], left_slope: zero, right_slope: one }),
            FamilyKind::IdentityShift | FamilyKind::ApproxIdentity(crate::test_families::ApproxShape::Shift) => {
                Some(Self { knots: vec![(zero, alpha)], left_slope: one, right_slope: one })
            }
            _ => None,
        };
        Ok(claim)
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Self {
        let mut xs: Vec<T> = self.knots.iter().chain(&other.knots).map(|k| k.0).collect();
        xs.sort_by(|u, v| u.partial_cmp(v).expect("finite knots"));
        xs.dedup();
        Self {
            knots: xs.into_iter().map(|x| (x, a * self.eval(x) + b * other.eval(x))).collect(),
            left_slope: a * self.left_slope + b * other.left_slope,
            right_slope: a * self.right_slope + b * other.right_slope,
        }
    }

    /// Infimum over the line of `self(x) + s·x`.
    fn inf_tilted(&self, s: T) -> Extended<T> {
        if self.left_slope + s > T::zero() || self.right_slope + s < T::zero() {
            return Extended::NegInf;
        }
        Extended::Finite(self.knots.iter().map(|&(x, y)| y + s * x).fold(T::infinity(), T::min))
    }

    /// Closed-form risk reduction for the worst-case variants.
    pub fn phi(&self, variant: PhiVariant) -> Option<Extended<T>> {
        match variant {
            PhiVariant::WorstExcess => Some(self.inf_tilted(-T::one())),
            PhiVariant::WorstPayoff => Some(self.inf_tilted(T::zero())),
            PhiVariant::WorstShortfall => {
                let neg = self.combine(-T::one(), self, T::zero());
                Some(-neg.inf_tilted(T::one()))
            }
            _ => None,
        }
    }
}

impl<T: Scalar> Payoff<T> for PwlClaim<T> {
    fn eval(&self, x: T) -> T {
        let k = &self.knots;
        let idx = k.partition_point(|p| p.0 <= x);
        if idx == 0 {
            return k[0].1 + self.left_slope * (x - k[0].0);
        }
        if idx == k.len() {
            let (x1, y1) = k[k.len() - 1];
            return y1 + self.right_slope * (x - x1);
        }
        let ((x0, y0), (x1, y1)) = (k[idx - 1], k[idx]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
    fn kinks(&self) -> Vec<T> {
        self.knots.iter().map(|k| k.0).collect()
    }
    fn piecewise_linear(&self) -> bool {
        true
    }
}

/// Outcome of one group of checks.
#[derive(Clone, Debug, PartialEq)]
pub enum CheckStatus {
    Passed,
    Violated,
    Skipped(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ItemReport<T> {
    pub item: u8,
    pub status: CheckStatus,
    pub checks: usize,
    pub violations: usize,
    pub max_violation: T,
}

impl<T: Scalar> ItemReport<T> {
    fn skipped(item: u8, reason: impl Into<String>) -> Self {
        Self { item, status: CheckStatus::Skipped(reason.into()), checks: 0, violations: 0, max_violation: T::zero() }
    }

    fn tally(item: u8) -> Self {
        Self { item, status: CheckStatus::Passed, checks: 0, violations: 0, max_violation: T::zero() }
    }

    /// Records `lhs <= rhs` up to `tol`.
    fn le(&mut self, lhs: Extended<T>, rhs: Extended<T>, tol: T) {
        self.checks += 1;
        if lhs.approx_le(rhs, tol) {
            return;
        }
        self.violations += 1;
        self.status = CheckStatus::Violated;
        let gap = match lhs.sub(rhs) {
            Extended::Finite(g) => g,
            _ => T::infinity(),
        };
        self.max_violation = self.max_violation.max(gap);
    }

    pub fn to_json(&self) -> Value {
        let (status, reason) = match &self.status {
            CheckStatus::Passed => ("passed", None),
            CheckStatus::Violated => ("violated", None),
            CheckStatus::Skipped(r) => ("skipped", Some(r.clone())),
        };
        json!({
            "item": self.item,
            "status": status,
            "reason": reason,
            "checks": self.checks,
            "violations": self.violations,
            "max_violation": io::num(self.max_violation.as_f64()),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DependenceReport<T> {
    pub items: Vec<ItemReport<T>>,
}

impl<T: Scalar> DependenceReport<T> {
    pub fn violations(&self) -> usize {
        self.items.iter().map(|i| i.violations).sum()
    }

    pub fn to_json(&self) -> Value {
        json!({ "items": self.items.iter().map(ItemReport::to_json).collect::<Vec<_>>() })
    }
}

/// A finite class of claims with their prices and risk reductions.
struct FiniteClass<T> {
    members: Vec<(PwlClaim<T>, T, Extended<T>)>,
}

impl<T: Scalar> FiniteClass<T> {
    fn new(claims: Vec<PwlClaim<T>>, d: &Distribution<T>, variant: PhiVariant) -> Self {
        let members = claims
            .into_iter()
            .map(|f| {
                let price = d.expectation(&f).to_float();
                let phi = f.phi(variant).expect("worst-case variant");
                (f, price, phi)
            })
            .collect();
        Self { members }
    }

    /// `Π_K(r) = min{E f : φ(f) >= r}`; the slack absorbs rounding in `φ`
    /// of combined claims.
    fn pi(&self, r: T) -> Extended<T> {
        let slack = T::lit(1e-12) * T::one().max(r.abs());
        self.members
            .iter()
            .filter(|m| m.2 >= Extended::Finite(r - slack))
            .fold(Extended::PosInf, |acc, m| acc.min(Extended::Finite(m.1)))
    }

    /// `R_K(p) = sup{s : Π_K(s) <= p} = max{φ(f) : E f <= p}`.
    fn r(&self, p: T) -> Extended<T> {
        let slack = T::lit(1e-12) * T::one().max(p.abs());
        self.members.iter().filter(|m| m.1 <= p + slack).fold(Extended::NegInf, |acc, m| acc.max(m.2))
    }

    fn prices(&self) -> impl Iterator<Item = T> + '_ {
        self.members.iter().map(|m| m.1)
    }
}

/// Parameters of the claims reaching each level of `r_grid`, plus the atoms
/// of the law that lie in the parameter domain.
fn parameter_grid<T: Scalar>(fam: &TestFamily<T>, d: &Distribution<T>, r_grid: &[T]) -> Vec<T> {
    let mut params: Vec<T> = r_grid
        .iter()
        .filter_map(|&r| match fam.level(r) {
            Level::At(a) => Some(a),
            _ => None,
        })
        .chain(d.atoms().into_iter().map(|a| a.0))
        .filter(|&a| fam.check(a).is_ok())
        .collect();
    params.sort_by(|a, b| a.partial_cmp(b).expect("finite parameter"));
    params.dedup();
    params
}

fn claims<T: Scalar>(fam: &TestFamily<T>, params: &[T]) -> Result<Option<Vec<PwlClaim<T>>>> {
    params.iter().map(|&a| PwlClaim::from_family(fam, a)).collect()
}

fn nested<T: Scalar>(inner: &TestFamily<T>, outer: &TestFamily<T>) -> bool {
    let lo_ok = match (inner.lo, outer.lo) {
        (_, None) => true,
        (Some(a), Some(b)) => a >= b,
        (None, Some(_)) => false,
    };
    let hi_ok = match (inner.hi, outer.hi) {
        (_, None) => true,
        (Some(a), Some(b)) => a <= b,
        (None, Some(_)) => false,
    };
    inner.kind == outer.kind && lo_ok && hi_ok
}

/// Checks the ordering of `Π` and `R` under inclusion of claim classes (item
/// 1), under mixtures `λK¹ + (1-λ)K²` (item 2) and under Minkowski sums
/// `K¹ + K²` (item 3).
///
/// Item 1 uses the exact family functionals. Items 2 and 3 work on the finite
/// classes spanned by [`parameter_grid`], where `Π` and `R` are exact, and are
/// skipped when the hypothesis on `φ` fails on the class.
pub fn dependence_k_check<T: Scalar>(
    fam1: &TestFamily<T>,
    fam2: &TestFamily<T>,
    d: &Distribution<T>,
    lambda: T,
    p_grid: &[T],
    r_grid: &[T],
    opts: &BisectOptions<T>,
) -> Result<DependenceReport<T>> {
    if !(lambda >= T::zero() && lambda <= T::one()) {
        return Err(VnrError::Domain("mixing weight must lie in [0, 1]".into()));
    }
    let tol = T::lit(1e-8);
    let mut items = Vec::with_capacity(3);

    if nested(fam1, fam2) {
        let mut rep = ItemReport::tally(1);
        for &r in r_grid {
            rep.le(fam2.pi(d, r)?, fam1.pi(d, r)?, tol);
        }
        for &p in p_grid {
            rep.le(r_measure_law(fam1, d, p, opts)?, r_measure_law(fam2, d, p, opts)?, tol);
        }
        items.push(rep);
    } else {
        items.push(ItemReport::skipped(1, "the first class is not a restriction of the second"));
    }

    let variant = fam1.phi_variant();
    let classes = if variant != fam2.phi_variant() {
        Err("the families use different risk reductions".to_string())
    } else {
        match (claims(fam1, &parameter_grid(fam1, d, r_grid))?, claims(fam2, &parameter_grid(fam2, d, r_grid))?) {
            (Some(c1), Some(c2)) => Ok((c1, c2)),
            _ => Err("finite classes need piecewise-linear claims".to_string()),
        }
    };
    let (c1, c2) = match classes {
        Ok(c) => c,
        Err(reason) => {
            items.push(ItemReport::skipped(2, reason.clone()));
            items.push(ItemReport::skipped(3, reason));
            return Ok(DependenceReport { items });
        }
    };
    let k1 = FiniteClass::new(c1.clone(), d, variant);
    let k2 = FiniteClass::new(c2.clone(), d, variant);
    let (mix, sum): (Vec<_>, Vec<_>) = c1
        .iter()
        .flat_map(|f| c2.iter().map(move |g| (f, g)))
        .map(|(f, g)| (f.combine(lambda, g, T::one() - lambda), f.combine(T::one(), g, T::one())))
        .unzip();
    let km = FiniteClass::new(mix, d, variant);
    let ks = FiniteClass::new(sum, d, variant);
    let n2 = k2.members.len();
    let hypothesis = |k: &FiniteClass<T>| {
        k.members.iter().enumerate().all(|(idx, m)| {
            let floor = k1.members[idx / n2].2.min(k2.members[idx % n2].2);
            floor.approx_le(m.2, T::lit(1e-12))
        })
    };

    if hypothesis(&km) {
        let mut rep = ItemReport::tally(2);
        let (l1, l2) = (Extended::Finite(lambda), Extended::Finite(T::one() - lambda));
        for &r in r_grid {
            let rhs = scale(l1, k1.pi(r)).add(scale(l2, k2.pi(r)));
            rep.le(km.pi(r), rhs, tol);
        }
        for &p in p_grid {
            rep.le(k1.r(p).min(k2.r(p)), km.r(p), tol);
        }
        items.push(rep);
    } else {
        items.push(ItemReport::skipped(2, "risk reduction is not quasi-concave on the mixed class"));
    }

    if hypothesis(&ks) {
        let mut rep = ItemReport::tally(3);
        for &r in r_grid {
            rep.le(ks.pi(r), k1.pi(r).add(k2.pi(r)), tol);
        }
        for &p in p_grid {
            let best = k1.prices().fold(Extended::NegInf, |acc, p1| acc.max(k1.r(p1).min(k2.r(p - p1))));
            rep.le(best, ks.r(p), tol);
        }
        items.push(rep);
    } else {
        items.push(ItemReport::skipped(3, "risk reduction is not superlevel-additive on the summed class"));
    }
    Ok(DependenceReport { items })
}

/// `w·x` for a weight `w >= 0`, with `0·(±inf) = 0`.
fn scale<T: Scalar>(w: Extended<T>, x: Extended<T>) -> Extended<T> {
    match (w, x) {
        (Extended::Finite(a), _) if a == T::zero() => Extended::Finite(T::zero()),
        (Extended::Finite(a), Extended::Finite(b)) => Extended::Finite(a * b),
        (_, other) => other,
    }
}

/// The four price-side conditions relating `Π` to cash.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CashCondition {
    /// `Π(r, p) = p + r`, giving `R(p, p) = 0`.
    A,
    /// `Π(r + α, X) = α + Π(r, X)`, giving `R(p + α, X) = α + R(p, X)`.
    B,
    /// `Π(r + α, X) = Π(r, X + α)`, giving `R(p, X + α) = R(p, X) - α`.
    C,
    /// `Π(r, X + α) = Π(r, X) + α`, giving `R(p + α, X + α) = R(p, X)`.
    D,
}

impl CashCondition {
    pub const ALL: [CashCondition; 4] = [CashCondition::A, CashCondition::B, CashCondition::C, CashCondition::D];

    pub fn name(self) -> &'static str {
        match self {
            CashCondition::A => "a",
            CashCondition::B => "b",
            CashCondition::C => "c",
            CashCondition::D => "d",
        }
    }

    /// Whether a built-in family satisfies the condition for every law.
    pub fn known_for<T>(self, kind: &FamilyKind<T>) -> Option<bool> {
        use crate::test_families::ApproxShape;
        match kind {
            FamilyKind::IdentityShift | FamilyKind::ApproxIdentity(ApproxShape::Shift) => Some(true),
            FamilyKind::Call => Some(self == CashCondition::C),
            FamilyKind::ExpConcave(_) => Some(self == CashCondition::B),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CashEntry {
    pub condition: CashCondition,
    /// The price-side condition held on the whole grid.
    pub holds: bool,
    pub known: Option<bool>,
    pub identity_checks: usize,
    pub identity_violations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CashReport {
    pub entries: Vec<CashEntry>,
}

impl CashReport {
    pub fn entry(&self, c: CashCondition) -> &CashEntry {
        self.entries.iter().find(|e| e.condition == c).expect("all conditions are reported")
    }

    pub fn violations(&self) -> usize {
        self.entries.iter().map(|e| e.identity_violations).sum()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "conditions": self.entries.iter().map(|e| json!({
                "condition": e.condition.name(),
                "holds": e.holds,
                "known": e.known,
                "identity_checks": e.identity_checks,
                "identity_violations": e.identity_violations,
            })).collect::<Vec<_>>()
        })
    }
}

/// Detects which cash conditions hold on the grids (with `p_grid` doubling as
/// the grid of levels `r`) and checks the matching identity of `R` wherever
/// one does.
pub fn cash_check<T: Scalar>(ctx: &VnRContext<T>, alpha_grid: &[T], p_grid: &[T]) -> Result<CashReport> {
    let fam = &ctx.family;
    let d = ctx.law()?;
    let opts = &ctx.options;
    let pi_tol = T::lit(1e-9);
    let r_tol = T::lit(1e-7);
    let rm = |law: &Distribution<T>, p: T| r_measure_law(fam, law, p, opts);
    let mut entries = Vec::with_capacity(4);
    for cond in CashCondition::ALL {
        let mut holds = true;
        'outer: for &r in p_grid {
            for &a in alpha_grid {
                let (lhs, rhs) = match cond {
                    CashCondition::A => (fam.pi(&Distribution::dirac(a), r)?, Extended::Finite(a + r)),
                    CashCondition::B => (fam.pi(&d, r + a)?, fam.pi(&d, r)?.add_finite(a)),
                    CashCondition::C => (fam.pi(&d, r + a)?, fam.pi(&d.translate(a), r)?),
                    CashCondition::D => (fam.pi(&d.translate(a), r)?, fam.pi(&d, r)?.add_finite(a)),
                };
                if !lhs.approx_eq(rhs, pi_tol) {
                    holds = false;
                    break 'outer;
                }
            }
        }
        let mut checks = 0;
        let mut violations = 0;
        if holds {
            for &p in p_grid {
                for &a in alpha_grid {
                    let (lhs, rhs) = match cond {
                        CashCondition::A => (rm(&Distribution::dirac(p), p)?, Extended::Finite(T::zero())),
                        CashCondition::B => (rm(&d, p + a)?, rm(&d, p)?.add_finite(a)),
                        CashCondition::C => (rm(&d.translate(a), p)?, rm(&d, p)?.add_finite(-a)),
                        CashCondition::D => (rm(&d.translate(a), p + a)?, rm(&d, p)?),
                    };
                    checks += 1;
                    if !lhs.approx_eq(rhs, r_tol) {
                        violations += 1;
                    }
                }
            }
        }
        entries.push(CashEntry {
            condition: cond,
            holds,
            known: cond.known_for(&fam.kind),
            identity_checks: checks,
            identity_violations: violations,
        });
    }
    Ok(CashReport { entries })
}
