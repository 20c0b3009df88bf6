//! Law-invariant risk measures on distributions and the dual functions used
//! in their representation over decreasing test functions.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dist_core::{merged_breakpoints, Distribution, NodeKind, Payoff};
use crate::error::{Result, VnrError};
use crate::extended::Extended;
use crate::scalar::Scalar;

/// How a benchmark function reaches a breakpoint from the previous one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BreakKind {
    Step,
    Linear,
}

/// Non-decreasing, right-continuous benchmark `Λ: R -> [0, 1]`, piecewise
/// constant or linear between breakpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaFn<T> {
    breakpoints: Vec<(T, T, BreakKind)>,
    left_value: T,
}

impl<T: Scalar> LambdaFn<T> {
    pub fn new(breakpoints: Vec<(T, T, BreakKind)>, left_value: T) -> Result<Self> {
        let in_unit = |v: T| v.is_finite() && v >= T::zero() && v <= T::one();
        if !in_unit(left_value) {
            return Err(VnrError::validation("left_value", "benchmark values must lie in [0, 1]"));
        }
        let mut prev_v = left_value;
        let mut prev_x: Option<T> = None;
        let mut out = Vec::with_capacity(breakpoints.len());
        for (i, &(x, v, mut kind)) in breakpoints.iter().enumerate() {
            let field = format!("breakpoints[{i}]");
            if !x.is_finite() || !in_unit(v) {
                return Err(VnrError::validation(field, "breakpoint needs finite x and a value in [0, 1]"));
            }
            if v < prev_v {
                return Err(VnrError::validation(field, "benchmark must be non-decreasing"));
            }
            match prev_x {
                Some(px) if x < px => {
                    return Err(VnrError::validation(field, "breakpoints must be sorted"));
                }
                Some(px) if x == px => kind = BreakKind::Step,
                None if kind == BreakKind::Linear => {
                    if v != left_value {
                        return Err(VnrError::validation(field, "first breakpoint cannot close a linear piece"));
                    }
                    kind = BreakKind::Step;
                }
                _ => {}
            }
            out.push((x, v, kind));
            prev_v = v;
            prev_x = Some(x);
        }
        Ok(Self { breakpoints: out, left_value })
    }

    pub fn constant(lambda: T) -> Result<Self> {
        Self::new(Vec::new(), lambda)
    }

    pub fn breakpoints(&self) -> &[(T, T, BreakKind)] {
        &self.breakpoints
    }

    pub fn left_value(&self) -> T {
        self.left_value
    }

    pub fn eval(&self, x: T) -> T {
        let idx = self.breakpoints.partition_point(|b| b.0 <= x);
        self.interpolate(idx, x)
    }

    /// Left limit `Λ(x-)`.
    pub fn eval_left(&self, x: T) -> T {
        let idx = self.breakpoints.partition_point(|b| b.0 < x);
        self.interpolate(idx, x)
    }

    fn interpolate(&self, idx: usize, x: T) -> T {
        if idx == 0 {
            return self.left_value;
        }
        let (px, pv, _) = self.breakpoints[idx - 1];
        match self.breakpoints.get(idx) {
            Some(&(nx, nv, BreakKind::Linear)) if nx > px => {
                let t = ((x - px) / (nx - px)).max(T::zero()).min(T::one());
                pv + (nv - pv) * t
            }
            _ => pv,
        }
    }

    /// `sup Λ`, attained at the right end.
    pub fn sup(&self) -> T {
        self.breakpoints.last().map_or(self.left_value, |b| b.1)
    }

    pub fn is_constant(&self) -> bool {
        self.breakpoints.iter().all(|b| b.1 == self.left_value)
    }

    /// The shifted benchmark `x -> Λ(x + alpha)`.
    pub fn shifted(&self, alpha: T) -> Self {
        Self {
            breakpoints: self.breakpoints.iter().map(|&(x, v, k)| (x - alpha, v, k)).collect(),
            left_value: self.left_value,
        }
    }

    fn xs(&self) -> impl Iterator<Item = T> + '_ {
        self.breakpoints.iter().map(|b| b.0)
    }

    fn check_well_posed(&self) -> Result<()> {
        if self.sup() >= T::one() {
            return Err(VnrError::WellPosedness(format!("benchmark supremum {} must be below 1", self.sup())));
        }
        Ok(())
    }
}

/// Value at risk `-sup{m : F(x) <= λ for x <= m}`; level 0 gives the worst case.
pub fn var<T: Scalar>(d: &Distribution<T>, lambda: T) -> Result<Extended<T>> {
    if !(lambda >= T::zero() && lambda < T::one()) {
        return Err(VnrError::Domain(format!("V@R level {lambda} outside [0, 1)")));
    }
    Ok(Extended::Finite(-d.quantile_upper(lambda)?))
}

/// Worst-case risk `-inf supp`.
pub fn worst_case<T: Scalar>(d: &Distribution<T>) -> Extended<T> {
    Extended::Finite(-d.support_min())
}

/// Lambda value at risk `-sup{m : F(x) <= Λ(x) for all x <= m}`.
///
/// The supremum is the infimum of the violation set `{F > Λ}`. Both functions
/// are affine between merged breakpoints, so each piece is checked at its left
/// end and by an exact linear crossing inside.
pub fn lambda_var<T: Scalar>(d: &Distribution<T>, lam: &LambdaFn<T>) -> Result<Extended<T>> {
    lam.check_well_posed()?;
    let mut xs = merged_breakpoints(&[d]);
    xs.extend(lam.xs());
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    xs.dedup();
    for (k, &a) in xs.iter().enumerate() {
        let ga = d.cdf(a) - lam.eval(a);
        if ga > T::zero() {
            return Ok(Extended::Finite(-a));
        }
        if let Some(&b) = xs.get(k + 1) {
            let gb = d.cdf_left(b) - lam.eval_left(b);
            if gb > T::zero() {
                let x = a + (-ga) / (gb - ga) * (b - a);
                return Ok(Extended::Finite(-x.min(b).max(a)));
            }
        }
    }
    // F reaches 1 > sup Λ at the last breakpoint, so the loop always returns.
    Err(VnrError::Internal("no violation of the benchmark found".into()))
}

/// Strictly decreasing continuous transform used by certainty equivalents.
pub trait DecreasingTransform<T>: Send + Sync {
    fn eval(&self, x: T) -> T;
    /// Inverse on the range; `None` outside it.
    fn inverse(&self, y: T) -> Option<T>;
    /// Lower bound of the transform, `None` when unbounded below.
    fn lower_bound(&self) -> Option<T>;
    /// `∫ f dP`; override for closed forms.
    fn integrate(&self, d: &Distribution<T>) -> Extended<T>
    where
        T: Scalar,
    {
        d.expectation(&|x| self.eval(x))
    }
}

/// `f(x) = exp(-θ x)`, whose certainty equivalent is the entropic risk measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponential<T> {
    pub theta: T,
}

impl<T: Scalar> DecreasingTransform<T> for Exponential<T> {
    fn eval(&self, x: T) -> T {
        (-self.theta * x).exp()
    }
    fn inverse(&self, y: T) -> Option<T> {
        (y > T::zero() && y.is_finite()).then(|| -y.ln() / self.theta)
    }
    fn lower_bound(&self) -> Option<T> {
        Some(T::zero())
    }
}

/// Certainty equivalent `-f^{-1}(∫ f dP)`.
///
/// Returns `+inf` when the integral falls outside the range of `f`.
pub fn certainty_equivalent<T: Scalar>(d: &Distribution<T>, f: &dyn DecreasingTransform<T>) -> Result<Extended<T>> {
    if f.lower_bound().is_none() {
        return Err(VnrError::Domain("transform must be bounded below".into()));
    }
    Ok(match f.integrate(d) {
        Extended::Finite(v) => f.inverse(v).map_or(Extended::PosInf, |x| Extended::Finite(-x)),
        _ => Extended::PosInf,
    })
}

/// Entropic risk `(1/θ) ln E exp(-θ X)`, evaluated with a shifted exponent.
pub fn entropic<T: Scalar>(d: &Distribution<T>, theta: T) -> Result<Extended<T>> {
    if !(theta > T::zero() && theta.is_finite()) {
        return Err(VnrError::Domain("entropic risk aversion must be positive".into()));
    }
    let m = d.support_min();
    let mut acc = T::zero();
    let mut prev_x = m;
    let mut prev_cdf = T::zero();
    for n in d.nodes() {
        let mass = n.cdf - prev_cdf;
        if mass > T::zero() {
            let term = match n.kind {
                NodeKind::Linear if n.x > prev_x => {
                    let (a, b) = (prev_x - m, n.x - m);
                    mass * ((-theta * a).exp() - (-theta * b).exp()) / (theta * (b - a))
                }
                _ => mass * (-theta * (n.x - m)).exp(),
            };
            acc = acc + term;
        }
        prev_x = n.x;
        prev_cdf = n.cdf;
    }
    Ok(Extended::from_float(-m + acc.ln() / theta))
}

/// A law-invariant risk measure on distributions.
#[derive(Clone)]
pub enum RiskMeasure<T> {
    VaR(T),
    LambdaVaR(LambdaFn<T>),
    WorstCase,
    Entropic(T),
    CertaintyEquivalent(Arc<dyn DecreasingTransform<T>>),
}

impl<T: Scalar> RiskMeasure<T> {
    pub fn evaluate(&self, d: &Distribution<T>) -> Result<Extended<T>> {
        match self {
            RiskMeasure::VaR(l) => var(d, *l),
            RiskMeasure::LambdaVaR(lam) => lambda_var(d, lam),
            RiskMeasure::WorstCase => Ok(worst_case(d)),
            RiskMeasure::Entropic(theta) => entropic(d, *theta),
            RiskMeasure::CertaintyEquivalent(f) => certainty_equivalent(d, f.as_ref()),
        }
    }
}

impl<T: Scalar> fmt::Debug for RiskMeasure<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RiskMeasure::VaR(l) => write!(f, "VaR({l})"),
            RiskMeasure::LambdaVaR(lam) => write!(f, "LambdaVaR({lam:?})"),
            RiskMeasure::WorstCase => write!(f, "WorstCase"),
            RiskMeasure::Entropic(t) => write!(f, "Entropic({t})"),
            RiskMeasure::CertaintyEquivalent(_) => write!(f, "CertaintyEquivalent(..)"),
        }
    }
}

/// Bounded, continuous, non-increasing piecewise-linear test function with
/// constant tails.
#[derive(Clone, Debug, PartialEq)]
pub struct DecreasingTestFn<T> {
    knots: Vec<(T, T)>,
}

impl<T: Scalar> DecreasingTestFn<T> {
    pub fn new(knots: Vec<(T, T)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(VnrError::validation("knots", "at least one knot is required"));
        }
        for (i, w) in knots.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                return Err(VnrError::validation(format!("knots[{}]", i + 1), "knots must be strictly increasing"));
            }
            if w[1].1 > w[0].1 {
                return Err(VnrError::validation(format!("knots[{}]", i + 1), "test function must be non-increasing"));
            }
        }
        if knots.iter().any(|k| !k.0.is_finite() || !k.1.is_finite()) {
            return Err(VnrError::validation("knots", "non-finite knot"));
        }
        Ok(Self { knots })
    }

    pub fn constant(c: T) -> Self {
        Self { knots: vec![(T::zero(), c)] }
    }

    /// `clamp((b - x) / w, 0, 1)`.
    pub fn ramp(b: T, w: T) -> Result<Self> {
        if !(w > T::zero()) {
            return Err(VnrError::Domain("ramp width must be positive".into()));
        }
        Self::new(vec![(b - w, T::one()), (b, T::zero())])
    }

    pub fn knots(&self) -> &[(T, T)] {
        &self.knots
    }

    /// `f(-inf)`.
    pub fn limit_left(&self) -> T {
        self.knots[0].1
    }

    /// `f(+inf)`.
    pub fn limit_right(&self) -> T {
        self.knots[self.knots.len() - 1].1
    }

    /// Largest `y` with `f(y) >= v`, i.e. the left inverse used in the dual
    /// formulas: `+inf` when `v <= f(+inf)`, `-inf` when `v > f(-inf)`.
    pub fn left_inverse(&self, v: T) -> Extended<T> {
        if v <= self.limit_right() {
            return Extended::PosInf;
        }
        if v > self.limit_left() {
            return Extended::NegInf;
        }
        for w in self.knots.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if y1 < v {
                let t = (y0 - v) / (y0 - y1);
                return Extended::Finite(x0 + (x1 - x0) * t);
            }
        }
        Extended::PosInf
    }
}

impl<T: Scalar> Payoff<T> for DecreasingTestFn<T> {
    fn eval(&self, x: T) -> T {
        let k = &self.knots;
        let idx = k.partition_point(|p| p.0 <= x);
        if idx == 0 {
            return k[0].1;
        }
        if idx == k.len() {
            return k[k.len() - 1].1;
        }
        let ((x0, y0), (x1, y1)) = (k[idx - 1], k[idx]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
    fn kinks(&self) -> Vec<T> {
        self.knots.iter().map(|p| p.0).collect()
    }
    fn piecewise_linear(&self) -> bool {
        true
    }
}

/// Hierarchical lattice of ramps on `[lo, hi]`.
///
/// All ramps share the width `(hi - lo) / 2^depth`; offsets are enumerated in
/// bit-reversed order so that every prefix is spread over the whole interval
/// and smaller grids are prefixes of larger ones.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RampLattice<T> {
    pub lo: T,
    pub hi: T,
    pub depth: u32,
}

impl<T: Scalar> RampLattice<T> {
    /// Lattice covering the support of `d` with a margin of 5% on both sides.
    pub fn covering(d: &Distribution<T>, depth: u32) -> Self {
        let (a, b) = (d.support_min(), d.support_max());
        let span = (b - a).max(T::one());
        let margin = span * T::lit(0.05);
        Self { lo: a - margin, hi: b + margin, depth }
    }

    pub fn width(&self) -> T {
        (self.hi - self.lo) / T::lit(2f64.powi(self.depth as i32))
    }

    /// The first `n` ramps of the lattice.
    pub fn ramps(&self, n: usize) -> Vec<DecreasingTestFn<T>> {
        let size = 1usize << self.depth;
        let w = self.width();
        (0..n.min(size))
            .map(|i| {
                let j = i.reverse_bits() >> (usize::BITS - self.depth);
                let b = self.lo + w * T::from_usize(j + 1).expect("index");
                DecreasingTestFn::ramp(b, w).expect("positive width")
            })
            .collect()
    }
}

/// Cumulative profile of `G(y) = ∫_{(-inf, y]} (1 - Λ) df`.
struct DualProfile<T> {
    /// `(a, b, slope of f, Λ(a), Λ(b-), G(a))` per piece.
    pieces: Vec<(T, T, T, T, T, T)>,
    total: T,
}

impl<T: Scalar> DualProfile<T> {
    fn new(f: &DecreasingTestFn<T>, lam: &LambdaFn<T>) -> Self {
        let knots = f.knots();
        let (lo, hi) = (knots[0].0, knots[knots.len() - 1].0);
        let mut xs: Vec<T> = knots.iter().map(|k| k.0).collect();
        xs.extend(lam.xs().filter(|&x| x > lo && x < hi));
        xs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        xs.dedup();
        let mut pieces = Vec::with_capacity(xs.len());
        let mut g = T::zero();
        for w in xs.windows(2) {
            let (a, b) = (w[0], w[1]);
            let slope = (f.eval(b) - f.eval(a)) / (b - a);
            let (la, lb) = (lam.eval(a), lam.eval_left(b));
            pieces.push((a, b, slope, la, lb, g));
            g = g + slope * (b - a) * (T::one() - (la + lb) / T::lit(2.0));
        }
        Self { pieces, total: g }
    }

    fn at(&self, y: T) -> T {
        let idx = self.pieces.partition_point(|p| p.0 <= y);
        if idx == 0 {
            return T::zero();
        }
        let (a, b, s, la, lb, ga) = self.pieces[idx - 1];
        if y >= b {
            return self.pieces.get(idx).map_or(self.total, |p| p.5);
        }
        let t = y - a;
        let kappa = (lb - la) / (T::lit(2.0) * (b - a));
        ga + s * ((T::one() - la) * t - kappa * t * t)
    }

    /// `sup{y : G(y) >= u}`.
    fn left_inverse(&self, u: T) -> Extended<T> {
        if u > T::zero() {
            return Extended::NegInf;
        }
        if u <= self.total {
            return Extended::PosInf;
        }
        for (k, &(a, b, s, la, lb, ga)) in self.pieces.iter().enumerate() {
            let gb = self.pieces.get(k + 1).map_or(self.total, |p| p.5);
            if gb >= u {
                continue;
            }
            let dd = (ga - u) / (-s);
            let one_la = T::one() - la;
            let kappa = (lb - la) / (T::lit(2.0) * (b - a));
            let disc = (one_la * one_la - T::lit(4.0) * kappa * dd).max(T::zero());
            let t = T::lit(2.0) * dd / (one_la + disc.sqrt());
            return Extended::Finite(a + t.max(T::zero()).min(b - a));
        }
        Extended::PosInf
    }
}

/// `V(a, f) = f(-inf) + ∫_{-inf}^{-a} (1 - Λ) df`.
pub fn dual_value<T: Scalar>(a: T, f: &DecreasingTestFn<T>, lam: &LambdaFn<T>) -> Result<T> {
    lam.check_well_posed()?;
    Ok(f.limit_left() + DualProfile::new(f, lam).at(-a))
}

/// Generalised inverse `inf{a : V(a, f) >= v}`.
pub fn dual_inverse<T: Scalar>(v: T, f: &DecreasingTestFn<T>, lam: &LambdaFn<T>) -> Result<Extended<T>> {
    lam.check_well_posed()?;
    if lam.is_constant() {
        let l = lam.left_value();
        let u = (v - l * f.limit_left()) / (T::one() - l);
        return Ok(-f.left_inverse(u));
    }
    Ok(-DualProfile::new(f, lam).left_inverse(v - f.limit_left()))
}

/// Lower bound `max_f V^{-1}(∫ f dP, f)` of the lambda value at risk over a
/// finite grid of decreasing test functions; `-inf` for an empty grid.
pub fn propvolle_lower_bound<T: Scalar>(
    d: &Distribution<T>,
    lam: &LambdaFn<T>,
    grid: &[DecreasingTestFn<T>],
) -> Result<Extended<T>> {
    lam.check_well_posed()?;
    let mut best = Extended::NegInf;
    for f in grid {
        // Round-off can push the integral just outside the range of f.
        let v = d.expectation(f).to_float().max(f.limit_right()).min(f.limit_left());
        best = best.max(dual_inverse(v, f, lam)?);
    }
    Ok(best)
}
