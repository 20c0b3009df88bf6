//! One-parameter families of test claims with their risk-reduction values
//! and the generic constructions of a risk-reduction functional.

use crate::dist_core::{law, Distribution, Payoff, ScenarioSpace};
use crate::dist_risk::RiskMeasure;
use crate::error::{Result, VnrError};
use crate::extended::Extended;
use crate::scalar::Scalar;

/// Shape of an approximate-identity family `f_α`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ApproxShape {
    /// `f_α(x) = x + α`.
    Shift,
    /// `f_α(x) = x + α (3 + tanh x) / 4`, valid for `α >= -4`.
    Tanh,
}

/// Increasing scale `g` with `g(0) = 1` in the concave exponential family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Growth<T> {
    /// `g(α) = e^α`.
    Exp,
    /// `g(α) = 1 + s α` with `s > 0`.
    Linear(T),
}

/// Insurance premium `c(k) = base + rate · ln(1 + e^k)`.
///
/// Positive, strictly increasing, with `k - c(k)` strictly increasing and
/// unbounded whenever `base >= 0` and `0 < rate < 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Premium<T> {
    pub base: T,
    pub rate: T,
}

impl<T: Scalar> Premium<T> {
    pub fn new(base: T, rate: T) -> Result<Self> {
        if !(base >= T::zero() && base.is_finite()) {
            return Err(VnrError::validation("params.base", "premium base must be non-negative"));
        }
        if !(rate > T::zero() && rate < T::one()) {
            return Err(VnrError::validation("params.rate", "premium rate must lie in (0, 1)"));
        }
        Ok(Self { base, rate })
    }

    pub fn eval(&self, k: T) -> T {
        self.base + self.rate * softplus(k)
    }

    pub fn derivative(&self, k: T) -> T {
        self.rate / (T::one() + (-k).exp())
    }

    /// Solves `k - c(k) = r`.
    pub fn strike_for(&self, r: T) -> T {
        // k - c(k) has slope in [1 - rate, 1], which brackets the root.
        let h = |k: T| k - self.eval(k) - r;
        let mut lo = r;
        let mut hi = r + self.base + self.rate * (r.abs() + T::one()) / (T::one() - self.rate) + T::one();
        while h(lo) > T::zero() {
            lo = lo - (hi - lo);
        }
        while h(hi) < T::zero() {
            hi = hi + (hi - lo);
        }
        bisect_root(h, lo, hi)
    }
}

impl<T: Scalar> Default for Premium<T> {
    fn default() -> Self {
        Self { base: T::lit(0.1), rate: T::lit(0.4) }
    }
}

fn softplus<T: Scalar>(k: T) -> T {
    if k > T::zero() {
        k + (-k).exp().ln_1p()
    } else {
        k.exp().ln_1p()
    }
}

fn bisect_root<T: Scalar>(h: impl Fn(T) -> T, mut lo: T, mut hi: T) -> T {
    for _ in 0..200 {
        let mid = lo + (hi - lo) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if h(lo).abs() <= h(hi).abs() {
        lo
    } else {
        hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FamilyKind<T> {
    ApproxIdentity(ApproxShape),
    /// `f_k(x) = (x - k)^+`.
    Call,
    /// `f_α(x) = g(α) - e^{-x}`.
    ExpConcave(Growth<T>),
    /// `f_k(x) = x + (k - x)^+ - c(k)`.
    InsuredPut(Premium<T>),
    /// `f_α(x) = x + α`.
    IdentityShift,
}

/// Worst-case formula defining the risk reduction of a family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhiVariant {
    /// `-ρ(f(X))`.
    NegRhoF,
    /// `ρ(X - f(X))`.
    RhoDiff,
    /// `ρ(X) - ρ(f(X))`.
    RhoGap,
    /// `-ρ(f(X) - X)`.
    NegRhoExcess,
    /// `inf_x (f(x) - x)`.
    WorstExcess,
    /// `sup_x (f(x) - x)`, the negated infimum of the shortfall `x - f(x)`.
    WorstShortfall,
    /// `inf_x f(x)`.
    WorstPayoff,
}

impl PhiVariant {
    pub fn name(self) -> &'static str {
        match self {
            PhiVariant::NegRhoF => "neg_rho_f",
            PhiVariant::RhoDiff => "rho_diff",
            PhiVariant::RhoGap => "rho_gap",
            PhiVariant::NegRhoExcess => "neg_rho_excess",
            PhiVariant::WorstExcess => "worst_excess",
            PhiVariant::WorstShortfall => "worst_shortfall",
            PhiVariant::WorstPayoff => "worst_payoff",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [
            PhiVariant::NegRhoF,
            PhiVariant::RhoDiff,
            PhiVariant::RhoGap,
            PhiVariant::NegRhoExcess,
            PhiVariant::WorstExcess,
            PhiVariant::WorstShortfall,
            PhiVariant::WorstPayoff,
        ]
        .into_iter()
        .find(|v| v.name() == s)
        .ok_or_else(|| VnrError::Lookup(format!("unknown phi variant '{s}'")))
    }

    /// True for the worst-case variants that are concave in the claim.
    pub fn concave_in_claim(self) -> bool {
        matches!(self, PhiVariant::WorstExcess | PhiVariant::WorstPayoff)
    }
}

/// Smallest admissible parameter reaching a risk-reduction level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Level<T> {
    /// No admissible parameter reaches the level.
    Empty,
    /// Every parameter reaches it and the parameter set is unbounded on the cheap side.
    Floor,
    At(T),
}

/// A one-parameter family `{f_α}` of non-decreasing test claims with risk
/// reduction `c(α)`, optionally restricted to a parameter interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestFamily<T> {
    pub kind: FamilyKind<T>,
    pub lo: Option<T>,
    pub hi: Option<T>,
}

impl<T: Scalar> TestFamily<T> {
    pub fn new(kind: FamilyKind<T>) -> Self {
        let lo = match kind {
            FamilyKind::ApproxIdentity(ApproxShape::Tanh) => Some(T::lit(-4.0)),
            _ => None,
        };
        Self { kind, lo, hi: None }
    }

    pub fn call() -> Self {
        Self::new(FamilyKind::Call)
    }

    pub fn identity_shift() -> Self {
        Self::new(FamilyKind::IdentityShift)
    }

    pub fn exp_concave() -> Self {
        Self::new(FamilyKind::ExpConcave(Growth::Exp))
    }

    pub fn approx_identity(shape: ApproxShape) -> Self {
        Self::new(FamilyKind::ApproxIdentity(shape))
    }

    pub fn insured_put(premium: Premium<T>) -> Self {
        Self::new(FamilyKind::InsuredPut(premium))
    }

    /// Restricts the parameter set to `[lo, hi]`; `None` leaves a side open.
    pub fn restricted(mut self, lo: Option<T>, hi: Option<T>) -> Result<Self> {
        let lo = match (self.lo, lo) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        let hi = match (self.hi, hi) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        if let (Some(l), Some(h)) = (lo, hi) {
            if l > h {
                return Err(VnrError::Domain("empty parameter interval".into()));
            }
        }
        self.lo = lo;
        self.hi = hi;
        Ok(self)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            FamilyKind::ApproxIdentity(_) => "approx_identity",
            FamilyKind::Call => "call",
            FamilyKind::ExpConcave(_) => "exp_concave",
            FamilyKind::InsuredPut(_) => "insured_put",
            FamilyKind::IdentityShift => "identity_shift",
        }
    }

    pub fn check(&self, alpha: T) -> Result<()> {
        let inside = alpha.is_finite() && self.lo.is_none_or(|l| alpha >= l) && self.hi.is_none_or(|h| alpha <= h);
        if inside {
            Ok(())
        } else {
            Err(VnrError::Domain(format!("parameter {alpha} outside the family domain")))
        }
    }

    /// `+1` when payoff and risk reduction increase with the parameter, `-1`
    /// when both decrease.
    pub fn orientation(&self) -> i32 {
        match self.kind {
            FamilyKind::Call => -1,
            _ => 1,
        }
    }

    pub fn phi_variant(&self) -> PhiVariant {
        match self.kind {
            FamilyKind::ApproxIdentity(_) | FamilyKind::ExpConcave(_) => PhiVariant::WorstShortfall,
            FamilyKind::Call | FamilyKind::IdentityShift => PhiVariant::WorstExcess,
            FamilyKind::InsuredPut(_) => PhiVariant::WorstPayoff,
        }
    }

    /// True when every claim of the family is concave in `x`.
    pub fn concave_claims(&self) -> bool {
        matches!(
            self.kind,
            FamilyKind::ExpConcave(_) | FamilyKind::IdentityShift | FamilyKind::ApproxIdentity(ApproxShape::Shift)
        )
    }

    pub fn payoff(&self, alpha: T, x: T) -> Result<T> {
        self.check(alpha)?;
        Ok(self.payoff_unchecked(alpha, x))
    }

    fn payoff_unchecked(&self, a: T, x: T) -> T {
        match self.kind {
            FamilyKind::ApproxIdentity(ApproxShape::Shift) | FamilyKind::IdentityShift => x + a,
            FamilyKind::ApproxIdentity(ApproxShape::Tanh) => x + a * (T::lit(3.0) + x.tanh()) / T::lit(4.0),
            FamilyKind::Call => (x - a).max(T::zero()),
            FamilyKind::ExpConcave(g) => growth(g, a) - (-x).exp(),
            FamilyKind::InsuredPut(c) => x.max(a) - c.eval(a),
        }
    }

    pub fn risk_reduction(&self, alpha: T) -> Result<T> {
        self.check(alpha)?;
        Ok(self.c(alpha))
    }

    fn c(&self, a: T) -> T {
        match self.kind {
            FamilyKind::ApproxIdentity(ApproxShape::Shift) | FamilyKind::IdentityShift => a,
            FamilyKind::ApproxIdentity(ApproxShape::Tanh) => {
                if a >= T::zero() {
                    a
                } else {
                    a / T::lit(2.0)
                }
            }
            FamilyKind::Call => -a,
            FamilyKind::ExpConcave(g) => growth(g, a) - T::one(),
            FamilyKind::InsuredPut(c) => a - c.eval(a),
        }
    }

    /// Parameter with `c(α) = r` on the whole real line, `None` when `r` lies
    /// below the range of `c`.
    fn c_inverse(&self, r: T) -> Option<T> {
        match self.kind {
            FamilyKind::ApproxIdentity(ApproxShape::Shift) | FamilyKind::IdentityShift => Some(r),
            FamilyKind::ApproxIdentity(ApproxShape::Tanh) => Some(if r >= T::zero() { r } else { r * T::lit(2.0) }),
            FamilyKind::Call => Some(-r),
            FamilyKind::ExpConcave(Growth::Exp) => (r > -T::one()).then(|| (r + T::one()).ln()),
            FamilyKind::ExpConcave(Growth::Linear(s)) => Some(r / s),
            FamilyKind::InsuredPut(c) => Some(c.strike_for(r)),
        }
    }

    /// The cheapest admissible parameter with `c(α) >= r`.
    pub fn level(&self, r: T) -> Level<T> {
        let a = self.c_inverse(r);
        if self.orientation() > 0 {
            match (a, self.lo, self.hi) {
                (_, _, Some(h)) if a.is_some_and(|a| a > h) => Level::Empty,
                (Some(a), Some(l), _) => Level::At(a.max(l)),
                (Some(a), None, _) => Level::At(a),
                (None, Some(l), _) => Level::At(l),
                (None, None, _) => Level::Floor,
            }
        } else {
            match (a, self.lo, self.hi) {
                (None, _, Some(h)) => Level::At(h),
                (None, _, None) => Level::Floor,
                (Some(a), Some(l), _) if a < l => Level::Empty,
                (Some(a), _, Some(h)) => Level::At(a.min(h)),
                (Some(a), _, None) => Level::At(a),
            }
        }
    }

    pub fn claim(&self, alpha: T) -> Result<Claim<'_, T>> {
        self.check(alpha)?;
        Ok(Claim { family: self, alpha })
    }

    /// `E[f_α(X)]` under `law`.
    pub fn price(&self, alpha: T, d: &Distribution<T>) -> Result<Extended<T>> {
        Ok(d.expectation(&self.claim(alpha)?))
    }

    /// Infimum of the price over the cheap end of an unbounded parameter set.
    pub fn price_floor(&self, d: &Distribution<T>) -> Extended<T> {
        match self.kind {
            FamilyKind::Call => Extended::Finite(T::zero()),
            FamilyKind::ExpConcave(Growth::Exp) => -d.expectation(&|x: T| (-x).exp()),
            _ => Extended::NegInf,
        }
    }

    /// Pricing functional `Π(r) = inf{E f(X) : f in the family, c(f) >= r}`.
    pub fn pi(&self, d: &Distribution<T>, r: T) -> Result<Extended<T>> {
        if let FamilyKind::InsuredPut(c) = self.kind {
            return self.insured_put_pi(c, d, r);
        }
        match self.level(r) {
            Level::Empty => Ok(Extended::PosInf),
            Level::Floor => Ok(self.price_floor(d)),
            Level::At(a) => self.price(a, d),
        }
    }

    /// The price `E[max(X, k)] - c(k)` need not increase in `k`, so the
    /// infimum over admissible strikes is taken explicitly. For atomic laws
    /// the price is concave between atoms and the minimum sits at a
    /// candidate point; otherwise a grid search with golden refinement is used.
    fn insured_put_pi(&self, c: Premium<T>, d: &Distribution<T>, r: T) -> Result<Extended<T>> {
        let mut k0 = c.strike_for(r);
        if let Some(l) = self.lo {
            k0 = k0.max(l);
        }
        if self.hi.is_some_and(|h| k0 > h) {
            return Ok(Extended::PosInf);
        }
        let price = |k: T| d.expectation(&Claim { family: self, alpha: k }).to_float();
        let top = d.support_max();
        let end = self.hi.unwrap_or(top.max(k0));
        let mut best = price(k0);
        if d.is_atomic() {
            for (x, _) in d.atoms() {
                if x > k0 && x <= end {
                    best = best.min(price(x));
                }
            }
            if self.hi.is_some() {
                best = best.min(price(end));
            }
        } else if end > k0 {
            let (_, val) = grid_golden_min(&price, k0, end, 2000);
            best = best.min(val);
        }
        Ok(Extended::Finite(best))
    }

    /// `E[X] + E[(b(r) - X)^+] - c(b(r))`, which equals [`TestFamily::pi`]
    /// whenever the insured price is non-decreasing in the strike beyond `b(r)`.
    pub fn insured_put_direct(&self, d: &Distribution<T>, r: T) -> Result<T> {
        let FamilyKind::InsuredPut(c) = self.kind else {
            return Err(VnrError::Contract("not an insured put family".into()));
        };
        let k = c.strike_for(r);
        Ok(d.expectation(&Claim { family: self, alpha: k }).to_float())
    }

    /// `Π` computed from the definition: the left inverse of `c` is found by
    /// bisection on the parameter and the claim is integrated against the law.
    pub fn pi_by_search(&self, d: &Distribution<T>, r: T) -> Result<Extended<T>> {
        let sigma = T::from_i32(self.orientation()).expect("sign");
        let c = |theta: T| self.c(sigma * theta);
        let (tlo, thi) =
            if sigma > T::zero() { (self.lo, self.hi) } else { (self.hi.map(|h| -h), self.lo.map(|l| -l)) };
        let top = thi.unwrap_or(T::lit(1e12));
        if c(top) < r {
            return Ok(Extended::PosInf);
        }
        let bottom = tlo.unwrap_or(T::lit(-1e12));
        if c(bottom) >= r {
            return match tlo {
                Some(t) => self.price(sigma * t, d),
                None => Ok(self.price_floor(d)),
            };
        }
        let theta = bisect_root(|t| c(t) - r, bottom, top);
        let theta = if c(theta) < r { next_up(theta) } else { theta };
        self.price(sigma * theta, d)
    }
}

fn next_up<T: Scalar>(x: T) -> T {
    x + x.abs().max(T::min_positive_value()) * T::epsilon()
}

fn growth<T: Scalar>(g: Growth<T>, a: T) -> T {
    match g {
        Growth::Exp => a.exp(),
        Growth::Linear(s) => T::one() + s * a,
    }
}

/// A member `f_α` of a family, usable as a payoff.
#[derive(Clone, Copy, Debug)]
pub struct Claim<'a, T> {
    pub family: &'a TestFamily<T>,
    pub alpha: T,
}

impl<T: Scalar> Payoff<T> for Claim<'_, T> {
    fn eval(&self, x: T) -> T {
        self.family.payoff_unchecked(self.alpha, x)
    }
    fn kinks(&self) -> Vec<T> {
        match self.family.kind {
            FamilyKind::Call | FamilyKind::InsuredPut(_) => vec![self.alpha],
            _ => Vec::new(),
        }
    }
    fn piecewise_linear(&self) -> bool {
        matches!(
            self.family.kind,
            FamilyKind::Call
                | FamilyKind::InsuredPut(_)
                | FamilyKind::IdentityShift
                | FamilyKind::ApproxIdentity(ApproxShape::Shift)
        )
    }
}

/// Half-width of the search window for infima over the real line.
pub const SEARCH_SPAN: f64 = 1e6;
/// Grid points used before golden-section refinement.
pub const SEARCH_POINTS: usize = 10_000;

/// `inf_x g(x)` over the real line.
///
/// Piecewise-linear payoffs are handled exactly from their kinks and tail
/// slopes. Other payoffs are scanned on a grid over `[-1e6, 1e6]` and refined
/// by golden-section search around the best grid point.
pub fn infimum_on_line<T: Scalar, P: Payoff<T> + ?Sized>(g: &P) -> Extended<T> {
    if g.piecewise_linear() {
        let mut kinks = g.kinks();
        kinks.retain(|k| k.is_finite());
        kinks.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let (first, last) = match (kinks.first(), kinks.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => (T::zero(), T::zero()),
        };
        let one = T::one();
        let left_slope = g.eval(first) - g.eval(first - one);
        let right_slope = g.eval(last + one) - g.eval(last);
        let tol = T::epsilon() * T::lit(64.0) * (T::one() + g.eval(first).abs() + g.eval(last).abs());
        if left_slope > tol || right_slope < -tol {
            return Extended::NegInf;
        }
        let best = kinks.iter().map(|&k| g.eval(k)).fold(g.eval(first), T::min);
        return Extended::Finite(best);
    }
    let span = T::lit(SEARCH_SPAN);
    let (_, v) = grid_golden_min(&|x| g.eval(x), -span, span, SEARCH_POINTS);
    Extended::from_float(v)
}

/// Minimises `h` on `[a, b]` with a uniform grid of `n + 1` points followed by
/// golden-section search between the neighbours of the best grid point.
pub fn grid_golden_min<T: Scalar>(h: &dyn Fn(T) -> T, a: T, b: T, n: usize) -> (T, T) {
    let nn = T::from_usize(n).expect("count");
    let at = |i: usize| if i == n { b } else { a + (b - a) * T::from_usize(i).expect("index") / nn };
    let mut best_i = 0;
    let mut best_v = T::infinity();
    for i in 0..=n {
        let v = h(at(i));
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let (mut lo, mut hi) = (at(best_i.saturating_sub(1)), at((best_i + 1).min(n)));
    let phi = T::lit(0.618_033_988_749_894_8);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (h(x1), h(x2));
    for _ in 0..200 {
        if hi - lo <= T::epsilon() * (T::one() + lo.abs().max(hi.abs())) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = h(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = h(x2);
        }
    }
    let mut arg = at(best_i);
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v < best_v {
            best_v = v;
            arg = x;
        }
    }
    (arg, best_v)
}

/// Risk reduction of a claim computed from one of the generic constructions.
///
/// The risk-measure variants evaluate `ρ` on laws under `measure`; the
/// worst-case variants ignore the scenario and optimise over the real line.
pub fn generic_phi<T: Scalar, P: Payoff<T> + ?Sized>(
    f: &P,
    variant: PhiVariant,
    scenario: &ScenarioSpace<T>,
    measure: &str,
    variable: &str,
    rho: &RiskMeasure<T>,
) -> Result<Extended<T>> {
    let q = scenario.measure(measure)?;
    let x = scenario.variable(variable)?;
    let fx: Vec<T> = x.iter().map(|&v| f.eval(v)).collect();
    let rho_of = |v: &[T]| -> Result<Extended<T>> { rho.evaluate(&law(q, v)?) };
    Ok(match variant {
        PhiVariant::NegRhoF => -rho_of(&fx)?,
        PhiVariant::RhoDiff => rho_of(&x.iter().zip(&fx).map(|(a, b)| *a - *b).collect::<Vec<_>>())?,
        PhiVariant::RhoGap => rho_of(x)?.sub(rho_of(&fx)?),
        PhiVariant::NegRhoExcess => -rho_of(&fx.iter().zip(x).map(|(b, a)| *b - *a).collect::<Vec<_>>())?,
        PhiVariant::WorstExcess => infimum_on_line(&ExcessOf(f)),
        PhiVariant::WorstShortfall => -infimum_on_line(&ShortfallOf(f)),
        PhiVariant::WorstPayoff => infimum_on_line(f),
    })
}

struct ExcessOf<'a, P: ?Sized>(&'a P);

impl<T: Scalar, P: Payoff<T> + ?Sized> Payoff<T> for ExcessOf<'_, P> {
    fn eval(&self, x: T) -> T {
        self.0.eval(x) - x
    }
    fn kinks(&self) -> Vec<T> {
        self.0.kinks()
    }
    fn piecewise_linear(&self) -> bool {
        self.0.piecewise_linear()
    }
}

struct ShortfallOf<'a, P: ?Sized>(&'a P);

impl<T: Scalar, P: Payoff<T> + ?Sized> Payoff<T> for ShortfallOf<'_, P> {
    fn eval(&self, x: T) -> T {
        x - self.0.eval(x)
    }
    fn kinks(&self) -> Vec<T> {
        self.0.kinks()
    }
    fn piecewise_linear(&self) -> bool {
        self.0.piecewise_linear()
    }
}
