//! Randomised verification of the value-and-risk axioms on finite scenario
//! spaces.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::{r_measure_law, BisectOptions};
use crate::dist_core::law;
use crate::dist_risk::RiskMeasure;
use crate::error::{Result, VnrError};
use crate::extended::Extended;
use crate::io;
use crate::scalar::Scalar;
use crate::test_families::TestFamily;

/// A map `R(p, X, Q)` on a finite scenario space, with `X` and `Q` given as
/// state vectors of equal length.
pub trait VnRMeasure<T>: Sync {
    fn value(&self, p: T, x: &[T], q: &[T]) -> Result<Extended<T>>;
}

/// `R_φ(p, X; Q)` of a test family.
#[derive(Clone, Debug)]
pub struct IntrinsicRisk<T> {
    pub family: TestFamily<T>,
    pub options: BisectOptions<T>,
}

impl<T: Scalar> IntrinsicRisk<T> {
    pub fn new(family: TestFamily<T>) -> Self {
        Self { family, options: BisectOptions::default() }
    }
}

impl<T: Scalar> VnRMeasure<T> for IntrinsicRisk<T> {
    fn value(&self, p: T, x: &[T], q: &[T]) -> Result<Extended<T>> {
        r_measure_law(&self.family, &law(q, x)?, p, &self.options)
    }
}

/// `p + ρ(P_X)`.
#[derive(Clone)]
pub struct PnlRisk<T> {
    pub rho: RiskMeasure<T>,
}

impl<T: Scalar> VnRMeasure<T> for PnlRisk<T> {
    fn value(&self, p: T, x: &[T], q: &[T]) -> Result<Extended<T>> {
        Ok(self.rho.evaluate(&law(q, x)?)?.add_finite(p))
    }
}

/// `ρ(T_{-p} P_X)`, the risk of the profit and loss at price `p`.
#[derive(Clone)]
pub struct ShiftedLawRisk<T> {
    pub rho: RiskMeasure<T>,
}

impl<T: Scalar> VnRMeasure<T> for ShiftedLawRisk<T> {
    fn value(&self, p: T, x: &[T], q: &[T]) -> Result<Extended<T>> {
        self.rho.evaluate(&law(q, x)?.translate(-p))
    }
}

/// Adapter for closures.
pub struct FnRisk<F>(pub F);

impl<T, F> VnRMeasure<T> for FnRisk<F>
where
    F: Fn(T, &[T], &[T]) -> Result<Extended<T>> + Sync,
{
    fn value(&self, p: T, x: &[T], q: &[T]) -> Result<Extended<T>> {
        (self.0)(p, x, q)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axiom {
    /// Non-decreasing in the price.
    OneMon,
    /// Non-increasing in the payoff.
    TwoMon,
    /// Non-increasing along first-order improvements of the law of `X`.
    ThreeMon,
    /// Quasi-convex in the measure.
    QCo,
    /// Cross-law invariant.
    Cli,
    /// Quasi-convex in the payoff.
    QCoX,
    /// `R(p + α, X) = R(p, X) + α`.
    Aff,
    /// `R(p, X + α) = R(p, X) - α`.
    Ca,
    /// `R(p + α, X + α) = R(p, X)`.
    Di,
    /// `R(p, X, Q¹) - α = R(p, Y, Q²)` whenever `T_α Q¹_X = Q²_Y`.
    Dca,
    /// `R(0, 0, Q) = 0`.
    Nor,
    /// `R(p, p, Q) = 0`.
    Par,
}

impl Axiom {
    pub const ALL: [Axiom; 12] = [
        Axiom::OneMon,
        Axiom::TwoMon,
        Axiom::ThreeMon,
        Axiom::QCo,
        Axiom::Cli,
        Axiom::QCoX,
        Axiom::Aff,
        Axiom::Ca,
        Axiom::Di,
        Axiom::Dca,
        Axiom::Nor,
        Axiom::Par,
    ];

    /// The four defining properties plus cross-law invariance.
    pub const VALUE_AND_RISK: [Axiom; 5] = [Axiom::OneMon, Axiom::TwoMon, Axiom::ThreeMon, Axiom::QCo, Axiom::Cli];

    pub fn tag(self) -> &'static str {
        match self {
            Axiom::OneMon => "1Mon",
            Axiom::TwoMon => "2Mon",
            Axiom::ThreeMon => "3Mon",
            Axiom::QCo => "QCo",
            Axiom::Cli => "CLI",
            Axiom::QCoX => "QCoX",
            Axiom::Aff => "Aff",
            Axiom::Ca => "CA",
            Axiom::Di => "DI",
            Axiom::Dca => "DCA",
            Axiom::Nor => "Nor",
            Axiom::Par => "Par",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Axiom::ALL
            .into_iter()
            .find(|a| a.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| VnrError::Lookup(format!("unknown axiom '{s}'")))
    }

    fn index(self) -> u64 {
        Axiom::ALL.iter().position(|&a| a == self).expect("listed") as u64
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// One randomised test case. Fields not used by an axiom repeat the base
/// case (`p2 = p`, `y = x`, `q2 = q`).
#[derive(Clone, Debug, PartialEq)]
pub struct Instance<T> {
    pub p: T,
    pub p2: T,
    pub alpha: T,
    pub lambda: T,
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub q: Vec<T>,
    pub q2: Vec<T>,
}

impl<T: Scalar> Instance<T> {
    pub fn to_json(&self) -> Value {
        json!({
            "p": io::num(self.p.as_f64()),
            "p2": io::num(self.p2.as_f64()),
            "alpha": io::num(self.alpha.as_f64()),
            "lambda": io::num(self.lambda.as_f64()),
            "x": io::nums(&self.x),
            "y": io::nums(&self.y),
            "q": io::nums(&self.q),
            "q2": io::nums(&self.q2),
        })
    }
}

/// Source of test cases. An `Err` carries the reason a case could not be
/// produced; the harness counts it as skipped.
pub trait InstanceGenerator<T>: Sync {
    fn generate(&self, axiom: Axiom, rng: &mut ChaCha8Rng) -> std::result::Result<Instance<T>, String>;
}

/// Random scenario spaces with 2 to 6 states and payoffs on a quarter grid,
/// so that ties between states occur.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomInstances {
    pub min_states: usize,
    pub max_states: usize,
    /// Payoffs lie in `[-value_range, value_range]`.
    pub value_range: f64,
    pub price_range: (f64, f64),
    pub retries: usize,
}

impl Default for RandomInstances {
    fn default() -> Self {
        Self { min_states: 2, max_states: 6, value_range: 4.0, price_range: (-2.0, 4.0), retries: 32 }
    }
}

impl RandomInstances {
    fn payoff(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-16..=16) as f64 * self.value_range / 16.0).collect()
    }

    fn probability(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    }

    /// Moves part of the mass of a state to a state with a strictly larger
    /// payoff, which makes the law of `x` under the result dominate.
    fn improve(x: &[f64], q: &[f64], rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        let pairs: Vec<(usize, usize)> =
            (0..x.len()).flat_map(|i| (0..x.len()).map(move |j| (i, j))).filter(|&(i, j)| x[i] < x[j]).collect();
        let &(i, j) = pairs.choose(rng)?;
        let mut q2 = q.to_vec();
        let m = q[i] * rng.gen_range(0.1..=1.0);
        q2[i] -= m;
        q2[j] += m;
        Some(q2)
    }

    /// Permutes the states and redistributes mass among states sharing a
    /// payoff; the law is unchanged.
    fn relabel(x: &[f64], q: &[f64], rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
        let mut perm: Vec<usize> = (0..x.len()).collect();
        perm.shuffle(rng);
        let y: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
        let mut q2: Vec<f64> = perm.iter().map(|&i| q[i]).collect();
        let mut seen = vec![false; y.len()];
        for i in 0..y.len() {
            if seen[i] {
                continue;
            }
            let group: Vec<usize> = (i..y.len()).filter(|&j| y[j] == y[i]).collect();
            for &j in &group {
                seen[j] = true;
            }
            if group.len() > 1 {
                let total: f64 = group.iter().map(|&j| q2[j]).sum();
                let w = Self::probability(group.len(), rng);
                for (&j, wj) in group.iter().zip(w) {
                    q2[j] = total * wj;
                }
            }
        }
        (y, q2)
    }
}

impl<T: Scalar> InstanceGenerator<T> for RandomInstances {
    fn generate(&self, axiom: Axiom, rng: &mut ChaCha8Rng) -> std::result::Result<Instance<T>, String> {
        let n = rng.gen_range(self.min_states..=self.max_states);
        let mut x = self.payoff(n, rng);
        let q = Self::probability(n, rng);
        let p = rng.gen_range(self.price_range.0..self.price_range.1);
        let alpha = rng.gen_range(-2.0..2.0);
        let lambda = rng.gen_range(0.05..0.95);
        let mut p2 = p;
        let mut y = x.clone();
        let mut q2 = q.clone();
        match axiom {
            Axiom::OneMon => p2 = p + rng.gen_range(0.0..2.0),
            Axiom::TwoMon => {
                y = x.iter().map(|v| v + (rng.gen_range(-2..=4) as f64).max(0.0) * 0.25).collect();
            }
            Axiom::ThreeMon => {
                let mut tries = 0;
                q2 = loop {
                    if let Some(q2) = Self::improve(&x, &q, rng) {
                        break q2;
                    }
                    tries += 1;
                    if tries > self.retries {
                        return Err(format!("no strictly ordered pair of states after {} retries", self.retries));
                    }
                    x = self.payoff(n, rng);
                };
            }
            Axiom::QCo => q2 = Self::probability(n, rng),
            Axiom::QCoX => y = self.payoff(n, rng),
            Axiom::Cli => {
                if rng.gen_bool(0.5) {
                    x[n - 1] = x[0];
                }
                (y, q2) = Self::relabel(&x, &q, rng);
            }
            Axiom::Dca => {
                let (z, qz) = Self::relabel(&x, &q, rng);
                y = z.into_iter().map(|v| v + alpha).collect();
                q2 = qz;
            }
            Axiom::Aff | Axiom::Ca | Axiom::Di | Axiom::Nor | Axiom::Par => {}
        }
        let v = |a: Vec<f64>| a.into_iter().map(T::lit).collect::<Vec<T>>();
        Ok(Instance {
            p: T::lit(p),
            p2: T::lit(p2),
            alpha: T::lit(alpha),
            lambda: T::lit(lambda),
            x: v(x),
            y: v(y),
            q: v(q),
            q2: v(q2),
        })
    }
}

/// A failed case with both sides of the violated relation.
#[derive(Clone, Debug, PartialEq)]
pub struct Counterexample<T> {
    pub case: usize,
    pub instance: Instance<T>,
    pub lhs: Extended<T>,
    pub rhs: Extended<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AxiomReport<T> {
    pub axiom: Axiom,
    pub cases: usize,
    pub failures: usize,
    pub skipped: usize,
    pub skip_reason: Option<String>,
    pub first_counterexample: Option<Counterexample<T>>,
}

impl<T: Scalar> AxiomReport<T> {
    /// No failure and at least one case actually evaluated.
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.skipped < self.cases
    }

    pub fn to_json(&self) -> Value {
        let ce = self.first_counterexample.as_ref().map_or(Value::Null, |c| {
            let mut v = c.instance.to_json();
            v["case"] = json!(c.case);
            v["lhs"] = io::ext(c.lhs);
            v["rhs"] = io::ext(c.rhs);
            v
        });
        json!({
            "axiom": self.axiom.tag(),
            "cases": self.cases,
            "failures": self.failures,
            "skipped": self.skipped,
            "skip_reason": self.skip_reason,
            "first_counterexample": ce,
        })
    }
}

/// `premises ⇒ conclusion` between axioms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Implication {
    pub premises: Vec<Axiom>,
    pub conclusion: Axiom,
}

impl Implication {
    /// The implications that hold for every value-and-risk measure.
    pub fn standard() -> Vec<Implication> {
        use Axiom::*;
        let imp = |premises: &[Axiom], conclusion| Implication { premises: premises.to_vec(), conclusion };
        vec![
            imp(&[Aff, Ca], Di),
            imp(&[Aff, Di], Ca),
            imp(&[Ca, Di], Aff),
            imp(&[Dca], Ca),
            imp(&[Dca], Cli),
            imp(&[Ca, Cli], Dca),
            imp(&[Nor, Di], Par),
        ]
    }

    pub fn label(&self) -> String {
        let lhs: Vec<&str> = self.premises.iter().map(|a| a.tag()).collect();
        format!("{} => {}", lhs.join(" & "), self.conclusion.tag())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImplicationStatus {
    /// Premises and conclusion all passed.
    Holds,
    /// Premises passed but the conclusion failed.
    Violated,
    /// Some premise failed.
    Vacuous,
    /// Some axiom involved was not evaluated.
    Untested,
}

impl ImplicationStatus {
    pub fn name(self) -> &'static str {
        match self {
            ImplicationStatus::Holds => "holds",
            ImplicationStatus::Violated => "violated",
            ImplicationStatus::Vacuous => "vacuous",
            ImplicationStatus::Untested => "untested",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport<T> {
    pub axioms: Vec<AxiomReport<T>>,
    pub implications: Vec<(Implication, ImplicationStatus)>,
}

impl<T: Scalar> SuiteReport<T> {
    pub fn get(&self, axiom: Axiom) -> Option<&AxiomReport<T>> {
        self.axioms.iter().find(|r| r.axiom == axiom)
    }

    pub fn any_failure(&self) -> bool {
        self.axioms.iter().any(|r| r.failures > 0)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "axioms": self.axioms.iter().map(AxiomReport::to_json).collect::<Vec<_>>(),
            "implications": self.implications.iter().map(|(imp, st)| json!({
                "implication": imp.label(),
                "status": st.name(),
            })).collect::<Vec<_>>(),
        })
    }

    fn evaluate_implications(axioms: &[AxiomReport<T>]) -> Vec<(Implication, ImplicationStatus)> {
        let verdict = |a: Axiom| axioms.iter().find(|r| r.axiom == a && r.skipped < r.cases).map(|r| r.failures == 0);
        Implication::standard()
            .into_iter()
            .map(|imp| {
                let premises: Option<Vec<bool>> = imp.premises.iter().map(|&a| verdict(a)).collect();
                let status = match (premises, verdict(imp.conclusion)) {
                    (Some(ps), Some(c)) => {
                        if !ps.iter().all(|&b| b) {
                            ImplicationStatus::Vacuous
                        } else if c {
                            ImplicationStatus::Holds
                        } else {
                            ImplicationStatus::Violated
                        }
                    }
                    _ => ImplicationStatus::Untested,
                };
                (imp, status)
            })
            .collect()
    }
}

/// Relative tolerance of the axiom comparisons.
pub const AXIOM_TOL: f64 = 1e-7;

/// `Some((lhs, rhs))` when the case violates the axiom.
fn check_case<T: Scalar>(
    r: &dyn VnRMeasure<T>,
    axiom: Axiom,
    c: &Instance<T>,
) -> Result<Option<(Extended<T>, Extended<T>)>> {
    let tol = T::lit(AXIOM_TOL);
    let shift = |v: &[T], a: T| v.iter().map(|&z| z + a).collect::<Vec<T>>();
    let combine =
        |u: &[T], v: &[T]| u.iter().zip(v).map(|(&a, &b)| c.lambda * a + (T::one() - c.lambda) * b).collect::<Vec<T>>();
    let base = || r.value(c.p, &c.x, &c.q);
    let (lhs, rhs, equality) = match axiom {
        Axiom::OneMon => (base()?, r.value(c.p2, &c.x, &c.q)?, false),
        Axiom::TwoMon => (r.value(c.p, &c.y, &c.q)?, base()?, false),
        Axiom::ThreeMon => (r.value(c.p, &c.x, &c.q2)?, base()?, false),
        Axiom::QCo => {
            let mixed = combine(&c.q, &c.q2);
            (r.value(c.p, &c.x, &mixed)?, base()?.max(r.value(c.p, &c.x, &c.q2)?), false)
        }
        Axiom::QCoX => {
            let z = combine(&c.x, &c.y);
            (r.value(c.p, &z, &c.q)?, base()?.max(r.value(c.p, &c.y, &c.q)?), false)
        }
        Axiom::Cli => (base()?, r.value(c.p, &c.y, &c.q2)?, true),
        Axiom::Aff => (r.value(c.p + c.alpha, &c.x, &c.q)?, base()?.add_finite(c.alpha), true),
        Axiom::Ca => (r.value(c.p, &shift(&c.x, c.alpha), &c.q)?, base()?.add_finite(-c.alpha), true),
        Axiom::Di => (r.value(c.p + c.alpha, &shift(&c.x, c.alpha), &c.q)?, base()?, true),
        Axiom::Dca => (base()?.add_finite(-c.alpha), r.value(c.p, &c.y, &c.q2)?, true),
        Axiom::Nor => {
            let zero = vec![T::zero(); c.x.len()];
            (r.value(T::zero(), &zero, &c.q)?, Extended::Finite(T::zero()), true)
        }
        Axiom::Par => {
            let cash = vec![c.p; c.x.len()];
            (r.value(c.p, &cash, &c.q)?, Extended::Finite(T::zero()), true)
        }
    };
    let ok = if equality { lhs.approx_eq(rhs, tol) } else { lhs.approx_le(rhs, tol) };
    Ok((!ok).then_some((lhs, rhs)))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the random stream of one case.
pub fn case_seed(master: u64, axiom: Axiom, case: usize) -> u64 {
    splitmix(splitmix(splitmix(master) ^ axiom.index()) ^ case as u64)
}

enum Outcome<T> {
    Pass,
    Skip(String),
    Fail(Counterexample<T>),
}

/// Runs `n_cases` random cases per axiom. Cases are evaluated in parallel,
/// each on its own stream seeded from `(seed, axiom, case)`, and merged by
/// case index, so the report does not depend on the thread count.
pub fn axiom_check<T: Scalar>(
    r_impl: &dyn VnRMeasure<T>,
    suite: &[Axiom],
    gen: &dyn InstanceGenerator<T>,
    n_cases: usize,
    seed: u64,
) -> Result<SuiteReport<T>> {
    let mut reports = Vec::with_capacity(suite.len());
    for &axiom in suite {
        let outcomes: Vec<Outcome<T>> = (0..n_cases)
            .into_par_iter()
            .map(|case| {
                let mut rng = ChaCha8Rng::seed_from_u64(case_seed(seed, axiom, case));
                let instance = match gen.generate(axiom, &mut rng) {
                    Ok(i) => i,
                    Err(reason) => return Ok(Outcome::Skip(reason)),
                };
                Ok(match check_case(r_impl, axiom, &instance)? {
                    None => Outcome::Pass,
                    Some((lhs, rhs)) => Outcome::Fail(Counterexample { case, instance, lhs, rhs }),
                })
            })
            .collect::<Result<_>>()?;
        let mut report = AxiomReport {
            axiom,
            cases: n_cases,
            failures: 0,
            skipped: 0,
            skip_reason: None,
            first_counterexample: None,
        };
        for o in outcomes {
            match o {
                Outcome::Pass => {}
                Outcome::Skip(reason) => {
                    report.skipped += 1;
                    report.skip_reason.get_or_insert(reason);
                }
                Outcome::Fail(ce) => {
                    report.failures += 1;
                    report.first_counterexample.get_or_insert(ce);
                }
            }
        }
        reports.push(report);
    }
    let implications = SuiteReport::evaluate_implications(&reports);
    Ok(SuiteReport { axioms: reports, implications })
}
