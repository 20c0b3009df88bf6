//! Finite-dimensional cone duality: polar cones of payoff cones, the `H`
//! function of a risk reduction and its dual representation `Ψ`.
//!
//! Geometry and linear programs are solved in `f64`; inputs and outputs use
//! the scalar type of the caller.

use std::fmt;
use std::sync::Arc;

use itertools::Itertools;
use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome, Variable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Result, VnrError};
use crate::extended::Extended;
use crate::io;
use crate::scalar::Scalar;

/// Tolerance of the polar membership test.
pub const POLAR_TOL: f64 = 1e-10;
/// Gap tolerance when `H` is solved exactly by linear programming.
pub const LP_TOL: f64 = 1e-9;
/// Largest number of index subsets tried by the enumerations.
pub const COMBINATION_BUDGET: usize = 2_000_000;
/// Largest number of lattice points generated.
pub const LATTICE_BUDGET: usize = 2_000_000;

const RANK_TOL: f64 = 1e-10;

/// Closed convex cone `{Σ λ_i g_i + Σ ν_j l_j : λ >= 0}` of payoff vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeSpec<T> {
    states: usize,
    generators: Vec<Vec<T>>,
    lines: Vec<Vec<T>>,
}

impl<T: Scalar> ConeSpec<T> {
    pub fn new(states: usize, generators: Vec<Vec<T>>, lines: Vec<Vec<T>>) -> Result<Self> {
        if states == 0 {
            return Err(VnrError::validation("states", "at least one state is required"));
        }
        for (name, vs) in [("generators", &generators), ("lines", &lines)] {
            for (i, g) in vs.iter().enumerate() {
                if g.len() != states {
                    return Err(VnrError::validation(
                        format!("{name}[{i}]"),
                        "length differs from the number of states",
                    ));
                }
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(VnrError::validation(format!("{name}[{i}]"), "non-finite entry"));
                }
            }
        }
        Ok(Self { states, generators, lines })
    }

    /// The whole space, spanned by the unit vectors as lines.
    pub fn full_space(states: usize) -> Result<Self> {
        Self::new(
            states,
            Vec::new(),
            unit_vectors(states).into_iter().map(|v| v.into_iter().map(T::lit).collect()).collect(),
        )
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn generators(&self) -> &[Vec<T>] {
        &self.generators
    }

    pub fn lines(&self) -> &[Vec<T>] {
        &self.lines
    }

    fn gens64(&self) -> Vec<Vec<f64>> {
        to64(&self.generators)
    }

    fn lines64(&self) -> Vec<Vec<f64>> {
        to64(&self.lines)
    }

    fn check_dim(&self, v: &[T], what: &str) -> Result<()> {
        if v.len() != self.states {
            return Err(VnrError::Contract(format!(
                "{what} has {} entries, the cone has {} states",
                v.len(),
                self.states
            )));
        }
        Ok(())
    }

    /// Whether `y` lies in the cone, decided by a feasibility program.
    pub fn contains(&self, y: &[T]) -> Result<bool> {
        self.check_dim(y, "payoff")?;
        let y = vec64(y);
        let mut lp = ConeLp::new(self, OptimizationDirection::Minimize);
        for (s, &ys) in y.iter().enumerate() {
            lp.problem.add_constraint(lp.xi(s), ComparisonOp::Eq, ys);
        }
        Ok(solved(lp.problem.solve(), f64::INFINITY, 0.0)?.is_finite())
    }

    /// Extreme rays of `K⁺ = K ∩ R^n_+`, each scaled to total mass one.
    pub fn positive_part_rays(&self) -> Result<Vec<Vec<T>>> {
        Ok(positive_rays(self)?.into_iter().map(|r| r.into_iter().map(T::lit).collect()).collect())
    }
}

fn to64<T: Scalar>(vs: &[Vec<T>]) -> Vec<Vec<f64>> {
    vs.iter().map(|v| vec64(v)).collect()
}

fn vec64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

fn unit_vectors(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row echelon form by Gaussian elimination with partial pivoting; returns
/// the reduced rows and the pivot columns.
fn echelon(rows: &[Vec<f64>], n: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let scale = m.iter().flatten().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..n {
        if r == m.len() {
            break;
        }
        let (best, val) =
            (r..m.len()).map(|i| (i, m[i][col].abs())).fold((r, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        if val <= RANK_TOL * scale {
            continue;
        }
        m.swap(r, best);
        let p = m[r][col];
        for v in m[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            let f = row[col];
            if i != r && f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        pivots.push(col);
        r += 1;
    }
    m.truncate(r);
    (m, pivots)
}

fn rank(rows: &[Vec<f64>], n: usize) -> usize {
    echelon(rows, n).1.len()
}

/// Basis of `{v : rows · v = 0}`.
fn null_space(rows: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let (m, pivots) = echelon(rows, n);
    (0..n)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut v = vec![0.0; n];
            v[free] = 1.0;
            for (row, &pc) in m.iter().zip(&pivots) {
                v[pc] = -row[free];
            }
            v
        })
        .collect()
}

fn push_unique(out: &mut Vec<Vec<f64>>, v: Vec<f64>) {
    if !out.iter().any(|u| u.iter().zip(&v).all(|(a, b)| (a - b).abs() <= 1e-9)) {
        out.push(v);
    }
}

/// Index subsets of size `d`; the empty subset when `d == 0`.
fn subsets(len: usize, d: usize) -> Box<dyn Iterator<Item = Vec<usize>>> {
    if d == 0 {
        Box::new(std::iter::once(Vec::new()))
    } else {
        Box::new((0..len).combinations(d))
    }
}

/// Extreme rays of the pointed cone `{a : ineq · a >= 0, eq · a = 0}`, scaled
/// to unit maximum norm.
fn extreme_rays(ineq: &[Vec<f64>], eq: &[Vec<f64>], n: usize) -> Result<Vec<Vec<f64>>> {
    let r_eq = rank(eq, n);
    if r_eq >= n {
        return Ok(Vec::new());
    }
    let d = n - 1 - r_eq;
    let mut out = Vec::new();
    for (count, subset) in subsets(ineq.len(), d).enumerate() {
        if count >= COMBINATION_BUDGET {
            return Err(VnrError::Contract("cone too large for ray enumeration".into()));
        }
        let mut rows = eq.to_vec();
        rows.extend(subset.iter().map(|&i| ineq[i].clone()));
        let ns = null_space(&rows, n);
        if ns.len() != 1 {
            continue;
        }
        for sign in [1.0, -1.0] {
            let norm = ns[0].iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let r: Vec<f64> = ns[0].iter().map(|v| sign * v / norm).collect();
            if ineq.iter().all(|a| dot(a, &r) >= -RANK_TOL) {
                push_unique(&mut out, r);
            }
        }
    }
    Ok(out)
}

/// Extreme rays of `K⁺`, normalised to total mass one.
///
/// The facets of `K` are the extreme rays of the pointed part of its dual
/// cone; `K⁺` is then cut out by the facets, the orthogonal complement of
/// `K` and the positivity constraints.
fn positive_rays<T: Scalar>(c: &ConeSpec<T>) -> Result<Vec<Vec<f64>>> {
    let n = c.states;
    let g = c.gens64();
    let l = c.lines64();
    let span: Vec<Vec<f64>> = g.iter().chain(&l).cloned().collect();
    let perp = null_space(&span, n);
    let dual_eq: Vec<Vec<f64>> = l.iter().chain(&perp).cloned().collect();
    let facets = extreme_rays(&g, &dual_eq, n)?;
    let ineq: Vec<Vec<f64>> = facets.into_iter().chain(unit_vectors(n)).collect();
    let rays = extreme_rays(&ineq, &perp, n)?;
    Ok(rays
        .into_iter()
        .map(|r| {
            let s: f64 = r.iter().sum();
            r.into_iter().map(|v| (v / s).max(0.0)).collect()
        })
        .collect())
}

/// `μ ∈ K°`, i.e. `⟨μ, ξ⟩ >= 0` on `K⁺` up to [`POLAR_TOL`], tested on the
/// extreme rays of `K⁺`.
pub fn polar_member<T: Scalar>(c: &ConeSpec<T>, mu: &[T]) -> Result<bool> {
    c.check_dim(mu, "measure")?;
    let m = vec64(mu);
    Ok(positive_rays(c)?.iter().all(|r| dot(r, &m) >= -POLAR_TOL))
}

/// [`polar_member`] decided by one linear program,
/// `min{⟨μ, ξ⟩ : ξ ∈ K, ξ >= 0, Σ ξ = 1}`, without enumerating rays.
pub fn polar_member_lp<T: Scalar>(c: &ConeSpec<T>, mu: &[T]) -> Result<bool> {
    c.check_dim(mu, "measure")?;
    let m = vec64(mu);
    let mut lp = ConeLp::with_objective(c, OptimizationDirection::Minimize, Some(&m));
    for s in 0..c.states {
        lp.problem.add_constraint(lp.xi(s), ComparisonOp::Ge, 0.0);
    }
    let ones = vec![1.0; c.states];
    lp.problem.add_constraint(lp.pairing(&ones), ComparisonOp::Eq, 1.0);
    Ok(solved(lp.problem.solve(), f64::INFINITY, f64::NEG_INFINITY)? >= -POLAR_TOL)
}

/// Linear program over the coefficients of a cone element.
struct ConeLp {
    problem: Problem,
    gens: Vec<(Variable, Vec<f64>)>,
}

impl ConeLp {
    fn new<T: Scalar>(c: &ConeSpec<T>, dir: OptimizationDirection) -> Self {
        Self::with_objective(c, dir, None)
    }

    /// Coefficient variables, optionally with objective `⟨w, ξ⟩`.
    fn with_objective<T: Scalar>(c: &ConeSpec<T>, dir: OptimizationDirection, w: Option<&[f64]>) -> Self {
        let mut problem = Problem::new(dir);
        let mut gens = Vec::new();
        let obj = |g: &[f64]| w.map_or(0.0, |w| pair(w, g));
        for g in c.gens64() {
            gens.push((problem.add_var(obj(&g), (0.0, f64::INFINITY)), g));
        }
        // Lines enter as two opposite rays; the solver stalls on free variables.
        for l in c.lines64() {
            let neg: Vec<f64> = l.iter().map(|v| -v).collect();
            gens.push((problem.add_var(obj(&l), (0.0, f64::INFINITY)), l));
            gens.push((problem.add_var(obj(&neg), (0.0, f64::INFINITY)), neg));
        }
        Self { problem, gens }
    }

    /// `ξ_s` as a linear expression.
    fn xi(&self, s: usize) -> Vec<(Variable, f64)> {
        self.gens.iter().filter(|(_, g)| g[s] != 0.0).map(|(v, g)| (*v, g[s])).collect()
    }

    /// `⟨μ, ξ⟩` as a linear expression.
    fn pairing(&self, mu: &[f64]) -> Vec<(Variable, f64)> {
        self.gens.iter().map(|(v, g)| (*v, pair(mu, g))).collect()
    }
}

/// `⟨μ, g⟩` with values at round-off level set to zero. Measures from vertex
/// enumeration are accurate to a few ulps only, and a spurious slope along a
/// ray would make prices grow with the level instead of staying flat.
fn pair(mu: &[f64], g: &[f64]) -> f64 {
    let d = dot(mu, g);
    let size = mu.iter().map(|v| v.abs()).sum::<f64>() * g.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if d.abs() <= 1e-12 * size {
        0.0
    } else {
        d
    }
}

/// User-supplied risk reduction on the cone.
pub type CustomPhi<T> = Arc<dyn Fn(&[T]) -> Extended<T> + Send + Sync>;

/// Declared risk reduction on the cone.
#[derive(Clone)]
pub enum PhiSpec<T> {
    /// `φ(ξ) = min_s ξ_s`.
    Min,
    /// `φ(ξ) = ⟨w, ξ⟩`.
    Linear(Vec<T>),
    /// A user function with its declared hypotheses.
    Custom { f: CustomPhi<T>, monotone: bool, quasiconcave: bool, upper_semicontinuous: bool },
}

impl<T: Scalar> fmt::Debug for PhiSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhiSpec::Min => write!(f, "Min"),
            PhiSpec::Linear(w) => write!(f, "Linear({w:?})"),
            PhiSpec::Custom { .. } => write!(f, "Custom(..)"),
        }
    }
}

impl<T: Scalar> PhiSpec<T> {
    pub fn eval(&self, y: &[T]) -> Extended<T> {
        match self {
            PhiSpec::Min => Extended::Finite(y.iter().copied().fold(T::infinity(), T::min)),
            PhiSpec::Linear(w) => Extended::Finite(w.iter().zip(y).map(|(&a, &b)| a * b).sum()),
            PhiSpec::Custom { f, .. } => f(y),
        }
    }

    /// Reason the duality hypotheses fail, if they do.
    pub fn hypothesis_failure(&self) -> Option<String> {
        match self {
            PhiSpec::Min => None,
            PhiSpec::Linear(w) => w
                .iter()
                .any(|v| *v < T::zero())
                .then(|| "linear functional with a negative weight is not monotone".into()),
            PhiSpec::Custom { monotone, quasiconcave, upper_semicontinuous, .. } => {
                let missing: Vec<&str> = [
                    (*monotone, "monotone"),
                    (*quasiconcave, "quasiconcave"),
                    (*upper_semicontinuous, "upper semicontinuous"),
                ]
                .into_iter()
                .filter(|(ok, _)| !ok)
                .map(|(_, n)| n)
                .collect();
                (!missing.is_empty()).then(|| format!("risk reduction not declared {}", missing.join(", ")))
            }
        }
    }

    fn exact(&self) -> bool {
        !matches!(self, PhiSpec::Custom { .. })
    }
}

/// Lattice resolution used for `H` of a custom risk reduction.
pub const DEFAULT_H_RESOLUTION: usize = 8;
const MAX_CAP_DOUBLINGS: u32 = 12;
/// States up to which the polar slice is enumerated exactly.
pub const EXACT_VERTEX_STATES: usize = 6;

fn solved(r: std::result::Result<SolveOutcome, microlp::Error>, infeasible: f64, unbounded: f64) -> Result<f64> {
    match r {
        Ok(SolveOutcome::Solution(sol)) => Ok(sol.objective()),
        Ok(SolveOutcome::Interrupted(_)) => Err(VnrError::Internal("linear program interrupted".into())),
        Err(microlp::Error::Infeasible) => Ok(infeasible),
        Err(microlp::Error::Unbounded) => Ok(unbounded),
        Err(e) => Err(VnrError::Internal(format!("linear program failed: {e}"))),
    }
}

fn extended<T: Scalar>(x: f64) -> Extended<T> {
    Extended::from_float(T::lit(x))
}

/// Cone elements `Σ a_i g_i + Σ b_j l_j` with `a ∈ {0, C/res, .., C}^k` and
/// `b ∈ {-C, .., C}^l`.
fn lattice_elements<T: Scalar>(c: &ConeSpec<T>, resolution: usize, cap: f64) -> Result<Vec<Vec<f64>>> {
    let g = c.gens64();
    let l = c.lines64();
    let res = resolution.max(1);
    let count = ((res + 1) as f64).powi(g.len() as i32) * ((2 * res + 1) as f64).powi(l.len() as i32);
    if count > LATTICE_BUDGET as f64 {
        return Err(VnrError::Contract(format!("coefficient lattice of {count} points exceeds the budget")));
    }
    let step = cap / res as f64;
    let axes: Vec<Vec<f64>> = g
        .iter()
        .map(|_| (0..=res).map(|j| j as f64 * step).collect())
        .chain(l.iter().map(|_| (0..=2 * res).map(|j| (j as f64 - res as f64) * step).collect()))
        .collect();
    let dirs: Vec<&Vec<f64>> = g.iter().chain(&l).collect();
    let combine = |coef: &[f64]| -> Vec<f64> {
        (0..c.states).map(|s| coef.iter().zip(&dirs).map(|(a, d)| a * d[s]).sum()).collect()
    };
    if axes.is_empty() {
        return Ok(vec![vec![0.0; c.states]]);
    }
    Ok(axes.into_iter().multi_cartesian_product().map(|coef| combine(&coef)).collect())
}

/// Optimises over coefficient lattices with doubling caps until the optimum
/// stops moving.
fn lattice_optimum<T: Scalar>(
    c: &ConeSpec<T>,
    resolution: usize,
    value: impl Fn(&[f64]) -> f64,
    better: impl Fn(f64, f64) -> bool,
    worst: f64,
) -> Result<f64> {
    let mut prev = worst;
    let mut cap = 1.0;
    for _ in 0..MAX_CAP_DOUBLINGS {
        let best = lattice_elements(c, resolution, cap)?.iter().map(|xi| value(xi)).fold(worst, |a, v| {
            if better(v, a) {
                v
            } else {
                a
            }
        });
        if best.is_finite() && (best - prev).abs() < 1e-9 * best.abs().max(1.0) {
            return Ok(best);
        }
        prev = best;
        cap *= 2.0;
    }
    Ok(prev)
}

fn phi64<T: Scalar>(phi: &PhiSpec<T>, xi: &[f64]) -> f64 {
    let xi: Vec<T> = xi.iter().map(|&v| T::lit(v)).collect();
    phi.eval(&xi).to_float().as_f64()
}

/// `H_φ(p, μ) = sup{φ(ξ) : ξ ∈ K, ⟨μ, ξ⟩ <= p}`.
///
/// Solved by linear programming for `Min` and `Linear`; custom risk
/// reductions use [`h_cone_lattice`] at [`DEFAULT_H_RESOLUTION`].
pub fn h_cone<T: Scalar>(c: &ConeSpec<T>, phi: &PhiSpec<T>, p: T, mu: &[T]) -> Result<Extended<T>> {
    c.check_dim(mu, "measure")?;
    let m = vec64(mu);
    let p = p.as_f64();
    let v = match phi {
        PhiSpec::Min => {
            let mut lp = ConeLp::new(c, OptimizationDirection::Maximize);
            let t_pos = lp.problem.add_var(1.0, (0.0, f64::INFINITY));
            let t_neg = lp.problem.add_var(-1.0, (0.0, f64::INFINITY));
            for s in 0..c.states {
                let mut e = lp.xi(s);
                e.push((t_pos, -1.0));
                e.push((t_neg, 1.0));
                lp.problem.add_constraint(e, ComparisonOp::Ge, 0.0);
            }
            lp.problem.add_constraint(lp.pairing(&m), ComparisonOp::Le, p);
            solved(lp.problem.solve(), f64::NEG_INFINITY, f64::INFINITY)?
        }
        PhiSpec::Linear(w) => {
            check_weights(c, w)?;
            let w = vec64(w);
            let mut lp = ConeLp::with_objective(c, OptimizationDirection::Maximize, Some(&w));
            lp.problem.add_constraint(lp.pairing(&m), ComparisonOp::Le, p);
            solved(lp.problem.solve(), f64::NEG_INFINITY, f64::INFINITY)?
        }
        PhiSpec::Custom { .. } => return h_cone_lattice(c, phi, T::lit(p), mu, DEFAULT_H_RESOLUTION),
    };
    Ok(extended(v))
}

/// [`h_cone`] by maximising over a lattice of generator coefficients in
/// `[0, C]^k × [-C, C]^l`, doubling `C` until the optimum settles.
pub fn h_cone_lattice<T: Scalar>(
    c: &ConeSpec<T>,
    phi: &PhiSpec<T>,
    p: T,
    mu: &[T],
    resolution: usize,
) -> Result<Extended<T>> {
    c.check_dim(mu, "measure")?;
    let m = vec64(mu);
    let p = p.as_f64();
    let slack = 1e-12 * p.abs().max(1.0);
    let v = lattice_optimum(
        c,
        resolution,
        |xi| if dot(&m, xi) <= p + slack { phi64(phi, xi) } else { f64::NEG_INFINITY },
        |a, b| a > b,
        f64::NEG_INFINITY,
    )?;
    Ok(extended(v))
}

/// `Π_φ(r, μ) = inf{⟨μ, ξ⟩ : ξ ∈ K, φ(ξ) >= r}`.
pub fn pi_cone<T: Scalar>(c: &ConeSpec<T>, phi: &PhiSpec<T>, r: T, mu: &[T]) -> Result<Extended<T>> {
    c.check_dim(mu, "measure")?;
    let m = vec64(mu);
    let r = r.as_f64();
    let v = match phi {
        PhiSpec::Min => {
            let mut lp = ConeLp::with_objective(c, OptimizationDirection::Minimize, Some(&m));
            for s in 0..c.states {
                lp.problem.add_constraint(lp.xi(s), ComparisonOp::Ge, r);
            }
            solved(lp.problem.solve(), f64::INFINITY, f64::NEG_INFINITY)?
        }
        PhiSpec::Linear(w) => {
            check_weights(c, w)?;
            let w = vec64(w);
            let mut lp = ConeLp::with_objective(c, OptimizationDirection::Minimize, Some(&m));
            lp.problem.add_constraint(lp.pairing(&w), ComparisonOp::Ge, r);
            solved(lp.problem.solve(), f64::INFINITY, f64::NEG_INFINITY)?
        }
        PhiSpec::Custom { .. } => lattice_optimum(
            c,
            DEFAULT_H_RESOLUTION,
            |xi| if phi64(phi, xi) >= r { dot(&m, xi) } else { f64::INFINITY },
            |a, b| a < b,
            f64::INFINITY,
        )?,
    };
    Ok(extended(v))
}

/// `R_φ(p, μ) = sup{r : Π_φ(r, μ) <= p}`.
pub fn r_cone<T: Scalar>(c: &ConeSpec<T>, phi: &PhiSpec<T>, p: T, mu: &[T]) -> Result<Extended<T>> {
    let target = Extended::Finite(p);
    crate::vr_core::sup_of_downset(|r| Ok(pi_cone(c, phi, r, mu)? <= target), &Default::default())
}

fn check_weights<T: Scalar>(c: &ConeSpec<T>, w: &[T]) -> Result<()> {
    if w.len() != c.states {
        return Err(VnrError::Contract(format!("weights have {} entries, the cone has {} states", w.len(), c.states)));
    }
    Ok(())
}

/// Normalised members of the polar cone.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarSample<T> {
    pub members: Vec<Vec<T>>,
    /// Leading entries of `members` that are vertices of the slice.
    pub vertices: usize,
    pub diagnostic: Option<String>,
}

/// Deterministic sample of `K°₁ = {μ ∈ K° : Σ μ = 1}`.
///
/// Vertices of the slice are enumerated exactly on up to
/// [`EXACT_VERTEX_STATES`] states. For `resolution >= 2` they are followed by
/// the members among the vectors with entries in `{-1, .., 2}` on the grid of
/// step `1/resolution`.
pub fn k1_polar_sample<T: Scalar>(c: &ConeSpec<T>, resolution: usize) -> Result<PolarSample<T>> {
    let n = c.states;
    let rays = positive_rays(c)?;
    let member = |mu: &[f64]| rays.iter().all(|r| dot(r, mu) >= -POLAR_TOL);
    let mut found: Vec<Vec<f64>> = Vec::new();
    let mut notes = Vec::new();
    if n <= EXACT_VERTEX_STATES {
        for (count, subset) in subsets(rays.len(), n - 1).enumerate() {
            if count >= COMBINATION_BUDGET {
                return Err(VnrError::Contract("polar slice too large for vertex enumeration".into()));
            }
            let rows: Vec<Vec<f64>> = subset.iter().map(|&i| rays[i].clone()).collect();
            let ns = null_space(&rows, n);
            if ns.len() != 1 {
                continue;
            }
            let total: f64 = ns[0].iter().sum();
            if total.abs() < 1e-12 {
                continue;
            }
            let mu: Vec<f64> = ns[0].iter().map(|v| v / total).collect();
            if member(&mu) {
                push_unique(&mut found, mu);
            }
        }
        found.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    } else {
        notes.push(format!("more than {EXACT_VERTEX_STATES} states: lattice sample only"));
    }
    let vertices = found.len();
    if resolution >= 2 {
        let res = resolution as i64;
        let mut point = vec![0i64; n];
        let mut lattice = Vec::new();
        simplex_box(&mut point, 0, res, res, &mut |a: &[i64]| {
            let mu: Vec<f64> = a.iter().map(|&v| v as f64 / res as f64).collect();
            if member(&mu) && !found[..vertices].iter().any(|u| u.iter().zip(&mu).all(|(x, y)| (x - y).abs() <= 1e-9)) {
                lattice.push(mu);
            }
            lattice.len() <= LATTICE_BUDGET
        });
        if lattice.len() > LATTICE_BUDGET {
            return Err(VnrError::Contract("polar lattice exceeds the budget".into()));
        }
        found.extend(lattice);
    }
    if found.is_empty() {
        notes.push("no member of the normalised polar cone found at this resolution".into());
    }
    Ok(PolarSample {
        members: found.into_iter().map(|m| m.into_iter().map(T::lit).collect()).collect(),
        vertices,
        diagnostic: (!notes.is_empty()).then(|| notes.join("; ")),
    })
}

/// Visits integer vectors with entries in `[-res, 2 res]` summing to `total`,
/// in lexicographic order; stops when `visit` returns false.
fn simplex_box(point: &mut [i64], i: usize, res: i64, total: i64, visit: &mut impl FnMut(&[i64]) -> bool) -> bool {
    let n = point.len();
    let rest = (n - i - 1) as i64;
    if rest == 0 {
        if (-res..=2 * res).contains(&total) {
            point[i] = total;
            return visit(point);
        }
        return true;
    }
    for v in -res..=2 * res {
        let left = total - v;
        if left < -res * rest || left > 2 * res * rest {
            continue;
        }
        point[i] = v;
        if !simplex_box(point, i + 1, res, left, visit) {
            return false;
        }
    }
    true
}

/// Random cone elements `Σ a_i g_i + Σ b_j l_j` with `a_i ∈ [0, 2]` and
/// `b_j ∈ [-2, 2]`, reproducible from `seed`.
pub fn random_payoffs<T: Scalar>(c: &ConeSpec<T>, count: usize, seed: u64) -> Vec<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut y = vec![0.0; c.states];
            for (dirs, lo) in [(c.gens64(), 0.0), (c.lines64(), -2.0)] {
                for d in dirs {
                    let a: f64 = rng.gen_range(lo..=2.0);
                    for (ys, ds) in y.iter_mut().zip(&d) {
                        *ys += a * ds;
                    }
                }
            }
            y.into_iter().map(T::lit).collect()
        })
        .collect()
}

/// `H_φ(⟨m, y⟩, m)` for every member, in member order.
fn h_at_members<T: Scalar>(c: &ConeSpec<T>, phi: &PhiSpec<T>, y: &[T], members: &[Vec<T>]) -> Result<Vec<Extended<T>>> {
    c.check_dim(y, "payoff")?;
    members
        .par_iter()
        .map(|m| {
            c.check_dim(m, "member")?;
            let price = m.iter().zip(y).map(|(&a, &b)| a * b).sum();
            h_cone(c, phi, price, m)
        })
        .collect()
}

/// Index and value of the first minimum.
fn first_min<T: Scalar>(values: &[Extended<T>]) -> Option<(usize, Extended<T>)> {
    values.iter().copied().enumerate().fold(None, |acc, (i, v)| match acc {
        Some((_, best)) if v >= best => acc,
        _ => Some((i, v)),
    })
}

/// `Ψ_φ(y) = inf_m H_φ(⟨m, y⟩, m)` over the given members.
pub fn psi<T: Scalar>(c: &ConeSpec<T>, phi: &PhiSpec<T>, y: &[T], members: &[Vec<T>]) -> Result<Extended<T>> {
    if members.is_empty() {
        return Err(VnrError::Contract("psi needs at least one member".into()));
    }
    let values = h_at_members(c, phi, y, members)?;
    Ok(first_min(&values).expect("non-empty").1)
}

/// Outcome of a duality verification run.
#[derive(Clone, Debug, PartialEq)]
pub struct DualityReport<T> {
    pub max_gap: T,
    pub worst_y: Vec<T>,
    pub members_used: usize,
    pub weak_violations: usize,
    pub tolerance: T,
    pub y_evaluated: usize,
    pub skipped: Option<String>,
}

impl<T: Scalar> DualityReport<T> {
    fn skipped(reason: String, tolerance: T) -> Self {
        Self {
            max_gap: T::zero(),
            worst_y: Vec::new(),
            members_used: 0,
            weak_violations: 0,
            tolerance,
            y_evaluated: 0,
            skipped: Some(reason),
        }
    }

    pub fn passed(&self) -> bool {
        self.skipped.is_none() && self.weak_violations == 0 && self.max_gap <= self.tolerance
    }

    pub fn to_json(&self) -> Value {
        json!({
            "max_gap": io::num(self.max_gap.as_f64()),
            "worst_y": io::nums(&self.worst_y),
            "members_used": self.members_used,
            "weak_violations": self.weak_violations,
            "tolerance": io::num(self.tolerance.as_f64()),
            "y_evaluated": self.y_evaluated,
            "skipped": self.skipped,
        })
    }
}

/// Gap tolerance: exact for linear-programming risk reductions, `2/resolution` otherwise.
pub fn duality_tolerance<T: Scalar>(phi: &PhiSpec<T>, resolution: usize) -> f64 {
    if phi.exact() {
        LP_TOL
    } else {
        2.0 / resolution.max(1) as f64
    }
}

/// Compares `φ(y)` with `Ψ_φ(y)` over a sample of `K°₁` on every grid point.
///
/// Weak duality `H_φ(⟨Q, y⟩, Q) >= φ(y)` is checked at every member; the gap
/// `|Ψ_φ(y) - φ(y)|` is reported at its worst grid point.
pub fn verify_tha<T: Scalar>(
    c: &ConeSpec<T>,
    phi: &PhiSpec<T>,
    y_grid: &[Vec<T>],
    resolution: usize,
) -> Result<DualityReport<T>> {
    let tol = duality_tolerance(phi, resolution);
    if let Some(reason) = phi.hypothesis_failure() {
        return Ok(DualityReport::skipped(reason, T::lit(tol)));
    }
    let sample = k1_polar_sample(c, resolution)?;
    if sample.members.is_empty() {
        return Ok(DualityReport::skipped(sample.diagnostic.unwrap_or_default(), T::lit(tol)));
    }
    let mut max_gap = 0.0f64;
    let mut worst_y = Vec::new();
    let mut weak_violations = 0;
    for y in y_grid {
        if !c.contains(y)? {
            return Err(VnrError::Contract(format!("payoff {:?} is not in the cone", vec64(y))));
        }
        let target = phi.eval(y);
        let values = h_at_members(c, phi, y, &sample.members)?;
        weak_violations += values.iter().filter(|&&h| !target.approx_le(h, T::lit(tol))).count();
        let (_, value) = first_min(&values).expect("non-empty");
        let gap = if value == target { 0.0 } else { (value.to_float().as_f64() - target.to_float().as_f64()).abs() };
        if worst_y.is_empty() || gap > max_gap {
            max_gap = gap;
            worst_y = y.clone();
        }
    }
    Ok(DualityReport {
        max_gap: T::lit(max_gap),
        worst_y,
        members_used: sample.members.len(),
        weak_violations,
        tolerance: T::lit(tol),
        y_evaluated: y_grid.len(),
        skipped: None,
    })
}
