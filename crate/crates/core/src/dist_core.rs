//! Laws on the real line with piecewise-linear-plus-atoms CDFs, finite
//! scenario spaces and the basic operations on both.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VnrError};
use crate::extended::Extended;
use crate::scalar::Scalar;

/// How the CDF reaches a node from the previous one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    /// Constant up to the node, then a jump to the node value.
    Jump,
    /// Linear interpolation from the previous node.
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node<T> {
    pub x: T,
    pub cdf: T,
    pub kind: NodeKind,
}

/// A probability law on the real line.
///
/// The CDF is right-continuous, vanishes left of the first node, is constant
/// or linear between nodes and equals one after the last node.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution<T> {
    nodes: Vec<Node<T>>,
}

/// Anything that can be integrated against a law.
pub trait Payoff<T> {
    fn eval(&self, x: T) -> T;

    /// Points where the payoff may have a kink or jump.
    fn kinks(&self) -> Vec<T> {
        Vec::new()
    }

    /// True when the payoff is affine between consecutive kinks and on both tails.
    fn piecewise_linear(&self) -> bool {
        false
    }
}

impl<T, F: Fn(T) -> T> Payoff<T> for F {
    fn eval(&self, x: T) -> T {
        self(x)
    }
}

/// The identity payoff, integrated exactly.
#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

impl<T: Scalar> Payoff<T> for Identity {
    fn eval(&self, x: T) -> T {
        x
    }
    fn piecewise_linear(&self) -> bool {
        true
    }
}

impl<T: Scalar> Distribution<T> {
    /// Builds a law from CDF nodes.
    ///
    /// `left_tail` is the CDF value left of the first node and has to vanish
    /// (mass at minus infinity is not representable). Nodes closer than the
    /// merge tolerance are fused.
    pub fn from_nodes(nodes: Vec<Node<T>>, left_tail: T) -> Result<Self> {
        let tol = T::mass_tol();
        if nodes.is_empty() {
            return Err(VnrError::validation("nodes", "at least one node is required"));
        }
        if !left_tail.is_finite() || left_tail.abs() > tol {
            return Err(VnrError::validation(
                "left_tail_value",
                "mass at minus infinity is not supported; left tail must be 0",
            ));
        }
        let mut out: Vec<Node<T>> = Vec::with_capacity(nodes.len());
        let mut prev_cdf = T::zero();
        for (i, n) in nodes.iter().enumerate() {
            let field = || format!("nodes[{i}]");
            if !n.x.is_finite() || !n.cdf.is_finite() {
                return Err(VnrError::validation(field(), "non-finite coordinate"));
            }
            if n.cdf < -tol || n.cdf > T::one() + tol {
                return Err(VnrError::validation(field(), "CDF value outside [0, 1]"));
            }
            if n.cdf < prev_cdf - tol {
                return Err(VnrError::validation(field(), "CDF values must be non-decreasing"));
            }
            let cdf = n.cdf.max(prev_cdf).min(T::one());
            let mut node = Node { x: n.x, cdf, kind: n.kind };
            match out.last_mut() {
                None => {
                    if node.kind == NodeKind::Linear && cdf > tol {
                        return Err(VnrError::validation(field(), "first node cannot close a linear segment"));
                    }
                    node.kind = NodeKind::Jump;
                    out.push(node);
                }
                Some(last) => {
                    if node.x < last.x - T::merge_tol() {
                        return Err(VnrError::validation(field(), "node abscissae must be non-decreasing"));
                    }
                    if node.x - last.x <= T::merge_tol() {
                        node.x = last.x;
                        node.kind = NodeKind::Jump;
                        if last.kind == NodeKind::Jump {
                            last.cdf = node.cdf;
                            prev_cdf = node.cdf;
                            continue;
                        }
                    }
                    out.push(node);
                }
            }
            prev_cdf = cdf;
        }
        let last = out.last_mut().expect("non-empty");
        if (last.cdf - T::one()).abs() > tol {
            return Err(VnrError::validation("nodes", "total mass must equal 1"));
        }
        last.cdf = T::one();
        Ok(Self { nodes: prune(out) })
    }

    /// Builds a purely atomic law; atoms closer than the merge tolerance are fused.
    pub fn from_atoms(atoms: &[(T, T)]) -> Result<Self> {
        let mut sorted: Vec<(T, T)> = Vec::with_capacity(atoms.len());
        for (i, &(x, w)) in atoms.iter().enumerate() {
            if !x.is_finite() || !w.is_finite() || w < T::zero() {
                return Err(VnrError::validation(
                    format!("atoms[{i}]"),
                    "atoms need a finite location and a non-negative weight",
                ));
            }
            if w > T::zero() {
                sorted.push((x, w));
            }
        }
        let total: T = sorted.iter().map(|a| a.1).sum();
        if (total - T::one()).abs() > T::mass_tol() {
            return Err(VnrError::validation("atoms", format!("weights sum to {total}, expected 1")));
        }
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
        let mut nodes: Vec<Node<T>> = Vec::with_capacity(sorted.len());
        let mut acc = T::zero();
        for (x, w) in sorted {
            acc = acc + w;
            match nodes.last_mut() {
                Some(last) if x - last.x <= T::merge_tol() => last.cdf = acc,
                _ => nodes.push(Node { x, cdf: acc, kind: NodeKind::Jump }),
            }
        }
        nodes.last_mut().expect("positive total mass").cdf = T::one();
        Ok(Self { nodes })
    }

    pub fn dirac(x: T) -> Self {
        Self { nodes: vec![Node { x, cdf: T::one(), kind: NodeKind::Jump }] }
    }

    /// Uniform law on `[a, b]`; collapses to a Dirac mass when `a == b`.
    pub fn uniform(a: T, b: T) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || b < a {
            return Err(VnrError::Domain("uniform law needs finite a <= b".into()));
        }
        Self::from_nodes(
            vec![
                Node { x: a, cdf: T::zero(), kind: NodeKind::Jump },
                Node { x: b, cdf: T::one(), kind: NodeKind::Linear },
            ],
            T::zero(),
        )
    }

    /// Piecewise-linear interpolation of a CDF given on `[a, b]` with
    /// `segments` equal pieces. `F(a)` becomes an atom at `a` when positive.
    pub fn from_cdf_fn(cdf: impl Fn(T) -> T, a: T, b: T, segments: usize) -> Result<Self> {
        if segments == 0 || !(b > a) {
            return Err(VnrError::Domain("need a < b and at least one segment".into()));
        }
        let n = T::from_usize(segments).expect("segment count");
        let mut nodes = Vec::with_capacity(segments + 1);
        nodes.push(Node { x: a, cdf: cdf(a), kind: NodeKind::Jump });
        for k in 1..=segments {
            let x = if k == segments { b } else { a + (b - a) * T::from_usize(k).expect("index") / n };
            nodes.push(Node { x, cdf: cdf(x), kind: NodeKind::Linear });
        }
        Self::from_nodes(nodes, T::zero())
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    /// Atoms as `(location, mass)` pairs.
    pub fn atoms(&self) -> Vec<(T, T)> {
        let mut prev = T::zero();
        let mut out = Vec::new();
        for n in &self.nodes {
            if n.kind == NodeKind::Jump && n.cdf > prev {
                out.push((n.x, n.cdf - prev));
            }
            prev = n.cdf;
        }
        out
    }

    pub fn is_atomic(&self) -> bool {
        let mut prev = T::zero();
        for n in &self.nodes {
            if n.kind == NodeKind::Linear && n.cdf > prev {
                return false;
            }
            prev = n.cdf;
        }
        true
    }

    /// Sorted, de-duplicated node abscissae.
    pub fn breakpoints(&self) -> Vec<T> {
        let mut xs: Vec<T> = self.nodes.iter().map(|n| n.x).collect();
        xs.dedup();
        xs
    }

    /// Right-continuous CDF value `F(x)`.
    pub fn cdf(&self, x: T) -> T {
        let idx = self.nodes.partition_point(|n| n.x <= x);
        self.interpolate(idx, x)
    }

    /// Left limit `F(x-)`.
    pub fn cdf_left(&self, x: T) -> T {
        let idx = self.nodes.partition_point(|n| n.x < x);
        self.interpolate(idx, x)
    }

    fn interpolate(&self, idx: usize, x: T) -> T {
        if idx == 0 {
            return T::zero();
        }
        let prev = self.nodes[idx - 1];
        match self.nodes.get(idx) {
            Some(next) if next.kind == NodeKind::Linear => {
                if next.x <= prev.x {
                    return next.cdf;
                }
                let t = ((x - prev.x) / (next.x - prev.x)).max(T::zero()).min(T::one());
                prev.cdf + (next.cdf - prev.cdf) * t
            }
            _ => prev.cdf,
        }
    }

    /// Left-inverse `inf{x : F(x) >= u}` for `u` in `(0, 1]`.
    pub fn quantile_left(&self, u: T) -> Result<T> {
        if !(u > T::zero() && u <= T::one()) {
            return Err(VnrError::Domain(format!("quantile level {u} outside (0, 1]")));
        }
        let i = self.nodes.partition_point(|n| n.cdf < u);
        Ok(self.invert_at(i.min(self.nodes.len() - 1), u))
    }

    /// Upper quantile `inf{x : F(x) > u}` for `u` in `[0, 1)`.
    pub fn quantile_upper(&self, u: T) -> Result<T> {
        if !(u >= T::zero() && u < T::one()) {
            return Err(VnrError::Domain(format!("quantile level {u} outside [0, 1)")));
        }
        let i = self.nodes.partition_point(|n| n.cdf <= u);
        Ok(self.invert_at(i.min(self.nodes.len() - 1), u))
    }

    fn invert_at(&self, i: usize, u: T) -> T {
        let node = self.nodes[i];
        if node.kind == NodeKind::Jump || i == 0 {
            return node.x;
        }
        let prev = self.nodes[i - 1];
        let dm = node.cdf - prev.cdf;
        if dm <= T::zero() {
            return node.x;
        }
        let t = ((u - prev.cdf) / dm).max(T::zero()).min(T::one());
        prev.x + (node.x - prev.x) * t
    }

    /// Smallest point of the support.
    pub fn support_min(&self) -> T {
        self.quantile_upper(T::zero()).expect("level 0 is valid")
    }

    /// Largest point of the support.
    pub fn support_max(&self) -> T {
        self.quantile_left(T::one()).expect("level 1 is valid")
    }

    /// Law of `X + p`.
    pub fn translate(&self, p: T) -> Self {
        Self { nodes: self.nodes.iter().map(|n| Node { x: n.x + p, ..*n }).collect() }
    }

    /// Expectation of `g` with the convention `inf - inf = -inf`.
    ///
    /// Atoms are summed exactly. Linear pieces are split at the payoff kinks
    /// and integrated with the trapezoid rule for piecewise-linear payoffs
    /// and adaptive Simpson quadrature otherwise. NaN integrands count as
    /// `-inf`.
    pub fn expectation<P: Payoff<T> + ?Sized>(&self, g: &P) -> Extended<T> {
        let mut acc = ExtendedSum::default();
        let kinks = {
            let mut k = g.kinks();
            k.retain(|x| x.is_finite());
            k.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            k
        };
        let mut prev: Option<Node<T>> = None;
        for n in &self.nodes {
            let pc = prev.map_or(T::zero(), |p| p.cdf);
            let mass = n.cdf - pc;
            if mass > T::zero() {
                match (n.kind, prev) {
                    (NodeKind::Linear, Some(p)) if n.x > p.x => {
                        let density = mass / (n.x - p.x);
                        let mut cuts = vec![p.x];
                        cuts.extend(kinks.iter().copied().filter(|&k| k > p.x && k < n.x));
                        cuts.push(n.x);
                        for w in cuts.windows(2) {
                            let integral = if g.piecewise_linear() {
                                (g.eval(w[0]) + g.eval(w[1])) * (w[1] - w[0]) / T::lit(2.0)
                            } else {
                                adaptive_simpson(&|x| g.eval(x), w[0], w[1])
                            };
                            acc.push(density * integral);
                        }
                    }
                    _ => acc.push(mass * g.eval(n.x)),
                }
            }
            prev = Some(*n);
        }
        acc.total()
    }

    pub fn mean(&self) -> T {
        self.expectation(&Identity).to_float()
    }
}

/// Mixture `lambda * d1 + (1 - lambda) * d2`.
pub fn mix<T: Scalar>(d1: &Distribution<T>, d2: &Distribution<T>, lambda: T) -> Result<Distribution<T>> {
    if !(lambda >= T::zero() && lambda <= T::one()) {
        return Err(VnrError::Domain(format!("mixture weight {lambda} outside [0, 1]")));
    }
    if lambda == T::one() {
        return Ok(d1.clone());
    }
    if lambda == T::zero() {
        return Ok(d2.clone());
    }
    let mu = T::one() - lambda;
    let xs = merged_breakpoints(&[d1, d2]);
    let mut nodes = Vec::with_capacity(2 * xs.len());
    let mut prev_right = T::zero();
    for x in xs {
        let left = lambda * d1.cdf_left(x) + mu * d2.cdf_left(x);
        let right = lambda * d1.cdf(x) + mu * d2.cdf(x);
        if left > prev_right && !nodes.is_empty() {
            nodes.push(Node { x, cdf: left, kind: NodeKind::Linear });
        }
        nodes.push(Node { x, cdf: right, kind: NodeKind::Jump });
        prev_right = right;
    }
    Distribution::from_nodes(nodes, T::zero())
}

/// True when `d1 ⪯₁ d2`, that is `F_{d2}(x) <= F_{d1}(x)` for every `x`.
///
/// Both CDFs are affine between merged breakpoints, so comparing right values
/// and left limits at every breakpoint decides the order exactly.
pub fn dominates_first_order<T: Scalar>(d1: &Distribution<T>, d2: &Distribution<T>) -> bool {
    let tol = T::merge_tol();
    merged_breakpoints(&[d1, d2])
        .into_iter()
        .all(|x| d2.cdf(x) <= d1.cdf(x) + tol && d2.cdf_left(x) <= d1.cdf_left(x) + tol)
}

pub(crate) fn merged_breakpoints<T: Scalar>(ds: &[&Distribution<T>]) -> Vec<T> {
    let mut xs: Vec<T> = ds.iter().flat_map(|d| d.nodes.iter().map(|n| n.x)).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    xs.dedup();
    xs
}

/// Drops zero-mass jump nodes that do not anchor a following linear piece.
fn prune<T: Scalar>(nodes: Vec<Node<T>>) -> Vec<Node<T>> {
    let mut out = Vec::with_capacity(nodes.len());
    let mut prev_cdf = T::zero();
    for (i, n) in nodes.iter().enumerate() {
        let anchors = nodes.get(i + 1).is_some_and(|m| m.kind == NodeKind::Linear);
        let empty = n.kind == NodeKind::Jump && n.cdf <= prev_cdf;
        let last = i + 1 == nodes.len();
        if !empty || anchors || (last && out.is_empty()) {
            out.push(*n);
        }
        prev_cdf = n.cdf;
    }
    out
}

#[derive(Default)]
struct ExtendedSum<T> {
    pos_inf: bool,
    neg_inf: bool,
    finite: Vec<T>,
}

impl<T: Scalar> ExtendedSum<T> {
    fn push(&mut self, v: T) {
        if v.is_nan() || v == T::neg_infinity() {
            self.neg_inf = true;
        } else if v == T::infinity() {
            self.pos_inf = true;
        } else {
            self.finite.push(v);
        }
    }

    fn total(self) -> Extended<T> {
        if self.neg_inf {
            Extended::NegInf
        } else if self.pos_inf {
            Extended::PosInf
        } else {
            Extended::from_float(self.finite.into_iter().sum())
        }
    }
}

fn adaptive_simpson<T: Scalar>(f: &dyn Fn(T) -> T, a: T, b: T) -> T {
    let two = T::lit(2.0);
    let six = T::lit(6.0);
    let simpson = |a: T, fa: T, b: T, fb: T, fm: T| (b - a) * (fa + T::lit(4.0) * fm + fb) / six;
    #[allow(clippy::too_many_arguments)]
    fn rec<T: Scalar>(f: &dyn Fn(T) -> T, a: T, fa: T, b: T, fb: T, m: T, fm: T, whole: T, tol: T, depth: u32) -> T {
        let two = T::lit(2.0);
        let six = T::lit(6.0);
        let lm = (a + m) / two;
        let rm = (m + b) / two;
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) * (fa + T::lit(4.0) * flm + fm) / six;
        let right = (b - m) * (fm + T::lit(4.0) * frm + fb) / six;
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= T::lit(15.0) * tol {
            return left + right + delta / T::lit(15.0);
        }
        rec(f, a, fa, m, fm, lm, flm, left, tol / two, depth - 1)
            + rec(f, m, fm, b, fb, rm, frm, right, tol / two, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let m = (a + b) / two;
    let fm = f(m);
    let whole = simpson(a, fa, b, fb, fm);
    let tol = T::epsilon() * T::lit(64.0) * (T::one() + whole.abs());
    rec(f, a, fa, b, fb, m, fm, whole, tol, 40)
}

/// A finite set of states carrying named probability measures and random variables.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpace<T> {
    states: Vec<String>,
    measures: BTreeMap<String, Vec<T>>,
    variables: BTreeMap<String, Vec<T>>,
}

impl<T: Scalar> ScenarioSpace<T> {
    pub fn new(
        states: Vec<String>,
        measures: BTreeMap<String, Vec<T>>,
        variables: BTreeMap<String, Vec<T>>,
    ) -> Result<Self> {
        if states.is_empty() {
            return Err(VnrError::validation("states", "at least one state is required"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &states {
            if !seen.insert(s) {
                return Err(VnrError::validation("states", format!("duplicate state '{s}'")));
            }
        }
        let mut space = Self { states, measures: BTreeMap::new(), variables: BTreeMap::new() };
        for (name, q) in measures {
            space.add_measure(name, q)?;
        }
        for (name, x) in variables {
            space.add_variable(name, x)?;
        }
        Ok(space)
    }

    /// Anonymous space with states `s0, s1, ...`.
    pub fn from_vectors(measures: &[(&str, Vec<T>)], variables: &[(&str, Vec<T>)]) -> Result<Self> {
        let n = measures.first().map(|m| m.1.len()).or_else(|| variables.first().map(|v| v.1.len())).unwrap_or(0);
        let states = (0..n).map(|i| format!("s{i}")).collect();
        Self::new(
            states,
            measures.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
            variables.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        )
    }

    pub fn add_measure(&mut self, name: impl Into<String>, q: Vec<T>) -> Result<()> {
        let name = name.into();
        validate_probability(&q, self.states.len(), &format!("measures.{name}"))?;
        self.measures.insert(name, q);
        Ok(())
    }

    pub fn add_variable(&mut self, name: impl Into<String>, x: Vec<T>) -> Result<()> {
        let name = name.into();
        let field = format!("variables.{name}");
        if x.len() != self.states.len() {
            return Err(VnrError::validation(field, "length differs from the number of states"));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(VnrError::validation(format!("{field}[{i}]"), "non-finite value"));
        }
        self.variables.insert(name, x);
        Ok(())
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn measures(&self) -> &BTreeMap<String, Vec<T>> {
        &self.measures
    }

    pub fn variables(&self) -> &BTreeMap<String, Vec<T>> {
        &self.variables
    }

    pub fn measure(&self, name: &str) -> Result<&[T]> {
        self.measures.get(name).map(Vec::as_slice).ok_or_else(|| VnrError::Lookup(format!("unknown measure '{name}'")))
    }

    pub fn variable(&self, name: &str) -> Result<&[T]> {
        self.variables
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| VnrError::Lookup(format!("unknown variable '{name}'")))
    }

    /// Law of the named variable under the named measure.
    pub fn pushforward(&self, measure: &str, variable: &str) -> Result<Distribution<T>> {
        law(self.measure(measure)?, self.variable(variable)?)
    }
}

/// Law of the state vector `x` under the probability vector `q`.
pub fn law<T: Scalar>(q: &[T], x: &[T]) -> Result<Distribution<T>> {
    if q.len() != x.len() {
        return Err(VnrError::validation("law", "measure and variable lengths differ"));
    }
    let atoms: Vec<(T, T)> = x.iter().copied().zip(q.iter().copied()).collect();
    Distribution::from_atoms(&atoms)
}

/// Free-function form of [`ScenarioSpace::pushforward`].
pub fn pushforward<T: Scalar>(s: &ScenarioSpace<T>, measure: &str, variable: &str) -> Result<Distribution<T>> {
    s.pushforward(measure, variable)
}

fn validate_probability<T: Scalar>(q: &[T], n: usize, field: &str) -> Result<()> {
    if q.len() != n {
        return Err(VnrError::validation(field, "length differs from the number of states"));
    }
    if let Some(i) = q.iter().position(|v| !v.is_finite() || *v < T::zero()) {
        return Err(VnrError::validation(format!("{field}[{i}]"), "probabilities must be finite and non-negative"));
    }
    let total: T = q.iter().copied().sum();
    if (total - T::one()).abs() > T::mass_tol() * T::from_usize(n.max(1)).expect("count") {
        return Err(VnrError::validation(field, format!("probabilities sum to {total}, expected 1")));
    }
    Ok(())
}
