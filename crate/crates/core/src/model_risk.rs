//! Testing claims against a finite set of models: the constrained best price
//! `V`, its inverse, the indirect model risk `α_K` and the spread of prices
//! across models.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::dist_core::{Distribution, Payoff, ScenarioSpace};
use crate::error::{Result, VnrError};
use crate::extended::Extended;
use crate::scalar::Scalar;

/// A finite list of measures on a scenario space, each with a model-risk
/// level per variable.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSet<T> {
    scenario: ScenarioSpace<T>,
    measures: Vec<String>,
    risk: BTreeMap<String, BTreeMap<String, Extended<T>>>,
}

impl<T: Scalar> ModelSet<T> {
    /// Model set with no risk levels assigned yet.
    pub fn new(scenario: ScenarioSpace<T>, measures: Vec<String>) -> Result<Self> {
        for m in &measures {
            scenario.measure(m)?;
        }
        Ok(Self { scenario, measures, risk: BTreeMap::new() })
    }

    /// Every measure of the scenario space, in name order.
    pub fn all(scenario: ScenarioSpace<T>) -> Self {
        let measures = scenario.measures().keys().cloned().collect();
        Self { scenario, measures, risk: BTreeMap::new() }
    }

    /// Assigns the risk of each model through the law of `variable`, so that
    /// `A(Q, X) = Ã(Q ∘ X⁻¹)`.
    pub fn with_law_risk(
        mut self,
        variable: &str,
        risk: impl Fn(&Distribution<T>) -> Result<Extended<T>>,
    ) -> Result<Self> {
        for m in self.measures.clone() {
            let v = risk(&self.scenario.pushforward(&m, variable)?)?;
            self.set_risk(&m, variable, v)?;
        }
        Ok(self)
    }

    pub fn set_risk(&mut self, measure: &str, variable: &str, value: Extended<T>) -> Result<()> {
        if !self.measures.iter().any(|m| m == measure) {
            return Err(VnrError::Lookup(format!("measure '{measure}' is not in the model set")));
        }
        self.scenario.variable(variable)?;
        if let Extended::Finite(v) = value {
            if v.is_nan() {
                return Err(VnrError::validation(format!("model_risk.{measure}.{variable}"), "NaN risk level"));
            }
        }
        self.risk.entry(measure.to_string()).or_default().insert(variable.to_string(), value);
        Ok(())
    }

    pub fn scenario(&self) -> &ScenarioSpace<T> {
        &self.scenario
    }

    pub fn measures(&self) -> &[String] {
        &self.measures
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }

    pub fn risk(&self, measure: &str, variable: &str) -> Result<Extended<T>> {
        self.risk
            .get(measure)
            .and_then(|m| m.get(variable))
            .copied()
            .ok_or_else(|| VnrError::Lookup(format!("no model risk for measure '{measure}' and variable '{variable}'")))
    }

    pub fn risk_table(&self) -> &BTreeMap<String, BTreeMap<String, Extended<T>>> {
        &self.risk
    }

    /// Keeps the models pricing each listed variable at its target within
    /// `tol`, e.g. martingale measures calibrated to quoted forwards.
    pub fn calibrated(&self, targets: &[(&str, T)], tol: T) -> Result<Self> {
        let mut kept = Vec::new();
        for m in &self.measures {
            let q = self.scenario.measure(m)?;
            let mut ok = true;
            for &(var, target) in targets {
                let x = self.scenario.variable(var)?;
                let price: T = q.iter().zip(x).map(|(&a, &b)| a * b).sum();
                ok &= (price - target).abs() <= tol;
            }
            if ok {
                kept.push(m.clone());
            }
        }
        let risk = self.risk.iter().filter(|(m, _)| kept.contains(m)).map(|(m, r)| (m.clone(), r.clone())).collect();
        Ok(Self { scenario: self.scenario.clone(), measures: kept, risk })
    }

    /// `(E_Q[f(X)], A(Q, X))` for every model.
    fn priced<P: Payoff<T> + ?Sized>(&self, variable: &str, f: &P) -> Result<Vec<(T, Extended<T>)>> {
        let x = self.scenario.variable(variable)?;
        let fx: Vec<T> = x.iter().map(|&v| f.eval(v)).collect();
        self.measures
            .iter()
            .map(|m| {
                let q = self.scenario.measure(m)?;
                let e: T = q.iter().zip(&fx).map(|(&a, &b)| a * b).sum();
                Ok((e, self.risk(m, variable)?))
            })
            .collect()
    }

    /// Laws of `variable` under the models, paired with their risk levels.
    pub fn laws(&self, variable: &str) -> Result<Vec<(Distribution<T>, Extended<T>)>> {
        self.measures.iter().map(|m| Ok((self.scenario.pushforward(m, variable)?, self.risk(m, variable)?))).collect()
    }
}

/// `V(a, X; f) = sup{E_Q[f(X)] : Q in M, A(Q, X) <= a}`; `-inf` when no model
/// is admissible.
pub fn v_value<T: Scalar, P: Payoff<T> + ?Sized>(ms: &ModelSet<T>, a: T, variable: &str, f: &P) -> Result<Extended<T>> {
    let level = Extended::Finite(a);
    Ok(ms
        .priced(variable, f)?
        .into_iter()
        .filter(|&(_, r)| r <= level)
        .fold(Extended::NegInf, |acc, (e, _)| acc.max(Extended::Finite(e))))
}

/// `V` computed on laws rather than models.
pub fn v_value_reduced<T: Scalar, P: Payoff<T> + ?Sized>(
    laws: &[(Distribution<T>, Extended<T>)],
    a: T,
    f: &P,
) -> Extended<T> {
    let level = Extended::Finite(a);
    laws.iter().filter(|(_, r)| *r <= level).fold(Extended::NegInf, |acc, (d, _)| acc.max(d.expectation(f)))
}

/// `V⁻¹(v, X; f) = inf{s : V(s, X; f) >= v}`. `V` is a right-continuous step
/// function jumping at the model-risk levels, so the infimum is the smallest
/// level of a model pricing at least `v`; `+inf` when none does.
pub fn v_inverse<T: Scalar, P: Payoff<T> + ?Sized>(
    ms: &ModelSet<T>,
    v: T,
    variable: &str,
    f: &P,
) -> Result<Extended<T>> {
    Ok(inverse_of(&ms.priced(variable, f)?, v))
}

fn inverse_of<T: Scalar>(priced: &[(T, Extended<T>)], v: T) -> Extended<T> {
    priced.iter().filter(|&&(e, _)| e >= v).fold(Extended::PosInf, |acc, &(_, r)| acc.min(r))
}

/// `α_K(Q_X) = sup_{f in K} V⁻¹(E_Q[f(X)], X; f)`; `-inf` for an empty grid.
pub fn alpha_k<T: Scalar, P: Payoff<T> + Sync>(
    ms: &ModelSet<T>,
    measure: &str,
    variable: &str,
    k_grid: &[P],
) -> Result<Extended<T>> {
    let q = ms.scenario.measure(measure)?;
    let x = ms.scenario.variable(variable)?;
    let values: Vec<Extended<T>> = k_grid
        .par_iter()
        .map(|f| {
            let own: T = q.iter().zip(x).map(|(&a, &b)| a * f.eval(b)).sum();
            Ok(inverse_of(&ms.priced(variable, f)?, own))
        })
        .collect::<Result<_>>()?;
    Ok(values.into_iter().fold(Extended::NegInf, Extended::max))
}

/// `sup_Q E_Q[f(X)] - inf_Q E_Q[f(X)]` over all models, ignoring risk levels.
pub fn cont_spread<T: Scalar, P: Payoff<T> + ?Sized>(ms: &ModelSet<T>, variable: &str, f: &P) -> Result<T> {
    if ms.is_empty() {
        return Err(VnrError::Contract("the spread needs at least one model".into()));
    }
    let x = ms.scenario.variable(variable)?;
    let fx: Vec<T> = x.iter().map(|&v| f.eval(v)).collect();
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for m in &ms.measures {
        let q = ms.scenario.measure(m)?;
        let e: T = q.iter().zip(&fx).map(|(&a, &b)| a * b).sum();
        lo = lo.min(e);
        hi = hi.max(e);
    }
    Ok(hi - lo)
}

/// Two-atom model lattice: measures `(w_j, 1 - w_j)` with `w_j = (j + 1) / (n + 1)`
/// on the states `x1 < x2` of a variable named `X`.
pub fn two_atom_lattice<T: Scalar>(x1: T, x2: T, n: usize) -> Result<ScenarioSpace<T>> {
    let measures: Vec<(String, Vec<T>)> = (0..n)
        .map(|j| {
            let w = T::from_usize(j + 1).expect("index") / T::from_usize(n + 1).expect("count");
            (format!("Q{j:03}"), vec![w, T::one() - w])
        })
        .collect();
    let refs: Vec<(&str, Vec<T>)> = measures.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
    ScenarioSpace::from_vectors(&refs, &[("X", vec![x1, x2])])
}
