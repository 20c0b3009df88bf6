//! JSON file formats of the library inputs.
//!
//! Parsers report the offending field path in [`VnrError::Validation`].
//! Model sets and cones reference their scenario either inline or by a path
//! resolved relative to the referencing file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::dist_core::{Distribution, Node, NodeKind, ScenarioSpace};
use crate::dist_risk::{BreakKind, LambdaFn};
use crate::duality_lab::ConeSpec;
use crate::error::{Result, VnrError};
use crate::extended::Extended;
use crate::io::{ext, num, nums, parse_num};
use crate::model_risk::ModelSet;
use crate::scalar::Scalar;
use crate::test_families::{ApproxShape, FamilyKind, Growth, Premium, TestFamily};

fn invalid(field: &str, message: impl Into<String>) -> VnrError {
    VnrError::validation(field, message)
}

fn object<'a>(v: &'a Value, field: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| invalid(field, "expected an object"))
}

fn array<'a>(v: &'a Value, field: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| invalid(field, "expected an array"))
}

fn get<'a>(o: &'a Map<String, Value>, key: &str, field: &str) -> Result<&'a Value> {
    o.get(key).ok_or_else(|| invalid(&join(field, key), "missing field"))
}

fn join(field: &str, key: &str) -> String {
    if field.is_empty() {
        key.to_string()
    } else {
        format!("{field}.{key}")
    }
}

fn string<'a>(v: &'a Value, field: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| invalid(field, "expected a string"))
}

fn number<T: Scalar>(v: &Value, field: &str) -> Result<T> {
    parse_num(v).map(T::lit).ok_or_else(|| invalid(field, "expected a number"))
}

fn finite<T: Scalar>(v: &Value, field: &str) -> Result<T> {
    let x: T = number(v, field)?;
    if !x.is_finite() {
        return Err(invalid(field, "expected a finite number"));
    }
    Ok(x)
}

fn extended<T: Scalar>(v: &Value, field: &str) -> Result<Extended<T>> {
    Ok(Extended::from_float(number(v, field)?))
}

fn vector<T: Scalar>(v: &Value, field: &str) -> Result<Vec<T>> {
    array(v, field)?.iter().enumerate().map(|(i, x)| finite(x, &format!("{field}[{i}]"))).collect()
}

fn optional<T: Scalar>(o: &Map<String, Value>, key: &str, field: &str) -> Result<Option<T>> {
    o.get(key).filter(|v| !v.is_null()).map(|v| finite(v, &join(field, key))).transpose()
}

/// Reads a JSON document; syntax errors carry the line and column.
pub fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(&path.display().to_string(), format!("cannot read file: {e}")))?;
    serde_json::from_str(&text).map_err(|e| {
        invalid(&format!("{}:{}:{}", path.display(), e.line(), e.column()), format!("malformed JSON: {e}"))
    })
}

/// `{"kind": "atoms", "atoms": [[x, w], ..]}` or
/// `{"kind": "piecewise_cdf", "nodes": [[x, F, "jump" | "linear"], ..]}`.
pub fn parse_distribution<T: Scalar>(v: &Value) -> Result<Distribution<T>> {
    let o = object(v, "")?;
    match string(get(o, "kind", "")?, "kind")? {
        "atoms" => {
            let atoms = array(get(o, "atoms", "")?, "atoms")?
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let f = format!("atoms[{i}]");
                    match array(a, &f)?.as_slice() {
                        [x, w] => Ok((finite(x, &f)?, finite(w, &f)?)),
                        _ => Err(invalid(&f, "expected [x, weight]")),
                    }
                })
                .collect::<Result<Vec<(T, T)>>>()?;
            Distribution::from_atoms(&atoms)
        }
        "piecewise_cdf" => {
            let nodes = array(get(o, "nodes", "")?, "nodes")?
                .iter()
                .enumerate()
                .map(|(i, n)| {
                    let f = format!("nodes[{i}]");
                    match array(n, &f)?.as_slice() {
                        [x, c, k] => {
                            let kind = match string(k, &f)? {
                                "jump" => NodeKind::Jump,
                                "linear" => NodeKind::Linear,
                                other => return Err(invalid(&f, format!("unknown node kind '{other}'"))),
                            };
                            Ok(Node { x: finite(x, &f)?, cdf: finite(c, &f)?, kind })
                        }
                        _ => Err(invalid(&f, "expected [x, cdf, kind]")),
                    }
                })
                .collect::<Result<Vec<Node<T>>>>()?;
            let left = optional(o, "left_tail_value", "")?.unwrap_or_else(T::zero);
            Distribution::from_nodes(nodes, left)
        }
        other => Err(invalid("kind", format!("unknown distribution kind '{other}'"))),
    }
}

pub fn distribution_to_json<T: Scalar>(d: &Distribution<T>) -> Value {
    let nodes: Vec<Value> = d
        .nodes()
        .iter()
        .map(|n| {
            let kind = match n.kind {
                NodeKind::Jump => "jump",
                NodeKind::Linear => "linear",
            };
            json!([num(n.x.as_f64()), num(n.cdf.as_f64()), kind])
        })
        .collect();
    json!({"kind": "piecewise_cdf", "nodes": nodes})
}

/// `{"states": [..], "measures": {name: [..]}, "variables": {name: [..]}}`.
pub fn parse_scenario<T: Scalar>(v: &Value) -> Result<ScenarioSpace<T>> {
    let o = object(v, "")?;
    let states = array(get(o, "states", "")?, "states")?
        .iter()
        .enumerate()
        .map(|(i, s)| match s {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            _ => Err(invalid(&format!("states[{i}]"), "expected a state name")),
        })
        .collect::<Result<Vec<String>>>()?;
    let table = |key: &str| -> Result<BTreeMap<String, Vec<T>>> {
        match o.get(key) {
            None => Ok(BTreeMap::new()),
            Some(t) => object(t, key)?
                .iter()
                .map(|(name, x)| Ok((name.clone(), vector(x, &format!("{key}.{name}"))?)))
                .collect(),
        }
    };
    ScenarioSpace::new(states, table("measures")?, table("variables")?)
}

pub fn scenario_to_json<T: Scalar>(s: &ScenarioSpace<T>) -> Value {
    let table = |t: &BTreeMap<String, Vec<T>>| -> Value {
        Value::Object(t.iter().map(|(k, v)| (k.clone(), nums(v))).collect())
    };
    json!({"states": s.states(), "measures": table(s.measures()), "variables": table(s.variables())})
}

/// `{"breakpoints": [[x, v, "step" | "linear"], ..], "left_value": v0}`.
pub fn parse_lambda_fn<T: Scalar>(v: &Value) -> Result<LambdaFn<T>> {
    let o = object(v, "")?;
    let left = finite(get(o, "left_value", "")?, "left_value")?;
    let bps = match o.get("breakpoints") {
        None => Vec::new(),
        Some(b) => array(b, "breakpoints")?
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let f = format!("breakpoints[{i}]");
                match array(b, &f)?.as_slice() {
                    [x, y, k] => {
                        let kind = match string(k, &f)? {
                            "step" => BreakKind::Step,
                            "linear" => BreakKind::Linear,
                            other => return Err(invalid(&f, format!("unknown breakpoint kind '{other}'"))),
                        };
                        Ok((finite(x, &f)?, finite(y, &f)?, kind))
                    }
                    _ => Err(invalid(&f, "expected [x, value, kind]")),
                }
            })
            .collect::<Result<Vec<_>>>()?,
    };
    LambdaFn::new(bps, left)
}

pub fn lambda_fn_to_json<T: Scalar>(l: &LambdaFn<T>) -> Value {
    let bps: Vec<Value> = l
        .breakpoints()
        .iter()
        .map(|&(x, v, k)| {
            let kind = match k {
                BreakKind::Step => "step",
                BreakKind::Linear => "linear",
            };
            json!([num(x.as_f64()), num(v.as_f64()), kind])
        })
        .collect();
    json!({"breakpoints": bps, "left_value": num(l.left_value().as_f64())})
}

/// Family with default parameters by name.
pub fn family_by_name<T: Scalar>(name: &str) -> Result<TestFamily<T>> {
    parse_family(&json!({"kind": name}))
}

/// `{"kind": .., "params": {..}}`; `params` may also carry the parameter
/// bounds `lo` and `hi`.
///
/// | kind | params |
/// |---|---|
/// | `call`, `identity_shift` | none |
/// | `exp_concave` | `growth`: `"exp"` (default) or `"linear"` with `slope` |
/// | `approx_identity` | `shape`: `"tanh"` (default) or `"shift"` |
/// | `insured_put` | `base`, `rate` of the premium |
pub fn parse_family<T: Scalar>(v: &Value) -> Result<TestFamily<T>> {
    let o = object(v, "")?;
    let empty = Map::new();
    let p = match o.get("params") {
        Some(p) => object(p, "params")?,
        None => &empty,
    };
    let kind = match string(get(o, "kind", "")?, "kind")? {
        "call" => FamilyKind::Call,
        "identity_shift" => FamilyKind::IdentityShift,
        "exp_concave" => match p.get("growth").map(|g| string(g, "params.growth")).transpose()? {
            None | Some("exp") => FamilyKind::ExpConcave(Growth::Exp),
            Some("linear") => {
                let s: T = finite(get(p, "slope", "params")?, "params.slope")?;
                if s <= T::zero() {
                    return Err(invalid("params.slope", "slope must be positive"));
                }
                FamilyKind::ExpConcave(Growth::Linear(s))
            }
            Some(other) => return Err(invalid("params.growth", format!("unknown growth '{other}'"))),
        },
        "approx_identity" => match p.get("shape").map(|g| string(g, "params.shape")).transpose()? {
            None | Some("tanh") => FamilyKind::ApproxIdentity(ApproxShape::Tanh),
            Some("shift") => FamilyKind::ApproxIdentity(ApproxShape::Shift),
            Some(other) => return Err(invalid("params.shape", format!("unknown shape '{other}'"))),
        },
        "insured_put" => {
            let d = Premium::<T>::default();
            let base = optional(p, "base", "params")?.unwrap_or(d.base);
            let rate = optional(p, "rate", "params")?.unwrap_or(d.rate);
            FamilyKind::InsuredPut(Premium::new(base, rate)?)
        }
        other => return Err(invalid("kind", format!("unknown family kind '{other}'"))),
    };
    let lo = optional(p, "lo", "params")?;
    let hi = optional(p, "hi", "params")?;
    TestFamily::new(kind).restricted(lo, hi).map_err(|e| invalid("params", e.to_string()))
}

pub fn family_to_json<T: Scalar>(f: &TestFamily<T>) -> Value {
    let mut p = Map::new();
    match f.kind {
        FamilyKind::ExpConcave(Growth::Exp) => {
            p.insert("growth".into(), json!("exp"));
        }
        FamilyKind::ExpConcave(Growth::Linear(s)) => {
            p.insert("growth".into(), json!("linear"));
            p.insert("slope".into(), num(s.as_f64()));
        }
        FamilyKind::ApproxIdentity(shape) => {
            let s = match shape {
                ApproxShape::Tanh => "tanh",
                ApproxShape::Shift => "shift",
            };
            p.insert("shape".into(), json!(s));
        }
        FamilyKind::InsuredPut(pr) => {
            p.insert("base".into(), num(pr.base.as_f64()));
            p.insert("rate".into(), num(pr.rate.as_f64()));
        }
        FamilyKind::Call | FamilyKind::IdentityShift => {}
    }
    if let Some(lo) = f.lo {
        p.insert("lo".into(), num(lo.as_f64()));
    }
    if let Some(hi) = f.hi {
        p.insert("hi".into(), num(hi.as_f64()));
    }
    json!({"kind": f.name(), "params": p})
}

/// Loads the scenario referenced by `scenario`: an inline object or a path
/// relative to `base`.
fn scenario_ref<T: Scalar>(o: &Map<String, Value>, base: Option<&Path>) -> Result<ScenarioSpace<T>> {
    match get(o, "scenario", "")? {
        Value::String(path) => {
            let p = PathBuf::from(path);
            let p = match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            };
            parse_scenario(&read_json(&p)?).map_err(|e| prefix(e, "scenario"))
        }
        inline => parse_scenario(inline).map_err(|e| prefix(e, "scenario")),
    }
}

fn prefix(e: VnrError, at: &str) -> VnrError {
    match e {
        VnrError::Validation { field, message } => VnrError::Validation { field: join(at, &field), message },
        other => other,
    }
}

/// `{"scenario": .., "model_risk": {measure: {variable: value}}}`; the model
/// set consists of the measures listed in `model_risk`.
pub fn parse_model_set<T: Scalar>(v: &Value, base: Option<&Path>) -> Result<ModelSet<T>> {
    let o = object(v, "")?;
    let scenario = scenario_ref(o, base)?;
    let table = object(get(o, "model_risk", "")?, "model_risk")?;
    let measures: Vec<String> = table.keys().cloned().collect();
    for m in &measures {
        if scenario.measure(m).is_err() {
            return Err(invalid(&format!("model_risk.{m}"), "unknown measure"));
        }
    }
    let mut ms = ModelSet::new(scenario, measures)?;
    for (m, row) in table {
        let field = format!("model_risk.{m}");
        for (x, val) in object(row, &field)? {
            let f = format!("{field}.{x}");
            let value = extended(val, &f)?;
            ms.set_risk(m, x, value).map_err(|e| match e {
                VnrError::Validation { .. } => e,
                other => invalid(&f, other.to_string()),
            })?;
        }
    }
    Ok(ms)
}

pub fn model_set_to_json<T: Scalar>(ms: &ModelSet<T>) -> Value {
    let table: Map<String, Value> = ms
        .risk_table()
        .iter()
        .map(|(m, row)| (m.clone(), Value::Object(row.iter().map(|(x, v)| (x.clone(), ext(*v))).collect())))
        .collect();
    json!({"scenario": scenario_to_json(ms.scenario()), "model_risk": table})
}

/// `{"scenario": .., "generators": [[..], ..], "lines": [[..], ..]}`.
///
/// The scenario fixes the number of states; `"states": n` may replace it.
pub fn parse_cone<T: Scalar>(v: &Value, base: Option<&Path>) -> Result<ConeSpec<T>> {
    let o = object(v, "")?;
    let states = if o.contains_key("scenario") {
        scenario_ref::<T>(o, base)?.n_states()
    } else {
        get(o, "states", "")?.as_u64().ok_or_else(|| invalid("states", "expected a state count"))? as usize
    };
    let list = |key: &str| -> Result<Vec<Vec<T>>> {
        match o.get(key) {
            None => Ok(Vec::new()),
            Some(g) => array(g, key)?.iter().enumerate().map(|(i, x)| vector(x, &format!("{key}[{i}]"))).collect(),
        }
    };
    ConeSpec::new(states, list("generators")?, list("lines")?)
}

pub fn cone_to_json<T: Scalar>(c: &ConeSpec<T>) -> Value {
    let rows = |vs: &[Vec<T>]| Value::Array(vs.iter().map(|v| nums(v)).collect());
    json!({"states": c.states(), "generators": rows(c.generators()), "lines": rows(c.lines())})
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distribution_round_trip() {
        let v =
            json!({"kind": "piecewise_cdf", "nodes": [[-1.0, 0.0, "jump"], [1.0, 0.5, "linear"], [2.0, 1.0, "jump"]]});
        let d: Distribution<f64> = parse_distribution(&v).unwrap();
        assert_eq!(parse_distribution::<f64>(&distribution_to_json(&d)).unwrap(), d);
        let a: Distribution<f64> =
            parse_distribution(&json!({"kind": "atoms", "atoms": [[0, 0.5], [1, 0.5]]})).unwrap();
        assert_eq!(a.atoms(), vec![(0.0, 0.5), (1.0, 0.5)]);
    }

    #[test]
    fn errors_name_the_field() {
        let v = json!({"kind": "atoms", "atoms": [[0, 0.5], [1, "x"]]});
        match parse_distribution::<f64>(&v) {
            Err(VnrError::Validation { field, .. }) => assert_eq!(field, "atoms[1]"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_family::<f64>(&json!({"kind": "digital"})), Err(VnrError::Validation { .. })));
    }

    #[test]
    fn family_round_trip() {
        for f in [
            json!({"kind": "call", "params": {"lo": -1.0}}),
            json!({"kind": "exp_concave", "params": {"growth": "linear", "slope": 2.0}}),
            json!({"kind": "approx_identity"}),
            json!({"kind": "insured_put", "params": {"base": 0.2, "rate": 0.3}}),
            json!({"kind": "identity_shift"}),
        ] {
            let fam: TestFamily<f64> = parse_family(&f).unwrap();
            assert_eq!(parse_family::<f64>(&family_to_json(&fam)).unwrap(), fam);
        }
    }

    #[test]
    fn model_set_and_cone_inline() {
        let sc =
            json!({"states": ["u", "d"], "measures": {"P": [0.5, 0.5], "Q": [0.2, 0.8]}, "variables": {"X": [1, -1]}});
        let ms: ModelSet<f64> =
            parse_model_set(&json!({"scenario": sc, "model_risk": {"P": {"X": 0.5}, "Q": {"X": "+inf"}}}), None)
                .unwrap();
        assert_eq!(ms.risk("Q", "X").unwrap(), Extended::PosInf);
        let back: ModelSet<f64> = parse_model_set(&model_set_to_json(&ms), None).unwrap();
        assert_eq!(back.risk_table(), ms.risk_table());
        let c: ConeSpec<f64> = parse_cone(&json!({"scenario": sc, "generators": [[1, 0]]}), None).unwrap();
        assert_eq!(parse_cone::<f64>(&cone_to_json(&c), None).unwrap(), c);
        let lam: LambdaFn<f64> =
            parse_lambda_fn(&json!({"breakpoints": [[0, 0.1, "step"]], "left_value": 0.01})).unwrap();
        assert_eq!(parse_lambda_fn::<f64>(&lambda_fn_to_json(&lam)).unwrap(), lam);
    }
}
