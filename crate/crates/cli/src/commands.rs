use std::path::Path;

use serde_json::{json, Value};
use vnr_core::dist_risk::{
    entropic, lambda_var, propvolle_lower_bound, var, worst_case, LambdaFn, RampLattice, RiskMeasure,
};
use vnr_core::duality_lab::{random_payoffs, verify_tha, PhiSpec};
use vnr_core::formats::{
    family_by_name, family_to_json, parse_cone, parse_distribution, parse_family, parse_lambda_fn, parse_model_set,
    parse_scenario, read_json,
};
use vnr_core::io::{ext, fmt_ext, fmt_num, num};
use vnr_core::model_risk::alpha_k;
use vnr_core::test_families::FamilyKind;
use vnr_core::vr_core::{
    axiom_check, h_law, r_measure_law, Axiom, BisectOptions, IntrinsicRisk, PnlRisk, RandomInstances, ShiftedLawRisk,
    VnRMeasure,
};
use vnr_core::{Distribution64, Extended, LambdaFn64, Result, TestFamily64, VnrError};

use crate::{
    AxiomArgs, Command, CurveArg, DualityArgs, ModelArgs, ModelRiskArgs, PhiArg, PropvolleArgs, RiskArg, RiskArgs,
};

/// Output of a command and whether a property check failed.
pub struct Report {
    pub body: String,
    pub failed: bool,
}

impl Report {
    fn json(v: Value, failed: bool) -> Self {
        let mut body = serde_json::to_string_pretty(&v).expect("serialisable");
        body.push('\n');
        Self { body, failed }
    }
}

/// One column of a price curve as a function of the abscissa.
type Curve<'a> = Box<dyn Fn(f64) -> Result<Extended<f64>> + 'a>;

pub fn run(cmd: &Command) -> Result<Report> {
    match cmd {
        Command::Risk(a) => risk(a),
        Command::Vr { model, price } => vr(model, *price),
        Command::PriceCurve { model, kind, grid } => price_curve(model, *kind, grid),
        Command::Axioms(a) => axioms(a),
        Command::Duality(a) => duality(a),
        Command::ModelRisk(a) => model_risk(a),
        Command::Propvolle(a) => propvolle(a),
    }
}

/// Prefixes validation errors with the file they come from.
fn in_file<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        VnrError::Validation { field, message } => {
            let field = if field.starts_with(&path.display().to_string()) {
                field
            } else {
                format!("{}: {field}", path.display())
            };
            VnrError::Validation { field, message }
        }
        other => other,
    })
}

fn load_dist(path: &Path) -> Result<Distribution64> {
    in_file(path, read_json(path).and_then(|v| parse_distribution(&v)))
}

fn load_lambda(path: &Path) -> Result<LambdaFn64> {
    in_file(path, read_json(path).and_then(|v| parse_lambda_fn(&v)))
}

fn missing(flag: &str, message: &str) -> VnrError {
    VnrError::validation(flag, message)
}

fn load_family(spec: &str) -> Result<TestFamily64> {
    let path = Path::new(spec);
    if spec.ends_with(".json") || path.is_file() {
        return in_file(path, read_json(path).and_then(|v| parse_family(&v)));
    }
    let name = spec.strip_suffix("-family").unwrap_or(spec).replace('-', "_");
    family_by_name(&name).map_err(|e| match e {
        VnrError::Validation { message, .. } => VnrError::validation("--family", message),
        other => other,
    })
}

fn law(m: &ModelArgs) -> Result<Distribution64> {
    match (&m.dist, &m.scenario) {
        (Some(p), None) => load_dist(p),
        (None, Some(p)) => {
            let s = in_file(p, read_json(p).and_then(|v| parse_scenario::<f64>(&v)))?;
            let q = m.measure.as_deref().ok_or_else(|| missing("--measure", "required with --scenario"))?;
            let x = m.variable.as_deref().ok_or_else(|| missing("--variable", "required with --scenario"))?;
            s.pushforward(q, x).map_err(|e| match e {
                VnrError::Lookup(msg) => VnrError::validation("--measure/--variable", msg),
                other => other,
            })
        }
        _ => Err(missing("--dist/--scenario", "exactly one of --dist and --scenario is required")),
    }
}

fn risk_level(level: Option<f64>) -> Result<f64> {
    level.ok_or_else(|| missing("--risk-level", "required by this risk measure"))
}

fn benchmark(level: Option<f64>, file: &Option<std::path::PathBuf>) -> Result<LambdaFn64> {
    match (level, file) {
        (_, Some(p)) => load_lambda(p),
        (Some(l), None) => LambdaFn::constant(l),
        (None, None) => Err(missing("--lambda-fn", "a benchmark file or a constant --risk-level is required")),
    }
}

fn risk(a: &RiskArgs) -> Result<Report> {
    let d = load_dist(&a.dist)?;
    let (name, value) = match a.measure {
        RiskArg::Var => ("var", var(&d, risk_level(a.risk_level)?)?),
        RiskArg::LambdaVar => ("lambda_var", lambda_var(&d, &benchmark(a.risk_level, &a.lambda_fn)?)?),
        RiskArg::WorstCase => ("worst_case", worst_case(&d)),
        RiskArg::Entropic => ("entropic", entropic(&d, risk_level(a.risk_level)?)?),
    };
    Ok(Report::json(json!({"measure": name, "risk_level": a.risk_level.map(num), "value": ext(value)}), false))
}

fn vr(m: &ModelArgs, price: f64) -> Result<Report> {
    let family = load_family(&m.family)?;
    let d = law(m)?;
    let value = r_measure_law(&family, &d, price, &BisectOptions::default())?;
    Ok(Report::json(
        json!({
            "family": family_to_json(&family),
            "measure": m.measure,
            "variable": m.variable,
            "price": num(price),
            "value": ext(value),
        }),
        false,
    ))
}

fn parse_grid(grid: &str) -> Result<Vec<f64>> {
    let bad = || missing("--grid", "expected lo:hi:n with finite bounds and n >= 1");
    let parts: Vec<&str> = grid.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else { return Err(bad()) };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if !lo.is_finite() || !hi.is_finite() || n == 0 || hi < lo {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

fn price_curve(m: &ModelArgs, kind: CurveArg, grid: &str) -> Result<Report> {
    let family = load_family(&m.family)?;
    let d = law(m)?;
    let points = parse_grid(grid)?;
    let opts = BisectOptions::default();
    let (header, f): (&str, Curve<'_>) = match kind {
        CurveArg::Pi => ("r,pi", Box::new(|s| family.pi(&d, s))),
        CurveArg::R => ("p,r_measure", Box::new(|s| r_measure_law(&family, &d, s, &opts))),
        CurveArg::H => ("p,h", Box::new(|s| h_law(&family, &d, s, &opts))),
    };
    let mut body = format!("{header}\n");
    for s in points {
        body.push_str(&format!("{},{}\n", fmt_num(s), fmt_ext(f(s)?)));
    }
    Ok(Report { body, failed: false })
}

fn parse_axioms(list: &str) -> Result<Vec<Axiom>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| Axiom::parse(s.trim()).map_err(|e| VnrError::validation("--axioms", e.to_string())))
        .collect()
}

fn axioms(a: &AxiomArgs) -> Result<Report> {
    let mut default = Axiom::VALUE_AND_RISK.to_vec();
    let target: Box<dyn VnRMeasure<f64>> = match a.target.as_str() {
        "pnl-var" => {
            default.extend([Axiom::QCoX, Axiom::Aff, Axiom::Di]);
            Box::new(PnlRisk { rho: RiskMeasure::VaR(a.risk_level) })
        }
        "shifted-var" => {
            default.extend([Axiom::QCoX, Axiom::Di]);
            Box::new(ShiftedLawRisk { rho: RiskMeasure::VaR(a.risk_level) })
        }
        spec => {
            let family = load_family(spec).map_err(|e| match e {
                VnrError::Validation { message, .. } => VnrError::validation("--target", message),
                other => other,
            })?;
            if matches!(family.kind, FamilyKind::ExpConcave(_)) {
                default.push(Axiom::QCoX);
            }
            Box::new(IntrinsicRisk::new(family))
        }
    };
    let suite = match &a.axioms {
        Some(list) => parse_axioms(list)?,
        None => default,
    };
    log::info!("running {} axioms x {} cases on {}", suite.len(), a.cases, a.target);
    let report = axiom_check(target.as_ref(), &suite, &RandomInstances::default(), a.cases, a.seed)?;
    let mut v = report.to_json();
    v["target"] = json!(a.target);
    v["seed"] = json!(a.seed);
    Ok(Report::json(v, report.any_failure()))
}

fn duality(a: &DualityArgs) -> Result<Report> {
    let base = a.cone.parent();
    let cone = in_file(&a.cone, read_json(&a.cone).and_then(|v| parse_cone::<f64>(&v, base)))?;
    let phi = match a.phi {
        PhiArg::Min => PhiSpec::Min,
        PhiArg::Linear => {
            let raw =
                a.weights.as_deref().ok_or_else(|| missing("--weights", "required by the linear risk reduction"))?;
            let w = raw
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| missing("--weights", "expected comma-separated numbers")))
                .collect::<Result<Vec<f64>>>()?;
            if w.len() != cone.states() {
                return Err(missing("--weights", "one weight per state is required"));
            }
            PhiSpec::Linear(w)
        }
    };
    let ys = random_payoffs(&cone, a.cases, a.seed);
    let rep = verify_tha(&cone, &phi, &ys, a.resolution)?;
    let mut v = rep.to_json();
    v["phi"] = json!(match a.phi {
        PhiArg::Min => "min",
        PhiArg::Linear => "linear",
    });
    v["seed"] = json!(a.seed);
    Ok(Report::json(v, rep.skipped.is_none() && !rep.passed()))
}

fn model_risk(a: &ModelRiskArgs) -> Result<Report> {
    let base = a.model_set.parent();
    let ms = in_file(&a.model_set, read_json(&a.model_set).and_then(|v| parse_model_set::<f64>(&v, base)))?;
    let x = ms.scenario().variable(&a.variable).map_err(|e| VnrError::validation("--variable", e.to_string()))?;
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let margin = 0.05 * (hi - lo).max(1.0);
    let ramps = RampLattice { lo: lo - margin, hi: hi + margin, depth: a.depth }.ramps(a.ramps);
    let mut rows = Vec::new();
    let mut violations = 0;
    for m in ms.measures() {
        let alpha = alpha_k(&ms, m, &a.variable, &ramps)?;
        let risk = ms.risk(m, &a.variable).map_err(|e| VnrError::validation("model_risk", e.to_string()))?;
        if alpha > risk {
            violations += 1;
        }
        rows.push(json!({"measure": m, "alpha_k": ext(alpha), "risk": ext(risk)}));
    }
    Ok(Report::json(
        json!({"variable": a.variable, "ramps": ramps.len(), "models": rows, "violations": violations}),
        violations > 0,
    ))
}

fn propvolle(a: &PropvolleArgs) -> Result<Report> {
    let d = load_dist(&a.dist)?;
    let lam = benchmark(a.risk_level, &a.lambda_fn)?;
    let ramps = RampLattice::covering(&d, a.depth).ramps(a.ramps);
    let bound = propvolle_lower_bound(&d, &lam, &ramps)?;
    let value = lambda_var(&d, &lam)?;
    let gap = value.sub(bound);
    let violated = !bound.approx_le(value, 1e-9);
    Ok(Report::json(
        json!({"lambda_var": ext(value), "lower_bound": ext(bound), "gap": ext(gap), "ramps": ramps.len()}),
        violated,
    ))
}
