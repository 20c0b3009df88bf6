//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when
//! any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vnr_core::dist_core::{dominates_first_order, law, Distribution};
use vnr_core::dist_risk::{lambda_var, propvolle_lower_bound, var, LambdaFn, RampLattice, RiskMeasure};
use vnr_core::duality_lab::{random_payoffs, verify_tha, ConeSpec, PhiSpec};
use vnr_core::model_risk::{alpha_k, two_atom_lattice, ModelSet};
use vnr_core::test_families::{ApproxShape, FamilyKind, Growth, Premium, TestFamily};
use vnr_core::vr_core::{
    acceptance_r, axiom_check, dependence_k_check, h_law, h_plus_law, r_measure_law, AcceptanceFamily, Axiom,
    BisectOptions, IntrinsicRisk, PnlRisk, RandomInstances,
};
use vnr_core::Extended;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn timed(limit: Option<Duration>, run: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut out = run();
    let elapsed = start.elapsed();
    out.detail = format!("{} [{:.2?}]", out.detail, elapsed);
    if let Some(limit) = limit {
        if elapsed > limit {
            out.passed = false;
            out.detail = format!("{} exceeds {:?}", out.detail, limit);
        }
    }
    out
}

fn opts() -> BisectOptions<f64> {
    BisectOptions::default()
}

fn random_atomic(rng: &mut ChaCha8Rng, max_states: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rng.gen_range(1..=max_states);
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    let q = w.into_iter().map(|v| v / s).collect();
    let x = (0..n).map(|_| rng.gen_range(-16i32..=16) as f64 / 4.0).collect();
    (q, x)
}

fn mean(q: &[f64], x: &[f64]) -> f64 {
    q.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Criterion 1: the two uniform-type laws whose risk order flips once the
/// prices differ by more than 0.09.
fn inversion() -> Outcome {
    let px = Distribution::uniform(-0.5, 0.5).unwrap();
    let py = Distribution::from_cdf_fn(|z: f64| (z + 0.5).clamp(0.0, 1.0).powi(2), -0.5, 0.5, 10_000).unwrap();
    let vx = var(&px, 0.01).unwrap().to_float();
    let vy = var(&py, 0.01).unwrap().to_float();
    let beta = AcceptanceFamily::DeltaInvariant(Arc::new(|d: &Distribution<f64>| var(d, 0.01)));
    let mut bad = 0;
    for i in 0..20 {
        for j in 0..20 {
            let (x, y) = (i as f64 / 19.0, j as f64 / 19.0);
            let rx = acceptance_r(&beta, x, &px, &opts()).unwrap();
            let ry = acceptance_r(&beta, y, &py, &opts()).unwrap();
            if y > x + 0.09 && rx >= ry {
                bad += 1;
            }
            if y < x + 0.09 - 1e-3 && rx < ry {
                bad += 1;
            }
        }
    }
    let dominated = dominates_first_order(&px, &py);
    let ok = vx == 0.49 && (vy - 0.4).abs() <= 1e-3 && bad == 0 && dominated;
    outcome(ok, format!("VaR(P_X) = {vx}, VaR(P_Y) = {vy:.6}, P_X below P_Y: {dominated}, grid violations {bad}/400"))
}

/// Criterion 2: closed forms of R for the identity shift, exponential and call families.
fn closed_forms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let id = TestFamily::identity_shift();
    let exp = TestFamily::exp_concave();
    let exp_linear = TestFamily::new(FamilyKind::ExpConcave(Growth::Linear(1.0)));
    let call = TestFamily::call();
    let (mut err_id, mut err_exp) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let (q, x) = random_atomic(&mut rng, 6);
        let d = law(&q, &x).unwrap();
        let p = rng.gen_range(-16i32..=16) as f64 / 4.0 + 0.1;
        let r = r_measure_law(&id, &d, p, &opts()).unwrap().to_float();
        err_id = err_id.max((r - (p - mean(&q, &x))).abs());
        let e: f64 = q.iter().zip(&x).map(|(a, b)| a * (1.0 - (-b).exp())).sum();
        let r = r_measure_law(&exp_linear, &d, p, &opts()).unwrap().to_float();
        err_exp = err_exp.max((r - (p - e)).abs());
        // With g = exp the level r + 1 must lie in the range of g.
        let r = r_measure_law(&exp, &d, p, &opts()).unwrap();
        if p - e > -1.0 {
            err_exp = err_exp.max((r.to_float() - (p - e)).abs());
        } else if p - e < -1.0 && r != Extended::NegInf {
            err_exp = f64::INFINITY;
        }
    }
    let (mut p1, mut p2, mut p3, mut p4) = (0.0f64, 0.0f64, 0.0f64, 0usize);
    for _ in 0..100 {
        let (q, x) = random_atomic(&mut rng, 6);
        let d = law(&q, &x).unwrap();
        // P1 on the strictly increasing branch of the call price.
        let top = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let k = top - rng.gen_range(0.25..3.0);
        let price = mean(&q, &x.iter().map(|v| (v - k).max(0.0)).collect::<Vec<_>>());
        p1 = p1.max((r_measure_law(&call, &d, price, &opts()).unwrap().to_float() + k).abs());
        // P2: cash additivity.
        let a = rng.gen_range(-2.0..2.0);
        let p = rng.gen_range(0.5..4.0);
        let base = r_measure_law(&call, &d, p, &opts()).unwrap();
        let moved = r_measure_law(&call, &d.translate(a), p, &opts()).unwrap();
        if let (Extended::Finite(b), Extended::Finite(m)) = (base, moved) {
            p2 = p2.max((m - (b - a)).abs());
        } else if base != moved {
            p2 = f64::INFINITY;
        }
        // P3 on the non-negative part of the payoff.
        let xp: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        let r = r_measure_law(&call, &law(&q, &xp).unwrap(), mean(&q, &xp), &opts()).unwrap().to_float();
        p3 = p3.max(r.abs());
        // P4 for a payoff with negative mean.
        let xn: Vec<f64> = x.iter().map(|v| -v.abs() - 0.25).collect();
        if r_measure_law(&call, &law(&q, &xn).unwrap(), mean(&q, &xn), &opts()).unwrap() == Extended::NegInf {
            p4 += 1;
        }
    }
    let ok = err_id <= 1e-8 && err_exp <= 1e-8 && p1 <= 1e-8 && p2 <= 1e-8 && p3 <= 1e-8 && p4 == 100;
    outcome(
        ok,
        format!(
            "identity {err_id:.1e}, exponential {err_exp:.1e}, call P1 {p1:.1e} P2 {p2:.1e} P3 {p3:.1e} P4 {p4}/100 at -inf"
        ),
    )
}

/// Criterion 3: the axiom harness on the four families and the control map.
fn axioms() -> Outcome {
    let gen = RandomInstances::default();
    let families: [TestFamily<f64>; 4] = [
        TestFamily::call(),
        TestFamily::exp_concave(),
        TestFamily::approx_identity(ApproxShape::Tanh),
        TestFamily::insured_put(Premium::default()),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for fam in families {
        let mut suite = Axiom::VALUE_AND_RISK.to_vec();
        let exp = fam.name() == TestFamily::<f64>::exp_concave().name();
        if exp {
            suite.push(Axiom::QCoX);
        }
        let risk = IntrinsicRisk::new(fam);
        let rep = axiom_check(&risk, &suite, &gen, 1000, 3).unwrap();
        let fails: usize = rep.axioms.iter().map(|a| a.failures).sum();
        let all_ran = rep.axioms.iter().all(|a| a.passed());
        ok &= fails == 0 && all_ran;
        notes.push(format!("{} {} failures", fam.name(), fails));
    }
    let control = PnlRisk { rho: RiskMeasure::VaR(0.25) };
    let rep = axiom_check(&control, &[Axiom::QCoX], &gen, 1000, 3).unwrap();
    let found = rep.get(Axiom::QCoX).is_some_and(|a| a.first_counterexample.is_some());
    ok &= found;
    notes.push(format!("p + VaR counterexample found: {found}"));
    outcome(ok, notes.join(", "))
}

/// Criterion 4: R is the right limit of H on random atomic laws.
fn right_limit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let families = [
        TestFamily::call(),
        TestFamily::identity_shift(),
        TestFamily::exp_concave(),
        TestFamily::approx_identity(ApproxShape::Tanh),
        TestFamily::insured_put(Premium::default()),
    ];
    let (w, tol) = (1e-6, 1e-6);
    let (mut checked, mut jumps, mut bad) = (0usize, 0usize, 0usize);
    for inst in 0..200 {
        let fam = &families[inst % families.len()];
        let (q, x) = random_atomic(&mut rng, 5);
        let d = law(&q, &x).unwrap();
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min) - 1.5;
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.5;
        for k in 0..100 {
            let p = lo + (hi - lo) * (k as f64 + 0.37) / 100.0;
            let r = r_measure_law(fam, &d, p, &opts()).unwrap();
            let hp = h_plus_law(fam, &d, p, 1e-9, &opts()).unwrap();
            checked += 1;
            if r.approx_eq(hp, tol) {
                continue;
            }
            // Allowed only inside a jump of H localised to width w.
            let below = h_law(fam, &d, p - w / 2.0, &opts()).unwrap();
            let above = h_law(fam, &d, p + w / 2.0, &opts()).unwrap();
            if below.approx_le(r, tol) && r.approx_le(above, tol) && !below.approx_eq(above, tol) {
                jumps += 1;
            } else {
                bad += 1;
            }
        }
    }
    outcome(bad == 0, format!("{checked} points, {jumps} inside jump intervals, {bad} mismatches"))
}

/// Criterion 5: the ramp dual bound of the lambda value at risk.
fn dual_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut above = 0;
    let mut instances = 0;
    for _ in 0..100 {
        let (q, x) = random_atomic(&mut rng, 6);
        let d = law(&q, &x).unwrap();
        let lam = LambdaFn::constant(rng.gen_range(0.0..0.5)).unwrap();
        let grid = RampLattice::covering(&d, 12).ramps(200);
        let b = propvolle_lower_bound(&d, &lam, &grid).unwrap();
        if !b.approx_le(lambda_var(&d, &lam).unwrap().add_finite(1e-9), 0.0) {
            above += 1;
        }
        instances += 1;
    }
    let (mut worst_gap, mut non_monotone) = (0.0f64, 0);
    for lam in [0.01, 0.1, 0.25] {
        let lam = LambdaFn::constant(lam).unwrap();
        for _ in 0..50 {
            let a = rng.gen_range(-16i32..16) as f64 / 4.0;
            let b = a + rng.gen_range(1i32..16) as f64 / 4.0;
            let w = rng.gen_range(0.02..0.98);
            let d = Distribution::from_atoms(&[(a, w), (b, 1.0 - w)]).unwrap();
            let exact = lambda_var(&d, &lam).unwrap().to_float();
            let lattice = RampLattice::covering(&d, 12);
            let gaps: Vec<f64> = [50, 100, 200]
                .iter()
                .map(|&n| exact - propvolle_lower_bound(&d, &lam, &lattice.ramps(n)).unwrap().to_float())
                .collect();
            if gaps[1] > gaps[0] || gaps[2] > gaps[1] {
                non_monotone += 1;
            }
            worst_gap = worst_gap.max(gaps[2]);
            instances += 1;
        }
    }
    let ok = above == 0 && worst_gap <= 0.05 && non_monotone == 0;
    outcome(
        ok,
        format!("{instances} instances, {above} above lambda_var, worst two-atom gap {worst_gap:.4}, {non_monotone} non-monotone refinements"),
    )
}

/// Criterion 6: indirect model risk on a two-atom model lattice against the
/// dual bound of the lambda value at risk.
fn model_risk_duality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let lattice = RampLattice { lo: -2.0, hi: 2.0, depth: 40 };
    let grid = lattice.ramps(200);
    // Atoms sit where a ramp starts to fall, so some ramp separates them
    // sharply enough for the dual bound to be attained within the width.
    let starts: Vec<f64> = grid.iter().map(|f| f.knots()[0].0).collect();
    let (mut worst, mut above, mut checks) = (0.0f64, 0usize, 0usize);
    for lam in [0.01, 0.1, 0.25] {
        let lam_fn = LambdaFn::constant(lam).unwrap();
        for _ in 0..6 {
            let i = rng.gen_range(0..starts.len());
            let j = (i + rng.gen_range(1..starts.len())) % starts.len();
            let (x1, x2) = (starts[i].min(starts[j]), starts[i].max(starts[j]));
            let ms = ModelSet::all(two_atom_lattice(x1, x2, 50).unwrap())
                .with_law_risk("X", |d| lambda_var(d, &lam_fn))
                .unwrap();
            for m in ms.measures() {
                let a = alpha_k(&ms, m, "X", &grid).unwrap();
                let d = ms.scenario().pushforward(m, "X").unwrap();
                let oracle = propvolle_lower_bound(&d, &lam_fn, &grid).unwrap();
                let level = ms.risk(m, "X").unwrap();
                worst = worst.max((a.to_float() - oracle.to_float()).abs());
                if a > level {
                    above += 1;
                }
                checks += 1;
            }
        }
    }
    outcome(
        worst <= 1e-9 && above == 0,
        format!("{checks} measures, max |alpha_K - oracle| {worst:.1e}, {above} above the risk level"),
    )
}

/// Criterion 7: duality on full-space cones.
fn cone_duality() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for n in 2..=4 {
        let cone = ConeSpec::<f64>::full_space(n).unwrap();
        let ys = random_payoffs(&cone, 100, n as u64);
        // A weight vector on the resolution-4 lattice so that it is sampled.
        let mut w = vec![1.0 / 4.0; n];
        w[0] = 1.0 - (n - 1) as f64 / 4.0;
        for (name, phi, res) in [("min", PhiSpec::Min, 1), ("linear", PhiSpec::Linear(w.clone()), 4)] {
            let rep = verify_tha(&cone, &phi, &ys, res).unwrap();
            ok &= rep.skipped.is_none() && rep.max_gap <= 1e-9 && rep.weak_violations == 0;
            notes.push(format!("n={n} {name} gap {:.1e}", rep.max_gap));
            for r in 1..=4 {
                let rep = verify_tha(&cone, &phi, &ys[..20], r).unwrap();
                if rep.weak_violations > 0 {
                    ok = false;
                    notes.push(format!("n={n} {name} resolution {r}: {} weak violations", rep.weak_violations));
                }
            }
        }
    }
    outcome(ok, notes.join(", "))
}

/// Criterion 8: dependence of R on the class of test claims.
fn dependence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut violations, mut skipped) = (0usize, 0usize);
    let mut checks = [0usize; 3];
    let grid: Vec<f64> = (-12..=12).map(|k| k as f64 / 4.0).collect();
    for inst in 0..100 {
        let (q, x) = random_atomic(&mut rng, 5);
        let d = law(&q, &x).unwrap();
        let lo = rng.gen_range(-8i32..0) as f64 / 4.0;
        let (f1, f2) = match inst % 4 {
            0 => (TestFamily::call().restricted(Some(lo), Some(-lo)).unwrap(), TestFamily::call()),
            1 => (TestFamily::identity_shift(), TestFamily::identity_shift()),
            2 => (TestFamily::call(), TestFamily::call()),
            _ => (TestFamily::exp_concave().restricted(Some(lo), None).unwrap(), TestFamily::exp_concave()),
        };
        let lambda = rng.gen_range(0.0..=1.0);
        let rep = dependence_k_check(&f1, &f2, &d, lambda, &grid, &grid, &opts()).unwrap();
        violations += rep.violations();
        for item in &rep.items {
            checks[item.item as usize - 1] += item.checks;
            if matches!(item.status, vnr_core::vr_core::CheckStatus::Skipped(_)) {
                skipped += 1;
            }
        }
    }
    outcome(
        violations == 0 && checks.iter().all(|&c| c > 0),
        format!("inequalities per item {checks:?}, {violations} violations, {skipped} skipped items"),
    )
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// Criterion 9: identical inputs give byte-identical reports.
fn determinism() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_vnr");
    let runs: [Vec<String>; 3] = [
        vec![
            "axioms".into(),
            "--target".into(),
            "call-family".into(),
            "--cases".into(),
            "300".into(),
            "--seed".into(),
            "11".into(),
        ],
        vec![
            "duality".into(),
            "--cone".into(),
            data("full_space3.json").display().to_string(),
            "--seed".into(),
            "5".into(),
        ],
        vec![
            "price-curve".into(),
            "--family".into(),
            "call".into(),
            "--scenario".into(),
            data("two_state.json").display().to_string(),
            "--measure".into(),
            "Q".into(),
            "--variable".into(),
            "X".into(),
            "--grid".into(),
            "-1:5:40".into(),
        ],
    ];
    let mut same = true;
    let mut notes = Vec::new();
    for args in &runs {
        let a = Command::new(exe).args(args).args(["--threads", "1"]).output().unwrap();
        let b = Command::new(exe).args(args).args(["--threads", "4"]).output().unwrap();
        let ok =
            a.status.success() && a.stdout == b.stdout && a.status.code() == b.status.code() && !a.stdout.is_empty();
        same &= ok;
        notes.push(format!("{} {}", args[0], if ok { "identical" } else { "differs" }));
    }
    outcome(same, notes.join(", "))
}

/// Name, time budget and check of one criterion.
type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

fn main() {
    let suite: Vec<Criterion> = vec![
        ("1 inversion example", Some(Duration::from_secs(1)), inversion),
        ("2 closed-form identities", Some(Duration::from_secs(5)), closed_forms),
        ("3 axiom suite", Some(Duration::from_secs(60)), axioms),
        ("4 right limit of H", None, right_limit),
        ("5 lambda value at risk dual", None, dual_bound),
        ("6 model-risk duality", None, model_risk_duality),
        ("7 cone duality", None, cone_duality),
        ("8 dependence on the test class", None, dependence),
        ("9 determinism", None, determinism),
    ];
    let mut failed = 0;
    for (name, limit, run) in suite {
        let out = timed(limit, run);
        println!("{} criterion {name}: {}", if out.passed { "PASS" } else { "FAIL" }, out.detail);
        if !out.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
