//! Frozen reference values, each recomputed here by a route that does not go
//! through the library code under test.

use std::sync::Arc;

use vnr_core::dist_core::{dominates_first_order, law, mix, Distribution, Identity, ScenarioSpace};
use vnr_core::dist_risk::{
    certainty_equivalent, dual_inverse, dual_value, lambda_var, propvolle_lower_bound, BreakKind, DecreasingTestFn,
    Exponential, LambdaFn, RampLattice, RiskMeasure,
};
use vnr_core::duality_lab::{k1_polar_sample, polar_member, psi, ConeSpec, PhiSpec};
use vnr_core::model_risk::{cont_spread, v_inverse, v_value, ModelSet};
use vnr_core::test_families::{generic_phi, PhiVariant, TestFamily};
use vnr_core::vr_core::{acceptance_r, dependence_k_check, h_law, AcceptanceFamily, BisectOptions, CheckStatus};
use vnr_core::Extended;

fn two_atoms(a: f64, b: f64) -> Distribution<f64> {
    Distribution::from_atoms(&[(a, 0.5), (b, 0.5)]).unwrap()
}

fn uniform() -> Distribution<f64> {
    Distribution::uniform(-0.5, 0.5).unwrap()
}

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b}");
}

#[test]
fn cdf_and_quantiles() {
    let d = two_atoms(0.0, 1.0);
    let atoms = [(0.0, 0.5), (1.0, 0.5)];
    let by_sum: f64 = atoms.iter().filter(|a| a.0 <= 0.5).map(|a| a.1).sum();
    assert_eq!(by_sum, 0.5);
    assert_eq!(d.cdf(0.5), 0.5);

    // F(z) = z + 1/2 on the support, so F^{-1}(u) = u - 1/2.
    close(uniform().quantile_left(0.01).unwrap(), -0.49, 1e-15);
    close(0.01 - 0.5, -0.49, 1e-15);

    let first = atoms.iter().scan(0.0, |c, a| {
        *c += a.1;
        Some((a.0, *c))
    });
    let q = first.filter(|&(_, c)| c >= 0.5).map(|(x, _)| x).next().unwrap();
    assert_eq!(q, 0.0);
    assert_eq!(d.quantile_left(0.5).unwrap(), 0.0);
}

#[test]
fn translation_and_mixture() {
    let f = |z: f64| (z + 0.5).clamp(0.0, 1.0);
    close(uniform().translate(0.1).cdf(0.0), f(0.0 - 0.1), 1e-15);
    close(f(-0.1), 0.4, 1e-15);

    let m = mix(&uniform(), &Distribution::dirac(0.0), 0.5).unwrap();
    close(m.cdf(0.0), 0.5 * f(0.0) + 0.5 * 1.0, 1e-15);
    close(m.cdf(0.0), 0.75, 1e-15);
}

#[test]
fn shifted_quadratic_law_no_longer_dominates() {
    let fy = |z: f64| ((z + 0.5).clamp(0.0, 1.0)).powi(2);
    let fx = |z: f64| (z + 0.5).clamp(0.0, 1.0);
    let x = uniform();
    let y = Distribution::from_cdf_fn(fy, -0.5, 0.5, 10_000).unwrap();
    assert!(dominates_first_order(&x, &y));
    let shift = 1.0;
    // Brute-force scan of F_{T_{-y} P_Y}(z) = F_Y(z + y) against F_X.
    let crossing = (0..=4000).map(|i| -2.0 + i as f64 * 1e-3).any(|z| fy(z + shift) > fx(z) + 1e-12);
    assert!(crossing);
    assert!(!dominates_first_order(&x, &y.translate(-shift)));
}

#[test]
fn pushforward_and_expectations() {
    let d = law(&[0.5, 0.5], &[0.0, 4.0]).unwrap();
    assert_eq!(d.atoms(), vec![(0.0, 0.5), (4.0, 0.5)]);

    let call = |x: f64| (x - 1.0f64).max(0.0);
    assert_eq!(0.5 * call(0.0) + 0.5 * call(4.0), 1.5);
    close(d.expectation(&call).to_float(), 1.5, 1e-15);

    let e = two_atoms(0.0, -(3f64.ln()));
    close(0.5 * 1.0 + 0.5 * 3.0, 2.0, 0.0);
    close(e.expectation(&|x: f64| (-x).exp()).to_float(), 2.0, 1e-14);

    let ce = certainty_equivalent(&e, &Exponential { theta: 1.0 }).unwrap().to_float();
    close(ce, (0.5f64 * 1.0 + 0.5 * 3.0).ln(), 1e-14);
    close(ce, std::f64::consts::LN_2, 1e-14);
}

/// `f(-inf) + ∫ (1 - Λ) df` by a midpoint Riemann-Stieltjes sum.
fn stieltjes(a: f64, f: &DecreasingTestFn<f64>, lam: impl Fn(f64) -> f64) -> f64 {
    let eval = |x: f64| {
        let k = f.knots();
        if x <= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            if x <= w[1].0 {
                return w[0].1 + (w[1].1 - w[0].1) * (x - w[0].0) / (w[1].0 - w[0].0);
            }
        }
        k[k.len() - 1].1
    };
    let (lo, n) = (-20.0, 400_000);
    let h = (-a - lo) / n as f64;
    let mut acc = eval(lo);
    for i in 0..n {
        let (x0, x1) = (lo + i as f64 * h, lo + (i + 1) as f64 * h);
        acc += (1.0 - lam(0.5 * (x0 + x1))) * (eval(x1) - eval(x0));
    }
    acc
}

#[test]
fn dual_value_against_numeric_integration() {
    let f = DecreasingTestFn::new(vec![(-2.0, 3.0), (-0.5, 1.0), (1.0, -1.0)]).unwrap();
    let lam = 0.1;
    let constant = LambdaFn::constant(lam).unwrap();
    for a in [-2.0, -0.3, 0.0, 0.7, 1.5, 3.0] {
        let v = dual_value(a, &f, &constant).unwrap();
        let closed = lam * 3.0 + (1.0 - lam) * f_at(&f, -a);
        close(v, closed, 1e-12);
        close(v, stieltjes(a, &f, |_| lam), 1e-6);
    }
    let step = LambdaFn::new(vec![(-1.0, 0.2, BreakKind::Step), (0.0, 0.3, BreakKind::Linear)], 0.05).unwrap();
    let lam_fn = |x: f64| {
        if x < -1.0 {
            0.05
        } else if x < 0.0 {
            0.2 + 0.1 * (x + 1.0)
        } else {
            0.3
        }
    };
    for a in [-2.0, -0.3, 0.0, 0.7, 1.5] {
        // The midpoint rule straddles the step of Λ within one cell.
        close(dual_value(a, &f, &step).unwrap(), stieltjes(a, &f, lam_fn), 1e-5);
    }
}

fn f_at(f: &DecreasingTestFn<f64>, x: f64) -> f64 {
    use vnr_core::dist_core::Payoff;
    f.eval(x)
}

#[test]
fn dual_inverse_round_trip_on_a_grid() {
    let f = DecreasingTestFn::new(vec![(-2.0, 3.0), (-0.5, 1.0), (1.0, -1.0)]).unwrap();
    let lam = LambdaFn::new(vec![(-1.0, 0.2, BreakKind::Step)], 0.05).unwrap();
    for i in -40..=40 {
        let a = i as f64 / 10.0;
        let v = dual_value(a, &f, &lam).unwrap();
        let back = dual_inverse(v, &f, &lam).unwrap().to_float();
        assert!(back <= a + 1e-12, "{a}: {back}");
        // V is strictly decreasing in a where -a lies inside the knots.
        if -a > -2.0 && -a < 1.0 {
            close(back, a, 1e-9);
        }
    }
}

#[test]
fn ramp_bound_near_two_atom_lambda_var() {
    let d = two_atoms(0.0, 1.0);
    let lam = LambdaFn::constant(0.1).unwrap();
    // -inf{x : F(x) > 0.1} with F jumping to 0.5 at 0.
    let direct = -[(0.0, 0.5), (1.0, 1.0)].iter().find(|a| a.1 > 0.1).unwrap().0;
    assert_eq!(lambda_var(&d, &lam).unwrap(), Extended::Finite(direct));
    let grid = RampLattice::covering(&d, 12).ramps(200);
    let bound = propvolle_lower_bound(&d, &lam, &grid).unwrap().to_float();
    assert!(bound <= direct + 1e-9 && bound >= direct - 0.05, "{bound}");
}

#[test]
fn family_reference_values() {
    assert_eq!(TestFamily::<f64>::exp_concave().payoff(0.0, 0.0).unwrap(), 1.0 - 1.0);

    let s = ScenarioSpace::from_vectors(&[("Q", vec![0.2, 0.3, 0.5])], &[("X", vec![-1.5, 0.0, 2.0])]).unwrap();
    let v = generic_phi(&Identity, PhiVariant::NegRhoF, &s, "Q", "X", &RiskMeasure::WorstCase).unwrap();
    assert_eq!(v, Extended::Finite(-1.5));

    let call = TestFamily::call();
    let d = two_atoms(0.0, 4.0);
    assert_eq!(call.pi(&d, -1.0).unwrap(), Extended::Finite(0.5 * 0.0 + 0.5 * 3.0));
}

#[test]
fn identity_shift_h_against_parameter_sweep() {
    let fam = TestFamily::identity_shift();
    let d = Distribution::from_atoms(&[(-1.0, 0.25), (0.5, 0.5), (3.0, 0.25)]).unwrap();
    let mean = -0.25 + 0.25 + 0.75;
    let sweep = |p: f64| {
        (0..=10_000)
            .map(|i| -10.0 + 20.0 * i as f64 / 10_000.0)
            .filter(|&a| mean + a <= p)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    for p in [-3.0, -0.7, 0.0, 0.75, 2.2] {
        let h = h_law(&fam, &d, p, &BisectOptions::default()).unwrap().to_float();
        // The sweep is exact up to its spacing of 0.002.
        close(h, sweep(p), 2.5e-3);
        close(h, p - mean, 1e-8);
    }
}

#[test]
fn worst_case_acceptance_ignores_the_price() {
    let fam = AcceptanceFamily::CashAdditive(Arc::new(|_p: f64, d: &Distribution<f64>| d.support_min() >= 0.0));
    let d = Distribution::from_atoms(&[(-1.25, 0.5), (2.0, 0.5)]).unwrap();
    for p in [-3.0, 0.0, 4.5] {
        let r = acceptance_r(&fam, p, &d, &BisectOptions::default()).unwrap().to_float();
        close(r, 1.25, 1e-8);
    }
}

#[test]
fn dependence_reference_instances() {
    let d = Distribution::from_atoms(&[(-1.0, 0.5), (2.0, 0.5)]).unwrap();
    let grid: Vec<f64> = (-8..=8).map(|k| k as f64 / 4.0).collect();
    let opts = BisectOptions::default();
    let id = TestFamily::identity_shift();
    let rep = dependence_k_check(&id, &id, &d, 0.3, &grid, &grid, &opts).unwrap();
    assert_eq!(rep.violations(), 0);
    // Both sides of the mixture bound are E[X] + r.
    assert!(rep.items.iter().all(|i| i.max_violation.abs() <= 1e-12));

    let call = TestFamily::call();
    let narrow = TestFamily::call().restricted(Some(-1.0), Some(1.0)).unwrap();
    let rep = dependence_k_check(&narrow, &call, &d, 0.5, &grid, &grid, &opts).unwrap();
    assert_eq!(rep.violations(), 0);
    assert!(rep.items.iter().any(|i| i.item == 1 && i.status == CheckStatus::Passed));
}

#[test]
fn two_model_enumeration() {
    let s = ScenarioSpace::from_vectors(&[("Q1", vec![1.0, 0.0]), ("Q2", vec![0.0, 1.0])], &[("X", vec![1.0, 3.0])])
        .unwrap();
    let mut ms = ModelSet::all(s);
    ms.set_risk("Q1", "X", Extended::Finite(0.0)).unwrap();
    ms.set_risk("Q2", "X", Extended::Finite(1.0)).unwrap();
    assert_eq!(v_value(&ms, 0.5, "X", &Identity).unwrap(), Extended::Finite(1.0));
    assert_eq!(v_value(&ms, 1.0, "X", &Identity).unwrap(), Extended::Finite(3.0));
    assert_eq!(v_inverse(&ms, 2.0, "X", &Identity).unwrap(), Extended::Finite(1.0));

    let s = ScenarioSpace::from_vectors(&[("A", vec![0.5, 0.5]), ("B", vec![0.25, 0.75])], &[("X", vec![0.0, 4.0])])
        .unwrap();
    let prices = [0.5 * 4.0, 0.75 * 4.0];
    close(cont_spread(&ModelSet::all(s), "X", &Identity).unwrap(), prices[1] - prices[0], 1e-15);
}

#[test]
fn full_space_polar_geometry() {
    let full3 = ConeSpec::full_space(3).unwrap();
    for mu in [[0.2, 0.3, 0.5], [1.2, -0.1, -0.1], [0.0, 0.0, 1.0], [-1e-11, 0.5, 0.5]] {
        let componentwise = mu.iter().all(|&m| m >= -1e-10);
        assert_eq!(polar_member(&full3, &mu).unwrap(), componentwise, "{mu:?}");
    }

    let full2 = ConeSpec::<f64>::full_space(2).unwrap();
    let sample = k1_polar_sample(&full2, 4).unwrap();
    assert_eq!(sample.vertices, 2);
    let mut vertices = sample.members[..2].to_vec();
    vertices.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(vertices, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    assert!(sample.members.iter().all(|m| m.iter().all(|&v| v >= 0.0)));

    let ray = ConeSpec::new(2, vec![vec![1.0, 0.0]], vec![]).unwrap();
    assert!(polar_member(&ray, &[2.0, -1.0]).unwrap());
    assert!(!polar_member(&ray, &[-1.0, 2.0]).unwrap());

    let members = k1_polar_sample(&full3, 1).unwrap().members;
    for y in [[1.0, -2.0, 0.5], [3.0, 3.0, 3.0], [0.0, 4.0, -0.25]] {
        let min = y.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(psi(&full3, &PhiSpec::Min, &y, &members).unwrap(), Extended::Finite(min));
    }
}
