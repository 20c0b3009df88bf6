mod common;

use common::probability;
use proptest::prelude::*;
use vnr_core::dist_core::{Identity, ScenarioSpace};
use vnr_core::dist_risk::DecreasingTestFn;
use vnr_core::duality_lab::{h_cone, k1_polar_sample, psi, r_cone, random_payoffs, ConeSpec, PhiSpec};
use vnr_core::model_risk::{alpha_k, cont_spread, v_inverse, v_value, v_value_reduced, ModelSet};
use vnr_core::Extended;

/// Model set on `n` states with `m` measures and integer risk levels in `[0, 4]`.
fn model_set() -> impl Strategy<Value = ModelSet<f64>> {
    (2usize..=5, 1usize..=5).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(probability(n), m),
            prop::collection::vec((-16i32..=16).prop_map(|k| k as f64 / 4.0), n),
            prop::collection::vec(0i32..=4, m),
        )
            .prop_map(|(qs, x, risks)| {
                let names: Vec<String> = (0..qs.len()).map(|j| format!("Q{j}")).collect();
                let measures: Vec<(&str, Vec<f64>)> = names.iter().map(|s| s.as_str()).zip(qs).collect();
                let s = ScenarioSpace::from_vectors(&measures, &[("X", x)]).unwrap();
                let mut ms = ModelSet::all(s);
                for (name, r) in names.iter().zip(risks) {
                    ms.set_risk(name, "X", Extended::Finite(r as f64)).unwrap();
                }
                ms
            })
    })
}

fn ramps(n: usize) -> Vec<DecreasingTestFn<f64>> {
    (0..n).map(|i| DecreasingTestFn::ramp(-4.0 + 8.0 * i as f64 / n as f64, 0.5).unwrap()).collect()
}

fn cone() -> impl Strategy<Value = ConeSpec<f64>> {
    (2usize..=3).prop_flat_map(|n| {
        prop::collection::vec(prop::collection::vec(0i32..=3, n), 1..=3).prop_map(move |gens| {
            let mut gens: Vec<Vec<f64>> = gens.into_iter().map(|g| g.into_iter().map(f64::from).collect()).collect();
            // A strictly positive generator keeps min-type reductions finite.
            gens.push(vec![1.0; n]);
            ConeSpec::new(n, gens, Vec::new()).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn value_and_inverse_are_monotone(ms in model_set(), a in 0i32..5, b in 0i32..5, v in -16i32..16, w in -16i32..16) {
        let (a, b) = (a.min(b) as f64, a.max(b) as f64);
        prop_assert!(v_value(&ms, a, "X", &Identity).unwrap() <= v_value(&ms, b, "X", &Identity).unwrap());
        let (v, w) = (v.min(w) as f64 / 4.0, v.max(w) as f64 / 4.0);
        prop_assert!(v_inverse(&ms, v, "X", &Identity).unwrap() <= v_inverse(&ms, w, "X", &Identity).unwrap());
    }

    #[test]
    fn inverse_is_attained(ms in model_set(), v in -16i32..16) {
        let v = v as f64 / 4.0;
        if let Extended::Finite(s) = v_inverse(&ms, v, "X", &Identity).unwrap() {
            prop_assert!(v_value(&ms, s, "X", &Identity).unwrap() >= Extended::Finite(v));
            prop_assert!(v_value(&ms, s - 0.5, "X", &Identity).unwrap() < Extended::Finite(v));
        }
    }

    #[test]
    fn reduced_form_matches_models(ms in model_set(), a in 0i32..5, i in 0usize..8) {
        let laws = ms.laws("X").unwrap();
        let f = &ramps(8)[i];
        let a = a as f64;
        prop_assert!(v_value(&ms, a, "X", f).unwrap().approx_eq(v_value_reduced(&laws, a, f), 1e-12));
    }

    #[test]
    fn indirect_model_risk_grows_with_the_basket_and_stays_below_the_level(ms in model_set(), k in 1usize..16) {
        let grid = ramps(16);
        for m in ms.measures() {
            let small = alpha_k(&ms, m, "X", &grid[..k]).unwrap();
            let full = alpha_k(&ms, m, "X", &grid).unwrap();
            prop_assert!(small <= full);
            prop_assert!(full <= ms.risk(m, "X").unwrap());
        }
    }

    #[test]
    fn spread_is_zero_exactly_when_prices_agree(ms in model_set(), i in 0usize..8) {
        let f = &ramps(8)[i];
        let spread = cont_spread(&ms, "X", f).unwrap();
        prop_assert!(spread >= 0.0);
        let prices: Vec<f64> = ms.laws("X").unwrap().iter().map(|(d, _)| d.expectation(f).to_float()).collect();
        let agree = prices.iter().all(|p| (p - prices[0]).abs() <= 1e-12);
        prop_assert_eq!(spread <= 1e-12, agree);
    }

    #[test]
    fn weak_duality_on_generated_cones(c in cone(), seed in 0u64..1000) {
        let sample = k1_polar_sample(&c, 1).unwrap();
        let ys = random_payoffs(&c, 4, seed);
        for phi in [PhiSpec::Min, PhiSpec::Linear(vec![1.0 / c.states() as f64; c.states()])] {
            for y in &ys {
                let target = phi.eval(y);
                for mu in &sample.members {
                    let p: f64 = mu.iter().zip(y).map(|(a, b)| a * b).sum();
                    let h = h_cone(&c, &phi, p, mu).unwrap();
                    prop_assert!(target.approx_le(h, 1e-9), "{phi:?} y {y:?} mu {mu:?}: {target:?} > {h:?}");
                }
            }
        }
    }

    #[test]
    fn h_is_invariant_under_scaling_the_measure(c in cone(), seed in 0u64..1000, t in 1u32..8) {
        let t = t as f64 / 2.0;
        let sample = k1_polar_sample(&c, 1).unwrap();
        let y = &random_payoffs(&c, 1, seed)[0];
        for mu in &sample.members {
            let p: f64 = mu.iter().zip(y).map(|(a, b)| a * b).sum();
            let scaled: Vec<f64> = mu.iter().map(|v| v * t).collect();
            let h1 = h_cone(&c, &PhiSpec::Min, p, mu).unwrap();
            let h2 = h_cone(&c, &PhiSpec::Min, p * t, &scaled).unwrap();
            prop_assert!(h1.approx_eq(h2, 1e-8), "{h1:?} vs {h2:?}");
        }
    }

    #[test]
    fn cone_r_is_the_right_limit_of_h(c in cone(), p in -8i32..8) {
        let p = p as f64 / 4.0;
        let sample = k1_polar_sample(&c, 1).unwrap();
        for mu in &sample.members {
            let r = r_cone(&c, &PhiSpec::Min, p, mu).unwrap();
            let h = h_cone(&c, &PhiSpec::Min, p + 1e-9, mu).unwrap();
            prop_assert!(r.approx_eq(h, 1e-6), "mu {mu:?}: R {r:?} vs H+ {h:?}");
        }
    }

    #[test]
    fn psi_is_continuous_from_above(c in cone(), seed in 0u64..1000) {
        // A ray cone has an unbounded slice with no vertices; the lattice fills in.
        let sample = k1_polar_sample(&c, 2).unwrap();
        prop_assume!(!sample.members.is_empty());
        let y = random_payoffs(&c, 1, seed).remove(0);
        let base = psi(&c, &PhiSpec::Min, &y, &sample.members).unwrap().to_float();
        let mut prev = f64::INFINITY;
        for k in 1..8 {
            let eps = 2f64.powi(-k);
            // The all-ones generator keeps y + eps in the cone.
            let yn: Vec<f64> = y.iter().map(|v| v + eps).collect();
            let v = psi(&c, &PhiSpec::Min, &yn, &sample.members).unwrap().to_float();
            prop_assert!(v <= prev + 1e-9 && v >= base - 1e-9);
            prop_assert!(v - base <= eps + 1e-9);
            prev = v;
        }
    }
}
