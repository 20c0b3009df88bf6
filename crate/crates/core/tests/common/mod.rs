#![allow(dead_code)]

use proptest::prelude::*;
use vnr_core::dist_core::Distribution;
use vnr_core::dist_risk::{BreakKind, LambdaFn};

/// Values on a quarter grid in `[-4, 4]`, so that ties and coincident atoms occur.
pub fn grid_value() -> impl Strategy<Value = f64> {
    (-16i32..=16).prop_map(|k| k as f64 / 4.0)
}

/// Probability vector with `n` strictly positive entries.
pub fn probability(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1u32..20, n).prop_map(|w| {
        let s: u32 = w.iter().sum();
        w.into_iter().map(|v| v as f64 / s as f64).collect()
    })
}

/// A scenario `(q, x)` on 1 to 6 states.
pub fn scenario() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..=6).prop_flat_map(|n| (probability(n), prop::collection::vec(grid_value(), n)))
}

/// Two measures and two variables on a common state space.
pub fn paired_scenario() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (2usize..=6).prop_flat_map(|n| {
        (probability(n), probability(n), prop::collection::vec(grid_value(), n), prop::collection::vec(grid_value(), n))
    })
}

pub fn atomic() -> impl Strategy<Value = Distribution<f64>> {
    scenario().prop_map(|(q, x)| {
        let atoms: Vec<(f64, f64)> = x.into_iter().zip(q).collect();
        Distribution::from_atoms(&atoms).unwrap()
    })
}

/// Mixed law: atoms plus one uniform piece.
pub fn mixed() -> impl Strategy<Value = Distribution<f64>> {
    (atomic(), grid_value(), 1i32..8, 1u32..9).prop_map(|(d, a, len, w)| {
        let u = Distribution::uniform(a, a + len as f64 / 2.0).unwrap();
        vnr_core::dist_core::mix(&d, &u, w as f64 / 10.0).unwrap()
    })
}

/// Non-decreasing step benchmark with values in `[0, 0.5]`.
pub fn step_lambda() -> impl Strategy<Value = LambdaFn<f64>> {
    (0u32..=10, prop::collection::vec((grid_value(), 0u32..=10), 0..4)).prop_map(|(v0, steps)| {
        let mut xs: Vec<(f64, u32)> = steps;
        xs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        xs.dedup_by(|a, b| a.0 == b.0);
        let mut level = v0;
        let bps = xs
            .into_iter()
            .map(|(x, inc)| {
                level = (level + inc).min(50);
                (x, level as f64 / 100.0, BreakKind::Step)
            })
            .collect();
        LambdaFn::new(bps, v0 as f64 / 100.0).unwrap()
    })
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
