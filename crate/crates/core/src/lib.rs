//! Value-and-risk measures, intrinsic risk pricing and their dual
//! representations on laws with piecewise-linear-plus-atoms CDFs.

// `!(a < b)` is how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dist_core;
pub mod dist_risk;
pub mod duality_lab;
pub mod error;
pub mod extended;
pub mod formats;
pub mod io;
pub mod model_risk;
pub mod scalar;
pub mod test_families;
pub mod vr_core;

pub use error::{Result, VnrError};
pub use extended::Extended;
pub use scalar::Scalar;

/// Double-precision instantiations used by the command line and reports.
pub type Distribution64 = dist_core::Distribution<f64>;
pub type ScenarioSpace64 = dist_core::ScenarioSpace<f64>;
pub type LambdaFn64 = dist_risk::LambdaFn<f64>;
pub type RiskMeasure64 = dist_risk::RiskMeasure<f64>;
pub type TestFamily64 = test_families::TestFamily<f64>;
pub type VnRContext64 = vr_core::VnRContext<f64>;
pub type ModelSet64 = model_risk::ModelSet<f64>;
pub type ConeSpec64 = duality_lab::ConeSpec<f64>;
