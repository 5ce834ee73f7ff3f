//! Online estimation of the context and external-factor distributions and
//! the plug-in expectations built from them.

mod discrete;
mod expectation;
pub mod harness;
mod kde;
mod kernel;

pub use discrete::{weissman_threshold, DiscreteEstimator};
pub use expectation::{estimate_expectations, ExpectationEstimate, FactorEstimator, PlugIn};
pub use kde::{default_bandwidth, BandwidthRule, KdeEstimator, KdeValue};
pub use kernel::{validate_kernel, KernelCheck, KernelReport, KernelSpec};
