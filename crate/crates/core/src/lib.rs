//! Re-solving with empirical estimation for binary contextual bandits with
//! knapsacks.
//!
//! Every round the controller re-solves the fluid linear program at the
//! current average remaining budget, plugging in online estimates of the
//! context and external-factor distributions, and then randomizes its
//! accept/reject decision according to the solution. The crate contains:
//!
//! - [`model`]: problem instances, outcomes and true expectations.
//! - [`estimators`]: frequency and kernel density estimators plus the
//!   plug-in expectations used by the fluid program.
//! - [`lp`]: the finite-context fluid LP and a bounded-variable simplex.
//! - [`policy`]: the re-solving controller and a static fluid baseline.
//! - [`simulator`]: seeded trials and batched Monte-Carlo regret estimation.
//! - [`instance_file`] and [`presets`]: text instance format and the two
//!   benchmark instances (degenerate and non-degenerate budgets).

pub mod error;
pub mod estimators;
pub mod instance_file;
pub mod lp;
pub mod model;
pub mod policy;
pub mod presets;
pub mod quadrature;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
pub use model::{Action, Factor, Outcome, ProblemInstance};
pub use policy::FeedbackMode;
