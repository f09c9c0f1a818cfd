//! Generic unconstrained minimizers used by the estimators.

pub mod bfgs;
pub mod nelder_mead;

pub use bfgs::{minimize_bfgs, BfgsOptions, BfgsOutcome, BfgsStatus};
pub use nelder_mead::{minimize_nelder_mead, NelderMeadOptions, NelderMeadOutcome};
