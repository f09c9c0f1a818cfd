//! Maximum rank correlation estimation for semiparametric transformation
//! models `Y = H(X'β + ε)` with self-induced smoothing.
//!
//! The step objective of the maximum rank correlation estimator is replaced
//! by a Gaussian-smoothed version whose bandwidth is the estimator's own
//! sampling covariance. Iterating "estimate the sandwich covariance, then
//! re-maximize the smoothed objective" gives point estimates and standard
//! errors together. Right-censored responses use the partial rank
//! criterion.
//!
//! ```
//! use rankcorr::{fit, Dataset, FitOptions, Observation};
//!
//! // y is increasing in 1.5·x + z plus noise.
//! let data = Dataset::new(
//!     (0..60)
//!         .map(|i| {
//!             let t = i as f64;
//!             let (x, z, e) = (t.sin(), (1.7 * t).cos(), 0.3 * (5.3 * t).sin());
//!             Observation::new((1.5 * x + z + e).exp(), vec![x, z])
//!         })
//!         .collect(),
//! )?;
//! let result = fit(&data, &FitOptions::default())?;
//! println!("θ̂ = {:?}, SE = {:?}", result.theta_hat, result.std_errors);
//! # Ok::<(), rankcorr::Error>(())
//! ```

mod accumulate;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod model;
pub mod normal;
pub mod objectives;
pub mod optim;
pub mod sandwich;
pub mod simulation;
mod step;

pub use error::{DataError, Error, NumericalError, Result};
pub use estimator::{
    fit, maximize_smoothed, maximize_step_objective, EstimateResult, FitOptions, IterationRecord,
    SmoothedFit, StepFit, VarianceAt,
};
pub use linalg::invert_spd;
pub use model::{
    build_full_coefficients, pair_scale, validate_dataset, Criterion, Dataset, Observation,
    ParamVector, RawRow, SmoothingMatrix,
};
pub use objectives::{
    pair_term, partial_rank_objective, rank_objective, smoothed_objective,
    smoothed_objective_with, smoothed_score, smoothed_score_with, smoothed_value_and_score,
    step_objective, PairKernelTerm,
};
pub use sandwich::{
    hessian_estimate, hessian_estimate_with, sandwich_covariance, sandwich_parts,
    sandwich_parts_with, score_variance_estimate, score_variance_estimate_with, SandwichParts,
};
pub use simulation::{generate_design, ols_fit, run_study, Design, DesignSpec, SimulationSummary};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/objectives.md")]
    mod objectives {}
    #[doc = include_str!("../../../book/src/sandwich.md")]
    mod sandwich {}
    #[doc = include_str!("../../../book/src/algorithm.md")]
    mod algorithm {}
    #[doc = include_str!("../../../book/src/censoring.md")]
    mod censoring {}
    #[doc = include_str!("../../../book/src/simulations.md")]
    mod simulations {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
