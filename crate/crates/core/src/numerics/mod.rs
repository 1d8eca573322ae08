//! Dense solvers shared by every stage of the pipeline.

mod design;
mod enet;
mod hac;
mod ols;
mod pca;
mod quantreg;
mod rearrange;
pub mod stats;

pub use design::DesignMatrix;
pub use enet::{coordinate_descent, lambda_grid, loo_cv_tune, loo_errors, RegularizedFit};
pub use hac::{mean_t_stat, newey_west, HacResult};
pub use ols::{ols, ols_with_residuals, simple_regression};
pub use pca::{pca, PcaResult};
pub use quantreg::{
    check_loss, mean_check_loss, quantile_regression, scalar_quantile_fit, QuantileFitResult,
};
pub use rearrange::{crossing_count, monotone_rearrange};

pub(crate) use ols::NormalEquations;
pub(crate) use quantreg::{rho, validate_tau};
