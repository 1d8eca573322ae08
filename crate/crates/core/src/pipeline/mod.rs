//! Data ingestion and the rolling-window factor recipe.
//!
//! Per window: residualize excess returns on observed factors, optionally
//! standardize by EWMA volatility, estimate one quantile factor per tau and the
//! PCA-SQ factor, keep each factor's last value, and splice the windows into
//! level and difference series. Exposures are OLS slopes of excess returns on
//! the spliced differences.

mod betas;
mod data;
mod rolling;
mod transform;

pub use betas::{align_diffs, estimate_betas, BetaRow, WindowSpec};
pub use data::{load_factors, load_panel, ObservedFactors, ReturnPanel};
pub use rolling::{run_rolling, window_starts, RollingConfig, RollingOutput};
pub use transform::{ewma_standardize, pca_sq_factor, residualize, DEFAULT_RESIDUAL_FACTORS};
