//! Common idiosyncratic quantile (CIQ) factors.
//!
//! Estimation of quantile factors from panels of idiosyncratic returns and the
//! downstream asset-pricing toolkit: rolling-window factor construction,
//! market-return predictability, Fama-MacBeth regressions, portfolio sorts and
//! a Monte Carlo study of premia generated by a priced common variance factor.

pub mod calendar;
pub mod crosssection;
mod error;
pub mod numerics;
pub mod pipeline;
pub mod prediction;
pub mod qfa;
pub mod simulation;

pub use calendar::Month;
pub use error::{Error, Result};
pub use qfa::{
    estimate_qfa, splice_factor, FactorKey, FactorWindow, InitStrategy, QfaFit, ResidualPanel,
    RollingFactorSeries,
};
