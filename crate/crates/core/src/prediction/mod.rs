//! Market-return predictability from quantile factor differences.
//!
//! Every series pair is aligned so that `y[k]` is the return realized in the
//! month after predictor observation `x[k]`. Out-of-sample forecasts use an
//! expanding window: the forecast of `y[k]` is fit on pairs `0..k` only, for
//! `k >= first_window`.

mod combine;
mod eval;

pub use combine::{forecast_combination, CombinationResult, ForecastModelSpec, ModelKind, TauSet};
pub use eval::{
    expanding_forecasts, historical_mean_forecasts, is_r2, oos_r2, predict_bivariate,
    predict_univariate, BivariateEval, PredictionEval,
};
