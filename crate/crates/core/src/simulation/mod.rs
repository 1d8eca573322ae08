//! Monte Carlo study of a priced common idiosyncratic variance factor.
//!
//! The market follows a GARCH(1,1) process, the common log-variance a HAR-type
//! recursion, and each asset's idiosyncratic variance loads multiplicatively on
//! the common level. Returns carry a premium proportional to the asset's
//! exposure to common variance shocks.

mod dgp;
mod replicate;
pub mod synthetic;

pub use dgp::{
    simulate_common_variance, simulate_common_variance_from, simulate_market, simulate_panel,
    SimPanelDraw,
};
pub use replicate::{replicate_premium_table, simulate_replication, PremiumRow, PremiumTable, ReplicationOutcome};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// GARCH(1,1) parameters for the monthly market return.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GarchParams {
    pub omega: f64,
    pub a: f64,
    pub b: f64,
}

impl GarchParams {
    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.a - self.b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::validation(format!("garch omega = {} must be positive", self.omega)));
        }
        if !(self.a >= 0.0 && self.b >= 0.0) {
            return Err(Error::validation("garch a and b must be nonnegative"));
        }
        if !(self.a + self.b < 1.0) {
            return Err(Error::validation(format!(
                "garch a + b = {} is not covariance stationary",
                self.a + self.b
            )));
        }
        Ok(())
    }
}

/// `log V[t+1] = theta0 + theta_m * log V[t] + theta_y * mean(log V[t-11..=t]) + sigma_v * v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarParams {
    pub theta0: f64,
    pub theta_m: f64,
    pub theta_y: f64,
    pub sigma_v: f64,
}

impl HarParams {
    /// Fixed point of the noiseless recursion.
    pub fn stationary_mean(&self) -> f64 {
        self.theta0 / (1.0 - self.theta_m - self.theta_y)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_v >= 0.0 && self.sigma_v.is_finite()) {
            return Err(Error::validation(format!(
                "har sigma_v = {} must be nonnegative",
                self.sigma_v
            )));
        }
        if !(self.theta_m + self.theta_y < 1.0) {
            return Err(Error::validation("har theta_m + theta_y must be below 1"));
        }
        if ![self.theta0, self.theta_m, self.theta_y].iter().all(|v| v.is_finite()) {
            return Err(Error::validation("har parameters must be finite"));
        }
        Ok(())
    }
}

/// Normal distribution for a per-asset parameter draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalParams {
    pub mean: f64,
    pub sd: f64,
}

impl NormalParams {
    pub const fn new(mean: f64, sd: f64) -> Self {
        Self { mean, sd }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.sd >= 0.0 && self.sd.is_finite() && self.mean.is_finite()) {
            return Err(Error::validation(format!("{name}: sd must be finite and nonnegative")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSpec {
    pub n_assets: usize,
    pub n_months: usize,
    pub n_reps: usize,
    pub garch: GarchParams,
    pub har: HarParams,
    /// Price of exposure to common variance, per month.
    pub lambda_v: f64,
    pub dist_beta: NormalParams,
    pub dist_gamma: NormalParams,
    pub dist_mu: NormalParams,
    /// Drawn as the absolute value of this normal.
    pub dist_sigma: NormalParams,
    pub seed: u64,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            n_assets: 500,
            n_months: 120,
            n_reps: 200,
            garch: GarchParams {
                omega: 1.0e-4,
                a: 0.10,
                b: 0.85,
            },
            har: HarParams {
                theta0: -3.0,
                theta_m: 0.3,
                theta_y: 0.2,
                sigma_v: 0.35,
            },
            lambda_v: 3.0e-3,
            dist_beta: NormalParams::new(1.0, 0.3),
            dist_gamma: NormalParams::new(1.0, 3.0),
            dist_mu: NormalParams::new(-1.5, 0.5),
            dist_sigma: NormalParams::new(0.5, 0.2),
            seed: 20_240_601,
        }
    }
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_assets == 0 || self.n_months == 0 || self.n_reps == 0 {
            return Err(Error::validation("n_assets, n_months and n_reps must be at least 1"));
        }
        self.garch.validate()?;
        self.har.validate()?;
        if !self.lambda_v.is_finite() {
            return Err(Error::validation("lambda_v must be finite"));
        }
        self.dist_beta.validate("dist_beta")?;
        self.dist_gamma.validate("dist_gamma")?;
        self.dist_mu.validate("dist_mu")?;
        self.dist_sigma.validate("dist_sigma")?;
        Ok(())
    }

    /// Independent generator for replication `rep`: same key, separate stream.
    pub fn rng_for(&self, rep: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(rep);
        rng
    }
}
