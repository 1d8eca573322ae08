//! Command-line front end of the CIQ toolkit.
//!
//! Every command reads a TOML [`RunConfig`], writes CSV artifacts with six
//! significant digits and a JSON manifest recording the config digest, seed
//! and input/output digests.

pub mod commands;
pub mod config;
pub mod output;
mod readers;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ciq_core::Error;

pub use config::RunConfig;

/// Process exit code for an error kind.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 3,
        Error::Io { .. } => 4,
        Error::Parse { .. } | Error::Validation(_) => 5,
        Error::Domain(_) | Error::Dimension(_) | Error::Singular(_) => 6,
    }
}

/// Exit code of command-line usage errors.
pub const USAGE_EXIT: i32 = 2;

const EXIT_CODES: &str = "\
Exit codes: 0 success, 2 usage, 3 configuration, 4 missing or unwritable file,
5 malformed or invalid input, 6 numerical failure.";

#[derive(Debug, Parser)]
#[command(name = "ciq", version, about = "Common idiosyncratic quantile factors", after_help = EXIT_CODES)]
pub struct Cli {
    /// Maximum number of worker threads (default: one per core).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,

    /// Output directory (default: paths.output_dir, else the working directory).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptionalConfigArgs {
    /// TOML run configuration (default: built-in settings).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Output directory (default: paths.output_dir, else the working directory).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Master seed, overriding the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WeightingArg {
    Equal,
    Value,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate rolling CIQ(tau) and PCA-SQ factors.
    #[command(after_long_help = "Writes ciq_factors.csv: date,tau,level,diff (PCA-SQ rows use tau=PCASQ; diff is empty on the first date).")]
    EstimateFactors {
        #[command(flatten)]
        io: ConfigArgs,
    },

    /// Predictive regressions of next-month market excess returns on factor changes.
    #[command(after_long_help = "Writes predict.csv: tau,coeff,tstat,r2_is,r2_oos,r2_is_ct,r2_oos_ct \
(plus control_coeff,control_tstat with --control); with --combine writes combine.csv: model,tau_set,r2_oos,r2_oos_ct. \
Coefficients are annualized percent per standard deviation; R-squared values are percent.")]
    Predict {
        #[command(flatten)]
        io: ConfigArgs,
        /// Factor series from estimate-factors instead of re-estimating.
        #[arg(long, value_name = "FILE")]
        series: Option<PathBuf>,
        /// Evaluate the eight forecast models on the all, downside and upside tau sets.
        #[arg(long)]
        combine: bool,
        /// Factor column used as a bivariate control.
        #[arg(long, value_name = "NAME", conflicts_with = "combine")]
        control: Option<String>,
    },

    /// Fama-MacBeth regressions on estimated exposures.
    #[command(after_long_help = "Writes crosssection.csv: key,lambda,tstat (lambda in percent per month) \
and, unless --betas is given, betas.csv: window_end,asset_id,key,beta,n_obs.")]
    Crosssection {
        #[command(flatten)]
        io: ConfigArgs,
        /// Exposures from an earlier betas.csv instead of re-estimating.
        #[arg(long, value_name = "FILE")]
        betas: Option<PathBuf>,
    },

    /// Portfolio sorts on estimated exposures.
    #[command(after_long_help = "Writes sort.csv: key,P1..Pn,H-L,tstat,alpha6,alpha6_t (annualized percent; \
alphas only for one-month holding) and, unless --betas is given, betas.csv.")]
    Sort {
        #[command(flatten)]
        io: ConfigArgs,
        #[arg(long, value_name = "FILE")]
        betas: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "equal")]
        weighting: WeightingArg,
        /// Holding period in months.
        #[arg(long, default_value_t = 1)]
        holding: usize,
        /// Exposure key of a dependent first-stage sort (e.g. PCASQ).
        #[arg(long, value_name = "KEY")]
        control: Option<String>,
        /// Number of portfolios, overriding n_portfolios.
        #[arg(long, value_name = "N")]
        portfolios: Option<usize>,
    },

    /// Draw one simulated return panel.
    #[command(after_long_help = "Writes sim_panel.csv (date,asset_id,ret,price,mktcap), \
sim_factors.csv (date,mktrf,smb,hml,umd,rf,v; smb, hml, umd and rf are zero) and sim_truth.csv (asset_id,beta,gamma).")]
    Simulate {
        #[command(flatten)]
        io: OptionalConfigArgs,
    },

    /// Monte Carlo table of simulated premia.
    #[command(after_long_help = "Writes replicate.csv: tau,premium,tstat,rejection_rate \
(premium in annualized percent; tstat is mean over standard deviation across replications).")]
    ReplicateSim {
        #[command(flatten)]
        io: OptionalConfigArgs,
        /// Number of replications, overriding the config.
        #[arg(long)]
        reps: Option<usize>,
    },
}
