use std::path::{Path, PathBuf};

use ciq_core::pipeline::{RollingConfig, WindowSpec};
use ciq_core::simulation::SimSpec;
use ciq_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Input and output locations; relative paths resolve against the config file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub panel: Option<PathBuf>,
    pub factors: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub window_length: usize,
    pub min_obs_beta: usize,
    pub taus: Vec<f64>,
    pub nw_lags: usize,
    pub ewma_lambda: f64,
    pub standardize_for_crosssection: bool,
    pub standardize_for_prediction: bool,
    pub first_oos_window: usize,
    pub n_portfolios: usize,
    pub penny_threshold: f64,
    pub seed: u64,
    /// Observed factors removed before factor estimation.
    pub residual_factors: Vec<String>,
    /// Factor columns whose exposures enter cross-sectional tests as controls.
    pub beta_controls: Vec<String>,
    /// Factor columns of the alpha regression; empty means every factor column.
    pub alpha_factors: Vec<String>,
    pub paths: Paths,
    /// Simulation design; its seed is replaced by the top-level `seed`.
    pub simulation: SimSpec,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let rolling = RollingConfig::default();
        let window = WindowSpec::default();
        Self {
            window_length: window.length,
            min_obs_beta: window.min_obs_beta,
            taus: rolling.taus,
            nw_lags: 6,
            ewma_lambda: rolling.ewma_lambda,
            standardize_for_crosssection: true,
            standardize_for_prediction: false,
            first_oos_window: 120,
            n_portfolios: 10,
            penny_threshold: 1.0,
            seed: SimSpec::default().seed,
            residual_factors: rolling.residual_factors,
            beta_controls: Vec::new(),
            alpha_factors: Vec::new(),
            paths: Paths::default(),
            simulation: SimSpec::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

fn toml_error(path: &Path, text: &str, e: &toml::de::Error) -> Error {
    let line = e
        .span()
        .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
    Error::Config(format!(
        "{}:{line}: {}",
        path.display(),
        e.message().replace('\n', " ")
    ))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| toml_error(path, &text, &e))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("window_length", self.window_length),
            ("min_obs_beta", self.min_obs_beta),
            ("first_oos_window", self.first_oos_window),
            ("n_portfolios", self.n_portfolios),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !self.penny_threshold.is_finite() || self.penny_threshold < 0.0 {
            return Err(Error::Config("penny_threshold must be finite and nonnegative".into()));
        }
        self.rolling(false, false).validate()
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn panel_path(&self) -> Result<PathBuf> {
        self.paths
            .panel
            .as_deref()
            .map(|p| self.resolve(p))
            .ok_or_else(|| Error::Config("paths.panel is not set".into()))
    }

    pub fn factors_path(&self) -> Result<PathBuf> {
        self.paths
            .factors
            .as_deref()
            .map(|p| self.resolve(p))
            .ok_or_else(|| Error::Config("paths.factors is not set".into()))
    }

    pub fn window(&self) -> WindowSpec {
        WindowSpec {
            length: self.window_length,
            min_obs_beta: self.min_obs_beta,
            step: 1,
        }
    }

    pub fn rolling(&self, standardize: bool, estimate_betas: bool) -> RollingConfig {
        RollingConfig {
            window: self.window(),
            taus: self.taus.clone(),
            standardize,
            ewma_lambda: self.ewma_lambda,
            residual_factors: self.residual_factors.clone(),
            beta_controls: self.beta_controls.clone(),
            estimate_betas,
        }
    }

    pub fn sim_spec(&self) -> SimSpec {
        SimSpec {
            seed: self.seed,
            ..self.simulation.clone()
        }
    }

    /// SHA-256 of the canonical JSON form of the effective configuration.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_protocol() {
        let c = RunConfig::default();
        assert_eq!(c.window_length, 60);
        assert_eq!(c.min_obs_beta, 48);
        assert_eq!(c.taus.len(), 11);
        assert_eq!(c.nw_lags, 6);
        assert_eq!(c.first_oos_window, 120);
        assert!(c.standardize_for_crosssection && !c.standardize_for_prediction);
        c.validate().unwrap();
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "window_length = 36\n[paths]\npanel = \"p.csv\"\n[simulation]\nn_reps = 3\n").unwrap();
        let c = RunConfig::load(&path).unwrap();
        assert_eq!(c.window_length, 36);
        assert_eq!(c.min_obs_beta, 48);
        assert_eq!(c.simulation.n_reps, 3);
        assert_eq!(c.panel_path().unwrap(), dir.path().join("p.csv"));
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_key_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = 1\nwindow = 5\n").unwrap();
        let err = RunConfig::load(&path).unwrap_err().to_string();
        assert!(err.contains(":2:") && err.contains("window"), "{err}");
        assert!(!err.contains('\n'));
    }

    #[test]
    fn digest_tracks_content() {
        let a = RunConfig::default();
        let b = RunConfig { seed: 1, ..a.clone() };
        assert_eq!(a.digest(), RunConfig::default().digest());
        assert_ne!(a.digest(), b.digest());
    }
}
