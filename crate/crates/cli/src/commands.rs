use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ciq_core::crosssection::{
    aggregate_betas, fama_macbeth, sort_bivariate_dependent, sort_univariate, ExposureMatrix,
    SortConfig, SortResult, Weighting,
};
use ciq_core::pipeline::{load_factors, load_panel, run_rolling, BetaRow, ObservedFactors, ReturnPanel};
use ciq_core::prediction::{
    forecast_combination, predict_bivariate, predict_univariate, ForecastModelSpec, ModelKind, TauSet,
};
use ciq_core::simulation::{replicate_premium_table, simulate_panel};
use ciq_core::{Error, FactorKey, Month, Result, RollingFactorSeries};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::output::{num, opt_num, sha256_file, FileDigest, Manifest, OutputDir, Table};
use crate::readers::{read_betas, read_series};
use crate::{Command, WeightingArg};

/// State shared by one command invocation.
struct Run {
    name: &'static str,
    cfg: RunConfig,
    out: OutputDir,
    inputs: Vec<PathBuf>,
    options: BTreeMap<String, String>,
}

impl Run {
    fn new(name: &'static str, cfg: RunConfig, out: Option<&Path>) -> Result<Self> {
        cfg.validate()?;
        let dir = match (out, &cfg.paths.output_dir) {
            (Some(d), _) => d.to_path_buf(),
            (None, Some(d)) => cfg.resolve(d),
            (None, None) => PathBuf::from("."),
        };
        Ok(Self {
            name,
            out: OutputDir::create(&dir)?,
            cfg,
            inputs: Vec::new(),
            options: BTreeMap::new(),
        })
    }

    fn option(&mut self, name: &str, value: impl ToString) {
        self.options.insert(name.to_string(), value.to_string());
    }

    fn input(&mut self, path: PathBuf) -> PathBuf {
        self.inputs.push(path.clone());
        path
    }

    fn panel(&mut self) -> Result<ReturnPanel> {
        let path = self.cfg.panel_path()?;
        let path = self.input(path);
        load_panel(&path, self.cfg.penny_threshold)
    }

    fn factors(&mut self) -> Result<ObservedFactors> {
        let path = self.cfg.factors_path()?;
        let path = self.input(path);
        load_factors(&path)
    }

    fn finish(self) -> Result<()> {
        let inputs = self
            .inputs
            .iter()
            .map(|p| {
                Ok(FileDigest {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<_>>()?;
        let manifest = Manifest {
            command: self.name,
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: self.cfg.digest(),
            seed: self.cfg.seed,
            config: &self.cfg,
            options: &self.options,
            inputs,
            outputs: self.out.digests()?,
        };
        self.out.write_manifest(&format!("{}.manifest.json", self.name), &manifest)
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

/// Executes one parsed command.
pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::EstimateFactors { io } => {
            let run = Run::new("estimate-factors", RunConfig::load(&io.config)?, io.out.as_deref())?;
            estimate_factors(run)
        }
        Command::Predict {
            io,
            series,
            combine,
            control,
        } => {
            let mut run = Run::new("predict", RunConfig::load(&io.config)?, io.out.as_deref())?;
            run.option("combine", combine);
            if let Some(c) = &control {
                run.option("control", c);
            }
            predict(run, series, combine, control)
        }
        Command::Crosssection { io, betas } => {
            let run = Run::new("crosssection", RunConfig::load(&io.config)?, io.out.as_deref())?;
            crosssection(run, betas)
        }
        Command::Sort {
            io,
            betas,
            weighting,
            holding,
            control,
            portfolios,
        } => {
            let mut cfg = RunConfig::load(&io.config)?;
            cfg.n_portfolios = portfolios.unwrap_or(cfg.n_portfolios);
            let mut run = Run::new("sort", cfg, io.out.as_deref())?;
            run.option("weighting", format!("{weighting:?}").to_lowercase());
            run.option("holding", holding);
            if let Some(c) = &control {
                run.option("control", c);
            }
            let config = SortConfig {
                n_portfolios: run.cfg.n_portfolios,
                weighting: match weighting {
                    WeightingArg::Equal => Weighting::Equal,
                    WeightingArg::Value => Weighting::Value,
                },
                holding_months: holding,
                nw_lags: run.cfg.nw_lags,
            };
            sort(run, betas, config, control)
        }
        Command::Simulate { io } => {
            let mut cfg = load_config(io.config.as_deref())?;
            cfg.seed = io.seed.unwrap_or(cfg.seed);
            simulate(Run::new("simulate", cfg, io.out.as_deref())?)
        }
        Command::ReplicateSim { io, reps } => {
            let mut cfg = load_config(io.config.as_deref())?;
            cfg.seed = io.seed.unwrap_or(cfg.seed);
            if let Some(r) = reps {
                cfg.simulation.n_reps = r;
            }
            replicate(Run::new("replicate-sim", cfg, io.out.as_deref())?)
        }
    }
}

fn factor_table(series: &[RollingFactorSeries]) -> Table {
    let mut t = Table::new(&["date", "tau", "level", "diff"]);
    let dates = &series[0].dates;
    for (k, date) in dates.iter().enumerate() {
        for s in series {
            let diff = if k == 0 { String::new() } else { num(s.diffs[k - 1]) };
            t.push(vec![date.to_string(), s.key.to_string(), num(s.levels[k]), diff]);
        }
    }
    t
}

fn estimate_factors(mut run: Run) -> Result<()> {
    let panel = run.panel()?;
    let factors = run.factors()?;
    let out = run_rolling(&panel, &factors, &run.cfg.rolling(run.cfg.standardize_for_prediction, false))?;
    log::info!(
        "quantile crossings: {} of {} fitted curves",
        out.crossing.violations,
        out.crossing.curves
    );
    run.out.write_table("ciq_factors.csv", &factor_table(&out.series))?;
    run.finish()
}

/// Pairs each factor change at `t` with the market excess return at `t + 1`.
fn predictive_sample(
    series: &[RollingFactorSeries],
    factors: &ObservedFactors,
) -> Result<(Vec<Month>, Vec<f64>, Vec<Vec<f64>>)> {
    let market = factors.require("mktrf")?;
    let dates: Vec<Month> = series[0]
        .diff_dates()
        .iter()
        .copied()
        .filter(|d| factors.date_index(d.succ()).is_some())
        .collect();
    if series.iter().any(|s| s.diff_dates() != series[0].diff_dates()) {
        return Err(Error::Validation("factor series cover different dates".into()));
    }
    let y = dates
        .iter()
        .map(|d| market[factors.date_index(d.succ()).expect("filtered")])
        .collect();
    let xs = series
        .iter()
        .map(|s| dates.iter().map(|&d| s.diff_at(d).expect("shared dates")).collect())
        .collect();
    Ok((dates, y, xs))
}

fn predict(mut run: Run, series: Option<PathBuf>, combine: bool, control: Option<String>) -> Result<()> {
    let factors = run.factors()?;
    let series = match series {
        Some(p) => {
            let p = run.input(p);
            read_series(&p)?
        }
        None => {
            let panel = run.panel()?;
            run_rolling(&panel, &factors, &run.cfg.rolling(run.cfg.standardize_for_prediction, false))?.series
        }
    };
    let (dates, y, xs) = predictive_sample(&series, &factors)?;
    let (lags, first) = (run.cfg.nw_lags, run.cfg.first_oos_window);

    if combine {
        let columns: Vec<(f64, &[f64])> = series
            .iter()
            .zip(&xs)
            .filter_map(|(s, x)| match s.key {
                FactorKey::Tau(t) => Some((t, x.as_slice())),
                _ => None,
            })
            .collect();
        let specs: Vec<ForecastModelSpec> = ModelKind::ALL
            .iter()
            .flat_map(|&kind| TauSet::ALL.iter().map(move |&tau_set| ForecastModelSpec { kind, tau_set }))
            .collect();
        let results = specs
            .par_iter()
            .map(|&spec| forecast_combination(&y, &columns, spec, first))
            .collect::<Result<Vec<_>>>()?;
        let mut t = Table::new(&["model", "tau_set", "r2_oos", "r2_oos_ct"]);
        for r in results {
            t.push(vec![
                r.spec.kind.to_string(),
                r.spec.tau_set.to_string(),
                num(r.r2_oos),
                num(r.r2_oos_ct),
            ]);
        }
        run.out.write_table("combine.csv", &t)?;
        return run.finish();
    }

    let mut header = vec!["tau", "coeff", "tstat", "r2_is", "r2_oos", "r2_is_ct", "r2_oos_ct"];
    let ctl = match &control {
        Some(name) => {
            header.extend(["control_coeff", "control_tstat"]);
            let c = factors.aligned(name, &dates)?;
            Some(c)
        }
        None => None,
    };
    let mut t = Table::new(&header);
    for (s, x) in series.iter().zip(&xs) {
        let (e, extra) = match &ctl {
            Some(c) => {
                let b = predict_bivariate(&y, x, c, lags, first).map_err(|e| e.context(&s.key))?;
                (b.eval, vec![num(b.control_coeff_scaled), num(b.control_t)])
            }
            None => (predict_univariate(&y, x, lags, first).map_err(|e| e.context(&s.key))?, vec![]),
        };
        let mut row = vec![
            s.key.to_string(),
            num(e.coeff_scaled),
            num(e.t_stat),
            num(e.r2_is),
            num(e.r2_oos),
            num(e.r2_is_ct),
            num(e.r2_oos_ct),
        ];
        row.extend(extra);
        t.push(row);
    }
    run.out.write_table("predict.csv", &t)?;
    run.finish()
}

fn beta_table(rows: &[BetaRow]) -> Table {
    let mut t = Table::new(&["window_end", "asset_id", "key", "beta", "n_obs"]);
    for r in rows {
        t.push(vec![
            r.window_end.to_string(),
            r.asset.clone(),
            r.key.to_string(),
            num(r.beta),
            r.n_obs.to_string(),
        ]);
    }
    t
}

/// Exposure rows from a file or a fresh cross-sectional rolling estimation.
fn exposures(run: &mut Run, panel: &ReturnPanel, factors: &ObservedFactors, betas: Option<PathBuf>) -> Result<Vec<BetaRow>> {
    match betas {
        Some(p) => {
            let p = run.input(p);
            read_betas(&p)
        }
        None => {
            let out = run_rolling(panel, factors, &run.cfg.rolling(run.cfg.standardize_for_crosssection, true))?;
            run.out.write_table("betas.csv", &beta_table(&out.betas))?;
            Ok(out.betas)
        }
    }
}

fn risk_free(factors: &ObservedFactors, panel: &ReturnPanel) -> Result<Vec<f64>> {
    let rf = factors.aligned("rf", &panel.dates)?;
    if rf.iter().any(|v| v.is_nan()) {
        return Err(Error::Validation("factors do not cover every panel month".into()));
    }
    Ok(rf)
}

fn crosssection(mut run: Run, betas: Option<PathBuf>) -> Result<()> {
    let panel = run.panel()?;
    let factors = run.factors()?;
    let rows = exposures(&mut run, &panel, &factors, betas)?;
    let rf = risk_free(&factors, &panel)?;
    let controls: Vec<(String, ExposureMatrix)> = run
        .cfg
        .beta_controls
        .iter()
        .map(|c| (c.clone(), ExposureMatrix::from_rows(&rows, &FactorKey::Named(c.clone()), &panel)))
        .collect();
    let keys = run.cfg.rolling(false, false).factor_keys();
    let mut focal: Vec<(String, ExposureMatrix)> = keys
        .iter()
        .map(|k| (k.to_string(), ExposureMatrix::from_rows(&rows, k, &panel)))
        .collect();
    let tau_mats: Vec<(f64, &ExposureMatrix)> = keys
        .iter()
        .zip(&focal)
        .filter_map(|(k, (_, m))| match k {
            FactorKey::Tau(t) => Some((*t, m)),
            _ => None,
        })
        .collect();
    match aggregate_betas(&tau_mats) {
        Ok(agg) => focal.extend([
            ("down".to_string(), agg.down),
            ("up".to_string(), agg.up),
            ("down_rel".to_string(), agg.down_rel),
            ("up_rel".to_string(), agg.up_rel),
        ]),
        Err(e) => log::info!("aggregate exposures skipped: {e}"),
    }

    let results = focal
        .par_iter()
        .map(|(name, m)| {
            let mut regs: Vec<(&str, &ExposureMatrix)> = vec![(name.as_str(), m)];
            regs.extend(controls.iter().map(|(c, e)| (c.as_str(), e)));
            fama_macbeth(&panel, &rf, &regs, run.cfg.nw_lags).map_err(|e| e.context(name))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&["key", "lambda", "tstat"]);
    for ((name, _), fm) in focal.iter().zip(&results) {
        t.push(vec![name.clone(), num(fm.lambda_mean_pct()[1]), num(fm.t_stats[1])]);
    }
    run.out.write_table("crosssection.csv", &t)?;
    run.finish()
}

fn sort(mut run: Run, betas: Option<PathBuf>, config: SortConfig, control: Option<String>) -> Result<()> {
    let panel = run.panel()?;
    let factors = run.factors()?;
    let rows = exposures(&mut run, &panel, &factors, betas)?;
    let control_key: Option<FactorKey> = control.map(|c| c.parse().expect("infallible"));
    let control_mat = control_key
        .as_ref()
        .map(|k| ExposureMatrix::from_rows(&rows, k, &panel));
    let alpha_cols = if run.cfg.alpha_factors.is_empty() {
        factors.names.clone()
    } else {
        run.cfg.alpha_factors.clone()
    };
    let keys: Vec<FactorKey> = run
        .cfg
        .rolling(false, false)
        .factor_keys()
        .into_iter()
        .filter(|k| Some(k) != control_key.as_ref())
        .collect();
    let results = keys
        .par_iter()
        .map(|k| {
            let signal = ExposureMatrix::from_rows(&rows, k, &panel);
            let r: SortResult = match &control_mat {
                Some(c) => sort_bivariate_dependent(&panel, c, &signal, config),
                None => sort_univariate(&panel, &signal, config),
            }
            .map_err(|e| e.context(k))?;
            if config.holding_months == 1 {
                r.with_alpha(&factors, &alpha_cols).map_err(|e| e.context(k))
            } else {
                Ok(r)
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let n = config.n_portfolios;
    let mut header = vec!["key".to_string()];
    header.extend((1..=n).map(|p| format!("P{p}")));
    header.extend(["H-L", "tstat", "alpha6", "alpha6_t"].map(String::from));
    let mut t = Table::new(&header);
    for (k, r) in keys.iter().zip(&results) {
        let mut row = vec![k.to_string()];
        row.extend(r.portfolio_means_pct().into_iter().map(num));
        row.extend([num(r.hl_return), num(r.hl_t), opt_num(r.alpha6), opt_num(r.alpha6_t)]);
        t.push(row);
    }
    run.out.write_table("sort.csv", &t)?;
    run.finish()
}

fn simulate(mut run: Run) -> Result<()> {
    let spec = run.cfg.sim_spec();
    let draw = simulate_panel(&spec, &mut spec.rng_for(0))?;
    let dates = Month::new(2000, 1).expect("valid month").range(spec.n_months);
    let ids: Vec<String> = (0..spec.n_assets).map(|i| format!("A{i:05}")).collect();

    let mut panel = Table::new(&["date", "asset_id", "ret", "price", "mktcap"]);
    for (t, d) in dates.iter().enumerate() {
        for (i, id) in ids.iter().enumerate() {
            panel.push(vec![d.to_string(), id.clone(), num(draw.returns[(t, i)]), String::new(), String::new()]);
        }
    }
    let mut factors = Table::new(&["date", "mktrf", "smb", "hml", "umd", "rf", "v"]);
    for (t, d) in dates.iter().enumerate() {
        let z = "0".to_string();
        factors.push(vec![
            d.to_string(),
            num(draw.market[t]),
            z.clone(),
            z.clone(),
            z.clone(),
            z,
            num(draw.common_var[t]),
        ]);
    }
    let mut truth = Table::new(&["asset_id", "beta", "gamma"]);
    for (i, id) in ids.iter().enumerate() {
        truth.push(vec![id.clone(), num(draw.true_betas[i]), num(draw.true_gammas[i])]);
    }
    run.out.write_table("sim_panel.csv", &panel)?;
    run.out.write_table("sim_factors.csv", &factors)?;
    run.out.write_table("sim_truth.csv", &truth)?;
    run.finish()
}

fn replicate(mut run: Run) -> Result<()> {
    let table = replicate_premium_table(&run.cfg.sim_spec(), &run.cfg.taus)?;
    let mut t = Table::new(&["tau", "premium", "tstat", "rejection_rate"]);
    for r in &table.rows {
        t.push(vec![r.key.to_string(), num(r.premium), num(r.t_stat), num(r.rejection_rate)]);
    }
    run.out.write_table("replicate.csv", &t)?;
    run.finish()
}
