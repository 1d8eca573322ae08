//! Small idiosyncratic-return panels with known quantile factor structure.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

use crate::calendar::Month;
use crate::error::Result;
use crate::pipeline::{ObservedFactors, ReturnPanel};

/// Log-scale dispersion of the simulated factor paths.
pub const FACTOR_DISPERSION: f64 = 0.8;

/// Panel plus the latent series that drive it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPanel {
    /// T x N idiosyncratic returns.
    pub values: DMatrix<f64>,
    /// Latent factor series, in the order documented by each generator.
    pub factors: Vec<Vec<f64>>,
    /// Per-asset loadings of the first latent factor.
    pub loadings: Vec<f64>,
}

fn lognormal_path(rng: &mut ChaCha8Rng, t_len: usize) -> Vec<f64> {
    (0..t_len)
        .map(|_| {
            let g: f64 = StandardNormal.sample(rng);
            (FACTOR_DISPERSION * g).exp()
        })
        .collect()
}

/// `e[t, i] = s_i v[t] z[t, i]` with `z` Student-t with `df` degrees of freedom
/// and `s_i` uniform on [0.5, 1.5]. Factors: `[v]`.
pub fn location_scale_panel(n_assets: usize, n_dates: usize, df: f64, seed: u64) -> SyntheticPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = StudentT::new(df).expect("positive degrees of freedom");
    let scales: Vec<f64> = (0..n_assets).map(|_| rng.random_range(0.5..1.5)).collect();
    let v = lognormal_path(&mut rng, n_dates);
    let values = DMatrix::from_fn(n_dates, n_assets, |t, i| scales[i] * v[t] * dist.sample(&mut rng));
    SyntheticPanel {
        values,
        factors: vec![v],
        loadings: scales,
    }
}

/// `e[t, i] = f2[t] z + f3[t] z^3` with `z` standard normal; the tau-quantile is
/// `Phi^-1(tau) (f2 + f3 Phi^-1(tau)^2)`. Factors: `[f2, f3]`.
pub fn cubic_panel(n_assets: usize, n_dates: usize, seed: u64) -> SyntheticPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f2 = lognormal_path(&mut rng, n_dates);
    let f3 = lognormal_path(&mut rng, n_dates);
    let values = DMatrix::from_fn(n_dates, n_assets, |t, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        f2[t] * z + f3[t] * z * z * z
    });
    SyntheticPanel {
        values,
        factors: vec![f2, f3],
        loadings: vec![1.0; n_assets],
    }
}

/// `e[t, i] = a_i m[t] + z[t, i]`, standard normal `m` and `z`, `a_i` uniform on
/// [0.5, 1.5]: a common shift in location only. Factors: `[m]`.
pub fn location_shift_panel(n_assets: usize, n_dates: usize, seed: u64) -> SyntheticPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let loads: Vec<f64> = (0..n_assets).map(|_| rng.random_range(0.5..1.5)).collect();
    let m: Vec<f64> = (0..n_dates).map(|_| StandardNormal.sample(&mut rng)).collect();
    let values = DMatrix::from_fn(n_dates, n_assets, |t, i| {
        let z: f64 = StandardNormal.sample(&mut rng);
        loads[i] * m[t] + z
    });
    SyntheticPanel {
        values,
        factors: vec![m],
        loadings: loads,
    }
}

/// Return panel whose idiosyncratic part is a location-scale panel.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMarket {
    pub panel: ReturnPanel,
    pub factors: ObservedFactors,
    /// Common volatility path `v` of the idiosyncratic returns.
    pub volatility: Vec<f64>,
    /// Latent location path `m`; zero for [`location_scale_market`].
    pub location: Vec<f64>,
}

/// Monthly panel from January 2000 with returns
/// `rf + b_i mktrf + c_i smb + d_i hml + IDIO_SCALE e[t, i]`, where `e` is
/// [`location_scale_panel`] and the observed factors are independent normals.
pub fn location_scale_market(n_assets: usize, n_dates: usize, df: f64, seed: u64) -> Result<SyntheticMarket> {
    two_moment_market(n_assets, n_dates, df, 0.0, seed)
}

/// [`location_scale_market`] whose idiosyncratic part also carries an unobserved
/// location factor: `IDIO_SCALE (a_i m[t] + e[t, i])` with `m` normal with
/// standard deviation `location_sd` and `a_i` uniform on [0.5, 1.5].
pub fn two_moment_market(
    n_assets: usize,
    n_dates: usize,
    df: f64,
    location_sd: f64,
    seed: u64,
) -> Result<SyntheticMarket> {
    const IDIO_SCALE: f64 = 0.005;
    const RISK_FREE: f64 = 0.002;
    let idio = location_scale_panel(n_assets, n_dates, df, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f00d);
    let names = ["mktrf", "smb", "hml", "umd"];
    let sds = [0.045, 0.03, 0.03, 0.04];
    let columns: Vec<Vec<f64>> = sds
        .iter()
        .map(|sd| {
            (0..n_dates)
                .map(|_| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    sd * g
                })
                .collect()
        })
        .collect();
    let exposures: Vec<[f64; 3]> = (0..n_assets)
        .map(|_| {
            [
                rng.random_range(0.5..1.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
            ]
        })
        .collect();
    let mut loc_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x10ca_7e00);
    let location: Vec<f64> = (0..n_dates)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut loc_rng);
            location_sd * g
        })
        .collect();
    let location_loads: Vec<f64> = (0..n_assets).map(|_| loc_rng.random_range(0.5..1.5)).collect();
    let returns = DMatrix::from_fn(n_dates, n_assets, |t, i| {
        let b = exposures[i];
        RISK_FREE
            + b[0] * columns[0][t]
            + b[1] * columns[1][t]
            + b[2] * columns[2][t]
            + IDIO_SCALE * (location_loads[i] * location[t] + idio.values[(t, i)])
    });
    let dates = Month::new(2000, 1).expect("valid month").range(n_dates);
    let assets = (0..n_assets).map(|i| format!("S{i:05}")).collect();
    let caps = DMatrix::from_fn(n_dates, n_assets, |t, i| 100.0 + (i as f64) + t as f64 * 0.1);
    Ok(SyntheticMarket {
        panel: ReturnPanel::new(dates.clone(), assets, returns, Some(caps), None)?,
        factors: ObservedFactors::new(
            dates,
            names.iter().map(|s| s.to_string()).collect(),
            columns,
            vec![RISK_FREE; n_dates],
        )?,
        volatility: idio.factors[0].clone(),
        location,
    })
}
