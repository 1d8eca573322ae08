use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{GarchParams, HarParams, NormalParams, SimSpec};
use crate::error::{Error, Result};

const HAR_BURN_IN: usize = 120;
const HAR_BLOCK: usize = 12;

/// One simulated panel with the parameters that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimPanelDraw {
    /// T x N returns.
    pub returns: DMatrix<f64>,
    pub market: Vec<f64>,
    /// Common idiosyncratic variance level `V[t]`.
    pub common_var: Vec<f64>,
    pub true_betas: Vec<f64>,
    pub true_gammas: Vec<f64>,
}

fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn draw<R: Rng + ?Sized>(p: &NormalParams, rng: &mut R) -> f64 {
    p.mean + p.sd * std_normal(rng)
}

/// Zero-mean GARCH(1,1) market returns started at the unconditional variance.
pub fn simulate_market<R: Rng + ?Sized>(garch: &GarchParams, t_len: usize, rng: &mut R) -> Result<Vec<f64>> {
    garch.validate()?;
    let mut h = garch.unconditional_variance();
    let mut out = Vec::with_capacity(t_len);
    for _ in 0..t_len {
        let r = h.sqrt() * std_normal(rng);
        out.push(r);
        h = garch.omega + garch.a * r * r + garch.b * h;
    }
    Ok(out)
}

/// Continues the log-variance recursion after a block of 12 known log-variances
/// (oldest first) and returns `V[t] = exp(log V[t])` for the `t_len` new months.
pub fn simulate_common_variance_from<R: Rng + ?Sized>(
    har: &HarParams,
    seed_block: &[f64],
    t_len: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    har.validate()?;
    if seed_block.len() != HAR_BLOCK {
        return Err(Error::dimension(format!(
            "seed block must hold {HAR_BLOCK} log-variances, got {}",
            seed_block.len()
        )));
    }
    let mut logs: Vec<f64> = seed_block.to_vec();
    for _ in 0..t_len {
        let k = logs.len();
        let x_m = logs[k - 1];
        let x_y = logs[k - HAR_BLOCK..].iter().sum::<f64>() / HAR_BLOCK as f64;
        let next = har.theta0 + har.theta_m * x_m + har.theta_y * x_y + har.sigma_v * std_normal(rng);
        logs.push(next);
    }
    Ok(logs[HAR_BLOCK..].iter().map(|l| l.exp()).collect())
}

/// Common variance path whose 12-month seed block is the tail of a 120-month
/// burn-in started at the stationary mean.
pub fn simulate_common_variance<R: Rng + ?Sized>(har: &HarParams, t_len: usize, rng: &mut R) -> Result<Vec<f64>> {
    har.validate()?;
    let start = vec![har.stationary_mean(); HAR_BLOCK];
    let burn = simulate_common_variance_from(har, &start, HAR_BURN_IN, rng)?;
    let block: Vec<f64> = burn[HAR_BURN_IN - HAR_BLOCK..].iter().map(|v| v.ln()).collect();
    simulate_common_variance_from(har, &block, t_len, rng)
}

/// `r[t, i] = beta_i r_m[t] + gamma_i (V[t] - mean V) - gamma_i lambda_v + e[t, i]`
/// with `e = sqrt(V[t] exp(mu_i + sigma_i u)) z`.
pub fn simulate_panel<R: Rng + ?Sized>(spec: &SimSpec, rng: &mut R) -> Result<SimPanelDraw> {
    spec.validate()?;
    let (t_len, n) = (spec.n_months, spec.n_assets);
    let market = simulate_market(&spec.garch, t_len, rng)?;
    let common_var = simulate_common_variance(&spec.har, t_len, rng)?;
    let v_bar = common_var.iter().sum::<f64>() / t_len as f64;

    let mut betas = Vec::with_capacity(n);
    let mut gammas = Vec::with_capacity(n);
    let mut mus = Vec::with_capacity(n);
    let mut sigmas = Vec::with_capacity(n);
    for _ in 0..n {
        betas.push(draw(&spec.dist_beta, rng));
        gammas.push(draw(&spec.dist_gamma, rng));
        mus.push(draw(&spec.dist_mu, rng));
        sigmas.push(draw(&spec.dist_sigma, rng).abs());
    }

    let mut returns = DMatrix::zeros(t_len, n);
    for i in 0..n {
        for t in 0..t_len {
            let u = std_normal(rng);
            let z = std_normal(rng);
            let var_it = common_var[t] * (mus[i] + sigmas[i] * u).exp();
            returns[(t, i)] = betas[i] * market[t] + gammas[i] * (common_var[t] - v_bar)
                - gammas[i] * spec.lambda_v
                + var_it.sqrt() * z;
        }
    }
    Ok(SimPanelDraw {
        returns,
        market,
        common_var,
        true_betas: betas,
        true_gammas: gammas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_har_limit() {
        let har = HarParams {
            theta0: -5.0,
            theta_m: 0.0,
            theta_y: 0.0,
            sigma_v: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = simulate_common_variance(&har, 50, &mut rng).unwrap();
        assert!(v.iter().all(|x| (x - (-5.0f64).exp()).abs() < 1e-15));
    }

    #[test]
    fn one_step_from_constant_block() {
        let har = HarParams {
            theta0: -0.6,
            theta_m: 0.55,
            theta_y: 0.35,
            sigma_v: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = simulate_common_variance_from(&har, &[-4.0; 12], 1, &mut rng).unwrap();
        let expected: f64 = -0.6 + 0.55 * -4.0 + 0.35 * -4.0;
        assert!((v[0].ln() - expected).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = GarchParams {
            omega: 1e-4,
            a: 0.5,
            b: 0.5,
        };
        assert!(matches!(simulate_market(&g, 10, &mut rng), Err(Error::Validation(_))));
        let h = HarParams {
            theta0: 0.0,
            theta_m: 0.5,
            theta_y: 0.2,
            sigma_v: -0.1,
        };
        assert!(matches!(simulate_common_variance(&h, 10, &mut rng), Err(Error::Validation(_))));
    }
}
