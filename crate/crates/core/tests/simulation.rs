use ciq_core::numerics::stats::{mean, std_dev};
use ciq_core::simulation::{
    replicate_premium_table, simulate_common_variance, simulate_market, simulate_panel, simulate_replication,
    GarchParams, HarParams, NormalParams, SimSpec,
};
use ciq_core::{Error, FactorKey};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn variance(x: &[f64]) -> f64 {
    std_dev(x).powi(2)
}

fn small_spec() -> SimSpec {
    SimSpec {
        n_assets: 80,
        n_months: 60,
        n_reps: 4,
        ..SimSpec::default()
    }
}

#[test]
fn degenerate_garch_is_iid() {
    let g = GarchParams {
        omega: 2.5e-3,
        a: 0.0,
        b: 0.0,
    };
    let r = simulate_market(&g, 100_000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert!((variance(&r) / 2.5e-3 - 1.0).abs() < 0.05);
}

#[test]
fn garch_long_run_variance() {
    let g = SimSpec::default().garch;
    let r = simulate_market(&g, 100_000, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let target = g.omega / (1.0 - g.a - g.b);
    assert!((variance(&r) / target - 1.0).abs() < 0.05, "{} vs {target}", variance(&r));
}

#[test]
fn nonstationary_garch_is_rejected() {
    let g = GarchParams {
        omega: 1e-4,
        a: 0.3,
        b: 0.7,
    };
    assert!(matches!(
        simulate_market(&g, 10, &mut ChaCha8Rng::seed_from_u64(0)),
        Err(Error::Validation(_))
    ));
}

#[test]
fn har_log_mean_identity() {
    let h = HarParams {
        theta0: -0.6,
        theta_m: 0.55,
        theta_y: 0.35,
        sigma_v: 0.25,
    };
    let v = simulate_common_variance(&h, 100_000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert!(v.iter().all(|x| *x > 0.0));
    let logs: Vec<f64> = v.iter().map(|x| x.ln()).collect();
    let target = -0.6 / (1.0 - 0.9);
    assert!((mean(&logs) - target).abs() < 0.05 * target.abs(), "{}", mean(&logs));
}

#[test]
fn har_constant_limit() {
    let h = HarParams {
        theta0: -2.0,
        theta_m: 0.0,
        theta_y: 0.0,
        sigma_v: 0.0,
    };
    let v = simulate_common_variance(&h, 50, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    assert!(v.iter().all(|x| *x == (-2.0f64).exp()));
    let bad = HarParams { sigma_v: -0.1, ..h };
    assert!(matches!(
        simulate_common_variance(&bad, 5, &mut ChaCha8Rng::seed_from_u64(4)),
        Err(Error::Validation(_))
    ));
}

#[test]
fn unit_lognormal_noise() {
    let spec = SimSpec {
        n_assets: 200,
        n_months: 600,
        dist_mu: NormalParams::new(0.0, 0.0),
        dist_sigma: NormalParams::new(0.0, 0.0),
        ..SimSpec::default()
    };
    let d = simulate_panel(&spec, &mut spec.rng_for(0)).unwrap();
    let v_bar = mean(&d.common_var);
    let mut ratio = 0.0;
    for i in 0..spec.n_assets {
        for t in 0..spec.n_months {
            let v = d.common_var[t];
            let e = d.returns[(t, i)] - d.true_betas[i] * d.market[t] - d.true_gammas[i] * (v - v_bar)
                + d.true_gammas[i] * spec.lambda_v;
            ratio += e * e / v;
        }
    }
    ratio /= (spec.n_assets * spec.n_months) as f64;
    assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
}

#[test]
fn zero_gamma_is_a_market_model() {
    let spec = SimSpec {
        n_assets: 50,
        n_months: 40,
        dist_gamma: NormalParams::new(0.0, 0.0),
        dist_mu: NormalParams::new(-40.0, 0.0),
        dist_sigma: NormalParams::new(0.0, 0.0),
        ..SimSpec::default()
    };
    let d = simulate_panel(&spec, &mut spec.rng_for(0)).unwrap();
    for i in 0..50 {
        for t in 0..40 {
            let fit = d.true_betas[i] * d.market[t];
            assert!((d.returns[(t, i)] - fit).abs() < 1e-9);
        }
    }
}

#[test]
fn population_premium_identity() {
    let spec = SimSpec {
        n_assets: 2000,
        n_months: 500,
        ..SimSpec::default()
    };
    let d = simulate_panel(&spec, &mut spec.rng_for(7)).unwrap();
    let rm = mean(&d.market);
    let y: Vec<f64> = (0..spec.n_assets)
        .map(|i| d.returns.column(i).mean() - d.true_betas[i] * rm)
        .collect();
    let g = &d.true_gammas;
    let (mg, my) = (mean(g), mean(&y));
    let slope = g.iter().zip(&y).map(|(a, b)| (a - mg) * (b - my)).sum::<f64>()
        / g.iter().map(|a| (a - mg).powi(2)).sum::<f64>();
    assert!((slope + spec.lambda_v).abs() < 0.1 * spec.lambda_v, "{slope}");
}

#[test]
fn panels_are_reproducible() {
    let spec = small_spec();
    let a = simulate_panel(&spec, &mut spec.rng_for(3)).unwrap();
    let b = simulate_panel(&spec, &mut spec.rng_for(3)).unwrap();
    let c = simulate_panel(&spec, &mut spec.rng_for(4)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.returns, c.returns);
}

#[test]
fn replication_is_thread_count_invariant() {
    let spec = small_spec();
    let taus = [0.1, 0.5, 0.9];
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| replicate_premium_table(&spec, &taus).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one.n_reps, 4);
    assert_eq!(one.rows.len(), 4);
    assert_eq!(one.rows[3].key, FactorKey::PcaSq);
    for row in &one.rows {
        assert!(row.premium.is_finite() && (0.0..=1.0).contains(&row.rejection_rate));
    }
    let single = simulate_replication(&spec, &taus, 2).unwrap();
    assert_eq!(single.premia.len(), 4);
}

#[test]
fn invalid_spec_is_rejected() {
    let spec = SimSpec {
        n_reps: 0,
        ..small_spec()
    };
    assert!(matches!(replicate_premium_table(&spec, &[0.1]), Err(Error::Validation(_))));
    assert!(replicate_premium_table(&small_spec(), &[1.2]).is_err());
}
