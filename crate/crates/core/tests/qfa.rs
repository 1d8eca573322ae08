use ciq_core::calendar::Month;
use ciq_core::numerics::stats::correlation;
use ciq_core::qfa::{crossing_report, overlap_correlation};
use ciq_core::simulation::synthetic::{cubic_panel, location_scale_panel, location_shift_panel};
use ciq_core::{estimate_qfa, splice_factor, FactorKey, FactorWindow, InitStrategy, ResidualPanel};
use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

fn fit(x: &DMatrix<f64>, tau: f64) -> ciq_core::QfaFit {
    estimate_qfa(&ResidualPanel::unlabeled(x.clone()), tau, 1, InitStrategy::MultiStart).unwrap()
}

#[test]
fn location_scale_recovery() {
    let q = StudentsT::new(0.0, 1.0, 3.0).unwrap().inverse_cdf(0.1);
    let mut hits = 0;
    for seed in 0..10 {
        let p = location_scale_panel(200, 200, 3.0, seed);
        let target: Vec<f64> = p.factors[0].iter().map(|v| v * q).collect();
        let c = correlation(&fit(&p.values, 0.1).factor(), &target).abs();
        if c > 0.95 {
            hits += 1;
        }
    }
    assert!(hits >= 9, "{hits} of 10 seeds recovered the scale factor");
}

#[test]
fn cubic_quantile_dependence() {
    let phi = Normal::standard();
    let mut hits = 0;
    for seed in 0..10 {
        let p = cubic_panel(400, 200, seed);
        let (f2, f3) = (&p.factors[0], &p.factors[1]);
        let mut ok = true;
        let mut est = Vec::new();
        for tau in [0.1, 0.25] {
            let z = phi.inverse_cdf(tau);
            let target: Vec<f64> = f2.iter().zip(f3).map(|(a, b)| a + b * z * z).collect();
            let f = fit(&p.values, tau).factor();
            ok &= correlation(&f, &target).abs() > 0.9;
            est.push(f);
        }
        ok &= correlation(&est[0], &est[1]).abs() < 0.99;
        hits += ok as usize;
    }
    assert!(hits >= 8, "{hits} of 10 seeds");
}

#[test]
fn objective_path_is_monotone() {
    for seed in 0..4 {
        let p = location_scale_panel(60, 40, 3.0, seed);
        for tau in [0.1, 0.5, 0.9] {
            for init in [InitStrategy::Pca, InitStrategy::RowQuantile] {
                let f = estimate_qfa(&ResidualPanel::unlabeled(p.values.clone()), tau, 1, init).unwrap();
                for w in f.objective_path.windows(2) {
                    assert!(w[1] <= w[0] + 1e-10, "objective rose from {} to {}", w[0], w[1]);
                }
                assert!((f.objective - f.objective_path.last().unwrap()).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn normalization_holds_with_two_factors() {
    let p = cubic_panel(80, 50, 3);
    let f = estimate_qfa(&ResidualPanel::unlabeled(p.values), 0.2, 2, InitStrategy::Pca).unwrap();
    let t = f.factors.nrows() as f64;
    let ff = f.factors.transpose() * &f.factors;
    let expected = DMatrix::<f64>::identity(2, 2) * t;
    assert!((ff - expected).abs().max() < 1e-6 * t);
    let gg = f.loadings.transpose() * &f.loadings;
    assert!(gg[(0, 1)].abs() < 1e-6 * gg[(0, 0)]);
    assert!(gg[(0, 0)] >= gg[(1, 1)]);
}

#[test]
fn sign_rule_nonnegative_loading_mean() {
    for seed in 0..3 {
        let p = location_scale_panel(50, 40, 3.0, seed);
        for tau in [0.1, 0.9] {
            assert!(fit(&p.values, tau).loadings.column(0).sum() >= 0.0);
        }
    }
}

#[test]
fn permuting_assets_permutes_loadings() {
    let p = location_scale_panel(40, 50, 3.0, 11);
    let perm: Vec<usize> = (0..40).rev().collect();
    let a = fit(&p.values, 0.2);
    let b = fit(&p.values.select_columns(perm.iter()), 0.2);
    let s = if correlation(&a.factor(), &b.factor()) < 0.0 { -1.0 } else { 1.0 };
    for (x, y) in a.factor().iter().zip(b.factor()) {
        assert!((x - s * y).abs() < 1e-6);
    }
    for (k, &i) in perm.iter().enumerate() {
        assert!((a.loadings[(i, 0)] - s * b.loadings[(k, 0)]).abs() < 1e-6);
    }
}

#[test]
fn scaling_panel_scales_loadings() {
    let p = location_scale_panel(40, 50, 3.0, 5);
    let a = fit(&p.values, 0.3);
    let b = fit(&(&p.values * 2.5), 0.3);
    for (x, y) in a.factor().iter().zip(b.factor()) {
        assert!((x - y).abs() < 1e-6);
    }
    for (x, y) in a.loadings.iter().zip(b.loadings.iter()) {
        assert!((2.5 * x - y).abs() < 1e-6 * (1.0 + y.abs()));
    }
}

#[test]
fn location_shift_has_no_quantile_dependence() {
    for seed in 0..5 {
        let p = location_shift_panel(150, 100, seed);
        let lo = fit(&p.values, 0.25).factor();
        let hi = fit(&p.values, 0.75).factor();
        assert!(correlation(&lo, &hi).abs() > 0.9);
    }
}

#[test]
fn zero_panel_gives_zero_loadings() {
    let f = fit(&DMatrix::zeros(12, 5), 0.3);
    assert_eq!(f.objective, 0.0);
    assert!(f.loadings.iter().all(|v| *v == 0.0));
}

#[test]
fn no_crossing_on_location_scale_panel() {
    let p = location_scale_panel(150, 100, 3.0, 2);
    let fits: Vec<_> = [0.1, 0.3, 0.5, 0.7, 0.9].iter().map(|&t| fit(&p.values, t)).collect();
    let report = crossing_report(&fits);
    let cells = (150 * 100) as f64;
    assert!((report.violations as f64) < 0.05 * cells, "{} of {} curves cross", report.violations, report.curves);
}

#[test]
fn splice_toy_arithmetic() {
    let start = Month::new(2001, 1).unwrap();
    let windows: Vec<FactorWindow> = [0.5, 0.7, 0.4]
        .iter()
        .enumerate()
        .map(|(k, &v)| FactorWindow {
            dates: vec![start.add(k as i32)],
            factor: vec![v],
        })
        .collect();
    let s = splice_factor(FactorKey::Tau(0.1), &windows).unwrap();
    assert_eq!(s.levels, vec![0.5, 0.7, 0.4]);
    assert!((s.diffs[0] - 0.2).abs() < 1e-12 && (s.diffs[1] + 0.3).abs() < 1e-12);
}

#[test]
fn consecutive_windows_agree_after_alignment() {
    let p = location_scale_panel(120, 61, 3.0, 9);
    let start = Month::new(2000, 1).unwrap();
    let dates = start.range(61);
    let w: Vec<FactorWindow> = (0..2)
        .map(|k| FactorWindow {
            dates: dates[k..k + 60].to_vec(),
            factor: fit(&p.values.rows(k, 60).into_owned(), 0.1).factor(),
        })
        .collect();
    let mut flipped = w[1].clone();
    flipped.factor.iter_mut().for_each(|v| *v = -*v);
    let s = splice_factor(FactorKey::Tau(0.1), &[w[0].clone(), flipped]).unwrap();
    assert_eq!(s.flips, 1);
    assert!(overlap_correlation(&w[0], &w[1]) > 0.9);
}
