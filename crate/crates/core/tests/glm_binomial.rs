mod common;

use common::{normal, normal_matrix, rng, sigmoid};
use nalgebra::{DMatrix, DVector};
use polar_core::glm::{binomial_deviance, fit_binomial, predict_binomial, FittedGlm, GlmOptions};
use polar_core::{Dimension, Error};
use proptest::prelude::*;

fn exact(ridge: f64) -> GlmOptions {
    GlmOptions { ridge, ..GlmOptions::default() }
}

/// Independent minimizer: gradient descent with Armijo backtracking on the
/// unpenalized binomial deviance, written from the textbook gradient
/// `X'(mu - y)` without sharing any code with the IRLS fitter.
fn gradient_descent_deviance(x: &DMatrix<f64>, y: &[f64], iterations: usize) -> (Vec<f64>, f64) {
    let n = x.nrows();
    let xi = DMatrix::from_fn(n, x.ncols() + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
    let dev = |b: &DVector<f64>| -> f64 {
        let eta = &xi * b;
        let mut s = 0.0;
        for i in 0..n {
            let (e, yi) = (eta[i], y[i]);
            // -2 log-likelihood plus the saturated term, in a stable form.
            let log1pexp = if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() };
            let sat = if yi > 0.0 && yi < 1.0 { yi * yi.ln() + (1.0 - yi) * (1.0 - yi).ln() } else { 0.0 };
            s += log1pexp - yi * e + sat;
        }
        2.0 * s
    };
    let mut b = DVector::zeros(xi.ncols());
    let mut f = dev(&b);
    let mut step = 1.0;
    for _ in 0..iterations {
        let eta = &xi * &b;
        let resid = DVector::from_fn(n, |i, _| sigmoid(eta[i]) - y[i]);
        let grad = 2.0 * xi.transpose() * resid;
        let g2 = grad.norm_squared();
        if g2 < 1e-30 {
            break;
        }
        step *= 2.0;
        loop {
            let cand = &b - step * &grad;
            let fc = dev(&cand);
            if fc <= f - 0.5 * step * g2 {
                b = cand;
                f = fc;
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                return (b.iter().copied().collect(), f);
            }
        }
    }
    (b.iter().copied().collect(), f)
}

#[test]
fn intercept_only_half_gives_zero() {
    let x = DMatrix::zeros(50, 0);
    let fit = fit_binomial(Dimension::Valence, &x, &[0.5; 50], &exact(0.0)).unwrap();
    assert_eq!(fit.coefficients.len(), 1);
    assert!(fit.coefficients[0].abs() < 1e-12);
}

#[test]
fn noise_free_recovery_and_predictions() {
    let mut r = rng(11);
    let x = normal_matrix(&mut r, 2000, 2);
    let y: Vec<f64> = (0..2000).map(|i| sigmoid(1.0 + 2.0 * x[(i, 0)] - x[(i, 1)])).collect();
    let fit = fit_binomial(Dimension::Arousal, &x, &y, &exact(0.0)).unwrap();
    assert!(fit.converged);
    for (b, t) in fit.coefficients.iter().zip([1.0, 2.0, -1.0]) {
        assert!((b - t).abs() < 1e-4, "{b} vs {t}");
    }
    let pred = predict_binomial(&fit, &x).unwrap();
    for (p, t) in pred.iter().zip(&y) {
        assert!((p - t).abs() < 1e-3);
    }
    let (_, gd) = gradient_descent_deviance(&x, &y, 20_000);
    assert!((fit.deviance - gd).abs() < 1e-6, "irls {} vs gd {gd}", fit.deviance);
}

#[test]
fn noisy_recovery_matches_gradient_descent() {
    let mut r = rng(5);
    let (n, d) = (2000, 10);
    let x = normal_matrix(&mut r, n, d);
    let beta: Vec<f64> = (0..=d).map(|j| 0.5 - 0.1 * j as f64).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let eta = beta[0] + (0..d).map(|j| beta[j + 1] * x[(i, j)]).sum::<f64>();
            sigmoid(eta + 0.01 * normal(&mut r))
        })
        .collect();
    let fit = fit_binomial(Dimension::Dominance, &x, &y, &exact(0.0)).unwrap();
    let linf = fit.coefficients.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(linf < 0.05, "L-inf error {linf}");
    let (_, gd) = gradient_descent_deviance(&x, &y, 20_000);
    assert!((fit.deviance - gd).abs() < 1e-6, "irls {} vs gd {gd}", fit.deviance);
}

#[test]
fn zero_coefficients_predict_one_half() {
    let model = FittedGlm {
        dimension: Dimension::Valence,
        coefficients: vec![0.0; 4],
        ridge: 0.0,
        iterations: 0,
        converged: true,
        deviance: 0.0,
        deviance_trace: vec![],
    };
    let x = DMatrix::from_fn(5, 3, |i, j| (i + j) as f64);
    assert!(predict_binomial(&model, &x).unwrap().iter().all(|&p| p == 0.5));
    assert!(matches!(
        predict_binomial(&model, &DMatrix::zeros(2, 2)),
        Err(Error::DimensionMismatch { expected: 3, actual: 2 })
    ));
}

#[test]
fn saturated_predictions_stay_inside_unit_interval() {
    let model = FittedGlm {
        dimension: Dimension::Valence,
        coefficients: vec![0.0, 1.0],
        ridge: 0.0,
        iterations: 0,
        converged: true,
        deviance: 0.0,
        deviance_trace: vec![],
    };
    let x = DMatrix::from_column_slice(2, 1, &[1e6, -1e6]);
    for p in predict_binomial(&model, &x).unwrap() {
        assert!(p > 0.0 && p < 1.0);
    }
}

#[test]
fn boundary_labels_are_accepted() {
    let x = DMatrix::from_fn(40, 1, |i, _| i as f64 / 10.0 - 2.0);
    let y: Vec<f64> = (0..40).map(|i| if i < 20 { 0.0 } else { 1.0 }).collect();
    let fit = fit_binomial(Dimension::Valence, &x, &y, &GlmOptions { ridge: 1e-2, ..GlmOptions::default() }).unwrap();
    assert!(fit.coefficients.iter().all(|c| c.is_finite()));
}

#[test]
fn collinear_design_without_ridge_is_singular() {
    let x = DMatrix::from_fn(30, 2, |i, j| (i as f64) * (j + 1) as f64);
    let y: Vec<f64> = (0..30).map(|i| 0.2 + 0.02 * i as f64).collect();
    let err = fit_binomial(Dimension::Valence, &x, &y, &exact(0.0)).unwrap_err();
    assert!(matches!(err, Error::Singular { .. }), "{err:?}");
    assert!(err.to_string().contains("ridge"));
    // The same design is fine with a ridge penalty.
    assert!(fit_binomial(Dimension::Valence, &x, &y, &exact(1e-3)).is_ok());
}

#[test]
fn more_features_than_rows_need_ridge() {
    let mut r = rng(2);
    let x = normal_matrix(&mut r, 10, 30);
    let y: Vec<f64> = (0..10).map(|i| 0.1 + 0.08 * i as f64).collect();
    assert!(fit_binomial(Dimension::Valence, &x, &y, &exact(0.0)).is_err());
    let fit = fit_binomial(Dimension::Valence, &x, &y, &GlmOptions::default()).unwrap();
    assert_eq!(fit.dim(), 30);
}

#[test]
fn rejects_targets_outside_unit_interval() {
    let x = DMatrix::from_fn(5, 1, |i, _| i as f64);
    assert!(fit_binomial(Dimension::Valence, &x, &[0.1, 0.2, 1.5, 0.3, 0.4], &exact(0.0)).is_err());
}

#[test]
fn model_file_round_trip_and_corruption() {
    let mut r = rng(3);
    let x = normal_matrix(&mut r, 200, 4);
    let y: Vec<f64> = (0..200).map(|i| sigmoid(x[(i, 0)] - 0.5 * x[(i, 3)])).collect();
    let fit = fit_binomial(Dimension::Arousal, &x, &y, &GlmOptions::default()).unwrap();
    let mut bytes = Vec::new();
    fit.write_to(&mut bytes).unwrap();
    assert_eq!(&bytes[..4], b"VADM");
    assert_eq!(bytes.len(), 20 + 5 * 8 + 16);
    let back = FittedGlm::read_from(bytes.as_slice()).unwrap();
    assert_eq!(back.coefficients, fit.coefficients);
    assert_eq!(back.dimension, Dimension::Arousal);
    assert_eq!(back.ridge, fit.ridge);
    assert_eq!(back.iterations, fit.iterations);

    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(FittedGlm::read_from(bad.as_slice()).is_err());
    assert!(FittedGlm::read_from(&bytes[..bytes.len() - 1]).is_err());
    let mut bad_version = bytes.clone();
    bad_version[4] = 9;
    assert!(FittedGlm::read_from(bad_version.as_slice()).is_err());
}

#[test]
fn deviance_helper_is_zero_at_saturation() {
    let y = [0.2, 0.5, 0.9];
    assert!(binomial_deviance(&y, &y).abs() < 1e-15);
    assert!(binomial_deviance(&y, &[0.5, 0.5, 0.5]) > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn accepted_iterations_never_raise_deviance(seed in 0u64..10_000, d in 1usize..6, ridge in prop_oneof![Just(0.0), Just(1e-6), Just(1e-2)]) {
        let mut r = rng(seed);
        let n = 60;
        let x = normal_matrix(&mut r, n, d);
        let y: Vec<f64> = (0..n).map(|i| sigmoid(0.3 * x[(i, 0)] + 0.5 * normal(&mut r))).collect();
        let fit = fit_binomial(Dimension::Valence, &x, &y, &GlmOptions { ridge, ..GlmOptions::default() }).unwrap();
        prop_assert!(fit.iterations <= 100);
        // With a ridge term the monotone quantity is the penalized deviance,
        // which bounds the deviance increase by the penalty change.
        let penalty: f64 = ridge * fit.coefficients[1..].iter().map(|b| b * b).sum::<f64>();
        for w in fit.deviance_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0) + penalty, "{:?}", fit.deviance_trace);
        }
    }

    #[test]
    fn predictions_preserve_linear_predictor_order(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let x = normal_matrix(&mut r, 30, 3);
        let model = FittedGlm {
            dimension: Dimension::Valence,
            coefficients: (0..4).map(|_| normal(&mut r)).collect(),
            ridge: 0.0,
            iterations: 0,
            converged: true,
            deviance: 0.0,
            deviance_trace: vec![],
        };
        let pred = predict_binomial(&model, &x).unwrap();
        let eta: Vec<f64> = (0..30).map(|i| model.linear_predictor(&[x[(i, 0)], x[(i, 1)], x[(i, 2)]]).unwrap()).collect();
        for i in 0..30 {
            prop_assert!(pred[i] > 0.0 && pred[i] < 1.0);
            for j in 0..30 {
                if eta[i] < eta[j] {
                    prop_assert!(pred[i] <= pred[j]);
                }
            }
        }
    }
}
