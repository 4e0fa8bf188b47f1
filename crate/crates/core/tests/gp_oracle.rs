//! Posterior and evidence against brute-force dense linear algebra.

use std::f64::consts::PI;

use bearing_gp::gp::{gram, gram_symmetric, GpModel, Input, KernelSpec, TrainingSet};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn problem(rng: &mut ChaCha8Rng, n: usize) -> (KernelSpec, Vec<Input>, Vec<f64>, f64, f64) {
    let kind = rng.gen_range(0..4);
    let spec = match kind {
        0 => KernelSpec::squared_exponential(rng.gen_range(0.5..3.0), rng.gen_range(0.3..2.0)),
        1 => KernelSpec::matern32(rng.gen_range(0.5..3.0), rng.gen_range(0.3..2.0)),
        2 => KernelSpec::periodic(rng.gen_range(0.5..3.0), rng.gen_range(0.3..2.0), 2.0 * PI),
        _ => KernelSpec::anova_matern(1.0, rng.gen_range(0.1..3.0), rng.gen_range(0.1..3.0), 0.4),
    };
    let xs: Vec<Input> = (0..n)
        .map(|_| match kind {
            3 => Input::Polar {
                rho: rng.gen_range(0.0..1.0),
                theta: rng.gen_range(0.0..2.0 * PI),
            },
            _ => Input::Scalar(rng.gen_range(-4.0..4.0)),
        })
        .collect();
    let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    (spec, xs, ys, rng.gen_range(0.01..0.5), rng.gen_range(-1.0..1.0))
}

#[test]
fn posterior_matches_joint_gaussian_conditioning() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let n = rng.gen_range(1..=10);
        let (spec, xs, ys, noise, mean) = problem(&mut rng, n);
        let queries: Vec<Input> = match xs[0] {
            Input::Scalar(_) => (0..5).map(|_| Input::Scalar(rng.gen_range(-5.0..5.0))).collect(),
            Input::Polar { .. } => (0..5)
                .map(|_| Input::Polar {
                    rho: rng.gen_range(0.0..1.0),
                    theta: rng.gen_range(0.0..2.0 * PI),
                })
                .collect(),
        };
        let model = GpModel::fit_with_mean(
            spec.clone(),
            TrainingSet::new(xs.clone(), ys.clone(), noise).unwrap(),
            mean,
        )
        .unwrap();
        let pred = model.predict(&queries, true).unwrap();

        // Joint of (y, f*) and the textbook conditional, via an explicit inverse.
        let mut all = xs.clone();
        all.extend(queries.iter().copied());
        let mut joint = gram_symmetric(&spec, &all).unwrap();
        for i in 0..n {
            joint[(i, i)] += noise;
        }
        let a = joint.view((0, 0), (n, n)).into_owned();
        let b = joint.view((0, n), (n, 5)).into_owned();
        let c = joint.view((n, n), (5, 5)).into_owned();
        let a_inv = a.try_inverse().unwrap();
        let centred = DVector::from_iterator(n, ys.iter().map(|y| y - mean));
        let mu = b.transpose() * &a_inv * centred;
        let sigma = c - b.transpose() * &a_inv * &b;
        let cov = pred.covariance.as_ref().unwrap();
        for i in 0..5 {
            assert!((pred.mean[i] - (mu[i] + mean)).abs() < 1e-8);
            assert!((pred.variance[i] - sigma[(i, i)]).abs() < 1e-8);
            for j in 0..5 {
                assert!((cov[(i, j)] - sigma[(i, j)]).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn log_marginal_likelihood_matches_dense_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let n = rng.gen_range(1..=20);
        let (spec, xs, ys, noise, mean) = problem(&mut rng, n);
        let model = GpModel::fit_with_mean(
            spec.clone(),
            TrainingSet::new(xs.clone(), ys.clone(), noise).unwrap(),
            mean,
        )
        .unwrap();
        let mut k: DMatrix<f64> = gram(&spec, &xs, &xs).unwrap();
        for i in 0..n {
            k[(i, i)] += noise;
        }
        let r = DVector::from_iterator(n, ys.iter().map(|y| y - mean));
        let det = k.clone().lu().determinant();
        let quad = r.dot(&(k.try_inverse().unwrap() * &r));
        let dense = -0.5 * quad - 0.5 * det.ln() - 0.5 * n as f64 * (2.0 * PI).ln();
        assert!(
            (model.log_marginal_likelihood() - dense).abs() < 1e-8,
            "{} vs {dense}",
            model.log_marginal_likelihood()
        );
    }
}

#[test]
fn far_from_data_reverts_to_prior() {
    let xs: Vec<Input> = (0..6).map(|i| Input::Scalar(i as f64 * 0.3)).collect();
    let ys = vec![1.0, 0.4, -0.3, 0.8, 1.2, 0.1];
    let model = GpModel::fit(
        KernelSpec::squared_exponential(2.0, 0.5),
        TrainingSet::new(xs, ys, 1e-3).unwrap(),
    )
    .unwrap();
    let p = model.predict(&[Input::Scalar(100.0)], false).unwrap();
    assert!(p.mean[0].abs() < 1e-12);
    assert!((p.variance[0] - 2.0).abs() < 1e-12);
}

#[test]
fn model_document_round_trip() {
    let xs: Vec<Input> = (0..8).map(|i| Input::Scalar(i as f64 * 0.7)).collect();
    let ys: Vec<f64> = (0..8).map(|i| (i as f64).sin()).collect();
    let model = GpModel::fit_with_mean(
        KernelSpec::periodic(1.2, 0.8, 2.0 * PI),
        TrainingSet::new(xs, ys, 0.05).unwrap(),
        0.3,
    )
    .unwrap();
    let json = serde_json::to_string(&model.to_document()).unwrap();
    let back = GpModel::from_document(serde_json::from_str(&json).unwrap()).unwrap();
    let q = [Input::Scalar(1.234), Input::Scalar(-3.0)];
    assert_eq!(model.predict_mean(&q).unwrap(), back.predict_mean(&q).unwrap());
    assert_eq!(model.log_marginal_likelihood(), back.log_marginal_likelihood());
}
