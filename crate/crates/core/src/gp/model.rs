use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::kernel::{gram, gram_symmetric, Input, KernelSpec};
use crate::error::{Error, Result};

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

/// Inputs, targets and the observation-noise variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    inputs: Vec<Input>,
    targets: Vec<f64>,
    noise_variance: f64,
}

impl TrainingSet {
    pub fn new(inputs: Vec<Input>, targets: Vec<f64>, noise_variance: f64) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InsufficientData("training set is empty".into()));
        }
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        if let Some(x) = inputs.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite input {x:?}")));
        }
        if let Some(kind) = inputs.first().map(Input::kind) {
            if inputs.iter().any(|x| x.kind() != kind) {
                return Err(Error::DimensionMismatch("mixed scalar and polar inputs".into()));
            }
        }
        if targets.iter().any(|y| !y.is_finite()) {
            return Err(Error::InvalidParameter("non-finite target".into()));
        }
        if !(noise_variance.is_finite() && noise_variance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be positive, got {noise_variance}"
            )));
        }
        Ok(Self {
            inputs,
            targets,
            noise_variance,
        })
    }

    pub fn inputs(&self) -> &[Input] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn with_noise_variance(&self, noise_variance: f64) -> Result<Self> {
        Self::new(self.inputs.clone(), self.targets.clone(), noise_variance)
    }
}

/// Cholesky factor of `a`, adding escalating diagonal jitter if needed.
/// Returns the factor and the jitter that was added.
fn factor_with_jitter(mut a: DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(c) = Cholesky::new(a.clone()) {
        return Ok((c, 0.0));
    }
    let n = a.nrows();
    let mean_diag = a.diagonal().iter().sum::<f64>() / n as f64;
    let base = if mean_diag.is_finite() && mean_diag > 0.0 {
        mean_diag
    } else {
        1.0
    };
    let mut added = 0.0;
    let mut rel = JITTER_START;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let target = rel * base;
        for i in 0..n {
            a[(i, i)] += target - added;
        }
        added = target;
        if let Some(c) = Cholesky::new(a.clone()) {
            return Ok((c, added));
        }
        rel *= 10.0;
    }
    Err(Error::IllConditioned(format!(
        "Cholesky failed with jitter up to {JITTER_MAX:e} x mean diagonal"
    )))
}

/// A fitted GP: kernel, data, and the cached factor of `K + σ_n² I`.
///
/// The prior mean is a constant (zero unless set through
/// [`GpModel::fit_with_mean`]).
#[derive(Debug, Clone)]
pub struct GpModel {
    kernel: KernelSpec,
    training: TrainingSet,
    prior_mean: f64,
    factor: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
}

/// Posterior mean and variance at query points; the full covariance on request.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub covariance: Option<DMatrix<f64>>,
}

impl GpModel {
    pub fn fit(kernel: KernelSpec, training: TrainingSet) -> Result<Self> {
        Self::fit_with_mean(kernel, training, 0.0)
    }

    pub fn fit_with_mean(kernel: KernelSpec, training: TrainingSet, prior_mean: f64) -> Result<Self> {
        kernel.validate()?;
        if !prior_mean.is_finite() {
            return Err(Error::InvalidParameter("prior mean must be finite".into()));
        }
        let mut k = gram_symmetric(&kernel, training.inputs())?;
        for i in 0..training.len() {
            k[(i, i)] += training.noise_variance();
        }
        let (factor, jitter) = factor_with_jitter(k)?;
        let centred = DVector::from_iterator(
            training.len(),
            training.targets().iter().map(|y| y - prior_mean),
        );
        let alpha = factor.solve(&centred);
        Ok(Self {
            kernel,
            training,
            prior_mean,
            factor,
            alpha,
            jitter,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn training(&self) -> &TrainingSet {
        &self.training
    }

    pub fn noise_variance(&self) -> f64 {
        self.training.noise_variance()
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_mean
    }

    /// Diagonal jitter added on top of `σ_n²` to make the factorisation succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `(K + σ_n² I)⁻¹ (y − m)`
    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Posterior mean only; cheaper than [`GpModel::predict`] for large grids.
    pub fn predict_mean(&self, xs: &[Input]) -> Result<Vec<f64>> {
        self.kernel.check(xs)?;
        let train = self.training.inputs();
        Ok(xs
            .iter()
            .map(|x| {
                self.prior_mean
                    + train
                        .iter()
                        .zip(self.alpha.iter())
                        .map(|(xi, a)| self.kernel.eval_unchecked(x, xi) * a)
                        .sum::<f64>()
            })
            .collect())
    }

    /// Posterior of the latent function at `xs`. Variances are clamped at zero.
    pub fn predict(&self, xs: &[Input], full_covariance: bool) -> Result<Prediction> {
        let k_star = gram(&self.kernel, xs, self.training.inputs())?;
        let mean: Vec<f64> = (&k_star * &self.alpha)
            .iter()
            .map(|m| m + self.prior_mean)
            .collect();
        // v = L⁻¹ K(X, X*)
        let v = self
            .factor
            .l_dirty()
            .solve_lower_triangular(&k_star.transpose())
            .ok_or_else(|| Error::IllConditioned("singular Cholesky factor".into()))?;
        let (variance, covariance) = if full_covariance {
            let cov = gram_symmetric(&self.kernel, xs)? - v.transpose() * &v;
            let var = cov.diagonal().iter().map(|&s| clamp_variance(s)).collect();
            (var, Some(cov))
        } else {
            let var = xs
                .iter()
                .enumerate()
                .map(|(j, x)| {
                    let prior = self.kernel.eval_unchecked(x, x);
                    clamp_variance(prior - v.column(j).norm_squared())
                })
                .collect();
            (var, None)
        };
        Ok(Prediction {
            mean,
            variance,
            covariance,
        })
    }

    /// `log p(y | X) = −½ (y−m)ᵀ α − ½ log det(K + σ_n² I) − (N/2) log 2π`.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.training.len() as f64;
        let centred = DVector::from_iterator(
            self.training.len(),
            self.training.targets().iter().map(|y| y - self.prior_mean),
        );
        let fit = centred.dot(&self.alpha);
        let log_det = 2.0 * self.factor.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        -0.5 * fit - 0.5 * log_det - 0.5 * n * (2.0 * PI).ln()
    }

    /// Joint log density of held-out targets under the posterior predictive,
    /// observation noise included.
    pub fn predictive_log_density(&self, xs: &[Input], ys: &[f64]) -> Result<f64> {
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} test inputs but {} targets",
                xs.len(),
                ys.len()
            )));
        }
        let pred = self.predict(xs, true)?;
        let mut cov = pred.covariance.expect("requested");
        for i in 0..xs.len() {
            cov[(i, i)] += self.noise_variance();
        }
        let resid = DVector::from_iterator(xs.len(), ys.iter().zip(&pred.mean).map(|(y, m)| y - m));
        let (chol, _) = factor_with_jitter(cov)?;
        let fit = resid.dot(&chol.solve(&resid));
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(-0.5 * fit - 0.5 * log_det - 0.5 * xs.len() as f64 * (2.0 * PI).ln())
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            schema_version: MODEL_SCHEMA_VERSION,
            kernel: self.kernel.clone(),
            noise_variance: self.training.noise_variance(),
            prior_mean: self.prior_mean,
            inputs: self.training.inputs().to_vec(),
            targets: self.training.targets().to_vec(),
        }
    }

    pub fn from_document(doc: ModelDocument) -> Result<Self> {
        if doc.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "unsupported model schema version {}",
                doc.schema_version
            )));
        }
        let training = TrainingSet::new(doc.inputs, doc.targets, doc.noise_variance)?;
        Self::fit_with_mean(doc.kernel, training, doc.prior_mean)
    }
}

fn clamp_variance(v: f64) -> f64 {
    if v < 0.0 {
        0.0
    } else {
        v
    }
}

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Serialised form of a fitted model. The factorisation is rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub kernel: KernelSpec,
    pub noise_variance: f64,
    pub prior_mean: f64,
    pub inputs: Vec<Input>,
    pub targets: Vec<f64>,
}

/// Log marginal likelihood without keeping the fitted model around.
pub fn log_marginal_likelihood(
    kernel: &KernelSpec,
    training: &TrainingSet,
    prior_mean: f64,
) -> Result<f64> {
    Ok(GpModel::fit_with_mean(kernel.clone(), training.clone(), prior_mean)?.log_marginal_likelihood())
}

/// Draws `n_samples` functions from the zero-mean prior at `xs`; one sample per
/// row.
pub fn sample_prior(
    kernel: &KernelSpec,
    xs: &[Input],
    n_samples: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    kernel.validate()?;
    let k = gram_symmetric(kernel, xs)?;
    let (factor, _) = factor_with_jitter(k)?;
    let l = factor.l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = xs.len();
    let mut out = DMatrix::zeros(n_samples, n);
    for s in 0..n_samples {
        let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
        let f = &l * z;
        out.row_mut(s).copy_from(&f.transpose());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(xs: &[f64]) -> Vec<Input> {
        xs.iter().map(|&x| Input::Scalar(x)).collect()
    }

    #[test]
    fn single_point_fit() {
        let k = KernelSpec::squared_exponential(2.0, 1.0);
        let ts = TrainingSet::new(scalar(&[0.3]), vec![1.5], 0.5).unwrap();
        let m = GpModel::fit(k, ts).unwrap();
        assert!((m.alpha()[0] - 1.5 / 2.5).abs() < 1e-15);
        let expected = -0.5 * 1.5f64.powi(2) / 2.5 - 0.5 * 2.5f64.ln() - 0.5 * (2.0 * PI).ln();
        assert!((m.log_marginal_likelihood() - expected).abs() < 1e-14);
    }

    #[test]
    fn duplicated_inputs_fit_with_noise() {
        let k = KernelSpec::matern32(1.0, 1.0);
        let ts = TrainingSet::new(scalar(&[0.5, 0.5, 1.0]), vec![1.0, 1.1, 0.2], 1e-3).unwrap();
        assert!(GpModel::fit(k, ts).is_ok());
    }

    #[test]
    fn jitter_rescues_singular_gram() {
        let k = KernelSpec::squared_exponential(1.0, 10.0);
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 1e-3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let ts = TrainingSet::new(scalar(&xs), ys, 1e-300).unwrap();
        let m = GpModel::fit(k, ts).unwrap();
        assert!(m.jitter() > 0.0 && m.jitter() <= 1e-4);
    }

    #[test]
    fn linear_solve_residual() {
        let xs: Vec<f64> = (0..10).map(|i| (i as f64 * 0.71).sin() * 3.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.cos() + 0.1 * x).collect();
        let ts = TrainingSet::new(scalar(&xs), ys.clone(), 1e-2).unwrap();
        let k = KernelSpec::matern32(1.3, 0.9);
        let m = GpModel::fit(k.clone(), ts).unwrap();
        let mut kk = gram_symmetric(&k, &scalar(&xs)).unwrap();
        for i in 0..10 {
            kk[(i, i)] += 1e-2;
        }
        let back = kk * m.alpha();
        let y = DVector::from_vec(ys);
        assert!((back - &y).norm() / y.norm() < 1e-8);
    }

    #[test]
    fn interpolates_and_reverts_to_prior() {
        let k = KernelSpec::squared_exponential(1.0, 0.5);
        let xs = scalar(&[0.0, 1.0, 2.0]);
        let ts = TrainingSet::new(xs.clone(), vec![0.3, -0.4, 0.8], 1e-12).unwrap();
        let m = GpModel::fit(k, ts).unwrap();
        let p = m.predict(&xs, false).unwrap();
        for (mu, y) in p.mean.iter().zip([0.3, -0.4, 0.8]) {
            assert!((mu - y).abs() < 1e-6);
        }
        assert!(p.variance.iter().all(|&v| v < 1e-6));
        let far = m.predict(&scalar(&[100.0]), false).unwrap();
        assert!(far.mean[0].abs() < 1e-12);
        assert!((far.variance[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prior_mean_is_added_back() {
        let k = KernelSpec::squared_exponential(1.0, 0.5);
        let ts = TrainingSet::new(scalar(&[0.0]), vec![5.0], 1e-2).unwrap();
        let m = GpModel::fit_with_mean(k, ts, 4.0).unwrap();
        let far = m.predict_mean(&scalar(&[50.0])).unwrap();
        assert!((far[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn document_round_trip() {
        let k = KernelSpec::periodic(1.0, 0.7, 2.0 * PI);
        let ts = TrainingSet::new(scalar(&[0.1, 0.9, 2.5]), vec![1.0, 2.0, 1.5], 1e-3).unwrap();
        let m = GpModel::fit_with_mean(k, ts, 1.5).unwrap();
        let json = serde_json::to_string(&m.to_document()).unwrap();
        let back = GpModel::from_document(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.log_marginal_likelihood(), m.log_marginal_likelihood());
        assert!(serde_json::from_str::<ModelDocument>(&json.replace("\"prior_mean\"", "\"bogus\"")).is_err());
    }

    #[test]
    fn prior_samples_are_reproducible_and_scale() {
        let xs = scalar(&[0.0, 0.5, 1.0]);
        let a = sample_prior(&KernelSpec::matern32(1.0, 1.0), &xs, 5, 7).unwrap();
        let b = sample_prior(&KernelSpec::matern32(1.0, 1.0), &xs, 5, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_prior(&KernelSpec::matern32(4.0, 1.0), &xs, 5, 7).unwrap();
        // same normal draws, Cholesky factor scales with σ_f
        assert!((c - a * 2.0).abs().max() < 1e-12);
    }

    #[test]
    fn prior_sample_covariance_matches_gram() {
        let xs = scalar(&[0.0, 0.4, 1.3]);
        let k = KernelSpec::matern32(1.0, 1.0);
        let s = sample_prior(&k, &xs, 10_000, 11).unwrap();
        let g = gram_symmetric(&k, &xs).unwrap();
        let n = s.nrows() as f64;
        for i in 0..3 {
            for j in 0..3 {
                let emp = s.column(i).dot(&s.column(j)) / n;
                assert!((emp - g[(i, j)]).abs() < 0.05 * g[(i, i)], "({i},{j}) {emp} vs {}", g[(i, j)]);
            }
        }
    }
}
