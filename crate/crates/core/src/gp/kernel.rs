//! Covariance functions on the circle and on the polar plane.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polar::geodesic_distance;

/// A GP input: a scalar (shaft angle in rad) or a polar point (ρ in m, θ in rad).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Input {
    Scalar(f64),
    Polar { rho: f64, theta: f64 },
}

impl Input {
    pub fn kind(&self) -> InputKind {
        match self {
            Input::Scalar(_) => InputKind::Scalar,
            Input::Polar { .. } => InputKind::Polar,
        }
    }

    pub fn is_finite(&self) -> bool {
        match *self {
            Input::Scalar(x) => x.is_finite(),
            Input::Polar { rho, theta } => rho.is_finite() && theta.is_finite(),
        }
    }

    fn scalar(&self) -> f64 {
        match *self {
            Input::Scalar(x) => x,
            Input::Polar { .. } => unreachable!("checked by KernelSpec::check"),
        }
    }

    fn polar(&self) -> (f64, f64) {
        match *self {
            Input::Polar { rho, theta } => (rho, theta),
            Input::Scalar(_) => unreachable!("checked by KernelSpec::check"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Scalar,
    Polar,
}

/// Default Wendland steepening; the smallest value that keeps `W_π` positive
/// definite on the circle.
pub const WENDLAND_TAU: u32 = 4;

/// Kernel variant together with its hyperparameters.
///
/// Inside the ANOVA combinations the radial and angular factors carry no
/// variance of their own; `alpha1_sq` and `alpha2_sq` play that role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum KernelSpec {
    SquaredExponential {
        signal_variance: f64,
        length_scale: f64,
    },
    Matern32 {
        signal_variance: f64,
        length_scale: f64,
    },
    Periodic {
        signal_variance: f64,
        length_scale: f64,
        period: f64,
    },
    WendlandPolar {
        signal_variance: f64,
        tau: u32,
    },
    /// `s² (1 + α₁² k_pol(ρ, ρ')) (1 + α₂² W_π(d(θ, θ')))`
    #[serde(rename = "anova2d_pol")]
    Anova2dPol {
        scale: f64,
        alpha1_sq: f64,
        alpha2_sq: f64,
        decay: f64,
        degree: u32,
        tau: u32,
    },
    /// `s² (1 + α₁² k₃/₂(ρ, ρ')) (1 + α₂² W_π(d(θ, θ')))`
    #[serde(rename = "anova2d_matern")]
    Anova2dMatern {
        scale: f64,
        alpha1_sq: f64,
        alpha2_sq: f64,
        length_scale: f64,
        tau: u32,
    },
}

pub fn squared_exponential(r: f64, variance: f64, length_scale: f64) -> f64 {
    variance * (-0.5 * (r / length_scale).powi(2)).exp()
}

pub fn matern32(r: f64, variance: f64, length_scale: f64) -> f64 {
    let z = 3f64.sqrt() * r / length_scale;
    variance * (1.0 + z) * (-z).exp()
}

/// `σ² exp(−2 sin²(π r / p) / l²)`, exactly periodic in `r` with period `p`.
pub fn periodic(r: f64, variance: f64, length_scale: f64, period: f64) -> f64 {
    let s = (PI * r / period).sin();
    variance * (-2.0 * s * s / (length_scale * length_scale)).exp()
}

/// C²-Wendland function `W_c(t) = (1 + τ t/c)(1 − t/c)₊^τ`.
pub fn wendland(t: f64, support: f64, tau: u32) -> f64 {
    let u = t / support;
    if u >= 1.0 {
        return 0.0;
    }
    (1.0 + tau as f64 * u) * (1.0 - u).powi(tau as i32)
}

/// Polynomial kernel damped by a separable Gaussian envelope:
/// `(ρρ'/β²)^d exp(−(ρ² + ρ'²) / (2β²))`. Vanishes at the centre and decays
/// toward large radii.
pub fn poly_decay(rho_a: f64, rho_b: f64, decay: f64, degree: u32) -> f64 {
    let b2 = decay * decay;
    (rho_a * rho_b / b2).powi(degree as i32) * (-(rho_a * rho_a + rho_b * rho_b) / (2.0 * b2)).exp()
}

/// Geodesic angular correlation `W_π(d(θ, θ'))`.
pub fn angular(theta_a: f64, theta_b: f64, tau: u32) -> f64 {
    wendland(geodesic_distance(theta_a, theta_b), PI, tau)
}

impl KernelSpec {
    pub fn squared_exponential(signal_variance: f64, length_scale: f64) -> Self {
        KernelSpec::SquaredExponential {
            signal_variance,
            length_scale,
        }
    }

    pub fn matern32(signal_variance: f64, length_scale: f64) -> Self {
        KernelSpec::Matern32 {
            signal_variance,
            length_scale,
        }
    }

    pub fn periodic(signal_variance: f64, length_scale: f64, period: f64) -> Self {
        KernelSpec::Periodic {
            signal_variance,
            length_scale,
            period,
        }
    }

    pub fn wendland_polar(signal_variance: f64) -> Self {
        KernelSpec::WendlandPolar {
            signal_variance,
            tau: WENDLAND_TAU,
        }
    }

    pub fn anova_pol(scale: f64, alpha1_sq: f64, alpha2_sq: f64, decay: f64, degree: u32) -> Self {
        KernelSpec::Anova2dPol {
            scale,
            alpha1_sq,
            alpha2_sq,
            decay,
            degree,
            tau: WENDLAND_TAU,
        }
    }

    pub fn anova_matern(scale: f64, alpha1_sq: f64, alpha2_sq: f64, length_scale: f64) -> Self {
        KernelSpec::Anova2dMatern {
            scale,
            alpha1_sq,
            alpha2_sq,
            length_scale,
            tau: WENDLAND_TAU,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::SquaredExponential { .. } => "squared_exponential",
            KernelSpec::Matern32 { .. } => "matern32",
            KernelSpec::Periodic { .. } => "periodic",
            KernelSpec::WendlandPolar { .. } => "wendland_polar",
            KernelSpec::Anova2dPol { .. } => "anova2d_pol",
            KernelSpec::Anova2dMatern { .. } => "anova2d_matern",
        }
    }

    pub fn input_kind(&self) -> InputKind {
        match self {
            KernelSpec::Anova2dPol { .. } | KernelSpec::Anova2dMatern { .. } => InputKind::Polar,
            _ => InputKind::Scalar,
        }
    }

    /// Names of the continuous hyperparameters, in the order used by
    /// [`KernelSpec::hyperparameters`].
    pub fn hyperparameter_names(&self) -> &'static [&'static str] {
        match self {
            KernelSpec::SquaredExponential { .. } | KernelSpec::Matern32 { .. } => {
                &["signal_variance", "length_scale"]
            }
            KernelSpec::Periodic { .. } => &["signal_variance", "length_scale", "period"],
            KernelSpec::WendlandPolar { .. } => &["signal_variance"],
            KernelSpec::Anova2dPol { .. } => &["scale", "alpha1_sq", "alpha2_sq", "decay"],
            KernelSpec::Anova2dMatern { .. } => {
                &["scale", "alpha1_sq", "alpha2_sq", "length_scale"]
            }
        }
    }

    pub fn hyperparameters(&self) -> Vec<f64> {
        match *self {
            KernelSpec::SquaredExponential {
                signal_variance,
                length_scale,
            }
            | KernelSpec::Matern32 {
                signal_variance,
                length_scale,
            } => vec![signal_variance, length_scale],
            KernelSpec::Periodic {
                signal_variance,
                length_scale,
                period,
            } => vec![signal_variance, length_scale, period],
            KernelSpec::WendlandPolar {
                signal_variance, ..
            } => vec![signal_variance],
            KernelSpec::Anova2dPol {
                scale,
                alpha1_sq,
                alpha2_sq,
                decay,
                ..
            } => vec![scale, alpha1_sq, alpha2_sq, decay],
            KernelSpec::Anova2dMatern {
                scale,
                alpha1_sq,
                alpha2_sq,
                length_scale,
                ..
            } => vec![scale, alpha1_sq, alpha2_sq, length_scale],
        }
    }

    /// Same variant with the continuous hyperparameters replaced.
    pub fn with_hyperparameters(&self, values: &[f64]) -> Result<Self> {
        let n = self.hyperparameter_names().len();
        if values.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} expects {n} hyperparameters, got {}",
                self.name(),
                values.len()
            )));
        }
        let v = values;
        let spec = match *self {
            KernelSpec::SquaredExponential { .. } => KernelSpec::squared_exponential(v[0], v[1]),
            KernelSpec::Matern32 { .. } => KernelSpec::matern32(v[0], v[1]),
            KernelSpec::Periodic { .. } => KernelSpec::periodic(v[0], v[1], v[2]),
            KernelSpec::WendlandPolar { tau, .. } => KernelSpec::WendlandPolar {
                signal_variance: v[0],
                tau,
            },
            KernelSpec::Anova2dPol { degree, tau, .. } => KernelSpec::Anova2dPol {
                scale: v[0],
                alpha1_sq: v[1],
                alpha2_sq: v[2],
                decay: v[3],
                degree,
                tau,
            },
            KernelSpec::Anova2dMatern { tau, .. } => KernelSpec::Anova2dMatern {
                scale: v[0],
                alpha1_sq: v[1],
                alpha2_sq: v[2],
                length_scale: v[3],
                tau,
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.hyperparameter_names().iter().zip(self.hyperparameters()) {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{} hyperparameter {name} must be positive, got {v}",
                    self.name()
                )));
            }
        }
        let tau = match *self {
            KernelSpec::WendlandPolar { tau, .. }
            | KernelSpec::Anova2dPol { tau, .. }
            | KernelSpec::Anova2dMatern { tau, .. } => Some(tau),
            _ => None,
        };
        if let Some(tau) = tau {
            if tau < 4 {
                return Err(Error::InvalidParameter(format!("Wendland tau must be >= 4, got {tau}")));
            }
        }
        if let KernelSpec::Anova2dPol { degree, .. } = *self {
            if degree < 1 {
                return Err(Error::InvalidParameter("polynomial degree must be >= 1".into()));
            }
        }
        Ok(())
    }

    /// Errors if any input is of the wrong kind or non-finite.
    pub fn check(&self, inputs: &[Input]) -> Result<()> {
        let kind = self.input_kind();
        for x in inputs {
            if x.kind() != kind {
                return Err(Error::DimensionMismatch(format!(
                    "{} takes {:?} inputs, got {x:?}",
                    self.name(),
                    kind
                )));
            }
            if !x.is_finite() {
                return Err(Error::InvalidParameter(format!("non-finite input {x:?}")));
            }
        }
        Ok(())
    }

    /// `k(x, x')`.
    pub fn eval(&self, a: &Input, b: &Input) -> Result<f64> {
        self.check(&[*a, *b])?;
        Ok(self.eval_unchecked(a, b))
    }

    /// Prior variance `k(x, x)`.
    pub fn variance_at(&self, x: &Input) -> Result<f64> {
        self.eval(x, x)
    }

    pub(crate) fn eval_unchecked(&self, a: &Input, b: &Input) -> f64 {
        match *self {
            KernelSpec::SquaredExponential {
                signal_variance,
                length_scale,
            } => squared_exponential((a.scalar() - b.scalar()).abs(), signal_variance, length_scale),
            KernelSpec::Matern32 {
                signal_variance,
                length_scale,
            } => matern32((a.scalar() - b.scalar()).abs(), signal_variance, length_scale),
            KernelSpec::Periodic {
                signal_variance,
                length_scale,
                period,
            } => periodic(
                (a.scalar() - b.scalar()).abs(),
                signal_variance,
                length_scale,
                period,
            ),
            KernelSpec::WendlandPolar {
                signal_variance,
                tau,
            } => signal_variance * angular(a.scalar(), b.scalar(), tau),
            KernelSpec::Anova2dPol {
                scale,
                alpha1_sq,
                alpha2_sq,
                decay,
                degree,
                tau,
            } => {
                let ((ra, ta), (rb, tb)) = (a.polar(), b.polar());
                scale
                    * (1.0 + alpha1_sq * poly_decay(ra, rb, decay, degree))
                    * (1.0 + alpha2_sq * angular(ta, tb, tau))
            }
            KernelSpec::Anova2dMatern {
                scale,
                alpha1_sq,
                alpha2_sq,
                length_scale,
                tau,
            } => {
                let ((ra, ta), (rb, tb)) = (a.polar(), b.polar());
                scale
                    * (1.0 + alpha1_sq * matern32((ra - rb).abs(), 1.0, length_scale))
                    * (1.0 + alpha2_sq * angular(ta, tb, tau))
            }
        }
    }
}

/// Cross-covariance matrix with entry `(i, j) = k(a[i], b[j])`.
pub fn gram(spec: &KernelSpec, a: &[Input], b: &[Input]) -> Result<DMatrix<f64>> {
    spec.check(a)?;
    spec.check(b)?;
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| {
        spec.eval_unchecked(&a[i], &b[j])
    }))
}

/// `K(X, X)`, filled from the upper triangle so it is exactly symmetric.
pub fn gram_symmetric(spec: &KernelSpec, x: &[Input]) -> Result<DMatrix<f64>> {
    spec.check(x)?;
    let n = x.len();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = spec.eval_unchecked(&x[i], &x[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}
