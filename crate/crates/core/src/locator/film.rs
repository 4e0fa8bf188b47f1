use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::trim::{estimate_min_reference, trim_observations, TrimWindow, DEFAULT_HALF_WIDTH};
use crate::bearing::{eccentricity_from_hmin, BearingGeometry, ShaftLocation};
use crate::error::{Error, Result};
use crate::gp::{GpModel, Input, KernelSpec, TrainingSet};
use crate::hyperopt::{tune_gp, NoisePrior, SwarmConfig};
use crate::polar::{normalize_angle, signed_difference};
use crate::ultrasound::{FilmObservation, Method};

/// Grid points per revolution when searching for the film minimum.
const MIN_SEARCH_GRID: usize = 3600;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilmFitConfig {
    pub swarm: SwarmConfig,
    /// Hyperparameters are tuned on at most this many group means of
    /// neighbouring readings; the final model conditions on every reading.
    pub tuning_points: usize,
    pub noise: FilmNoise,
}

/// Source of the observation-noise variance for film fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilmNoise {
    /// Tuned along with the kernel hyperparameters.
    Estimate,
    /// Mean of the squared `noise_std` carried by the readings; tuned instead
    /// when the readings report no noise.
    Reported,
    /// Fixed variance in m².
    Fixed { variance: f64 },
}

impl Default for FilmFitConfig {
    fn default() -> Self {
        Self {
            swarm: SwarmConfig::default(),
            tuning_points: 120,
            noise: FilmNoise::Reported,
        }
    }
}

/// A fitted film model plus its tuning trace.
#[derive(Debug, Clone)]
pub struct FilmFit {
    pub model: GpModel,
    pub trace: Vec<f64>,
}

/// Search bounds for the film kernel's hyperparameters, given the variance of
/// the thickness readings.
pub fn film_hyperparameter_bounds(kernel: &KernelSpec, target_variance: f64) -> Result<Vec<(f64, f64)>> {
    let s2 = target_variance;
    let signal = (1e-2 * s2, 1e4 * s2);
    match kernel {
        KernelSpec::SquaredExponential { .. } | KernelSpec::Matern32 { .. } => {
            Ok(vec![signal, (1e-2, 1e2)])
        }
        KernelSpec::Periodic { .. } => Ok(vec![signal, (0.3, 5e1), (1.9 * PI, 2.1 * PI)]),
        KernelSpec::WendlandPolar { .. } => Ok(vec![signal]),
        other => Err(Error::InvalidParameter(format!(
            "{} is not a kernel over shaft angle",
            other.name()
        ))),
    }
}

/// Unwraps angles around their circular mean so a window straddling TDC stays
/// contiguous.
fn unwrap_angles(obs: &[FilmObservation]) -> Vec<f64> {
    let (s, c) = obs.iter().fold((0.0, 0.0), |(s, c), o| {
        (s + o.shaft_angle().sin(), c + o.shaft_angle().cos())
    });
    let centre = if s == 0.0 && c == 0.0 {
        PI
    } else {
        normalize_angle(s.atan2(c))
    };
    obs.iter()
        .map(|o| centre + signed_difference(centre, o.shaft_angle()))
        .collect()
}

/// Fits a GP from shaft angle to film thickness, tuning the hyperparameters by
/// QBPS. The prior mean is the mean reading.
pub fn fit_film_gp(obs: &[FilmObservation], kernel: &KernelSpec, config: &FilmFitConfig) -> Result<FilmFit> {
    if obs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "film fit needs at least 3 readings, got {}",
            obs.len()
        )));
    }
    let mut points: Vec<(f64, f64)> = unwrap_angles(obs)
        .into_iter()
        .zip(obs.iter().map(|o| o.thickness()))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n = points.len() as f64;
    let mean = points.iter().map(|p| p.1).sum::<f64>() / n;

    // Tune on means of consecutive groups of `k` readings; their noise is
    // σ²/k, so the tuned noise variance scales back up by `k` for the final
    // model on every reading. A short tail group is dropped to keep the
    // noise level uniform.
    let k = if config.tuning_points >= 3 {
        points.len().div_ceil(config.tuning_points)
    } else {
        1
    };
    let groups: Vec<(f64, f64)> = points
        .chunks(k)
        .filter(|g| g.len() == k)
        .map(|g| {
            let m = g.len() as f64;
            (g.iter().map(|p| p.0).sum::<f64>() / m, g.iter().map(|p| p.1).sum::<f64>() / m)
        })
        .collect();
    if groups.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "film fit needs at least 3 tuning groups, got {}",
            groups.len()
        )));
    }
    let g = groups.len() as f64;
    let group_mean = groups.iter().map(|p| p.1).sum::<f64>() / g;
    let mut var = groups.iter().map(|p| (p.1 - group_mean).powi(2)).sum::<f64>() / g;
    if var <= 0.0 {
        // flat film: any positive scale will do, tied to the thickness itself
        var = (1e-6 * mean.abs()).powi(2).max(f64::MIN_POSITIVE);
    }

    let bounds = film_hyperparameter_bounds(kernel, var)?;
    let scale = k as f64;
    let pinned = match config.noise {
        FilmNoise::Estimate => None,
        FilmNoise::Fixed { variance } => Some(variance),
        FilmNoise::Reported => {
            let v = obs.iter().map(|o| o.noise_std().powi(2)).sum::<f64>() / n;
            (v > 0.0).then_some(v)
        }
    };
    let noise = match pinned {
        Some(v) => NoisePrior::Fixed(v / scale),
        None => NoisePrior::Free {
            lower: 1e-10 * var,
            upper: 10.0 * var,
        },
    };
    let sub_inputs: Vec<Input> = groups.iter().map(|p| Input::Scalar(p.0)).collect();
    let sub_targets: Vec<f64> = groups.iter().map(|p| p.1).collect();
    let tuned = tune_gp(kernel, &sub_inputs, &sub_targets, mean, &bounds, noise, &config.swarm)?;
    let noise_variance = match pinned {
        Some(v) => v,
        None => tuned.noise_variance * scale,
    };

    let inputs: Vec<Input> = points.iter().map(|p| Input::Scalar(p.0)).collect();
    let targets: Vec<f64> = points.iter().map(|p| p.1).collect();
    let training = TrainingSet::new(inputs, targets, noise_variance)?;
    let model = GpModel::fit_with_mean(tuned.kernel, training, mean)?;
    Ok(FilmFit {
        model,
        trace: tuned.result.trace,
    })
}

/// Shaft location from the minimum of a film model's posterior mean.
///
/// The search covers the span of the training angles (the full revolution if
/// they wrap around): a grid at 0.1° spacing, then golden-section refinement
/// around the best grid point.
pub fn extract_shaft_location(model: &GpModel, geom: &BearingGeometry, load_angle: f64) -> Result<ShaftLocation> {
    let xs: Vec<f64> = model
        .training()
        .inputs()
        .iter()
        .map(|x| match x {
            Input::Scalar(v) => Ok(*v),
            Input::Polar { .. } => Err(Error::DimensionMismatch(
                "film model must take scalar angle inputs".into(),
            )),
        })
        .collect::<Result<_>>()?;
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let step = TAU / MIN_SEARCH_GRID as f64;
    if hi - lo > TAU - step {
        hi = lo + TAU;
    }
    let count = ((hi - lo) / step).floor() as usize + 1;
    let mut grid: Vec<f64> = (0..count).map(|k| lo + k as f64 * step).collect();
    if *grid.last().expect("count >= 1") < hi {
        grid.push(hi);
    }
    let inputs: Vec<Input> = grid.iter().map(|&x| Input::Scalar(x)).collect();
    let means = model.predict_mean(&inputs)?;
    let k = means
        .iter()
        .enumerate()
        .fold(0, |best, (i, m)| if *m < means[best] { i } else { best });

    let f = |x: f64| -> f64 {
        model
            .predict_mean(&[Input::Scalar(x)])
            .map(|v| v[0])
            .unwrap_or(f64::INFINITY)
    };
    let mut a = grid[k.saturating_sub(1)];
    let mut b = grid[(k + 1).min(grid.len() - 1)];
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let (mut x_min, mut h_min) = if fc < fd { (c, fc) } else { (d, fd) };
    if means[k] <= h_min {
        x_min = grid[k];
        h_min = means[k];
    }

    let clearance = geom.clearance();
    if !(h_min > 0.0) || h_min > clearance * (1.0 + 1e-6) {
        return Err(Error::ImplausibleFilm(format!(
            "posterior minimum film {h_min:e} m lies outside (0, {clearance:e}] m"
        )));
    }
    let eps = eccentricity_from_hmin(geom, h_min.min(clearance))?;
    let attitude = signed_difference(load_angle, normalize_angle(x_min));
    ShaftLocation::new(eps, attitude, load_angle, clearance)
}

/// Trim, fit and extract for one revolution of readings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilmPipeline {
    pub kernel: KernelSpec,
    pub fit: FilmFitConfig,
    /// Half-width of the trim window (rad).
    pub trim_half_width: f64,
    /// Half-width of the moving median used to place the window (rad).
    pub reference_half_width: f64,
    pub methods: Vec<Method>,
}

impl Default for FilmPipeline {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::periodic(1.0, 1.0, TAU),
            fit: FilmFitConfig::default(),
            trim_half_width: DEFAULT_HALF_WIDTH,
            reference_half_width: 10f64.to_radians(),
            methods: vec![Method::Phase, Method::ResonantDip],
        }
    }
}

#[derive(Debug, Clone)]
pub struct FilmResult {
    pub reference_angle: f64,
    pub trimmed: Vec<FilmObservation>,
    pub fit: FilmFit,
    pub location: ShaftLocation,
}

impl FilmPipeline {
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut p = self.clone();
        p.fit.swarm.seed = seed;
        p
    }

    pub fn run(&self, obs: &[FilmObservation], geom: &BearingGeometry, load_angle: f64) -> Result<FilmResult> {
        let reference_angle = estimate_min_reference(obs, self.reference_half_width)?;
        let window = TrimWindow::with_methods(reference_angle, self.trim_half_width, self.methods.clone())?;
        let trimmed = trim_observations(obs, &window)?;
        let fit = fit_film_gp(&trimmed, &self.kernel, &self.fit)?;
        let location = extract_shaft_location(&fit.model, geom, load_angle)?;
        Ok(FilmResult {
            reference_angle,
            trimmed,
            fit,
            location,
        })
    }
}
