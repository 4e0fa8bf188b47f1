//! Leave-one-out cross-validation of the localisation models.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bearing::ShaftLocation;
use crate::error::{Error, Result};
use crate::locator::{
    fit_location_gp, locate, location_input, GridSpec, LocalisationDataset, LocalisationEntry,
    LocationFitConfig, ModelVariant, VarianceMode,
};
use crate::seeds::hash_words;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Distance between two shaft centres in clearance-normalised Cartesian
/// coordinates.
pub fn rmse(predicted: &ShaftLocation, truth: &ShaftLocation) -> f64 {
    let (xa, ya) = predicted.normalized_cartesian();
    let (xb, yb) = truth.normalized_cartesian();
    (xa - xb).hypot(ya - yb)
}

fn metres(loc: &ShaftLocation) -> (f64, f64) {
    let t = loc.theta();
    (loc.rho() * t.cos(), loc.rho() * t.sin())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    /// Position of the held-out entry in the dataset.
    pub index: usize,
    pub label: f64,
    pub truth_rho_m: f64,
    pub truth_theta_rad: f64,
    pub predicted_rho_m: f64,
    pub predicted_theta_rad: f64,
    /// Log predictive density of the held-out label at its true location.
    pub log_likelihood: f64,
    /// Clearance-normalised distance from the map argmax to the truth.
    pub rmse: f64,
    pub rmse_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFold {
    pub index: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub schema_version: u32,
    pub model: ModelVariant,
    pub folds: Vec<FoldResult>,
    pub skipped: Vec<SkippedFold>,
    pub averaged_log_likelihood: f64,
    pub averaged_rmse: f64,
    pub averaged_rmse_m: f64,
}

impl CvReport {
    /// One row per completed fold.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "model",
            "index",
            "label",
            "truth_rho_m",
            "truth_theta_rad",
            "predicted_rho_m",
            "predicted_theta_rad",
            "log_likelihood",
            "rmse",
            "rmse_m",
        ])?;
        for f in &self.folds {
            w.write_record([
                self.model.to_string(),
                f.index.to_string(),
                f.label.to_string(),
                f.truth_rho_m.to_string(),
                f.truth_theta_rad.to_string(),
                f.predicted_rho_m.to_string(),
                f.predicted_theta_rad.to_string(),
                f.log_likelihood.to_string(),
                f.rmse.to_string(),
                f.rmse_m.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn entry_key(e: &LocalisationEntry) -> [u64; 3] {
    [
        e.location.rho().to_bits(),
        e.location.theta().to_bits(),
        e.label.to_bits(),
    ]
}

fn canonical(a: [u64; 3], b: [u64; 3]) -> std::cmp::Ordering {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| f64::from_bits(*x).total_cmp(&f64::from_bits(*y)))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Leave-one-out cross-validation.
///
/// Each fold refits the model on the other entries (in a canonical order, with
/// an optimiser seed keyed to the held-out entry's content), scores the
/// held-out label at its true location, and measures how far the map argmax
/// lands from it. Failed folds are recorded and left out of the averages.
pub fn loocv(
    data: &LocalisationDataset,
    variant: ModelVariant,
    config: &LocationFitConfig,
    grid: &GridSpec,
) -> Result<CvReport> {
    if data.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "cross-validation needs at least 3 entries, got {}",
            data.len()
        )));
    }
    grid.validate()?;
    let clearance = data.clearance();
    let mut folds = Vec::new();
    let mut skipped = Vec::new();
    for (index, held) in data.entries().iter().enumerate() {
        let mut rest: Vec<LocalisationEntry> = data
            .entries()
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != index)
            .map(|(_, e)| *e)
            .collect();
        rest.sort_by(|a, b| canonical(entry_key(a), entry_key(b)));
        let mut fold_config = config.clone();
        fold_config.swarm.seed = hash_words(config.swarm.seed, entry_key(held));
        let outcome = data
            .with_entries(rest)
            .and_then(|train| fit_location_gp(&train, variant, &fold_config))
            .and_then(|model| {
                let at_truth = model.predict(&[location_input(&held.location)], false)?;
                let noise = match grid.variance {
                    VarianceMode::WithNoise => model.noise_variance(),
                    VarianceMode::Latent => 0.0,
                };
                let v = (at_truth.variance[0] + noise).max(f64::MIN_POSITIVE);
                let m = at_truth.mean[0];
                let log_likelihood = -0.5 * v.ln()
                    - (held.label - m).powi(2) / (2.0 * v)
                    - 0.5 * (2.0 * std::f64::consts::PI).ln();
                let (found, _) = locate(&model, held.label, grid, clearance, held.location.load_angle())?;
                Ok((log_likelihood, found.location))
            });
        match outcome {
            Ok((log_likelihood, predicted)) => {
                let (xa, ya) = metres(&predicted);
                let (xb, yb) = metres(&held.location);
                folds.push(FoldResult {
                    index,
                    label: held.label,
                    truth_rho_m: held.location.rho(),
                    truth_theta_rad: held.location.theta(),
                    predicted_rho_m: predicted.rho(),
                    predicted_theta_rad: predicted.theta(),
                    log_likelihood,
                    rmse: rmse(&predicted, &held.location),
                    rmse_m: (xa - xb).hypot(ya - yb),
                });
            }
            Err(e) => skipped.push(SkippedFold {
                index,
                error: e.to_string(),
            }),
        }
    }
    if folds.is_empty() {
        return Err(Error::InsufficientData(format!(
            "every fold failed; first: {}",
            skipped[0].error
        )));
    }
    // sum in a content order so the averages do not depend on entry order
    let mut ordered: Vec<&FoldResult> = folds.iter().collect();
    ordered.sort_by(|a, b| {
        let key = |f: &FoldResult| [f.truth_rho_m.to_bits(), f.truth_theta_rad.to_bits(), f.label.to_bits()];
        canonical(key(a), key(b))
    });
    let n = folds.len() as f64;
    let mean = |f: fn(&FoldResult) -> f64| ordered.iter().map(|r| f(r)).sum::<f64>() / n;
    Ok(CvReport {
        schema_version: REPORT_SCHEMA_VERSION,
        model: variant,
        averaged_log_likelihood: mean(|f| f.log_likelihood),
        averaged_rmse: mean(|f| f.rmse),
        averaged_rmse_m: mean(|f| f.rmse_m),
        folds,
        skipped,
    })
}
