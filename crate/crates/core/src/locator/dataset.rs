use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::film::{FilmPipeline, FilmResult};
use crate::bearing::{
    short_bearing_equilibrium, BearingGeometry, OperatingPoint, RatioScale, ShaftLocation,
};
use crate::error::{Error, Result};
use crate::seeds::{hash_words, mix_seed};
use crate::ultrasound::{synthesize_scan, AcousticSetup, FilmObservation, ScanSpec};

/// One shaft location with its speed-load label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalisationEntry {
    pub location: ShaftLocation,
    pub label: f64,
    pub operating_point: OperatingPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalisationDataset {
    entries: Vec<LocalisationEntry>,
    scale: RatioScale,
}

impl LocalisationDataset {
    pub fn new(entries: Vec<LocalisationEntry>, scale: RatioScale) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InsufficientData("dataset has no entries".into()));
        }
        if let Some(e) = entries.iter().find(|e| !(e.label.is_finite() && e.label > 0.0)) {
            return Err(Error::InvalidMeasurement(format!("label must be positive, got {}", e.label)));
        }
        Ok(Self { entries, scale })
    }

    pub fn entries(&self) -> &[LocalisationEntry] {
        &self.entries
    }

    pub fn scale(&self) -> &RatioScale {
        &self.scale
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clearance(&self) -> f64 {
        self.entries[0].location.clearance()
    }

    /// Label a new operating point on this dataset's scale.
    pub fn label_for(&self, op: &OperatingPoint) -> f64 {
        self.scale.label(op)
    }

    /// Same scale, different entries.
    pub fn with_entries(&self, entries: Vec<LocalisationEntry>) -> Result<Self> {
        Self::new(entries, self.scale)
    }

    pub fn max_label(&self) -> f64 {
        self.entries.iter().map(|e| e.label).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_label(&self) -> f64 {
        self.entries.iter().map(|e| e.label).fold(f64::INFINITY, f64::min)
    }
}

/// Writes `rho_m,theta_rad,y_ratio,speed_rpm,load_N` rows.
pub fn write_dataset<W: Write>(writer: W, data: &LocalisationDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["rho_m", "theta_rad", "y_ratio", "speed_rpm", "load_N"])?;
    for e in data.entries() {
        w.write_record([
            e.location.rho().to_string(),
            e.location.theta().to_string(),
            e.label.to_string(),
            e.operating_point.speed_rpm().to_string(),
            e.operating_point.load().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset written by [`write_dataset`]. The label scale is recovered
/// from the first row; locations get the given clearance and a zero load angle.
pub fn read_dataset<R: Read>(reader: R, clearance: f64, viscosity: f64) -> Result<LocalisationDataset> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["rho_m", "theta_rad", "y_ratio", "speed_rpm", "load_N"];
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse(format!(
            "line 1: expected header {}, got {}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut entries = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        let line = k + 2;
        let field = |i: usize| -> Result<f64> {
            let raw = record.get(i).unwrap_or("");
            raw.trim().parse::<f64>().map_err(|_| {
                Error::Parse(format!("line {line}: column {} is not a number: {raw:?}", expected[i]))
            })
        };
        let (rho, theta, label, rpm, load) = (field(0)?, field(1)?, field(2)?, field(3)?, field(4)?);
        let at = |e: Error| Error::InvalidMeasurement(format!("line {line}: {e}"));
        let location = ShaftLocation::from_polar(rho, theta, clearance, 0.0).map_err(at)?;
        let operating_point = OperatingPoint::from_rpm(rpm, load, viscosity).map_err(at)?;
        entries.push(LocalisationEntry {
            location,
            label,
            operating_point,
        });
    }
    let first = entries
        .first()
        .ok_or_else(|| Error::InsufficientData("dataset file has no rows".into()))?;
    if !(first.label > 0.0) {
        return Err(Error::InvalidMeasurement("line 2: label must be positive".into()));
    }
    let raw = first.operating_point.speed() / first.operating_point.load();
    let scale = RatioScale::from_raw(raw / first.label)?;
    LocalisationDataset::new(entries, scale)
}

/// Fifteen conditions: 100 to 800 rpm at 10 kN, and 2 to 20 kN at 400 rpm.
pub fn standard_operating_grid(viscosity: f64) -> Result<Vec<OperatingPoint>> {
    let mut ops = Vec::with_capacity(15);
    for rpm in [100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0] {
        ops.push(OperatingPoint::from_rpm(rpm, 10e3, viscosity)?);
    }
    for kn in [2.0, 4.0, 6.0, 8.0, 12.0, 14.0, 20.0] {
        ops.push(OperatingPoint::from_rpm(400.0, kn * 1e3, viscosity)?);
    }
    Ok(ops)
}

/// A simulated revolution at one operating point, with its true location.
#[derive(Debug, Clone)]
pub struct SyntheticRun {
    pub operating_point: OperatingPoint,
    pub truth: ShaftLocation,
    pub observations: Vec<FilmObservation>,
}

/// Scans every operating point at its short-bearing equilibrium, with the
/// load line at `load_angle` from TDC. Run `k` uses a seed derived from `seed`
/// and `k`.
pub fn synthesize_runs(
    geom: &BearingGeometry,
    setup: &AcousticSetup,
    spec: &ScanSpec,
    ops: &[OperatingPoint],
    load_angle: f64,
    seed: u64,
) -> Result<Vec<SyntheticRun>> {
    ops.iter()
        .enumerate()
        .map(|(k, op)| {
            let at_tdc = short_bearing_equilibrium(geom, op);
            let truth = ShaftLocation::new(
                at_tdc.eccentricity_ratio(),
                at_tdc.attitude_angle(),
                load_angle,
                geom.clearance(),
            )?;
            Ok(SyntheticRun {
                operating_point: *op,
                truth,
                observations: synthesize_scan(geom, &truth, setup, spec, mix_seed(seed, k as u64)),
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct RunFailure {
    pub index: usize,
    pub operating_point: OperatingPoint,
    pub error: Error,
}

#[derive(Debug, Clone)]
pub struct DatasetBuild {
    pub dataset: LocalisationDataset,
    /// Film results of the successful runs, by input index.
    pub fits: Vec<(usize, FilmResult)>,
    pub failures: Vec<RunFailure>,
}

/// Runs the film pipeline on every run and labels each recovered location.
///
/// Each run's optimiser seed is derived from the pipeline seed and the run's
/// operating point, so results do not depend on run order. Labels are
/// normalised by the largest speed-load ratio among all runs.
pub fn build_dataset(
    runs: &[(OperatingPoint, Vec<FilmObservation>)],
    geom: &BearingGeometry,
    pipeline: &FilmPipeline,
    load_angle: f64,
) -> Result<DatasetBuild> {
    if runs.is_empty() {
        return Err(Error::InsufficientData("no runs to build a dataset from".into()));
    }
    let scale = RatioScale::normalizing_max(runs.iter().map(|r| &r.0))?;
    let mut entries = Vec::new();
    let mut fits = Vec::new();
    let mut failures = Vec::new();
    for (index, (op, obs)) in runs.iter().enumerate() {
        let seed = hash_words(
            pipeline.fit.swarm.seed,
            [op.speed().to_bits(), op.load().to_bits()],
        );
        match pipeline.with_seed(seed).run(obs, geom, load_angle) {
            Ok(result) => {
                entries.push(LocalisationEntry {
                    location: result.location,
                    label: scale.label(op),
                    operating_point: *op,
                });
                fits.push((index, result));
            }
            Err(error) => failures.push(RunFailure {
                index,
                operating_point: *op,
                error,
            }),
        }
    }
    if entries.is_empty() {
        let first = &failures[0];
        return Err(Error::InsufficientData(format!(
            "all {} runs failed; run {}: {}",
            failures.len(),
            first.index,
            first.error
        )));
    }
    Ok(DatasetBuild {
        dataset: LocalisationDataset::new(entries, scale)?,
        fits,
        failures,
    })
}
