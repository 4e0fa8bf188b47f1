use std::f64::consts::TAU;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use bearing_gp::bearing::OperatingPoint;
use bearing_gp::gp::Input;
use bearing_gp::hyperopt::write_trace;
use bearing_gp::locator::{
    build_dataset as build, fit_location_gp, locate as locate_map, read_dataset, synthesize_runs, write_dataset,
    ModelVariant,
};
use bearing_gp::ultrasound::{read_observations, write_observations, FilmObservation};
use bearing_gp::validation::loocv;
use bearing_gp::{Error, Result};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;
const PREDICTION_POINTS: usize = 720;

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(io_at(path))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(io_at(path))?))
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_at(dir))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(io_at(path))?;
    w.flush().map_err(io_at(path))
}

fn with_context(path: &Path) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn load_observations(path: &Path) -> Result<Vec<FilmObservation>> {
    let meta = fs::metadata(path).map_err(io_at(path))?;
    if meta.len() == 0 {
        return Err(Error::InsufficientData(format!("{} is empty", path.display())));
    }
    read_observations(open(path)?).map_err(with_context(path))
}

pub fn synth(config: &RunConfig, out: &Path) -> Result<()> {
    let geom = config.geometry()?;
    let setup = config.acoustic()?;
    let spec = config.scan()?;
    let ops = config.operating_points()?;
    let load_angle = config.load_angle();
    let runs = synthesize_runs(&geom, &setup, &spec, &ops, load_angle, config.seed)?;
    out_dir(out)?;

    let manifest_path = out.join("runs.csv");
    let mut manifest = csv::Writer::from_writer(create(&manifest_path)?);
    manifest.write_record(["file", "speed_rpm", "load_N"])?;
    let mut truth = Vec::with_capacity(runs.len());
    for (k, run) in runs.iter().enumerate() {
        let name = format!("run_{k:02}.csv");
        write_observations(create(&out.join(&name))?, &run.observations)?;
        let op = &run.operating_point;
        manifest.write_record([name.clone(), op.speed_rpm().to_string(), op.load().to_string()])?;
        truth.push(json!({
            "file": name,
            "speed_rpm": op.speed_rpm(),
            "load_N": op.load(),
            "eccentricity_ratio": run.truth.eccentricity_ratio(),
            "attitude_angle_rad": run.truth.attitude_angle(),
            "rho_m": run.truth.rho(),
            "theta_rad": run.truth.theta(),
        }));
    }
    manifest.flush().map_err(io_at(&manifest_path))?;
    write_json(
        &out.join("truth.json"),
        &json!({
            "schema_version": SUMMARY_SCHEMA_VERSION,
            "seed": config.seed,
            "clearance_m": geom.clearance(),
            "load_angle_rad": load_angle,
            "runs": truth,
        }),
    )
}

pub fn fit_film(config: &RunConfig, obs_path: &Path, out: &Path) -> Result<()> {
    let geom = config.geometry()?;
    let pipeline = config.pipeline()?;
    let obs = load_observations(obs_path)?;
    let result = pipeline.run(&obs, &geom, config.load_angle())?;
    let model = &result.fit.model;
    out_dir(out)?;
    write_json(&out.join("model.json"), &model.to_document())?;
    write_trace(create(&out.join("trace.csv"))?, &result.fit.trace)?;

    // predict on the unwrapped branch nearest the training data
    let xs: Vec<f64> = model
        .training()
        .inputs()
        .iter()
        .filter_map(|x| match x {
            Input::Scalar(v) => Some(*v),
            Input::Polar { .. } => None,
        })
        .collect();
    let centre = xs.iter().sum::<f64>() / xs.len() as f64;
    let angles: Vec<f64> = (0..PREDICTION_POINTS)
        .map(|k| TAU * k as f64 / PREDICTION_POINTS as f64)
        .collect();
    let queries: Vec<Input> = angles
        .iter()
        .map(|a| Input::Scalar(a + TAU * ((centre - a) / TAU).round()))
        .collect();
    let pred = model.predict(&queries, false)?;
    let path = out.join("prediction.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["angle_rad", "mean_m", "std_m"])?;
    for (k, a) in angles.iter().enumerate() {
        w.write_record([
            a.to_string(),
            pred.mean[k].to_string(),
            pred.variance[k].max(0.0).sqrt().to_string(),
        ])?;
    }
    w.flush().map_err(io_at(&path))?;

    let loc = &result.location;
    write_json(
        &out.join("summary.json"),
        &json!({
            "schema_version": SUMMARY_SCHEMA_VERSION,
            "observations": obs.len(),
            "trimmed_observations": result.trimmed.len(),
            "reference_angle_rad": result.reference_angle,
            "log_marginal_likelihood": model.log_marginal_likelihood(),
            "noise_variance_m2": model.noise_variance(),
            "eccentricity_ratio": loc.eccentricity_ratio(),
            "attitude_angle_rad": loc.attitude_angle(),
            "rho_m": loc.rho(),
            "theta_rad": loc.theta(),
        }),
    )
}

#[derive(serde::Deserialize)]
struct ManifestRow {
    file: PathBuf,
    speed_rpm: f64,
    #[serde(rename = "load_N")]
    load_n: f64,
}

pub fn build_dataset(config: &RunConfig, runs_path: &Path, out: &Path) -> Result<()> {
    let geom = config.geometry()?;
    let mu = config.viscosity()?;
    let pipeline = config.pipeline()?;
    let base = runs_path.parent().unwrap_or(Path::new(""));
    let mut rdr = csv::Reader::from_reader(open(runs_path)?);
    let mut runs = Vec::new();
    let mut files = Vec::new();
    for (k, row) in rdr.deserialize::<ManifestRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse(format!("{}: line {}: {e}", runs_path.display(), k + 2)))?;
        let op = OperatingPoint::from_rpm(row.speed_rpm, row.load_n, mu)
            .map_err(|e| Error::InvalidMeasurement(format!("{}: line {}: {e}", runs_path.display(), k + 2)))?;
        let path = base.join(&row.file);
        runs.push((op, load_observations(&path)?));
        files.push(row.file);
    }
    let built = build(&runs, &geom, &pipeline, config.load_angle())?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        out_dir(dir)?;
    }
    write_dataset(create(out)?, &built.dataset)?;

    let fitted: Vec<_> = built
        .fits
        .iter()
        .map(|(i, r)| {
            json!({
                "file": files[*i],
                "eccentricity_ratio": r.location.eccentricity_ratio(),
                "attitude_angle_rad": r.location.attitude_angle(),
                "log_marginal_likelihood": r.fit.model.log_marginal_likelihood(),
            })
        })
        .collect();
    let failed: Vec<_> = built
        .failures
        .iter()
        .map(|f| json!({ "file": files[f.index], "error": f.error.to_string() }))
        .collect();
    let mut report = out.as_os_str().to_owned();
    report.push(".report.json");
    write_json(
        Path::new(&report),
        &json!({
            "schema_version": SUMMARY_SCHEMA_VERSION,
            "runs": runs.len(),
            "fitted": fitted,
            "failed": failed,
        }),
    )
}

fn load_dataset(config: &RunConfig, path: &Path) -> Result<bearing_gp::locator::LocalisationDataset> {
    let geom = config.geometry()?;
    read_dataset(open(path)?, geom.clearance(), config.viscosity()?).map_err(with_context(path))
}

#[allow(clippy::too_many_arguments)]
pub fn locate(
    config: &RunConfig,
    dataset_path: &Path,
    speed: f64,
    load: f64,
    model: ModelVariant,
    out: &Path,
    pgm: bool,
) -> Result<()> {
    let data = load_dataset(config, dataset_path)?;
    let grid = config.grid()?;
    let op = OperatingPoint::new(speed, load, config.viscosity()?)?;
    let label = data.label_for(&op);
    let gp = fit_location_gp(&data, model, &config.location_fit()?)?;
    let (found, map) = locate_map(&gp, label, &grid, data.clearance(), config.load_angle())?;
    out_dir(out)?;
    map.write_csv(create(&out.join("map.csv"))?)?;
    if pgm {
        let path = out.join("map.pgm");
        let mut w = create(&path)?;
        map.write_pgm(&mut w)?;
        w.flush().map_err(io_at(&path))?;
    }
    let loc = &found.location;
    write_json(
        &out.join("summary.json"),
        &json!({
            "schema_version": SUMMARY_SCHEMA_VERSION,
            "model": model,
            "speed_rpm": op.speed_rpm(),
            "load_N": op.load(),
            "label": label,
            "argmax_cell": [found.cell.0, found.cell.1],
            "rho_m": loc.rho(),
            "theta_rad": loc.theta(),
            "eccentricity_ratio": loc.eccentricity_ratio(),
            "attitude_angle_rad": loc.attitude_angle(),
            "log_likelihood": found.log_likelihood,
            "credible_area_fraction": found.credible_area_fraction,
            "noise_variance": gp.noise_variance(),
            "kernel": gp.kernel(),
        }),
    )
}

pub fn validate(config: &RunConfig, dataset_path: &Path, out: &Path) -> Result<()> {
    let data = load_dataset(config, dataset_path)?;
    let grid = config.grid()?;
    let fit = config.location_fit()?;
    let reports = [ModelVariant::A, ModelVariant::B]
        .into_iter()
        .map(|m| loocv(&data, m, &fit, &grid))
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        out_dir(dir)?;
    }
    let mut folds = out.as_os_str().to_owned();
    folds.push(".folds.csv");
    let folds = PathBuf::from(folds);
    let mut w = create(&folds)?;
    let mut first = true;
    for r in &reports {
        let mut buf = Vec::new();
        r.write_csv(&mut buf)?;
        // one header for both models
        let text = String::from_utf8(buf).expect("csv is utf-8");
        let body = if first { &text[..] } else { text.split_once('\n').map_or("", |s| s.1) };
        w.write_all(body.as_bytes()).map_err(io_at(&folds))?;
        first = false;
    }
    w.flush().map_err(io_at(&folds))?;
    write_json(
        out,
        &json!({
            "schema_version": SUMMARY_SCHEMA_VERSION,
            "entries": data.len(),
            "models": reports,
        }),
    )
}
