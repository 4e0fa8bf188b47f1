//! Film observations and the synthetic circumferential scan generator.

use std::f64::consts::TAU;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{
    forward_reflection, invert_amplitude, invert_phase, invert_resonant_dip, resonant_dips,
    AcousticSetup, AMPLITUDE_CEILING, PHASE_FLOOR,
};
use crate::bearing::{film_at_shaft_angle, BearingGeometry, ShaftLocation};
use crate::error::{Error, Result};
use crate::polar::normalize_angle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Amplitude,
    Phase,
    ResonantDip,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Amplitude, Method::Phase, Method::ResonantDip];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Amplitude => "amplitude",
            Method::Phase => "phase",
            Method::ResonantDip => "resonant_dip",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amplitude" => Ok(Method::Amplitude),
            "phase" => Ok(Method::Phase),
            "resonant_dip" => Ok(Method::ResonantDip),
            other => Err(Error::Parse(format!("unknown method `{other}`"))),
        }
    }
}

/// One film-thickness reading at a shaft angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilmObservation {
    shaft_angle: f64,
    thickness: f64,
    method: Method,
    noise_std: f64,
}

impl FilmObservation {
    /// The angle is wrapped into `[0, 2π)`.
    pub fn new(shaft_angle: f64, thickness: f64, method: Method, noise_std: f64) -> Result<Self> {
        if !shaft_angle.is_finite() {
            return Err(Error::InvalidMeasurement(format!("angle {shaft_angle}")));
        }
        if !(thickness.is_finite() && thickness > 0.0) {
            return Err(Error::InvalidMeasurement(format!(
                "thickness must be positive, got {thickness}"
            )));
        }
        if !(noise_std.is_finite() && noise_std >= 0.0) {
            return Err(Error::InvalidMeasurement(format!("noise std {noise_std}")));
        }
        Ok(Self {
            shaft_angle: normalize_angle(shaft_angle),
            thickness,
            method,
            noise_std,
        })
    }

    pub fn shaft_angle(&self) -> f64 {
        self.shaft_angle
    }

    pub fn thickness(&self) -> f64 {
        self.thickness
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }
}

/// Frequency window in which resonant dips can be resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipBand {
    /// Hz
    pub min_frequency: f64,
    /// Hz
    pub max_frequency: f64,
    /// Higher orders blend into the noise floor.
    pub max_order: u32,
}

impl Default for DipBand {
    fn default() -> Self {
        Self {
            min_frequency: 2e6,
            max_frequency: 30e6,
            max_order: 3,
        }
    }
}

/// Per-method thickness-equivalent Gaussian noise, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub amplitude_std: f64,
    pub phase_std: f64,
    pub resonant_dip_std: f64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self::uniform(0.0)
    }

    pub fn uniform(std: f64) -> Self {
        Self {
            amplitude_std: std,
            phase_std: std,
            resonant_dip_std: std,
        }
    }

    pub fn std_for(&self, method: Method) -> f64 {
        match method {
            Method::Amplitude => self.amplitude_std,
            Method::Phase => self.phase_std,
            Method::ResonantDip => self.resonant_dip_std,
        }
    }
}

/// How a synthetic scan is sampled and where each method goes blind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    /// Equally spaced shaft angles per revolution.
    pub n_angles: usize,
    pub methods: Vec<Method>,
    pub noise: NoiseSpec,
    pub dip_band: DipBand,
    /// Phase readings are kept only below this fraction of the phase-peak
    /// thickness, where the thin-film root is unambiguous.
    pub phase_branch_fraction: f64,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            n_angles: 10_000,
            methods: Method::ALL.to_vec(),
            noise: NoiseSpec::none(),
            dip_band: DipBand::default(),
            phase_branch_fraction: 0.9,
        }
    }
}

impl ScanSpec {
    /// Thickness interval `[lo, hi]` over which `method` yields readings at the
    /// given setup.
    pub fn valid_band(&self, setup: &AcousticSetup, method: Method) -> (f64, f64) {
        match method {
            Method::Amplitude => (0.0, setup.amplitude_ceiling_thickness()),
            Method::Phase => {
                let peak = setup.phase_peak_thickness().unwrap_or(0.0);
                let floor = phase_floor_thickness(setup);
                (floor, self.phase_branch_fraction * peak)
            }
            Method::ResonantDip => {
                let c = setup.sound_speed;
                (
                    c / (2.0 * self.dip_band.max_frequency),
                    self.dip_band.max_order as f64 * c / (2.0 * self.dip_band.min_frequency),
                )
            }
        }
    }

    fn read(&self, setup: &AcousticSetup, method: Method, h: f64) -> Option<f64> {
        if h <= 0.0 {
            return None;
        }
        match method {
            Method::Amplitude => {
                let r = forward_reflection(setup, h).reflection_magnitude;
                if r > AMPLITUDE_CEILING {
                    return None;
                }
                invert_amplitude(setup, r).ok()
            }
            Method::Phase => {
                let peak = setup.phase_peak_thickness()?;
                if h > self.phase_branch_fraction * peak {
                    return None;
                }
                let phi = forward_reflection(setup, h).reflection_phase;
                if phi < PHASE_FLOOR {
                    return None;
                }
                invert_phase(setup, phi).ok()
            }
            Method::ResonantDip => {
                let dips = resonant_dips(setup, h, &self.dip_band);
                invert_resonant_dip(setup, &dips, 0.0).ok()
            }
        }
    }
}

/// Smallest thickness whose phase clears the phase floor.
fn phase_floor_thickness(setup: &AcousticSetup) -> f64 {
    let Some(peak) = setup.phase_peak_thickness() else {
        return f64::INFINITY;
    };
    let (mut lo, mut hi) = (0.0, peak);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if forward_reflection(setup, mid).reflection_phase < PHASE_FLOOR {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Simulates one revolution of ultrasonic readings.
///
/// At each of `n_angles` shaft angles the true film comes from the geometric
/// model; each method sees it perturbed by its own Gaussian noise, converts it
/// to the acoustic quantity it measures, and inverts that back to a thickness.
/// Readings outside a method's validity band are dropped, which leaves the
/// dead zones. A noise draw is consumed for every (angle, method) pair whether
/// or not it survives, so the stream is fixed by the seed alone.
pub fn synthesize_scan(
    geom: &BearingGeometry,
    loc: &ShaftLocation,
    setup: &AcousticSetup,
    spec: &ScanSpec,
    seed: u64,
) -> Vec<FilmObservation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for k in 0..spec.n_angles {
        let angle = TAU * k as f64 / spec.n_angles as f64;
        let truth = film_at_shaft_angle(geom, loc, angle);
        for &method in &spec.methods {
            let std = spec.noise.std_for(method);
            let z: f64 = StandardNormal.sample(&mut rng);
            let h = truth + std * z;
            if let Some(measured) = spec.read(setup, method, h) {
                if let Ok(obs) = FilmObservation::new(angle, measured, method, std) {
                    out.push(obs);
                }
            }
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct ObservationRow {
    angle_rad: f64,
    thickness_m: f64,
    method: String,
    noise_std_m: f64,
}

/// Writes `angle_rad,thickness_m,method,noise_std_m` rows.
pub fn write_observations<W: Write>(writer: W, obs: &[FilmObservation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for o in obs {
        w.serialize(ObservationRow {
            angle_rad: o.shaft_angle,
            thickness_m: o.thickness,
            method: o.method.to_string(),
            noise_std_m: o.noise_std,
        })?;
    }
    // header must appear even for an empty file
    if obs.is_empty() {
        w.write_record(["angle_rad", "thickness_m", "method", "noise_std_m"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_observations<R: Read>(reader: R) -> Result<Vec<FilmObservation>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["angle_rad", "thickness_m", "method", "noise_std_m"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse(format!(
            "line 1: expected header {}, got {}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize::<ObservationRow>() {
        let row = row?;
        let line = out.len() + 2;
        let method: Method = row
            .method
            .parse()
            .map_err(|e: Error| Error::Parse(format!("line {line}: {e}")))?;
        let obs = FilmObservation::new(row.angle_rad, row.thickness_m, method, row.noise_std_m)
            .map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        out.push(obs);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polar::geodesic_distance;

    fn scan(eps: f64, attitude: f64, noise: f64, n: usize, seed: u64) -> Vec<FilmObservation> {
        let g = BearingGeometry::default();
        let loc = ShaftLocation::new(eps, attitude, 0.0, g.clearance()).unwrap();
        let spec = ScanSpec {
            n_angles: n,
            noise: NoiseSpec::uniform(noise),
            ..ScanSpec::default()
        };
        synthesize_scan(&g, &loc, &AcousticSetup::default(), &spec, seed)
    }

    #[test]
    fn concentric_noiseless_scan_reads_clearance() {
        let obs = scan(0.0, 0.0, 0.0, 360, 1);
        assert!(!obs.is_empty());
        for o in &obs {
            assert!((o.thickness() - 100e-6).abs() < 1e-6 * 100e-6, "{o:?}");
        }
    }

    #[test]
    fn amplitude_vanishes_above_its_ceiling() {
        // large clearance pushes part of the film past the amplitude ceiling
        let g = BearingGeometry::from_clearance(0.05, 200e-6, 0.08).unwrap();
        let setup = AcousticSetup::default();
        let ceiling = setup.amplitude_ceiling_thickness();
        let loc = ShaftLocation::new(0.5, 0.3, 0.0, g.clearance()).unwrap();
        let spec = ScanSpec {
            n_angles: 720,
            methods: vec![Method::Amplitude],
            ..ScanSpec::default()
        };
        let obs = synthesize_scan(&g, &loc, &setup, &spec, 3);
        assert!(obs.len() < 720 && !obs.is_empty());
        for k in 0..720 {
            let angle = TAU * k as f64 / 720.0;
            let truth = film_at_shaft_angle(&g, &loc, angle);
            let present = obs.iter().any(|o| o.shaft_angle() == angle);
            assert_eq!(present, truth <= ceiling, "angle {angle} truth {truth}");
        }
    }

    #[test]
    fn scan_is_deterministic() {
        let a = scan(0.5, 0.4, 2e-6, 500, 42);
        let b = scan(0.5, 0.4, 2e-6, 500, 42);
        assert_eq!(a, b);
        let c = scan(0.5, 0.4, 2e-6, 500, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn phase_and_dip_cover_trim_window_at_high_eccentricity() {
        let attitude = 0.6;
        let obs = scan(0.6, attitude, 0.0, 3600, 0);
        let half = 18f64.to_radians();
        for k in 0..3600 {
            let angle = TAU * k as f64 / 3600.0;
            if geodesic_distance(angle, attitude) > half {
                continue;
            }
            let covered = obs.iter().any(|o| {
                o.shaft_angle() == angle && matches!(o.method(), Method::Phase | Method::ResonantDip)
            });
            assert!(covered, "gap at {angle}");
        }
    }

    #[test]
    fn default_bands_cover_thin_to_thick_films() {
        let setup = AcousticSetup::default();
        let spec = ScanSpec::default();
        let mut bands: Vec<(f64, f64)> =
            Method::ALL.iter().map(|&m| spec.valid_band(&setup, m)).collect();
        bands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut reach = 0.1e-6;
        for (lo, hi) in bands {
            assert!(lo <= reach, "gap between {reach} and {lo}");
            reach = reach.max(hi);
        }
        assert!(reach >= 500e-6);
        // the phase and dip bands alone overlap as well
        let phase = spec.valid_band(&setup, Method::Phase);
        let dip = spec.valid_band(&setup, Method::ResonantDip);
        assert!(dip.0 < phase.1);
    }

    #[test]
    fn csv_round_trip_and_line_numbers() {
        let obs = scan(0.3, 1.0, 1e-6, 50, 9);
        let mut buf = Vec::new();
        write_observations(&mut buf, &obs).unwrap();
        let back = read_observations(buf.as_slice()).unwrap();
        assert_eq!(back, obs);

        let text = "angle_rad,thickness_m,method,noise_std_m\n0.1,1e-5,phase,0\n0.2,oops,phase,0\n";
        let err = read_observations(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let text = "angle_rad,thickness_m,method,noise_std_m\n0.1,1e-5,sonar,0\n";
        let err = read_observations(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");

        let mut empty = Vec::new();
        write_observations(&mut empty, &[]).unwrap();
        assert!(read_observations(empty.as_slice()).unwrap().is_empty());
    }
}
