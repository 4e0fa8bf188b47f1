//! Ultrasonic film-thickness measurement: the quasi-static spring model of a
//! thin lubricant layer, its amplitude and phase inversions, and the
//! resonant-dip relation for thick layers.
//!
//! The layer between media of impedance `z₁` (incident side) and `z₂` acts as a
//! spring of stiffness `K = ρc²/h`, giving the complex reflection coefficient
//!
//! ```text
//! R = (z₂ − z₁ + i a) / (z₂ + z₁ + i a),   a = Ω h z₁ z₂ / (ρ c²)
//! ```
//!
//! `|R|` rises monotonically from `|z₂ − z₁| / (z₂ + z₁)` towards 1 as the film
//! thickens. The phase rises from 0, peaks where `a² = z₂² − z₁²`, then decays
//! back to 0, so the phase inversion is two-valued and the thin-film root is
//! the one used here.

mod scan;

pub use scan::{
    read_observations, synthesize_scan, write_observations, DipBand, FilmObservation, Method,
    NoiseSpec, ScanSpec,
};

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reflection magnitudes above this are no longer stiffness dominated.
pub const AMPLITUDE_CEILING: f64 = 0.98;
/// Phases below this (rad) carry too little information to invert.
pub const PHASE_FLOOR: f64 = 0.01;

/// Acoustic properties of the lubricant and the bounding solids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcousticSetup {
    /// kg/m³
    pub lubricant_density: f64,
    /// m/s
    pub sound_speed: f64,
    /// rad/s
    pub wave_angular_frequency: f64,
    /// Incident-side impedance, kg m⁻² s⁻¹.
    pub impedance_1: f64,
    /// Far-side impedance, kg m⁻² s⁻¹.
    pub impedance_2: f64,
}

impl Default for AcousticSetup {
    /// Mineral oil between an aluminium (incident) and a steel surface,
    /// probed at 0.5 MHz.
    fn default() -> Self {
        Self {
            lubricant_density: 870.0,
            sound_speed: 1500.0,
            wave_angular_frequency: 2.0 * std::f64::consts::PI * 0.5e6,
            impedance_1: 1.7e7,
            impedance_2: 4.6e7,
        }
    }
}

impl AcousticSetup {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lubricant_density", self.lubricant_density),
            ("sound_speed", self.sound_speed),
            ("wave_angular_frequency", self.wave_angular_frequency),
            ("impedance_1", self.impedance_1),
            ("impedance_2", self.impedance_2),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Layer stiffness per unit thickness, `ρc²`.
    fn modulus(&self) -> f64 {
        self.lubricant_density * self.sound_speed * self.sound_speed
    }

    /// `a / h`
    fn spring_factor(&self) -> f64 {
        self.wave_angular_frequency * self.impedance_1 * self.impedance_2 / self.modulus()
    }

    /// `|R|` in the limit of a vanishing film.
    pub fn amplitude_floor(&self) -> f64 {
        let (z1, z2) = (self.impedance_1, self.impedance_2);
        (z2 - z1).abs() / (z2 + z1)
    }

    /// Thickness at which the reflected phase peaks; the thin-film phase root is
    /// only defined below it. `None` when `z₂ ≤ z₁`.
    pub fn phase_peak_thickness(&self) -> Option<f64> {
        let (z1, z2) = (self.impedance_1, self.impedance_2);
        if z2 <= z1 {
            return None;
        }
        Some((z2 * z2 - z1 * z1).sqrt() / self.spring_factor())
    }

    /// Largest thickness the amplitude method resolves before `|R|` reaches the
    /// ceiling.
    pub fn amplitude_ceiling_thickness(&self) -> f64 {
        invert_amplitude_unchecked(self, AMPLITUDE_CEILING)
    }
}

/// One resonant dip: mode order and frequency in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonantDip {
    pub order: u32,
    pub frequency: f64,
}

/// What a transducer reports for one film.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionMeasurement {
    pub reflection_magnitude: f64,
    pub reflection_phase: f64,
    pub resonant_dip_frequencies: Vec<ResonantDip>,
}

/// Complex reflection coefficient of a film of thickness `h`.
pub fn reflection_coefficient(setup: &AcousticSetup, h: f64) -> Complex<f64> {
    let (z1, z2) = (setup.impedance_1, setup.impedance_2);
    let a = setup.spring_factor() * h;
    Complex::new(z2 - z1, a) / Complex::new(z2 + z1, a)
}

/// Spring-model reflection of a film of thickness `h` (no dips).
pub fn forward_reflection(setup: &AcousticSetup, h: f64) -> ReflectionMeasurement {
    let r = reflection_coefficient(setup, h);
    ReflectionMeasurement {
        reflection_magnitude: r.norm(),
        reflection_phase: r.arg(),
        resonant_dip_frequencies: Vec::new(),
    }
}

fn invert_amplitude_unchecked(setup: &AcousticSetup, r: f64) -> f64 {
    let (z1, z2) = (setup.impedance_1, setup.impedance_2);
    let radicand = (r * r * (z2 + z1).powi(2) - (z2 - z1).powi(2)) / (1.0 - r * r);
    radicand.sqrt() / setup.spring_factor()
}

/// Film thickness from the reflection magnitude.
pub fn invert_amplitude(setup: &AcousticSetup, r_mag: f64) -> Result<f64> {
    if !r_mag.is_finite() || r_mag <= 0.0 {
        return Err(Error::InvalidMeasurement(format!("|R| = {r_mag}")));
    }
    if r_mag > AMPLITUDE_CEILING {
        return Err(Error::OutOfRange(format!(
            "|R| = {r_mag} above {AMPLITUDE_CEILING}: film no longer stiffness dominated"
        )));
    }
    let (z1, z2) = (setup.impedance_1, setup.impedance_2);
    if r_mag * r_mag * (z2 + z1).powi(2) - (z2 - z1).powi(2) <= 0.0 {
        return Err(Error::InvalidMeasurement(format!(
            "|R| = {r_mag} at or below the zero-thickness floor {}",
            setup.amplitude_floor()
        )));
    }
    Ok(invert_amplitude_unchecked(setup, r_mag))
}

/// Film thickness from the reflection phase, thin-film root.
///
/// Solving `tan φ = 2 z₁ a / (a² + z₂² − z₁²)` for `a` gives
/// `a = T (z₂² − z₁²) / (z₁ ± √(z₁² − T² (z₂² − z₁²)))`; the `+` root is the one
/// continuous with `h → 0`.
pub fn invert_phase(setup: &AcousticSetup, phi_r: f64) -> Result<f64> {
    if !phi_r.is_finite() {
        return Err(Error::InvalidMeasurement(format!("phase = {phi_r}")));
    }
    if phi_r.abs() < PHASE_FLOOR {
        return Err(Error::OutOfRange(format!(
            "phase {phi_r} rad below {PHASE_FLOOR} rad: film no longer stiffness dominated"
        )));
    }
    let (z1, z2) = (setup.impedance_1, setup.impedance_2);
    let ds = z2 * z2 - z1 * z1;
    if ds <= 0.0 {
        return Err(Error::InvalidMeasurement(
            "phase inversion needs the far-side impedance to exceed the incident one".into(),
        ));
    }
    let t = phi_r.tan();
    if t <= 0.0 {
        return Err(Error::InvalidMeasurement(format!(
            "phase {phi_r} rad has the wrong sign for z₂ > z₁"
        )));
    }
    let disc = z1 * z1 - t * t * ds;
    if disc < 0.0 {
        return Err(Error::InvalidMeasurement(format!(
            "phase {phi_r} rad exceeds the spring-model maximum"
        )));
    }
    let a = t * ds / (z1 + disc.sqrt());
    Ok(a / setup.spring_factor())
}

/// Film thickness from resonant dips via `h = m c / (2 f_m)`.
///
/// Each dip's estimate is weighted by the inverse variance implied by
/// `frequency_std` (Hz). With `frequency_std = 0` the dips are averaged
/// uniformly and must agree to 1e-9 relative.
pub fn invert_resonant_dip(
    setup: &AcousticSetup,
    dips: &[ResonantDip],
    frequency_std: f64,
) -> Result<f64> {
    if dips.is_empty() {
        return Err(Error::NoMeasurement("no resonant dips".into()));
    }
    if !(frequency_std.is_finite() && frequency_std >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "frequency std must be non-negative, got {frequency_std}"
        )));
    }
    for w in dips.windows(2) {
        if w[1].order <= w[0].order {
            return Err(Error::InvalidMeasurement("dip orders must be strictly increasing".into()));
        }
    }
    let mut estimates = Vec::with_capacity(dips.len());
    for dip in dips {
        if dip.order == 0 || !(dip.frequency.is_finite() && dip.frequency > 0.0) {
            return Err(Error::InvalidMeasurement(format!("bad dip {dip:?}")));
        }
        let h = dip.order as f64 * setup.sound_speed / (2.0 * dip.frequency);
        let sigma = h * frequency_std / dip.frequency;
        estimates.push((h, sigma));
    }

    if frequency_std == 0.0 {
        let mean = estimates.iter().map(|e| e.0).sum::<f64>() / estimates.len() as f64;
        if let Some(bad) = estimates.iter().find(|e| (e.0 - mean).abs() > 1e-9 * mean) {
            return Err(Error::InconsistentDips(format!(
                "estimate {} m disagrees with mean {mean} m",
                bad.0
            )));
        }
        return Ok(mean);
    }

    let (num, den) = estimates
        .iter()
        .fold((0.0, 0.0), |(n, d), &(h, s)| (n + h / (s * s), d + 1.0 / (s * s)));
    let mean = num / den;
    if let Some(bad) = estimates.iter().find(|e| (e.0 - mean).abs() > 3.0 * e.1) {
        return Err(Error::InconsistentDips(format!(
            "estimate {} m is more than 3σ ({} m) from the mean {mean} m",
            bad.0, bad.1
        )));
    }
    Ok(mean)
}

/// Dips a film of thickness `h` produces inside the observable band.
pub fn resonant_dips(setup: &AcousticSetup, h: f64, band: &DipBand) -> Vec<ResonantDip> {
    (1..=band.max_order)
        .map(|m| ResonantDip {
            order: m,
            frequency: m as f64 * setup.sound_speed / (2.0 * h),
        })
        .filter(|d| d.frequency >= band.min_frequency && d.frequency <= band.max_frequency)
        .collect()
}
