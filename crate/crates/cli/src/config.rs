//! Run configuration. Every physical key carries its unit in the name.

use std::path::Path;

use bearing_gp::bearing::{BearingGeometry, OperatingPoint};
use bearing_gp::gp::KernelSpec;
use bearing_gp::hyperopt::SwarmConfig;
use bearing_gp::locator::{
    standard_operating_grid, FilmFitConfig, FilmNoise, FilmPipeline, GridExtent, GridSpec, LocationFitConfig,
    VarianceMode,
};
use bearing_gp::ultrasound::{AcousticSetup, DipBand, Method, NoiseSpec, ScanSpec};
use bearing_gp::{Error, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub geometry: GeometryBlock,
    pub lubricant: LubricantBlock,
    pub acoustic: AcousticBlock,
    pub scan: ScanBlock,
    pub operating: OperatingBlock,
    pub film: FilmBlock,
    pub location: LocationBlock,
    pub grid: GridBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            geometry: GeometryBlock::default(),
            lubricant: LubricantBlock::default(),
            acoustic: AcousticBlock::default(),
            scan: ScanBlock::default(),
            operating: OperatingBlock::default(),
            film: FilmBlock::default(),
            location: LocationBlock::default(),
            grid: GridBlock::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryBlock {
    pub shaft_radius_mm: f64,
    pub clearance_um: f64,
    pub length_mm: f64,
    /// Direction of the applied load, from TDC.
    pub load_angle_deg: f64,
}

impl Default for GeometryBlock {
    fn default() -> Self {
        Self {
            shaft_radius_mm: 50.0,
            clearance_um: 100.0,
            length_mm: 80.0,
            load_angle_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LubricantBlock {
    pub viscosity_pa_s: f64,
}

impl Default for LubricantBlock {
    fn default() -> Self {
        Self { viscosity_pa_s: 0.05 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcousticBlock {
    pub density_kg_m3: f64,
    pub sound_speed_m_s: f64,
    pub frequency_mhz: f64,
    pub impedance_1_rayl: f64,
    pub impedance_2_rayl: f64,
    pub dip_min_mhz: f64,
    pub dip_max_mhz: f64,
    pub dip_max_order: u32,
}

impl Default for AcousticBlock {
    fn default() -> Self {
        let a = AcousticSetup::default();
        let d = DipBand::default();
        Self {
            density_kg_m3: a.lubricant_density,
            sound_speed_m_s: a.sound_speed,
            frequency_mhz: a.wave_angular_frequency / (2.0 * std::f64::consts::PI) / 1e6,
            impedance_1_rayl: a.impedance_1,
            impedance_2_rayl: a.impedance_2,
            dip_min_mhz: d.min_frequency / 1e6,
            dip_max_mhz: d.max_frequency / 1e6,
            dip_max_order: d.max_order,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanBlock {
    pub n_angles: usize,
    pub methods: Vec<Method>,
    pub amplitude_noise_um: f64,
    pub phase_noise_um: f64,
    pub resonant_dip_noise_um: f64,
    pub phase_branch_fraction: f64,
}

impl Default for ScanBlock {
    fn default() -> Self {
        Self {
            n_angles: 3600,
            methods: Method::ALL.to_vec(),
            amplitude_noise_um: 1.0,
            phase_noise_um: 1.0,
            resonant_dip_noise_um: 1.0,
            phase_branch_fraction: 0.9,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionEntry {
    pub speed_rpm: f64,
    pub load_kn: f64,
}

/// Operating conditions to simulate; the fifteen-run grid unless listed.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatingBlock {
    pub conditions: Vec<ConditionEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    Periodic,
    SquaredExponential,
    Matern32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseChoice {
    Reported,
    Estimate,
    Fixed,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerBlock {
    pub particles: usize,
    pub iterations: usize,
    pub restarts: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub tolerance: f64,
    pub stall_iterations: usize,
}

impl Default for OptimizerBlock {
    fn default() -> Self {
        let s = SwarmConfig::default();
        Self {
            particles: s.particle_count,
            iterations: s.max_iterations,
            restarts: s.restarts,
            beta_start: s.beta_start,
            beta_end: s.beta_end,
            tolerance: s.tolerance,
            stall_iterations: s.stall_iterations,
        }
    }
}

impl OptimizerBlock {
    fn light() -> Self {
        Self {
            particles: 20,
            iterations: 60,
            restarts: 1,
            ..Self::default()
        }
    }

    fn swarm(&self, seed: u64) -> Result<SwarmConfig> {
        let s = SwarmConfig {
            particle_count: self.particles,
            max_iterations: self.iterations,
            restarts: self.restarts,
            beta_start: self.beta_start,
            beta_end: self.beta_end,
            tolerance: self.tolerance,
            stall_iterations: self.stall_iterations,
            seed,
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilmBlock {
    pub kernel: KernelChoice,
    pub trim_half_width_deg: f64,
    pub reference_half_width_deg: f64,
    pub methods: Vec<Method>,
    pub tuning_points: usize,
    pub noise: NoiseChoice,
    /// Used when `noise = "fixed"`.
    pub noise_um: f64,
    pub optimizer: OptimizerBlock,
}

impl Default for FilmBlock {
    fn default() -> Self {
        let p = FilmPipeline::default();
        Self {
            kernel: KernelChoice::Periodic,
            trim_half_width_deg: p.trim_half_width.to_degrees(),
            reference_half_width_deg: p.reference_half_width.to_degrees(),
            methods: p.methods,
            tuning_points: p.fit.tuning_points,
            noise: NoiseChoice::Reported,
            noise_um: 1.0,
            optimizer: OptimizerBlock::light(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocationBlock {
    pub degree: u32,
    /// Pins the label noise variance instead of tuning it.
    pub noise_variance: Option<f64>,
    pub optimizer: OptimizerBlock,
}

impl Default for LocationBlock {
    fn default() -> Self {
        Self {
            degree: 2,
            noise_variance: None,
            optimizer: OptimizerBlock::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtentChoice {
    Quadrant,
    FullCircle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceChoice {
    WithNoise,
    Latent,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridBlock {
    pub n_rho: usize,
    pub n_theta: usize,
    pub extent: ExtentChoice,
    pub variance: VarianceChoice,
}

impl Default for GridBlock {
    fn default() -> Self {
        Self {
            n_rho: 60,
            n_theta: 90,
            extent: ExtentChoice::Quadrant,
            variance: VarianceChoice::WithNoise,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| {
            Error::InvalidParameter(format!("{}: {}", path.display(), e.to_string().replace('\n', " ")))
        })
    }

    pub fn geometry(&self) -> Result<BearingGeometry> {
        let g = &self.geometry;
        BearingGeometry::from_clearance(
            positive("geometry.shaft_radius_mm", g.shaft_radius_mm)? * 1e-3,
            positive("geometry.clearance_um", g.clearance_um)? * 1e-6,
            positive("geometry.length_mm", g.length_mm)? * 1e-3,
        )
    }

    pub fn load_angle(&self) -> f64 {
        self.geometry.load_angle_deg.to_radians()
    }

    pub fn viscosity(&self) -> Result<f64> {
        positive("lubricant.viscosity_pa_s", self.lubricant.viscosity_pa_s)
    }

    pub fn acoustic(&self) -> Result<AcousticSetup> {
        let a = &self.acoustic;
        let setup = AcousticSetup {
            lubricant_density: a.density_kg_m3,
            sound_speed: a.sound_speed_m_s,
            wave_angular_frequency: 2.0 * std::f64::consts::PI * a.frequency_mhz * 1e6,
            impedance_1: a.impedance_1_rayl,
            impedance_2: a.impedance_2_rayl,
        };
        setup.validate()?;
        Ok(setup)
    }

    pub fn scan(&self) -> Result<ScanSpec> {
        let s = &self.scan;
        let a = &self.acoustic;
        if s.n_angles == 0 {
            return Err(Error::InvalidParameter("scan.n_angles must be at least 1".into()));
        }
        for (name, v) in [
            ("scan.amplitude_noise_um", s.amplitude_noise_um),
            ("scan.phase_noise_um", s.phase_noise_um),
            ("scan.resonant_dip_noise_um", s.resonant_dip_noise_um),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(a.dip_min_mhz > 0.0 && a.dip_max_mhz > a.dip_min_mhz && a.dip_max_order >= 1) {
            return Err(Error::InvalidParameter("acoustic dip band is empty".into()));
        }
        if !(s.phase_branch_fraction > 0.0 && s.phase_branch_fraction <= 1.0) {
            return Err(Error::InvalidParameter("scan.phase_branch_fraction must lie in (0, 1]".into()));
        }
        Ok(ScanSpec {
            n_angles: s.n_angles,
            methods: s.methods.clone(),
            noise: NoiseSpec {
                amplitude_std: s.amplitude_noise_um * 1e-6,
                phase_std: s.phase_noise_um * 1e-6,
                resonant_dip_std: s.resonant_dip_noise_um * 1e-6,
            },
            dip_band: DipBand {
                min_frequency: a.dip_min_mhz * 1e6,
                max_frequency: a.dip_max_mhz * 1e6,
                max_order: a.dip_max_order,
            },
            phase_branch_fraction: s.phase_branch_fraction,
        })
    }

    pub fn operating_points(&self) -> Result<Vec<OperatingPoint>> {
        let mu = self.viscosity()?;
        if self.operating.conditions.is_empty() {
            return standard_operating_grid(mu);
        }
        self.operating
            .conditions
            .iter()
            .map(|c| OperatingPoint::from_rpm(c.speed_rpm, c.load_kn * 1e3, mu))
            .collect()
    }

    pub fn pipeline(&self) -> Result<FilmPipeline> {
        let f = &self.film;
        let kernel = match f.kernel {
            KernelChoice::Periodic => KernelSpec::periodic(1.0, 1.0, std::f64::consts::TAU),
            KernelChoice::SquaredExponential => KernelSpec::squared_exponential(1.0, 1.0),
            KernelChoice::Matern32 => KernelSpec::matern32(1.0, 1.0),
        };
        let noise = match f.noise {
            NoiseChoice::Reported => FilmNoise::Reported,
            NoiseChoice::Estimate => FilmNoise::Estimate,
            NoiseChoice::Fixed => FilmNoise::Fixed {
                variance: (positive("film.noise_um", f.noise_um)? * 1e-6).powi(2),
            },
        };
        if f.tuning_points < 3 {
            return Err(Error::InvalidParameter("film.tuning_points must be at least 3".into()));
        }
        if f.methods.is_empty() {
            return Err(Error::InvalidParameter("film.methods is empty".into()));
        }
        Ok(FilmPipeline {
            kernel,
            fit: FilmFitConfig {
                swarm: f.optimizer.swarm(self.seed)?,
                tuning_points: f.tuning_points,
                noise,
            },
            trim_half_width: positive("film.trim_half_width_deg", f.trim_half_width_deg)?.to_radians(),
            reference_half_width: positive("film.reference_half_width_deg", f.reference_half_width_deg)?
                .to_radians(),
            methods: f.methods.clone(),
        })
    }

    pub fn location_fit(&self) -> Result<LocationFitConfig> {
        let l = &self.location;
        if l.degree == 0 {
            return Err(Error::InvalidParameter("location.degree must be at least 1".into()));
        }
        if let Some(v) = l.noise_variance {
            positive("location.noise_variance", v)?;
        }
        Ok(LocationFitConfig {
            swarm: l.optimizer.swarm(self.seed)?,
            degree: l.degree,
            noise_variance: l.noise_variance,
        })
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let g = &self.grid;
        let spec = GridSpec {
            n_rho: g.n_rho,
            n_theta: g.n_theta,
            extent: match g.extent {
                ExtentChoice::Quadrant => GridExtent::Quadrant,
                ExtentChoice::FullCircle => GridExtent::FullCircle,
            },
            variance: match g.variance {
                VarianceChoice::WithNoise => VarianceMode::WithNoise,
                VarianceChoice::Latent => VarianceMode::Latent,
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}
