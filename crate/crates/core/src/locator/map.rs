use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::dataset::LocalisationDataset;
use crate::bearing::ShaftLocation;
use crate::error::{Error, Result};
use crate::gp::{GpModel, Input, KernelSpec, TrainingSet};
use crate::hyperopt::{tune_gp, NoisePrior, SwarmConfig};

/// The two polar kernels compared for localisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelVariant {
    /// Polynomial-decay radial kernel.
    A,
    /// Matérn 3/2 radial kernel.
    B,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 2] = [ModelVariant::A, ModelVariant::B];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelVariant::A => "A",
            ModelVariant::B => "B",
        }
    }

    fn template(&self, degree: u32) -> KernelSpec {
        match self {
            ModelVariant::A => KernelSpec::anova_pol(1.0, 1.0, 1.0, 0.5, degree),
            ModelVariant::B => KernelSpec::anova_matern(1.0, 1.0, 1.0, 0.5),
        }
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        // the angular weight keeps a floor so the map never loses its θ structure
        let common = [(1e-3, 1e2), (1e-3, 1e3), (0.1, 1e3)];
        let radial = match self {
            ModelVariant::A => (0.05, 2.0),
            ModelVariant::B => (0.02, 5.0),
        };
        let mut b = common.to_vec();
        b.push(radial);
        b
    }
}

impl std::fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(ModelVariant::A),
            "B" | "b" => Ok(ModelVariant::B),
            other => Err(Error::InvalidParameter(format!("unknown model variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationFitConfig {
    pub swarm: SwarmConfig,
    /// Polynomial degree of the Model A radial kernel.
    pub degree: u32,
    /// Pins the label-noise variance instead of searching for it.
    pub noise_variance: Option<f64>,
}

impl Default for LocationFitConfig {
    fn default() -> Self {
        Self {
            swarm: SwarmConfig::default(),
            degree: 2,
            noise_variance: None,
        }
    }
}

/// GP input for a shaft location: eccentricity ratio and angle from TDC.
pub fn location_input(loc: &ShaftLocation) -> Input {
    Input::Polar {
        rho: loc.eccentricity_ratio(),
        theta: loc.theta(),
    }
}

#[derive(Debug, Clone)]
pub struct LocationFit {
    pub model: GpModel,
    pub trace: Vec<f64>,
}

/// Fits the polar GP from shaft location to label with a zero prior mean.
pub fn fit_location_gp(data: &LocalisationDataset, variant: ModelVariant, config: &LocationFitConfig) -> Result<GpModel> {
    fit_location_gp_traced(data, variant, config).map(|f| f.model)
}

pub fn fit_location_gp_traced(
    data: &LocalisationDataset,
    variant: ModelVariant,
    config: &LocationFitConfig,
) -> Result<LocationFit> {
    if data.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "location model needs at least 2 entries, got {}",
            data.len()
        )));
    }
    let inputs: Vec<Input> = data.entries().iter().map(|e| location_input(&e.location)).collect();
    let targets: Vec<f64> = data.entries().iter().map(|e| e.label).collect();
    let noise = match config.noise_variance {
        Some(v) => NoisePrior::Fixed(v),
        None => NoisePrior::Free {
            lower: 1e-4,
            upper: 1e-1,
        },
    };
    let tuned = tune_gp(
        &variant.template(config.degree),
        &inputs,
        &targets,
        0.0,
        &variant.bounds(),
        noise,
        &config.swarm,
    )?;
    let training = TrainingSet::new(inputs, targets, tuned.noise_variance)?;
    Ok(LocationFit {
        model: GpModel::fit(tuned.kernel, training)?,
        trace: tuned.result.trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridExtent {
    /// `θ ∈ [0, π/2]`.
    Quadrant,
    FullCircle,
}

impl GridExtent {
    fn span(&self) -> f64 {
        match self {
            GridExtent::Quadrant => FRAC_PI_2,
            GridExtent::FullCircle => TAU,
        }
    }
}

/// Which predictive variance enters the map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    /// Latent variance plus observation noise.
    WithNoise,
    /// Latent variance only.
    Latent,
}

/// Cell-centred polar lattice: `ρ_i = c (i + ½)/n_ρ`, `θ_j = span (j + ½)/n_θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_rho: usize,
    pub n_theta: usize,
    pub extent: GridExtent,
    pub variance: VarianceMode,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_rho: 60,
            n_theta: 90,
            extent: GridExtent::Quadrant,
            variance: VarianceMode::WithNoise,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_rho == 0 || self.n_theta == 0 {
            return Err(Error::InvalidParameter(format!(
                "grid resolution must be positive, got {} x {}",
                self.n_rho, self.n_theta
            )));
        }
        Ok(())
    }

    /// Normalised radius `ρ/c` of row `i`.
    pub fn rho_ratio(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.n_rho as f64
    }

    pub fn theta(&self, j: usize) -> f64 {
        self.extent.span() * (j as f64 + 0.5) / self.n_theta as f64
    }

    /// Nearest node to a location; angles outside a quadrant grid snap to its
    /// edge.
    pub fn cell_of(&self, loc: &ShaftLocation) -> (usize, usize) {
        let i = (loc.eccentricity_ratio() * self.n_rho as f64).floor() as isize;
        let span = self.extent.span();
        let mut t = loc.theta();
        if self.extent == GridExtent::Quadrant && t > span {
            // closer to the far edge or wrapped round to θ = 0
            t = if t - span < TAU - t { span } else { 0.0 };
        }
        let j = (t / span * self.n_theta as f64).floor() as isize;
        (
            i.clamp(0, self.n_rho as isize - 1) as usize,
            j.clamp(0, self.n_theta as isize - 1) as usize,
        )
    }

    /// Cell distance in each index; θ wraps on a full-circle grid.
    pub fn cell_offset(&self, a: (usize, usize), b: (usize, usize)) -> (usize, usize) {
        let di = a.0.abs_diff(b.0);
        let mut dj = a.1.abs_diff(b.1);
        if self.extent == GridExtent::FullCircle {
            dj = dj.min(self.n_theta - dj);
        }
        (di, dj)
    }
}

/// Log-likelihood of a queried label at every grid node, rows ordered by ρ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodMap {
    pub grid: GridSpec,
    pub clearance: f64,
    pub query: f64,
    pub values: Vec<f64>,
    pub argmax: usize,
}

impl LikelihoodMap {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_theta + j]
    }

    pub fn argmax_cell(&self) -> (usize, usize) {
        (self.argmax / self.grid.n_theta, self.argmax % self.grid.n_theta)
    }

    pub fn max_value(&self) -> f64 {
        self.values[self.argmax]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn node_location(&self, i: usize, j: usize, load_angle: f64) -> Result<ShaftLocation> {
        ShaftLocation::from_polar(
            self.grid.rho_ratio(i) * self.clearance,
            self.grid.theta(j),
            self.clearance,
            load_angle,
        )
    }

    /// Share of the grid's area within `drop` nats of the maximum; each node
    /// weighs by its radius.
    pub fn credible_area_fraction(&self, drop: f64) -> f64 {
        let threshold = self.max_value() - drop;
        let (mut inside, mut total) = (0.0, 0.0);
        for i in 0..self.grid.n_rho {
            let w = self.grid.rho_ratio(i);
            for j in 0..self.grid.n_theta {
                total += w;
                if self.value(i, j) >= threshold {
                    inside += w;
                }
            }
        }
        inside / total
    }

    /// `rho_m,theta_rad,loglik` rows, ρ outer.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["rho_m", "theta_rad", "loglik"])?;
        for i in 0..self.grid.n_rho {
            let rho = self.grid.rho_ratio(i) * self.clearance;
            for j in 0..self.grid.n_theta {
                w.write_record([
                    rho.to_string(),
                    self.grid.theta(j).to_string(),
                    self.value(i, j).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Binary greymap, `n_θ` wide and `n_ρ` high, scaled from the minimum
    /// (black) to the maximum (white).
    pub fn write_pgm<W: Write>(&self, mut writer: W) -> Result<()> {
        let (lo, hi) = (self.min_value(), self.max_value());
        write!(writer, "P5\n{} {}\n255\n", self.grid.n_theta, self.grid.n_rho)?;
        let pixels: Vec<u8> = self
            .values
            .iter()
            .map(|v| {
                if hi > lo {
                    (255.0 * (v - lo) / (hi - lo)).round() as u8
                } else {
                    255
                }
            })
            .collect();
        writer.write_all(&pixels)?;
        Ok(())
    }
}

fn gaussian_log_pdf(y: f64, mean: f64, variance: f64) -> f64 {
    -0.5 * variance.ln() - (y - mean).powi(2) / (2.0 * variance) - 0.5 * (2.0 * PI).ln()
}

/// Scores `y_new` at every node of `grid` under the model's predictive
/// distribution. `clearance` converts the normalised grid radius to metres.
pub fn likelihood_map(model: &GpModel, y_new: f64, grid: &GridSpec, clearance: f64) -> Result<LikelihoodMap> {
    grid.validate()?;
    if !(y_new.is_finite() && y_new > 0.0) {
        return Err(Error::InvalidParameter(format!("query label must be positive, got {y_new}")));
    }
    if !(clearance.is_finite() && clearance > 0.0) {
        return Err(Error::InvalidParameter(format!("clearance must be positive, got {clearance}")));
    }
    let mut nodes = Vec::with_capacity(grid.n_rho * grid.n_theta);
    for i in 0..grid.n_rho {
        for j in 0..grid.n_theta {
            nodes.push(Input::Polar {
                rho: grid.rho_ratio(i),
                theta: grid.theta(j),
            });
        }
    }
    let pred = model.predict(&nodes, false)?;
    let noise = match grid.variance {
        VarianceMode::WithNoise => model.noise_variance(),
        VarianceMode::Latent => 0.0,
    };
    let values: Vec<f64> = pred
        .mean
        .iter()
        .zip(&pred.variance)
        .map(|(m, v)| gaussian_log_pdf(y_new, *m, (v + noise).max(f64::MIN_POSITIVE)))
        .collect();
    let argmax = values
        .iter()
        .enumerate()
        .fold(0, |best, (k, v)| if *v > values[best] { k } else { best });
    Ok(LikelihoodMap {
        grid: *grid,
        clearance,
        query: y_new,
        values,
        argmax,
    })
}

/// Maximum-likelihood location for a queried label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Localisation {
    pub location: ShaftLocation,
    pub cell: (usize, usize),
    pub log_likelihood: f64,
    /// Area fraction of the grid within 2 nats of the maximum.
    pub credible_area_fraction: f64,
}

pub fn locate(
    model: &GpModel,
    y_new: f64,
    grid: &GridSpec,
    clearance: f64,
    load_angle: f64,
) -> Result<(Localisation, LikelihoodMap)> {
    let map = likelihood_map(model, y_new, grid, clearance)?;
    let cell = map.argmax_cell();
    let loc = Localisation {
        location: map.node_location(cell.0, cell.1, load_angle)?,
        cell,
        log_likelihood: map.max_value(),
        credible_area_fraction: map.credible_area_fraction(2.0),
    };
    Ok((loc, map))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nodes_are_cell_centred() {
        let g = GridSpec::default();
        assert!((g.rho_ratio(0) - 0.5 / 60.0).abs() < 1e-15);
        assert!((g.theta(89) - FRAC_PI_2 * 89.5 / 90.0).abs() < 1e-15);
        let c = 1e-4;
        let loc = ShaftLocation::from_polar(g.rho_ratio(7) * c, g.theta(33), c, 0.0).unwrap();
        assert_eq!(g.cell_of(&loc), (7, 33));
        let full = GridSpec {
            extent: GridExtent::FullCircle,
            ..g
        };
        assert_eq!(full.cell_offset((0, 0), (0, 89)), (0, 1));
        assert_eq!(g.cell_offset((0, 0), (0, 89)), (0, 89));
    }

    #[test]
    fn standard_normal_mode() {
        assert!((gaussian_log_pdf(0.3, 0.3, 1.0) + 0.918_938_533_204_672_7).abs() < 1e-15);
    }

    #[test]
    fn pgm_header_and_size() {
        let grid = GridSpec {
            n_rho: 2,
            n_theta: 3,
            ..GridSpec::default()
        };
        let map = LikelihoodMap {
            grid,
            clearance: 1.0,
            query: 1.0,
            values: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            argmax: 5,
        };
        let mut buf = Vec::new();
        map.write_pgm(&mut buf).unwrap();
        assert_eq!(&buf[..11], b"P5\n3 2\n255\n");
        assert_eq!(&buf[11..], &[0, 51, 102, 153, 204, 255]);
        let mut csv = Vec::new();
        map.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 7);
    }
}
