//! Bearing geometry, film-thickness model, shaft-centre bookkeeping and
//! Sommerfeld labelling.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polar::normalize_angle;

/// Journal and bore dimensions, all in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BearingGeometry {
    shaft_radius: f64,
    bore_radius: f64,
    clearance: f64,
    length: f64,
}

impl BearingGeometry {
    pub fn new(shaft_radius: f64, bore_radius: f64, length: f64) -> Result<Self> {
        for (name, v) in [
            ("shaft_radius", shaft_radius),
            ("bore_radius", bore_radius),
            ("length", length),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        let clearance = bore_radius - shaft_radius;
        if clearance <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "bore radius {bore_radius} must exceed shaft radius {shaft_radius}"
            )));
        }
        Ok(Self {
            shaft_radius,
            bore_radius,
            clearance,
            length,
        })
    }

    pub fn from_clearance(shaft_radius: f64, clearance: f64, length: f64) -> Result<Self> {
        if !(clearance.is_finite() && clearance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "clearance must be positive, got {clearance}"
            )));
        }
        let mut g = Self::new(shaft_radius, shaft_radius + clearance, length)?;
        // keep the clearance exact rather than the rounded difference of radii
        g.clearance = clearance;
        Ok(g)
    }

    pub fn shaft_radius(&self) -> f64 {
        self.shaft_radius
    }

    pub fn bore_radius(&self) -> f64 {
        self.bore_radius
    }

    pub fn clearance(&self) -> f64 {
        self.clearance
    }

    pub fn length(&self) -> f64 {
        self.length
    }
}

impl Default for BearingGeometry {
    /// R = 50 mm, c = 100 µm, L = 80 mm.
    fn default() -> Self {
        Self::from_clearance(0.05, 100e-6, 0.08).expect("default geometry is valid")
    }
}

/// Shaft-centre position relative to the bore centre.
///
/// Angles follow one convention throughout the crate: `theta` is measured
/// counter-clockwise from top dead centre, and the attitude angle is measured
/// counter-clockwise from the load line, which itself sits at `load_angle`
/// from TDC. The minimum film occurs at shaft angle `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShaftLocation {
    eccentricity_ratio: f64,
    attitude_angle: f64,
    load_angle: f64,
    clearance: f64,
}

impl ShaftLocation {
    pub fn new(
        eccentricity_ratio: f64,
        attitude_angle: f64,
        load_angle: f64,
        clearance: f64,
    ) -> Result<Self> {
        if !(eccentricity_ratio.is_finite() && (0.0..1.0).contains(&eccentricity_ratio)) {
            return Err(Error::InvalidParameter(format!(
                "eccentricity ratio must lie in [0, 1), got {eccentricity_ratio}"
            )));
        }
        if !(clearance.is_finite() && clearance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "clearance must be positive, got {clearance}"
            )));
        }
        if !(attitude_angle.is_finite() && load_angle.is_finite()) {
            return Err(Error::InvalidParameter("angles must be finite".into()));
        }
        Ok(Self {
            eccentricity_ratio,
            attitude_angle,
            load_angle,
            clearance,
        })
    }

    /// Builds a location from its polar view (`rho` in metres, `theta` from TDC).
    pub fn from_polar(rho: f64, theta: f64, clearance: f64, load_angle: f64) -> Result<Self> {
        if rho < 0.0 {
            return Err(Error::InvalidParameter(format!("rho must be non-negative, got {rho}")));
        }
        let theta = normalize_angle(theta);
        Self::new(rho / clearance, theta - load_angle, load_angle, clearance)
    }

    pub fn eccentricity_ratio(&self) -> f64 {
        self.eccentricity_ratio
    }

    pub fn attitude_angle(&self) -> f64 {
        self.attitude_angle
    }

    pub fn load_angle(&self) -> f64 {
        self.load_angle
    }

    pub fn clearance(&self) -> f64 {
        self.clearance
    }

    /// Eccentricity in metres.
    pub fn rho(&self) -> f64 {
        self.eccentricity_ratio * self.clearance
    }

    /// Angle of the shaft-centre offset from TDC, in `[0, 2π)`.
    pub fn theta(&self) -> f64 {
        normalize_angle(self.load_angle + self.attitude_angle)
    }

    /// Clearance-normalised Cartesian position `(ε cos θ, ε sin θ)`.
    pub fn normalized_cartesian(&self) -> (f64, f64) {
        let t = self.theta();
        (
            self.eccentricity_ratio * t.cos(),
            self.eccentricity_ratio * t.sin(),
        )
    }
}

/// Steady operating condition: speed in rad/s, load in N, viscosity in Pa·s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    speed: f64,
    load: f64,
    viscosity: f64,
}

impl OperatingPoint {
    pub fn new(speed: f64, load: f64, viscosity: f64) -> Result<Self> {
        for (name, v) in [("speed", speed), ("load", load), ("viscosity", viscosity)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            speed,
            load,
            viscosity,
        })
    }

    pub fn from_rpm(rpm: f64, load: f64, viscosity: f64) -> Result<Self> {
        Self::new(rpm_to_rad_per_s(rpm), load, viscosity)
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn speed_rpm(&self) -> f64 {
        self.speed * 60.0 / (2.0 * PI)
    }

    pub fn load(&self) -> f64 {
        self.load
    }

    pub fn viscosity(&self) -> f64 {
        self.viscosity
    }
}

pub fn rpm_to_rad_per_s(rpm: f64) -> f64 {
    rpm * 2.0 * PI / 60.0
}

/// Film thickness `h = c (1 + ε cos Θ)`, where Θ is measured about the shaft
/// centre from the point of maximum film.
pub fn film_thickness(geom: &BearingGeometry, loc: &ShaftLocation, theta_big: f64) -> f64 {
    geom.clearance() * (1.0 + loc.eccentricity_ratio() * theta_big.cos())
}

/// Film thickness seen by a sensor at `shaft_angle` from TDC. The minimum sits
/// at the shaft-centre offset direction, the maximum opposite it.
pub fn film_at_shaft_angle(geom: &BearingGeometry, loc: &ShaftLocation, shaft_angle: f64) -> f64 {
    film_thickness(geom, loc, shaft_angle - loc.theta() - PI)
}

/// `ε = (c − h_min) / c`.
pub fn eccentricity_from_hmin(geom: &BearingGeometry, h_min: f64) -> Result<f64> {
    let c = geom.clearance();
    if !h_min.is_finite() {
        return Err(Error::InvalidMeasurement(format!("h_min is not finite: {h_min}")));
    }
    if h_min <= 0.0 {
        return Err(Error::Contact(format!("h_min = {h_min} m")));
    }
    if h_min > c {
        return Err(Error::InvalidMeasurement(format!(
            "h_min = {h_min} m exceeds the clearance {c} m"
        )));
    }
    Ok((c - h_min) / c)
}

/// Sommerfeld number `S = (R/c)² μ ω L R / (2 W)` with `R` the journal radius.
pub fn sommerfeld(geom: &BearingGeometry, op: &OperatingPoint) -> f64 {
    let r = geom.shaft_radius();
    let ratio = r / geom.clearance();
    ratio * ratio * op.viscosity() * op.speed() * geom.length() * r / (2.0 * op.load())
}

/// Maps raw speed-load ratios `ω/W` onto dimensionless labels by dividing by a
/// reference ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioScale {
    reference: f64,
}

impl RatioScale {
    /// Scale under which `reference` maps to a label of exactly 1.
    pub fn from_reference(reference: &OperatingPoint) -> Self {
        Self {
            reference: raw_ratio(reference),
        }
    }

    pub fn from_raw(reference_ratio: f64) -> Result<Self> {
        if !(reference_ratio.is_finite() && reference_ratio > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "reference ratio must be positive, got {reference_ratio}"
            )));
        }
        Ok(Self {
            reference: reference_ratio,
        })
    }

    /// Normalises by the largest ratio in `ops`, so labels fall in `(0, 1]`.
    pub fn normalizing_max<'a>(ops: impl IntoIterator<Item = &'a OperatingPoint>) -> Result<Self> {
        let max = ops
            .into_iter()
            .map(raw_ratio)
            .fold(f64::NAN, f64::max);
        Self::from_raw(max)
            .map_err(|_| Error::InsufficientData("no operating points to normalise".into()))
    }

    pub fn reference_ratio(&self) -> f64 {
        self.reference
    }

    pub fn label(&self, op: &OperatingPoint) -> f64 {
        raw_ratio(op) / self.reference
    }
}

fn raw_ratio(op: &OperatingPoint) -> f64 {
    op.speed() / op.load()
}

/// Dimensionless speed-load label `(ω/W) / reference`.
pub fn speed_load_ratio(op: &OperatingPoint, scale: &RatioScale) -> f64 {
    scale.label(op)
}

/// Equilibrium shaft position from short-bearing (Ocvirk) theory. This is the
/// ground truth behind the synthetic data generator; the load line points at
/// TDC, so the shaft sits in the first quadrant.
pub fn short_bearing_equilibrium(geom: &BearingGeometry, op: &OperatingPoint) -> ShaftLocation {
    let c = geom.clearance();
    let l = geom.length();
    let stiffness = op.viscosity() * op.speed() * geom.shaft_radius() * l * l * l / (4.0 * c * c);
    let target = op.load() / stiffness;
    let capacity = |e: f64| {
        let one_minus = 1.0 - e * e;
        e / (one_minus * one_minus) * (PI * PI * one_minus + 16.0 * e * e).sqrt()
    };
    let (mut lo, mut hi) = (0.0_f64, 1.0 - 1e-12);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if capacity(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eps = 0.5 * (lo + hi);
    let attitude = (PI * (1.0 - eps * eps).sqrt() / (4.0 * eps)).atan();
    ShaftLocation::new(eps, attitude, 0.0, c).expect("bisection stays inside [0, 1)")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_3;

    fn geom(c: f64) -> BearingGeometry {
        BearingGeometry::from_clearance(0.05, c, 0.08).unwrap()
    }

    #[test]
    fn geometry_rejects_bad_dimensions() {
        assert!(BearingGeometry::new(0.05, 0.05, 0.08).is_err());
        assert!(BearingGeometry::new(0.05, 0.049, 0.08).is_err());
        assert!(BearingGeometry::new(-0.05, 0.06, 0.08).is_err());
        assert!(BearingGeometry::new(0.05, 0.0501, 0.0).is_err());
        let g = BearingGeometry::default();
        assert_eq!(g.clearance(), 100e-6);
        assert!((g.bore_radius() - 0.0501).abs() < 1e-15);
    }

    #[test]
    fn location_invariants() {
        assert!(ShaftLocation::new(1.0, 0.0, 0.0, 1e-4).is_err());
        assert!(ShaftLocation::new(-0.1, 0.0, 0.0, 1e-4).is_err());
        let loc = ShaftLocation::new(0.4, -0.5, 0.0, 1e-4).unwrap();
        assert_eq!(loc.rho(), 0.4 * 1e-4);
        assert!((loc.theta() - (2.0 * PI - 0.5)).abs() < 1e-12);
        let back = ShaftLocation::from_polar(loc.rho(), loc.theta(), 1e-4, 0.0).unwrap();
        assert!((back.eccentricity_ratio() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn concentric_film_is_uniform() {
        let g = geom(100e-6);
        let loc = ShaftLocation::new(0.0, 0.3, 0.0, g.clearance()).unwrap();
        for k in 0..16 {
            let t = k as f64 * 0.4;
            assert_eq!(film_thickness(&g, &loc, t), g.clearance());
        }
    }

    #[test]
    fn film_examples() {
        let g = geom(100e-6);
        let loc = ShaftLocation::new(0.5, 0.0, 0.0, g.clearance()).unwrap();
        assert!((film_thickness(&g, &loc, PI) - 50e-6).abs() < 1e-18);
        assert!((film_thickness(&g, &loc, FRAC_PI_3) - 125e-6).abs() < 1e-16);
        // minimum sits at the offset direction
        let loc = ShaftLocation::new(0.5, 0.7, 0.0, g.clearance()).unwrap();
        assert!((film_at_shaft_angle(&g, &loc, 0.7) - 50e-6).abs() < 1e-17);
    }

    #[test]
    fn eccentricity_examples_and_errors() {
        let g = geom(100e-6);
        assert_eq!(eccentricity_from_hmin(&g, 100e-6).unwrap(), 0.0);
        assert!((eccentricity_from_hmin(&g, 50e-6).unwrap() - 0.5).abs() < 1e-15);
        let g120 = geom(120e-6);
        let eps = eccentricity_from_hmin(&g120, 30e-6).unwrap();
        assert!((eps - 0.75).abs() < 1e-12);
        assert!((120e-6 * (1.0 - eps) - 30e-6).abs() < 1e-18);
        assert!(matches!(eccentricity_from_hmin(&g, 0.0), Err(Error::Contact(_))));
        assert!(matches!(
            eccentricity_from_hmin(&g, 101e-6),
            Err(Error::InvalidMeasurement(_))
        ));
    }

    #[test]
    fn sommerfeld_plug_in_value() {
        // (R/c)^2 mu w L R / (2W) evaluated independently: 0.020945
        let g = geom(100e-6);
        let op = OperatingPoint::new(41.89, 20_000.0, 0.02).unwrap();
        assert!((sommerfeld(&g, &op) - 0.020945).abs() < 1e-12);
    }

    #[test]
    fn sommerfeld_scaling() {
        let g = geom(100e-6);
        let op = OperatingPoint::from_rpm(400.0, 20_000.0, 0.02).unwrap();
        let s = sommerfeld(&g, &op);
        let heavier = OperatingPoint::from_rpm(400.0, 40_000.0, 0.02).unwrap();
        let faster = OperatingPoint::from_rpm(800.0, 20_000.0, 0.02).unwrap();
        assert!((sommerfeld(&g, &heavier) - s / 2.0).abs() < 1e-15);
        assert!((sommerfeld(&g, &faster) - 2.0 * s).abs() < 1e-15);
    }

    #[test]
    fn ratio_labels() {
        let reference = OperatingPoint::from_rpm(800.0, 20_000.0, 0.05).unwrap();
        let scale = RatioScale::from_reference(&reference);
        let op = OperatingPoint::from_rpm(400.0, 20_000.0, 0.05).unwrap();
        assert!((speed_load_ratio(&op, &scale) - 0.5).abs() < 1e-15);
        assert!((speed_load_ratio(&reference, &scale) - 1.0).abs() < 1e-15);
        let a = OperatingPoint::from_rpm(200.0, 5_000.0, 0.05).unwrap();
        let b = OperatingPoint::from_rpm(400.0, 10_000.0, 0.05).unwrap();
        assert!((scale.label(&a) - scale.label(&b)).abs() < 1e-15);

        let ops = [a, b, op, reference];
        let max_scale = RatioScale::normalizing_max(&ops).unwrap();
        let labels: Vec<f64> = ops.iter().map(|o| max_scale.label(o)).collect();
        assert_eq!(labels.iter().cloned().fold(0.0, f64::max), 1.0);
        assert!(RatioScale::normalizing_max(&[]).is_err());
    }

    #[test]
    fn short_bearing_locus_moves_toward_centre_with_speed() {
        let g = BearingGeometry::default();
        let slow = OperatingPoint::from_rpm(100.0, 10_000.0, 0.05).unwrap();
        let fast = OperatingPoint::from_rpm(800.0, 10_000.0, 0.05).unwrap();
        let a = short_bearing_equilibrium(&g, &slow);
        let b = short_bearing_equilibrium(&g, &fast);
        assert!(b.eccentricity_ratio() < a.eccentricity_ratio());
        assert!(b.attitude_angle() > a.attitude_angle());
        assert!(a.theta() > 0.0 && a.theta() < PI / 2.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn mean_film_equals_clearance(eps in 0.0f64..0.99, c in 1e-6f64..1e-3) {
                let g = geom(c);
                let loc = ShaftLocation::new(eps, 0.0, 0.0, c).unwrap();
                // trapezoidal rule is exact for trigonometric polynomials on a periodic grid
                let n = 64;
                let integral: f64 = (0..n)
                    .map(|k| film_thickness(&g, &loc, 2.0 * PI * k as f64 / n as f64))
                    .sum::<f64>() * 2.0 * PI / n as f64;
                prop_assert!((integral - 2.0 * PI * c).abs() <= 1e-10 * 2.0 * PI * c);
            }

            #[test]
            fn hmin_round_trip(eps in 0.0f64..0.99) {
                let g = BearingGeometry::default();
                let loc = ShaftLocation::new(eps, 0.0, 0.0, g.clearance()).unwrap();
                let n = 3600;
                let h_min = (0..n)
                    .map(|k| film_thickness(&g, &loc, 2.0 * PI * k as f64 / n as f64))
                    .fold(f64::INFINITY, f64::min);
                let back = eccentricity_from_hmin(&g, h_min).unwrap();
                prop_assert!((back - eps).abs() < 1e-12);
            }

            #[test]
            fn sommerfeld_homogeneous(k in 0.01f64..100.0, rpm in 10.0f64..2000.0, w in 100.0f64..1e5) {
                let g = BearingGeometry::default();
                let a = OperatingPoint::from_rpm(rpm, w, 0.05).unwrap();
                let b = OperatingPoint::from_rpm(k * rpm, k * w, 0.05).unwrap();
                let (sa, sb) = (sommerfeld(&g, &a), sommerfeld(&g, &b));
                prop_assert!((sa - sb).abs() <= 1e-12 * sa);
            }
        }
    }
}
