use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polar::{geodesic_distance, normalize_angle};
use crate::ultrasound::{FilmObservation, Method};

/// 18°, a tenth of a revolution in total.
pub const DEFAULT_HALF_WIDTH: f64 = 0.1 * PI;

/// Number of candidate centres tried by [`estimate_min_reference`].
const REFERENCE_BINS: usize = 1440;

/// Closed angular window around the estimated minimum-film angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimWindow {
    half_width: f64,
    reference_angle: f64,
    methods: Vec<Method>,
}

impl TrimWindow {
    /// Window over phase and resonant-dip readings.
    pub fn new(reference_angle: f64, half_width: f64) -> Result<Self> {
        Self::with_methods(reference_angle, half_width, vec![Method::Phase, Method::ResonantDip])
    }

    pub fn with_methods(reference_angle: f64, half_width: f64, methods: Vec<Method>) -> Result<Self> {
        if !(half_width > 0.0 && half_width <= PI) {
            return Err(Error::InvalidParameter(format!(
                "trim half-width must lie in (0, π], got {half_width}"
            )));
        }
        if !reference_angle.is_finite() {
            return Err(Error::InvalidParameter("trim reference angle is not finite".into()));
        }
        if methods.is_empty() {
            return Err(Error::InvalidParameter("trim window selects no methods".into()));
        }
        Ok(Self {
            half_width,
            reference_angle: normalize_angle(reference_angle),
            methods,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn reference_angle(&self) -> f64 {
        self.reference_angle
    }

    pub fn methods(&self) -> &[Method] {
        &self.methods
    }

    pub fn contains(&self, obs: &FilmObservation) -> bool {
        // a hair of slack keeps readings that sit exactly on the boundary
        self.methods.contains(&obs.method())
            && geodesic_distance(obs.shaft_angle(), self.reference_angle)
                <= self.half_width * (1.0 + 1e-12)
    }
}

/// Readings of the selected methods within the window, merged in input order.
pub fn trim_observations(obs: &[FilmObservation], window: &TrimWindow) -> Result<Vec<FilmObservation>> {
    let kept: Vec<FilmObservation> = obs.iter().filter(|o| window.contains(o)).cloned().collect();
    if kept.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no observations within {:.2}° of {:.2}°",
            window.half_width.to_degrees(),
            window.reference_angle.to_degrees()
        )));
    }
    Ok(kept)
}

/// Angle of the thinnest film, from a robust smooth of the readings on a 0.25°
/// grid: a moving median over `half_width` either side, then a moving mean of
/// that profile over the same width. The median alone is flat near the bottom
/// of a symmetric bowl; the mean restores a unique minimum. Ties resolve to
/// the first angle.
pub fn estimate_min_reference(obs: &[FilmObservation], half_width: f64) -> Result<f64> {
    if obs.is_empty() {
        return Err(Error::InsufficientData("no observations to locate the film minimum".into()));
    }
    if !(half_width > 0.0 && half_width <= PI) {
        return Err(Error::InvalidParameter(format!(
            "median half-width must lie in (0, π], got {half_width}"
        )));
    }
    let mut sorted: Vec<(f64, f64)> = obs.iter().map(|o| (o.shaft_angle(), o.thickness())).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let angles: Vec<f64> = sorted.iter().map(|p| p.0).collect();

    let bin = TAU / REFERENCE_BINS as f64;
    let mut profile: Vec<Option<f64>> = Vec::with_capacity(REFERENCE_BINS);
    let mut window = Vec::new();
    for k in 0..REFERENCE_BINS {
        let centre = bin * k as f64;
        window.clear();
        // [centre − w, centre + w] with wrap-around
        let lo = centre - half_width;
        let hi = centre + half_width;
        let mut push_range = |a: f64, b: f64| {
            let i = angles.partition_point(|&x| x < a);
            let j = angles.partition_point(|&x| x <= b);
            window.extend(sorted[i..j].iter().map(|p| p.1));
        };
        if half_width >= PI {
            push_range(0.0, TAU);
        } else {
            push_range(lo.max(0.0), hi.min(TAU));
            if lo < 0.0 {
                push_range(lo + TAU, TAU);
            }
            if hi > TAU {
                push_range(0.0, hi - TAU);
            }
        }
        if window.is_empty() {
            profile.push(None);
            continue;
        }
        let mid = window.len() / 2;
        let (_, m, _) = window.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
        profile.push(Some(*m));
    }

    let reach = ((half_width / bin).round() as usize).min(REFERENCE_BINS / 2);
    let mut best: Option<(usize, f64)> = None;
    for k in 0..REFERENCE_BINS {
        if profile[k].is_none() {
            continue;
        }
        let (mut sum, mut count) = (0.0, 0usize);
        for d in 0..=2 * reach {
            let idx = (k + REFERENCE_BINS + d - reach) % REFERENCE_BINS;
            if let Some(v) = profile[idx] {
                sum += v;
                count += 1;
            }
        }
        let mean = sum / count as f64;
        if best.map_or(true, |(_, v)| mean < v) {
            best = Some((k, mean));
        }
    }
    Ok(bin * best.expect("non-empty observations fill at least one window").0 as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bearing::{BearingGeometry, ShaftLocation};
    use crate::ultrasound::{synthesize_scan, AcousticSetup, NoiseSpec, ScanSpec};

    fn obs(angle: f64, method: Method) -> FilmObservation {
        FilmObservation::new(angle, 50e-6, method, 0.0).unwrap()
    }

    #[test]
    fn window_is_closed_and_wraps() {
        let w = TrimWindow::new(0.05, 0.1).unwrap();
        let inside = vec![
            obs(0.05, Method::Phase),
            obs(0.15, Method::ResonantDip),
            obs(TAU - 0.05, Method::Phase),
        ];
        assert_eq!(trim_observations(&inside, &w).unwrap().len(), 3);
        let outside = vec![obs(0.16, Method::Phase), obs(0.05, Method::Amplitude)];
        assert!(matches!(trim_observations(&outside, &w), Err(Error::InsufficientData(_))));
        assert!(TrimWindow::new(0.0, 0.0).is_err());
        assert!(TrimWindow::new(0.0, 4.0).is_err());
    }

    #[test]
    fn trimmed_scan_spans_tenth_of_revolution() {
        let geom = BearingGeometry::default();
        let centre = 40f64.to_radians();
        let loc = ShaftLocation::new(0.5, centre, 0.0, geom.clearance()).unwrap();
        let spec = ScanSpec {
            n_angles: 3600,
            ..ScanSpec::default()
        };
        let scan = synthesize_scan(&geom, &loc, &AcousticSetup::default(), &spec, 1);
        let w = TrimWindow::new(centre, DEFAULT_HALF_WIDTH).unwrap();
        let kept = trim_observations(&scan, &w).unwrap();
        let mut angles: Vec<f64> = kept.iter().map(|o| o.shaft_angle()).collect();
        angles.sort_by(f64::total_cmp);
        angles.dedup();
        // one reading every 0.1°, both ends included
        assert_eq!(angles.len(), 361);
        let span = angles.last().unwrap() - angles.first().unwrap();
        assert!((span.to_degrees() - 36.0).abs() < 1e-9);
    }

    #[test]
    fn reference_tracks_true_minimum() {
        let geom = BearingGeometry::default();
        let setup = AcousticSetup::default();
        let truth = 1.1;
        let loc = ShaftLocation::new(0.5, truth, 0.0, geom.clearance()).unwrap();
        let spec = ScanSpec {
            n_angles: 3600,
            ..ScanSpec::default()
        };
        let scan = synthesize_scan(&geom, &loc, &setup, &spec, 2);
        let r = estimate_min_reference(&scan, 10f64.to_radians()).unwrap();
        assert!(geodesic_distance(r, truth) <= 0.25f64.to_radians());

        let noisy = ScanSpec {
            n_angles: 3600,
            noise: NoiseSpec::uniform(0.02 * geom.clearance()),
            ..ScanSpec::default()
        };
        let mut hits = 0;
        for seed in 0..50 {
            let scan = synthesize_scan(&geom, &loc, &setup, &noisy, seed);
            let r = estimate_min_reference(&scan, 10f64.to_radians()).unwrap();
            if geodesic_distance(r, truth) <= 5f64.to_radians() {
                hits += 1;
            }
        }
        assert!(hits >= 45, "{hits}/50");
    }

    #[test]
    fn uniform_film_gives_first_angle() {
        let flat: Vec<FilmObservation> =
            (0..360).map(|k| obs(TAU * k as f64 / 360.0, Method::Phase)).collect();
        assert_eq!(estimate_min_reference(&flat, 0.2).unwrap(), 0.0);
        assert!(estimate_min_reference(&[], 0.2).is_err());
    }
}
