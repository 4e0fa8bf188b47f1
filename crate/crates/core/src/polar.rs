//! Angle bookkeeping on the circle.

use std::f64::consts::{PI, TAU};

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let wrapped = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if wrapped >= TAU {
        0.0
    } else {
        wrapped
    }
}

/// Great-circle (geodesic) distance between two angles, in `[0, π]`.
pub fn geodesic_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    let d = d.min(TAU - d);
    d.clamp(0.0, PI)
}

/// Signed shortest rotation from `from` to `to`, in `(-π, π]`.
pub fn signed_difference(from: f64, to: f64) -> f64 {
    let d = (to - from).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

pub fn degrees(rad: f64) -> f64 {
    rad.to_degrees()
}
