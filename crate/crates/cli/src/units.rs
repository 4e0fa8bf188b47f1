//! Command-line quantities with unit suffixes. Bare numbers are SI.

use bearing_gp::bearing::rpm_to_rad_per_s;

fn split<'a>(raw: &'a str, suffixes: &[&'a str]) -> Result<(f64, &'a str), String> {
    let s = raw.trim();
    let (num, unit) = suffixes
        .iter()
        .find_map(|u| s.strip_suffix(u).map(|n| (n, *u)))
        .unwrap_or((s, ""));
    let v: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("cannot read {raw:?} as a number with unit {}", suffixes.join("|")))?;
    if !v.is_finite() {
        return Err(format!("{raw:?} is not finite"));
    }
    Ok((v, unit))
}

/// Shaft speed in rad/s from `400rpm`, `41.9rad/s` or a bare rad/s value.
pub fn speed(raw: &str) -> Result<f64, String> {
    let (v, unit) = split(raw, &["rpm", "rad/s"])?;
    let w = if unit == "rpm" { rpm_to_rad_per_s(v) } else { v };
    if w > 0.0 {
        Ok(w)
    } else {
        Err(format!("speed must be positive, got {raw:?}"))
    }
}

/// Load in N from `20kN`, `20000N` or a bare newton value.
pub fn load(raw: &str) -> Result<f64, String> {
    let (v, unit) = split(raw, &["kN", "N"])?;
    let n = if unit == "kN" { v * 1e3 } else { v };
    if n > 0.0 {
        Ok(n)
    } else {
        Err(format!("load must be positive, got {raw:?}"))
    }
}

/// Angle in rad from `30deg`, `0.5rad` or a bare radian value.
pub fn angle(raw: &str) -> Result<f64, String> {
    let (v, unit) = split(raw, &["deg", "rad"])?;
    Ok(if unit == "deg" { v.to_radians() } else { v })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffixes() {
        assert!((speed("60rpm").unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(speed("3.5rad/s").unwrap(), 3.5);
        assert_eq!(speed(" 7 ").unwrap(), 7.0);
        assert_eq!(load("20kN").unwrap(), 20e3);
        assert_eq!(load("150N").unwrap(), 150.0);
        assert!((angle("180deg").unwrap() - std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(angle("0.25rad").unwrap(), 0.25);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(speed("-3rpm").is_err());
        assert!(load("0kN").is_err());
        assert!(load("20 tonnes").is_err());
        assert!(angle("NaNdeg").is_err());
    }
}
