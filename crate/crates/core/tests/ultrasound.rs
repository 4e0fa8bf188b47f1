use bearing_gp::ultrasound::*;
use bearing_gp::Error;
use proptest::prelude::*;

fn log_spaced(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
}

#[test]
fn amplitude_round_trip_across_band() {
    let setup = AcousticSetup::default();
    let (lo, hi) = ScanSpec::default().valid_band(&setup, Method::Amplitude);
    for h in log_spaced(1e-8f64.max(lo), hi * (1.0 - 1e-9), 250) {
        let r = forward_reflection(&setup, h).reflection_magnitude;
        let back = invert_amplitude(&setup, r).unwrap();
        assert!(((back - h) / h).abs() < 1e-6, "h = {h}: {back}");
    }
}

#[test]
fn phase_round_trip_across_band() {
    let setup = AcousticSetup::default();
    let (lo, hi) = ScanSpec::default().valid_band(&setup, Method::Phase);
    for h in log_spaced(lo * (1.0 + 1e-9), hi, 250) {
        let phi = forward_reflection(&setup, h).reflection_phase;
        let back = invert_phase(&setup, phi).unwrap();
        assert!(((back - h) / h).abs() < 1e-6, "h = {h}: {back}");
    }
}

#[test]
fn resonant_dip_round_trip_across_band() {
    let setup = AcousticSetup::default();
    let spec = ScanSpec::default();
    let (lo, hi) = spec.valid_band(&setup, Method::ResonantDip);
    for h in log_spaced(lo, hi, 250) {
        let dips = resonant_dips(&setup, h, &spec.dip_band);
        assert!(!dips.is_empty(), "h = {h}");
        let back = invert_resonant_dip(&setup, &dips, 0.0).unwrap();
        assert!(((back - h) / h).abs() < 1e-6);
    }
}

#[test]
fn out_of_band_inputs_are_rejected() {
    let setup = AcousticSetup::default();
    assert!(matches!(invert_amplitude(&setup, 0.985), Err(Error::OutOfRange(_))));
    assert!(matches!(invert_phase(&setup, 0.005), Err(Error::OutOfRange(_))));
    assert!(matches!(invert_amplitude(&setup, 0.1), Err(Error::InvalidMeasurement(_))));
    assert!(matches!(invert_resonant_dip(&setup, &[], 0.0), Err(Error::NoMeasurement(_))));
    let clash = [
        ResonantDip { order: 1, frequency: 5e6 },
        ResonantDip { order: 2, frequency: 11e6 },
    ];
    assert!(matches!(invert_resonant_dip(&setup, &clash, 0.0), Err(Error::InconsistentDips(_))));
}

#[test]
fn observations_csv_round_trip() {
    let obs = vec![
        FilmObservation::new(0.1, 2e-5, Method::Phase, 1e-6).unwrap(),
        FilmObservation::new(6.0, 1.5e-4, Method::ResonantDip, 0.0).unwrap(),
    ];
    let mut buf = Vec::new();
    write_observations(&mut buf, &obs).unwrap();
    assert_eq!(read_observations(buf.as_slice()).unwrap(), obs);
}

proptest! {
    #[test]
    fn reflection_magnitude_grows_with_thickness(a in 1e-8..1e-3f64, b in 1e-8..1e-3f64) {
        let setup = AcousticSetup::default();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let ra = forward_reflection(&setup, lo).reflection_magnitude;
        let rb = forward_reflection(&setup, hi).reflection_magnitude;
        prop_assert!(ra <= rb);
        prop_assert!(rb < 1.0);
    }

    #[test]
    fn phase_inversion_takes_thin_root(h in 1e-6..3e-5f64) {
        let setup = AcousticSetup::default();
        let peak = setup.phase_peak_thickness().unwrap();
        let phi = forward_reflection(&setup, h).reflection_phase;
        let back = invert_phase(&setup, phi).unwrap();
        prop_assert!(back <= peak * (1.0 + 1e-12));
        prop_assert!(((back - h) / h).abs() < 1e-6);
    }
}
