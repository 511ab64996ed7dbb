use cavspec_wasm::{mode_sweep_impl, pole_sweep_impl, sample_impl, transmission_impl, POLE_STRIDE};

const GAUSS: &str = r#"{"kind":"gaussian","center":0,"stddev":1,"strength":2,"gamma_hom":0}"#;

#[test]
fn bare_cavity_transmission_is_lorentzian() {
    let d = r#"{"kind":"lorentzian","center":0,"width":1,"strength":0}"#;
    let t = transmission_impl(d, 0.5, 0.25, -0.5, 1.5, 5).unwrap();
    // |χ|² = 1/((ω − ω_c)² + κ²) at ω = -0.5, 0, 0.5, 1, 1.5.
    for (w, v) in [-0.5, 0.0, 0.5, 1.0, 1.5].iter().zip(&t) {
        let expect = 1.0 / ((w - 0.5f64).powi(2) + 0.0625);
        assert!((v - expect).abs() < 1e-12 * expect, "{w}: {v} vs {expect}");
    }
}

#[test]
fn lossless_singularities_become_gaps() {
    let d = r#"{"kind":"discrete","spins":[{"frequency":0,"coupling":0.5}]}"#;
    let t = transmission_impl(d, 0.0, 0.0, -0.5, 0.5, 3).unwrap();
    assert!(t.iter().all(|v| v.is_nan()));
}

#[test]
fn pole_rows_have_fixed_stride() {
    let raw = pole_sweep_impl(GAUSS, 0.0, 0.05, 0.1, 3.0, 30).unwrap();
    assert_eq!(raw.len(), 30 * POLE_STRIDE);
    let last = &raw[29 * POLE_STRIDE..];
    assert_eq!(last[0], 3.0);
    assert_eq!(last[5], 1.0);
    // Strong coupling: Re E± ≈ ±√(Ω² + σ²).
    assert!((last[1] - 10f64.sqrt()).abs() < 0.1, "{}", last[1]);
    assert!((last[1] + last[3]).abs() < 1e-9);
}

#[test]
fn sampled_modes_cover_every_cavity_point() {
    let e = sample_impl(GAUSS, 10, 3).unwrap();
    assert_eq!(e, sample_impl(GAUSS, 10, 3).unwrap());
    let raw = mode_sweep_impl(&e, 0.05, -4.0, 4.0, 9).unwrap();
    assert_eq!(raw.len(), 3 * 9 * 11);
    // Photon weight over all modes sums to about one at each cavity frequency.
    for block in raw.chunks(3 * 11) {
        let total: f64 = block.chunks(3).map(|r| r[2]).sum();
        assert!((total - 1.0).abs() < 0.2, "{total}");
    }
}

#[test]
fn bad_input_is_reported() {
    assert!(transmission_impl("{}", 0.0, 0.1, 0.0, 1.0, 3)
        .unwrap_err()
        .starts_with("density"));
    assert!(mode_sweep_impl(GAUSS, 0.1, 0.0, 1.0, 3)
        .unwrap_err()
        .contains("discrete"));
    assert!(pole_sweep_impl(GAUSS, 0.0, -1.0, 0.0, 1.0, 3).is_err());
}
