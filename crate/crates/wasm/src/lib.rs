//! Browser bindings. Densities arrive as the same JSON the CLI accepts under
//! `system.density` (plus `gamma_hom`); results go back as flat `f64` arrays
//! with a fixed stride so the page can plot them without parsing.

use cavspec::levelshift::LevelShift;
use cavspec::model::{sample_ensemble, CavitySpec, CouplingDensity, SamplingScheme};
use cavspec::poles::{track_poles, Regime};
use cavspec::response::{propagator, Channel};
use cavspec::spectral::eigenmodes;
use wasm_bindgen::prelude::*;

/// Values per point in [`pole_sweep`]: `Ω, Re E₊, Im E₊, Re E₋, Im E₋, oscillatory`.
pub const POLE_STRIDE: usize = 6;

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn parse(density: &str) -> Result<CouplingDensity, String> {
    serde_json::from_str(density).map_err(|e| format!("density: {e}"))
}

fn err(e: cavspec::Error) -> String {
    e.to_string()
}

pub fn transmission_impl(
    density: &str,
    omega_c: f64,
    kappa: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    let ls = LevelShift::new(parse(density)?);
    let cav = CavitySpec::new(omega_c, kappa).map_err(err)?;
    linspace(lo, hi, points)
        .into_iter()
        // A lossless system is singular at its eigenvalues; plot those as gaps.
        .map(|w| match propagator(&ls, &cav, w, Channel::Cc) {
            Ok(c) => Ok(c.norm_sqr()),
            Err(cavspec::Error::SingularPoint { .. }) => Ok(f64::NAN),
            Err(e) => Err(err(e)),
        })
        .collect()
}

pub fn pole_sweep_impl(
    density: &str,
    omega_c: f64,
    kappa: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    let ls = LevelShift::new(parse(density)?);
    let cav = CavitySpec::new(omega_c, kappa).map_err(err)?;
    let track = track_poles(&ls, &cav, &linspace(lo, hi, points)).map_err(err)?;
    Ok(track
        .iter()
        .flat_map(|p| {
            let (a, b) = (p.plus.location, p.minus.location);
            let osc = if p.regime.regime == Regime::Oscillatory {
                1.0
            } else {
                0.0
            };
            [p.omega, a.re, a.im, b.re, b.im, osc]
        })
        .collect())
}

pub fn sample_impl(profile: &str, n: usize, seed: u64) -> Result<String, String> {
    let source = parse(profile)?;
    let e = sample_ensemble(&source, n, seed, SamplingScheme::Random).map_err(err)?;
    serde_json::to_string(&CouplingDensity::discrete(e)).map_err(|e| e.to_string())
}

/// Rows of `ω_c, Re E, photon fraction` for every mode at every cavity frequency.
pub fn mode_sweep_impl(density: &str, kappa: f64, lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, String> {
    let d = parse(density)?;
    let e = d.ensemble().ok_or("mode sweeps need a discrete ensemble")?;
    let mut out = Vec::with_capacity(3 * points * (e.len() + 1));
    for wc in linspace(lo, hi, points) {
        let cav = CavitySpec::new(wc, kappa).map_err(err)?;
        for m in eigenmodes(e, &cav).map_err(err)? {
            out.extend([wc, m.energy.re, m.photon_fraction]);
        }
    }
    Ok(out)
}

/// `|χ_cc(ω)|²` on `points` evenly spaced frequencies in `[lo, hi]`.
#[wasm_bindgen]
pub fn transmission(
    density: &str,
    omega_c: f64,
    kappa: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    transmission_impl(density, omega_c, kappa, lo, hi, points).map_err(|e| JsError::new(&e))
}

/// Polariton pole tracks as the collective coupling runs over `[lo, hi]`.
#[wasm_bindgen]
pub fn pole_sweep(
    density: &str,
    omega_c: f64,
    kappa: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    pole_sweep_impl(density, omega_c, kappa, lo, hi, points).map_err(|e| JsError::new(&e))
}

/// Draw `n` spins from a continuous profile; returns a discrete density as JSON.
#[wasm_bindgen]
pub fn sample(profile: &str, n: usize, seed: u32) -> Result<String, JsError> {
    sample_impl(profile, n, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn mode_sweep(density: &str, kappa: f64, lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, JsError> {
    mode_sweep_impl(density, kappa, lo, hi, points).map_err(|e| JsError::new(&e))
}
