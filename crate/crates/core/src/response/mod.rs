//! Linear response: propagators, susceptibilities, spectra and time traces.
//!
//! Spin indices refer to the ensemble's sorted spins, in the gauge where all
//! couplings are real. `s` is the superradiant mode `b = Σ α_j a_j`.

mod distribution;
mod time;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_increasing, check_nonneg, invalid, Error, Result};
use crate::levelshift::LevelShift;
use crate::model::{CavitySpec, Ensemble, Profile};

pub use distribution::{dressed_leakage, excitation_distribution, ExcitationDistribution, LeakageReport};
pub use time::{
    closed_form_green, green_time, weisskopf_wigner_form, ClosedForm, EigenPropagator, GreenPair, TimeMethod, TimeTrace,
};

/// A propagator matrix element `G_μν`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Cc,
    Sc,
    Cs,
    Ss,
    Jc(usize),
    Ck(usize),
    Jk(usize, usize),
}

impl Channel {
    pub fn is_diagonal(self) -> bool {
        match self {
            Channel::Cc | Channel::Ss => true,
            Channel::Jk(j, k) => j == k,
            _ => false,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::Cc => f.write_str("cc"),
            Channel::Sc => f.write_str("sc"),
            Channel::Cs => f.write_str("cs"),
            Channel::Ss => f.write_str("ss"),
            Channel::Jc(j) => write!(f, "jc:{j}"),
            Channel::Ck(k) => write!(f, "ck:{k}"),
            Channel::Jk(j, k) => write!(f, "jk:{j}:{k}"),
        }
    }
}

impl FromStr for Channel {
    type Err = Error;

    /// `cc`, `sc`, `cs`, `ss`, `jc:J`, `ck:K`, `jk:J:K`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let idx = |p: &str| -> Result<usize> {
            p.parse()
                .map_err(|_| Error::InvalidInput(format!("bad spin index '{p}' in channel '{s}'")))
        };
        Ok(match parts.as_slice() {
            ["cc"] => Channel::Cc,
            ["sc"] => Channel::Sc,
            ["cs"] => Channel::Cs,
            ["ss"] => Channel::Ss,
            ["jc", j] => Channel::Jc(idx(j)?),
            ["ck", k] => Channel::Ck(idx(k)?),
            ["jk", j, k] => Channel::Jk(idx(j)?, idx(k)?),
            _ => return invalid(format!("unknown channel '{s}'")),
        })
    }
}

impl Serialize for Channel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Channel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `(g_j, ω_j − iγ_j/2)` for a spin of a discrete source.
fn spin_of(ls: &LevelShift, j: usize) -> Result<(f64, Complex64)> {
    let Profile::Discrete(e) = ls.source().profile() else {
        return invalid("spin-resolved channels need a discrete ensemble");
    };
    let s = e
        .spins()
        .get(j)
        .ok_or_else(|| Error::InvalidInput(format!("spin index {j} out of range (N = {})", e.len())))?;
    Ok((s.coupling.re, Complex64::new(s.frequency, -0.5 * s.decay)))
}

fn inverse(d: Complex64, z: Complex64, index: Option<usize>) -> Result<Complex64> {
    if d == Complex64::new(0.0, 0.0) || !d.is_finite() {
        return Err(Error::SingularPoint { index, z });
    }
    Ok(d.inv())
}

/// Any channel from a precomputed `K̃⁺(z)`.
pub(crate) fn channel_from_k(
    ls: &LevelShift,
    cavity: &CavitySpec,
    z: Complex64,
    k: Complex64,
    channel: Channel,
) -> Result<Complex64> {
    let gcc = inverse(z - cavity.complex_frequency() - k, z, None)?;
    let omega = ls.source().collective_coupling();
    match channel {
        Channel::Cc => Ok(gcc),
        Channel::Sc | Channel::Cs | Channel::Ss if omega == 0.0 => {
            invalid("the superradiant mode is undefined without spins")
        }
        Channel::Sc | Channel::Cs => Ok(k * gcc / omega),
        Channel::Ss => Ok(k * (1.0 + k * gcc) / (omega * omega)),
        Channel::Jc(j) | Channel::Ck(j) => {
            let (g, lam) = spin_of(ls, j)?;
            Ok(g * inverse(z - lam, z, Some(j))? * gcc)
        }
        Channel::Jk(j, l) => {
            let (gj, lj) = spin_of(ls, j)?;
            let (gl, ll) = spin_of(ls, l)?;
            let kj = inverse(z - lj, z, Some(j))?;
            let kl = inverse(z - ll, z, Some(l))?;
            let diag = if j == l { kj } else { Complex64::new(0.0, 0.0) };
            Ok(diag + gj * gl * kj * kl * gcc)
        }
    }
}

/// Forward propagator `G̃⁺_μν(z)` at a complex frequency (first sheet when `Im z > 0`).
pub fn propagator_at(ls: &LevelShift, cavity: &CavitySpec, z: Complex64, channel: Channel) -> Result<Complex64> {
    cavity.validate()?;
    let k = ls.eval(z)?;
    channel_from_k(ls, cavity, z, k, channel)
}

/// Forward propagator at a real frequency; this is also the susceptibility `χ_μν(ω)`.
pub fn propagator(ls: &LevelShift, cavity: &CavitySpec, omega: f64, channel: Channel) -> Result<Complex64> {
    propagator_at(ls, cavity, Complex64::new(omega, 0.0), channel)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub grid: Vec<f64>,
    pub chi_cc: Vec<Complex64>,
    /// `|χ_cc|²` in drive units.
    pub transmissivity: Vec<f64>,
    pub phase: Vec<f64>,
}

impl SpectrumResult {
    fn from_chi(grid: Vec<f64>, chi_cc: Vec<Complex64>) -> Self {
        Self {
            transmissivity: chi_cc.iter().map(|c| c.norm_sqr()).collect(),
            phase: chi_cc.iter().map(|c| c.arg()).collect(),
            grid,
            chi_cc,
        }
    }
}

pub fn spectrum(ls: &LevelShift, cavity: &CavitySpec, grid: &[f64]) -> Result<SpectrumResult> {
    check_increasing("frequency grid", grid)?;
    let chi = grid
        .iter()
        .map(|&w| propagator(ls, cavity, w, Channel::Cc))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumResult::from_chi(grid.to_vec(), chi))
}

/// `χ_cc(ω; ω_c)` with rows indexed by cavity frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    pub cavity_grid: Vec<f64>,
    pub omega_grid: Vec<f64>,
    pub chi: Vec<Vec<Complex64>>,
}

pub fn spectrogram(ls: &LevelShift, kappa: f64, omega_grid: &[f64], cavity_grid: &[f64]) -> Result<Spectrogram> {
    check_nonneg("cavity loss", kappa)?;
    check_increasing("frequency grid", omega_grid)?;
    check_increasing("cavity grid", cavity_grid)?;
    // K̃⁺ does not depend on ω_c, so evaluate it once per probe frequency.
    let ks = omega_grid
        .iter()
        .map(|&w| ls.eval(Complex64::new(w, 0.0)))
        .collect::<Result<Vec<_>>>()?;
    let chi = cavity_grid
        .iter()
        .map(|&wc| {
            let cav = CavitySpec::new(wc, kappa)?;
            omega_grid
                .iter()
                .zip(&ks)
                .map(|(&w, &k)| channel_from_k(ls, &cav, Complex64::new(w, 0.0), k, Channel::Cc))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Spectrogram {
        cavity_grid: cavity_grid.to_vec(),
        omega_grid: omega_grid.to_vec(),
        chi,
    })
}

/// Classical drive `𝓔_μ e^{−iω₀t}`; `amplitudes[0]` is the cavity, then one per spin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub amplitudes: Vec<Complex64>,
    pub frequency: f64,
}

/// Steady-state envelopes `⟨a_μ⟩ = Σ_ν χ_μν(ω₀) 𝓔_ν`, cavity first.
///
/// A drive with a single amplitude drives only the cavity and works for any
/// source; it returns only the cavity envelope.
pub fn steady_state(ls: &LevelShift, cavity: &CavitySpec, drive: &DriveSpec) -> Result<Vec<Complex64>> {
    cavity.validate()?;
    if drive.amplitudes.iter().any(|a| !a.is_finite()) || !drive.frequency.is_finite() {
        return invalid("drive amplitudes and frequency must be finite");
    }
    let source = ls.source();
    if cavity.loss == 0.0 {
        if let Profile::Discrete(e) = source.profile() {
            if e.is_lossless() {
                return Err(Error::NoSteadyState);
            }
        }
    }
    let z = Complex64::new(drive.frequency, 0.0);
    let gcc = propagator_at(ls, cavity, z, Channel::Cc)?;
    if drive.amplitudes.len() == 1 {
        return Ok(vec![gcc * drive.amplitudes[0]]);
    }
    let Profile::Discrete(e) = source.profile() else {
        return invalid("spin drives need a discrete ensemble");
    };
    if drive.amplitudes.len() != e.len() + 1 {
        return invalid(format!(
            "drive has {} amplitudes, expected 1 or {}",
            drive.amplitudes.len(),
            e.len() + 1
        ));
    }
    // Block elimination of (ω₀ − H)x = 𝓔 through the cavity row.
    let ks = spin_inverses(e, z)?;
    let src: Complex64 = drive.amplitudes[0]
        + e.spins()
            .iter()
            .zip(&ks)
            .zip(&drive.amplitudes[1..])
            .map(|((s, k), a)| s.coupling.re * k * a)
            .sum::<Complex64>();
    let xc = gcc * src;
    let mut out = Vec::with_capacity(e.len() + 1);
    out.push(xc);
    for ((s, k), a) in e.spins().iter().zip(&ks).zip(&drive.amplitudes[1..]) {
        out.push(k * (a + s.coupling.re * xc));
    }
    Ok(out)
}

fn spin_inverses(e: &Ensemble, z: Complex64) -> Result<Vec<Complex64>> {
    e.spins()
        .iter()
        .enumerate()
        .map(|(j, s)| inverse(z - Complex64::new(s.frequency, -0.5 * s.decay), z, Some(j)))
        .collect()
}
