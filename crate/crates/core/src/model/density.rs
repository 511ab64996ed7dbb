use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{Ensemble, TabulatedDensity};
use crate::error::{check_finite, check_nonneg, check_positive, invalid, Error, Result};
use crate::special::faddeeva;

/// Shape of the coupling-weighted frequency distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// Finite list of spins; each spin carries its own decay.
    Discrete(Ensemble),
    /// `ρ(ω) = (Ω²/π)(γ/2)/((ω − ω_a)² + γ²/4)`; `width` is the FWHM `γ`.
    Lorentzian {
        center: f64,
        width: f64,
        strength: f64,
    },
    /// `ρ(ω) = Ω² exp(−(ω − ω_a)²/2σ²)/√(2π)σ`.
    Gaussian {
        center: f64,
        stddev: f64,
        strength: f64,
    },
    Tabulated(TabulatedDensity),
}

/// A coupling profile together with the homogeneous linewidth of every spin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityDoc", into = "DensityDoc")]
pub struct CouplingDensity {
    profile: Profile,
    gamma_hom: f64,
}

#[derive(Serialize, Deserialize)]
struct DensityDoc {
    #[serde(flatten)]
    profile: Profile,
    #[serde(default)]
    gamma_hom: f64,
}

impl TryFrom<DensityDoc> for CouplingDensity {
    type Error = Error;
    fn try_from(d: DensityDoc) -> Result<Self> {
        CouplingDensity::new(d.profile, d.gamma_hom)
    }
}

impl From<CouplingDensity> for DensityDoc {
    fn from(d: CouplingDensity) -> Self {
        DensityDoc {
            profile: d.profile,
            gamma_hom: d.gamma_hom,
        }
    }
}

impl CouplingDensity {
    pub fn new(profile: Profile, gamma_hom: f64) -> Result<Self> {
        check_nonneg("gamma_hom", gamma_hom)?;
        match &profile {
            Profile::Discrete(_) => {
                if gamma_hom != 0.0 {
                    return invalid("a discrete ensemble carries per-spin decays; gamma_hom must be 0");
                }
            }
            Profile::Lorentzian {
                center,
                width,
                strength,
            } => {
                check_finite("lorentzian center", *center)?;
                check_positive("lorentzian width", *width)?;
                check_nonneg("lorentzian strength", *strength)?;
            }
            Profile::Gaussian {
                center,
                stddev,
                strength,
            } => {
                check_finite("gaussian center", *center)?;
                check_positive("gaussian stddev", *stddev)?;
                check_nonneg("gaussian strength", *strength)?;
            }
            Profile::Tabulated(_) => {}
        }
        Ok(Self { profile, gamma_hom })
    }

    pub fn discrete(ensemble: Ensemble) -> Self {
        Self {
            profile: Profile::Discrete(ensemble),
            gamma_hom: 0.0,
        }
    }

    pub fn lorentzian(center: f64, width: f64, strength: f64, gamma_hom: f64) -> Result<Self> {
        Self::new(
            Profile::Lorentzian {
                center,
                width,
                strength,
            },
            gamma_hom,
        )
    }

    pub fn gaussian(center: f64, stddev: f64, strength: f64, gamma_hom: f64) -> Result<Self> {
        Self::new(
            Profile::Gaussian {
                center,
                stddev,
                strength,
            },
            gamma_hom,
        )
    }

    pub fn tabulated(table: TabulatedDensity, gamma_hom: f64) -> Result<Self> {
        Self::new(Profile::Tabulated(table), gamma_hom)
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn gamma_hom(&self) -> f64 {
        self.gamma_hom
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.profile, Profile::Discrete(_))
    }

    pub fn ensemble(&self) -> Option<&Ensemble> {
        match &self.profile {
            Profile::Discrete(e) => Some(e),
            _ => None,
        }
    }

    /// `ρ(ω)`; `None` for a discrete ensemble, which has no density.
    pub fn density(&self, omega: f64) -> Option<f64> {
        match &self.profile {
            Profile::Discrete(_) => None,
            Profile::Lorentzian {
                center,
                width,
                strength,
            } => {
                let h = 0.5 * width;
                Some(strength * strength * h / (PI * ((omega - center).powi(2) + h * h)))
            }
            Profile::Gaussian {
                center,
                stddev,
                strength,
            } => {
                let x = (omega - center) / stddev;
                Some(strength * strength * (-0.5 * x * x).exp() / ((2.0 * PI).sqrt() * stddev))
            }
            Profile::Tabulated(t) => Some(t.value(omega)),
        }
    }

    /// `Ω² = ∫ρ` (or `Σ|g_j|²`).
    pub fn total_weight(&self) -> f64 {
        match &self.profile {
            Profile::Discrete(e) => e.collective_coupling_sq(),
            Profile::Lorentzian { strength, .. } | Profile::Gaussian { strength, .. } => strength * strength,
            Profile::Tabulated(t) => t.total_weight(),
        }
    }

    pub fn collective_coupling(&self) -> f64 {
        self.total_weight().sqrt()
    }

    /// Coupling-weighted mean complex frequency `ω̄`, including `−iγ_hom/2`.
    pub fn mean_frequency(&self) -> Complex64 {
        let re = match &self.profile {
            Profile::Discrete(e) => return e.mean_frequency(),
            Profile::Lorentzian { center, .. } | Profile::Gaussian { center, .. } => *center,
            Profile::Tabulated(t) => t.raw_moment(1, 0.0) / t.total_weight(),
        };
        Complex64::new(re, -0.5 * self.gamma_hom)
    }

    /// Full width at half maximum of the inhomogeneous line.
    ///
    /// Discrete ensembles report the Gaussian-equivalent `2√(2 ln 2) Δω`;
    /// tabulated profiles report the outermost half-maximum crossings.
    pub fn fwhm(&self) -> f64 {
        const K: f64 = 2.354_820_045_030_949_3;
        match &self.profile {
            Profile::Discrete(e) => K * e.inhomogeneous_width(),
            Profile::Lorentzian { width, .. } => *width,
            Profile::Gaussian { stddev, .. } => K * stddev,
            Profile::Tabulated(t) => tabulated_fwhm(t),
        }
    }

    /// A positive frequency scale for tolerances and search windows.
    pub fn scale(&self) -> f64 {
        let s = match &self.profile {
            Profile::Discrete(e) => e
                .inhomogeneous_width()
                .max(e.collective_coupling())
                .max(e.spins().iter().map(|s| s.decay).fold(0.0, f64::max)),
            Profile::Lorentzian { width, strength, .. } => width.max(*strength),
            Profile::Gaussian { stddev, strength, .. } => stddev.max(*strength),
            Profile::Tabulated(t) => t.spread().max(t.total_weight().sqrt()),
        };
        let s = s.max(self.gamma_hom);
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    /// The same shape with the collective coupling set to `omega`.
    pub fn with_strength(&self, omega: f64) -> Result<Self> {
        check_nonneg("collective coupling", omega)?;
        let profile = match &self.profile {
            Profile::Discrete(e) => Profile::Discrete(e.with_collective_coupling(omega)?),
            Profile::Lorentzian { center, width, .. } => Profile::Lorentzian {
                center: *center,
                width: *width,
                strength: omega,
            },
            Profile::Gaussian { center, stddev, .. } => Profile::Gaussian {
                center: *center,
                stddev: *stddev,
                strength: omega,
            },
            Profile::Tabulated(t) => Profile::Tabulated(t.scaled(omega * omega / t.total_weight())),
        };
        Self::new(profile, self.gamma_hom)
    }

    /// Same profile with a different homogeneous width.
    pub fn with_gamma_hom(&self, gamma_hom: f64) -> Result<Self> {
        Self::new(self.profile.clone(), gamma_hom)
    }
}

fn tabulated_fwhm(t: &TabulatedDensity) -> f64 {
    let (w, r) = (t.omega(), t.rho());
    let peak = r.iter().cloned().fold(0.0, f64::max);
    let half = 0.5 * peak;
    let first = r.iter().position(|&v| v >= half).unwrap();
    let last = r.iter().rposition(|&v| v >= half).unwrap();
    let cross = |i: usize, j: usize| {
        // Crossing between samples i (below) and j (above).
        let (a, b) = (r[i], r[j]);
        w[i] + (half - a) / (b - a) * (w[j] - w[i])
    };
    let lo = if first == 0 { w[0] } else { cross(first - 1, first) };
    let hi = if last + 1 == w.len() {
        w[last]
    } else {
        cross(last + 1, last)
    };
    hi - lo
}

/// Fold the homogeneous Lorentzian of width `γ_hom` into the profile.
///
/// The result has `γ_hom = 0` and yields the same cavity dynamics. Lorentzians
/// stay Lorentzian; Gaussian and tabulated inputs become tabulated profiles
/// sampled on a grid whose geometric tails extend far enough to keep `∫ρ`
/// within 1e-8 of `Ω²`.
pub fn convolve_homogeneous(profile: &CouplingDensity) -> Result<CouplingDensity> {
    let g = profile.gamma_hom;
    if g == 0.0 {
        return Ok(profile.clone());
    }
    match &profile.profile {
        Profile::Discrete(_) => invalid("convolve_homogeneous needs a continuous profile"),
        Profile::Lorentzian {
            center,
            width,
            strength,
        } => CouplingDensity::lorentzian(*center, width + g, *strength, 0.0),
        Profile::Gaussian {
            center,
            stddev,
            strength,
        } => {
            let (c, s) = (*center, *stddev);
            let half = 12.0 * s + 40.0 * g;
            let h = 2e-3 * s.max(g);
            let grid = tailed_grid(c - half, c + half, h, s.max(g));
            let norm = strength * strength / ((2.0 * PI).sqrt() * s);
            let rho = grid
                .iter()
                .map(|&x| {
                    let xi = Complex64::new(x - c, 0.5 * g) / (std::f64::consts::SQRT_2 * s);
                    (norm * faddeeva(xi).re).max(0.0)
                })
                .collect();
            CouplingDensity::tabulated(TabulatedDensity::new(grid, rho)?, 0.0)
        }
        Profile::Tabulated(t) => {
            // The result is smooth on the scale γ_hom/2 whatever the input grid.
            let w = t.omega();
            let (lo, hi) = (w[0] - 40.0 * g, w[w.len() - 1] + 40.0 * g);
            let h = (g / 16.0).max((hi - lo) / 40_000.0);
            let grid = tailed_grid(lo, hi, h, (hi - lo).max(g));
            let rho = grid
                .iter()
                .map(|&x| {
                    let k = crate::levelshift::tabulated_first_sheet(t, Complex64::new(x, 0.5 * g))?;
                    Ok((-k.im / PI).max(0.0))
                })
                .collect::<Result<Vec<f64>>>()?;
            CouplingDensity::tabulated(TabulatedDensity::new(grid, rho)?, 0.0)
        }
    }
}

const TAIL_RATIO: f64 = 1.0005;
const TAIL_REACH: f64 = 1e9;

/// Uniform grid on `[lo, hi]` followed by geometrically widening tails.
fn tailed_grid(lo: f64, hi: f64, h: f64, scale: f64) -> Vec<f64> {
    let n = ((hi - lo) / h).ceil() as usize;
    let step = (hi - lo) / n as f64;
    let mut grid = tail(lo, -1.0, step, scale);
    grid.reverse();
    grid.extend((0..=n).map(|i| lo + i as f64 * step));
    grid.extend(tail(hi, 1.0, step, scale));
    grid
}

/// Points beyond `start` in direction `dir`, excluding `start` itself, with
/// steps growing by `TAIL_RATIO` until `TAIL_REACH·scale` is passed.
fn tail(start: f64, dir: f64, h0: f64, scale: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut x = start;
    let mut h = h0;
    let reach = TAIL_REACH * scale;
    while (x - start).abs() < reach {
        h *= TAIL_RATIO;
        x += dir * h;
        out.push(x);
    }
    out
}
