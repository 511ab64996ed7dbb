//! The level-shift function `K̃⁺(z)`, its continuation through the branch cut,
//! and its Fourier partner, the memory kernel `K(t)`.
//!
//! For continuous profiles the physical (first) sheet lies above the cut line
//! `Im z = −γ_hom/2`. Below that line [`LevelShift::eval`] returns the analytic
//! continuation from above, which is what the propagator poles see.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{check_nonneg, Error, Result};
use crate::model::{CouplingDensity, Profile, TabulatedDensity};
use crate::special::{faddeeva, faddeeva_derivative};

const SQRT_FRAC_PI_2: f64 = 1.253_314_137_315_500_3;
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sheet {
    First,
    Cut,
    Second,
}

impl std::fmt::Display for Sheet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sheet::First => "first",
            Sheet::Cut => "cut",
            Sheet::Second => "second",
        })
    }
}

/// Principal value part and cut discontinuity on the line `ω − iγ_hom/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutDecomposition {
    pub delta_c: f64,
    pub gamma_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelShift {
    source: CouplingDensity,
}

impl LevelShift {
    pub fn new(source: CouplingDensity) -> Self {
        Self { source }
    }

    pub fn source(&self) -> &CouplingDensity {
        &self.source
    }

    /// `Im z` of the branch cut.
    pub fn cut_line(&self) -> f64 {
        -0.5 * self.source.gamma_hom()
    }

    /// Which sheet `z` lies on; points within `tol` of the cut line count as on it.
    pub fn sheet(&self, z: Complex64, tol: f64) -> Sheet {
        if self.source.is_discrete() {
            return Sheet::First;
        }
        let d = z.im + 0.5 * self.source.gamma_hom();
        if d.abs() <= tol {
            Sheet::Cut
        } else if d > 0.0 {
            Sheet::First
        } else {
            Sheet::Second
        }
    }

    /// `K̃⁺(z)` continued analytically from above the cut.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let g = self.source.gamma_hom();
        match self.source.profile() {
            Profile::Discrete(e) => {
                let mut sum = Complex64::new(0.0, 0.0);
                for (j, s) in e.spins().iter().enumerate() {
                    let d = z - Complex64::new(s.frequency, -0.5 * s.decay);
                    if d == Complex64::new(0.0, 0.0) {
                        return Err(Error::SingularPoint { index: Some(j), z });
                    }
                    let g = s.coupling.re;
                    sum += g * g / d;
                }
                Ok(sum)
            }
            Profile::Lorentzian {
                center,
                width,
                strength,
            } => {
                let d = z - Complex64::new(*center, -0.5 * (width + g));
                if d == Complex64::new(0.0, 0.0) {
                    return Err(Error::SingularPoint { index: None, z });
                }
                Ok(strength * strength / d)
            }
            Profile::Gaussian {
                center,
                stddev,
                strength,
            } => {
                let xi = gaussian_xi(z, *center, *stddev, g);
                Ok(-I * SQRT_FRAC_PI_2 * strength * strength / stddev * faddeeva(xi))
            }
            Profile::Tabulated(t) => {
                let zeta = shifted(z, g);
                let k = tabulated_first_sheet(t, zeta)?;
                if zeta.im < 0.0 {
                    Ok(k - 2.0 * PI * I * t.continued(zeta))
                } else {
                    Ok(k)
                }
            }
        }
    }

    /// The defining sum or integral itself, with no continuation: below the cut
    /// this differs from [`LevelShift::eval`] by the sheet jump `iΓ_c`.
    pub fn eval_first_sheet(&self, z: Complex64) -> Result<Complex64> {
        let below = z.im + 0.5 * self.source.gamma_hom() < 0.0;
        match self.source.profile() {
            Profile::Discrete(_) => self.eval(z),
            Profile::Tabulated(t) => tabulated_first_sheet(t, shifted(z, self.source.gamma_hom())),
            _ if below => {
                // ρ is real, so the integral obeys K(ζ̄) = conj K(ζ) in ζ = z + iγ_hom/2.
                let zeta = shifted(z, self.source.gamma_hom());
                let mirror = Complex64::new(zeta.re, -zeta.im) - I * 0.5 * self.source.gamma_hom();
                Ok(self.eval(mirror)?.conj())
            }
            _ => self.eval(z),
        }
    }

    /// `dK̃⁺/dz`, on the same sheet as [`LevelShift::eval`].
    pub fn derivative(&self, z: Complex64) -> Result<Complex64> {
        let g = self.source.gamma_hom();
        match self.source.profile() {
            Profile::Discrete(e) => {
                let mut sum = Complex64::new(0.0, 0.0);
                for (j, s) in e.spins().iter().enumerate() {
                    let d = z - Complex64::new(s.frequency, -0.5 * s.decay);
                    if d == Complex64::new(0.0, 0.0) {
                        return Err(Error::SingularPoint { index: Some(j), z });
                    }
                    let g = s.coupling.re;
                    sum -= g * g / (d * d);
                }
                Ok(sum)
            }
            Profile::Lorentzian {
                center,
                width,
                strength,
            } => {
                let d = z - Complex64::new(*center, -0.5 * (width + g));
                if d == Complex64::new(0.0, 0.0) {
                    return Err(Error::SingularPoint { index: None, z });
                }
                Ok(-strength * strength / (d * d))
            }
            Profile::Gaussian {
                center,
                stddev,
                strength,
            } => {
                let xi = gaussian_xi(z, *center, *stddev, g);
                let w = faddeeva(xi);
                Ok(
                    -I * SQRT_FRAC_PI_2 * strength * strength / stddev * faddeeva_derivative(xi, w)
                        / (std::f64::consts::SQRT_2 * stddev),
                )
            }
            Profile::Tabulated(t) => {
                let zeta = shifted(z, g);
                let d = tabulated_first_sheet_derivative(t, zeta)?;
                if zeta.im < 0.0 {
                    Ok(d - 2.0 * PI * I * t.continued_slope(zeta.re))
                } else {
                    Ok(d)
                }
            }
        }
    }

    /// `Δ_c(ω)` and `Γ_c(ω)` on the cut line.
    ///
    /// A discrete ensemble has no cut; it reports `Re K̃⁺(ω)` and `−2 Im K̃⁺(ω)`
    /// on the real axis, the shift and width its spins impart there.
    pub fn cut_decomposition(&self, omega: f64) -> Result<CutDecomposition> {
        let z = Complex64::new(omega, self.cut_line());
        let k = self.eval(z)?;
        let gamma_c = match self.source.density(omega) {
            Some(rho) => 2.0 * PI * rho,
            None => -2.0 * k.im,
        };
        Ok(CutDecomposition { delta_c: k.re, gamma_c })
    }
}

fn gaussian_xi(z: Complex64, center: f64, stddev: f64, gamma_hom: f64) -> Complex64 {
    (z - center + I * 0.5 * gamma_hom) / (std::f64::consts::SQRT_2 * stddev)
}

/// `ζ = z + iγ_hom/2` with a zero imaginary part forced to `+0`, so that points
/// on the cut take the boundary value from above.
fn shifted(z: Complex64, gamma_hom: f64) -> Complex64 {
    let im = z.im + 0.5 * gamma_hom;
    Complex64::new(z.re, if im == 0.0 { 0.0 } else { im })
}

/// `∫ ρ(x)/(ζ − x) dx` for the piecewise-linear interpolant, integrated exactly.
///
/// Each segment contributes `ρ_lin(ζ)[log(ζ−a) − log(ζ−b)] − m(b−a)`; grouping
/// by node gives `Σ c_i log(ζ − a_i) − (ρ_n − ρ_0)` with `c_i` proportional to
/// the jump in slope at node `i`.
pub(crate) fn tabulated_first_sheet(t: &TabulatedDensity, zeta: Complex64) -> Result<Complex64> {
    let mp = t.multipole();
    let u = zeta - mp.center;
    if u.norm() >= 4.0 * mp.radius {
        // Σ μ_k / u^{k+1}, converging at least as 4^{-k}.
        let inv = u.inv();
        let mut p = inv;
        let mut sum = Complex64::new(0.0, 0.0);
        for &m in &mp.moments {
            sum += m * p;
            p *= inv;
        }
        return Ok(sum);
    }
    let (w, r) = (t.omega(), t.rho());
    let n = w.len();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut prev_slope = 0.0;
    for i in 0..n {
        let d = zeta - w[i];
        let slope = if i + 1 < n { t.slope(i) } else { 0.0 };
        let c = if i == 0 {
            r[0] + slope * d
        } else if i + 1 == n {
            -(r[n - 1] + prev_slope * d)
        } else {
            (slope - prev_slope) * d
        };
        prev_slope = slope;
        if c == Complex64::new(0.0, 0.0) {
            continue;
        }
        if d == Complex64::new(0.0, 0.0) {
            return Err(Error::SingularPoint { index: None, z: zeta });
        }
        sum += c * d.ln();
    }
    Ok(sum - (r[n - 1] - r[0]))
}

fn tabulated_first_sheet_derivative(t: &TabulatedDensity, zeta: Complex64) -> Result<Complex64> {
    let mp = t.multipole();
    let u = zeta - mp.center;
    if u.norm() >= 4.0 * mp.radius {
        let inv = u.inv();
        let mut p = inv * inv;
        let mut sum = Complex64::new(0.0, 0.0);
        for (k, &m) in mp.moments.iter().enumerate() {
            sum -= (k as f64 + 1.0) * m * p;
            p *= inv;
        }
        return Ok(sum);
    }
    let (w, r) = (t.omega(), t.rho());
    let n = w.len();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut prev_slope = 0.0;
    for i in 0..n {
        let d = zeta - w[i];
        let slope = if i + 1 < n { t.slope(i) } else { 0.0 };
        let dc = if i == 0 {
            slope
        } else if i + 1 == n {
            -prev_slope
        } else {
            slope - prev_slope
        };
        prev_slope = slope;
        let endpoint = (i == 0 && r[0] != 0.0) || (i + 1 == n && r[n - 1] != 0.0);
        if d == Complex64::new(0.0, 0.0) {
            if endpoint || dc != 0.0 {
                return Err(Error::SingularPoint { index: None, z: zeta });
            }
            continue;
        }
        if dc != 0.0 {
            sum += dc * d.ln();
        }
    }
    let d0 = zeta - w[0];
    let dn = zeta - w[n - 1];
    if r[0] != 0.0 {
        sum += r[0] / d0;
    }
    if r[n - 1] != 0.0 {
        sum -= r[n - 1] / dn;
    }
    Ok(sum)
}

/// `K(t) = ∫ρ(ω) e^{−iωt} dω` including homogeneous damping, for `t ≥ 0`.
pub fn memory_kernel(source: &CouplingDensity, t: f64) -> Result<Complex64> {
    check_nonneg("memory kernel time", t)?;
    let damp = (-0.5 * source.gamma_hom() * t).exp();
    Ok(match source.profile() {
        Profile::Discrete(e) => e
            .spins()
            .iter()
            .map(|s| s.coupling.re.powi(2) * Complex64::new(-0.5 * s.decay * t, -s.frequency * t).exp())
            .sum(),
        Profile::Lorentzian {
            center,
            width,
            strength,
        } => strength * strength * Complex64::new(-0.5 * width * t, -center * t).exp() * damp,
        Profile::Gaussian {
            center,
            stddev,
            strength,
        } => strength * strength * Complex64::new(-0.5 * (stddev * t).powi(2), -center * t).exp() * damp,
        Profile::Tabulated(tab) => tabulated_fourier(tab, t) * damp,
    })
}

/// Exact Fourier integral of the piecewise-linear interpolant.
fn tabulated_fourier(t: &TabulatedDensity, time: f64) -> Complex64 {
    let (w, r) = (t.omega(), t.rho());
    let mut sum = Complex64::new(0.0, 0.0);
    for i in 0..w.len() - 1 {
        let h = w[i + 1] - w[i];
        let m = t.slope(i);
        let u = Complex64::new(0.0, -time * h);
        let (p1, p2) = phi12(u);
        let ea = Complex64::new(0.0, -w[i] * time).exp();
        sum += ea * (r[i] * h * p1 + m * h * h * p2);
    }
    sum
}

/// `φ1(u) = ∫₀¹ e^{us} ds` and `φ2(u) = ∫₀¹ s e^{us} ds`.
fn phi12(u: Complex64) -> (Complex64, Complex64) {
    if u.norm() < 0.5 {
        let (mut p1, mut p2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        let mut term = Complex64::new(1.0, 0.0); // u^k / k!
        for k in 0..24 {
            let kf = k as f64;
            p1 += term / (kf + 1.0);
            p2 += term / (kf + 2.0);
            term *= u / (kf + 1.0);
        }
        (p1, p2)
    } else {
        let e = u.exp();
        ((e - 1.0) / u, (e * (u - 1.0) + 1.0) / (u * u))
    }
}
