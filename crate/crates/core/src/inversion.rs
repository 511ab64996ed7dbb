//! Recovering the level shift and the coupling density from transmission data.

use bitflags::bitflags;
use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{storage::Owned, Dyn, OMatrix, OVector, Vector3, U3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_increasing, check_nonneg, invalid, Result};
use crate::model::CavitySpec;

bitflags! {
    /// Per-point diagnostics attached to recovered quantities.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
    pub struct PointFlags: u8 {
        /// `|χ|` under the floor; the point is excluded.
        const BELOW_FLOOR = 1;
        /// The cavity sweep did not resolve the resonance.
        const UNRESOLVED = 1 << 1;
        /// Lorentzian fit failed or left a large residual.
        const BAD_FIT = 1 << 2;
        /// Recovered density is negative beyond the clamping threshold.
        const NEGATIVE = 1 << 3;
        /// A small negative density was clamped to zero.
        const CLAMPED = 1 << 4;
        /// Derivative taken one-sided or skipped because neighbours were excluded.
        const EDGE_DERIVATIVE = 1 << 5;
    }
}

impl PointFlags {
    /// Points carrying any of these flags hold no level-shift value.
    pub const EXCLUDED: PointFlags = PointFlags::BELOW_FLOOR
        .union(PointFlags::UNRESOLVED)
        .union(PointFlags::BAD_FIT);
}

impl std::fmt::Display for PointFlags {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_empty() {
            return Ok(());
        }
        bitflags::parser::to_writer(self, f)
    }
}

/// Relative floor on `|χ_cc|` below which a point is excluded.
pub const DEFAULT_CHI_FLOOR: f64 = 1e-10;
/// Relative RMS residual above which a transmissivity fit is rejected.
pub const FIT_RESIDUAL_TOL: f64 = 1e-3;

/// Tabulated `K̃⁺(ω)` with per-point diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelShiftTable {
    pub omega: Vec<f64>,
    /// NaN where the point was excluded.
    pub k: Vec<Complex64>,
    /// First-order error of `K̃⁺` per unit relative error of `χ_cc`, i.e. `1/|χ_cc|`.
    pub sensitivity: Vec<f64>,
    pub flags: Vec<PointFlags>,
}

impl LevelShiftTable {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn is_valid(&self, i: usize) -> bool {
        !self.flags[i].intersects(PointFlags::EXCLUDED)
    }
}

/// `K̃⁺(ω) = ω − ω_c + iκ − 1/χ_cc(ω)`, pointwise.
///
/// `floor` is relative to the largest `|χ_cc|`; pass [`DEFAULT_CHI_FLOOR`] unless
/// the data is known to be noisier.
pub fn levelshift_from_chi(
    omega: &[f64],
    chi: &[Complex64],
    cavity: &CavitySpec,
    floor: f64,
) -> Result<LevelShiftTable> {
    check_increasing("probe grid", omega)?;
    cavity.validate()?;
    check_nonneg("floor", floor)?;
    if omega.len() != chi.len() {
        return invalid(format!("{} probe frequencies but {} χ samples", omega.len(), chi.len()));
    }
    if chi.iter().any(|c| !c.is_finite()) {
        return invalid("χ samples must be finite");
    }
    let peak = chi.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let cutoff = floor * peak;
    let wc = cavity.complex_frequency();
    let mut table = LevelShiftTable {
        omega: omega.to_vec(),
        k: Vec::with_capacity(chi.len()),
        sensitivity: Vec::with_capacity(chi.len()),
        flags: Vec::with_capacity(chi.len()),
    };
    for (&w, &c) in omega.iter().zip(chi) {
        let a = c.norm();
        if a <= cutoff || a == 0.0 {
            table.k.push(Complex64::new(f64::NAN, f64::NAN));
            table.sensitivity.push(f64::INFINITY);
            table.flags.push(PointFlags::BELOW_FLOOR);
        } else {
            table.k.push(w - wc - c.inv());
            table.sensitivity.push(1.0 / a);
            table.flags.push(PointFlags::empty());
        }
    }
    Ok(table)
}

/// Transmissivity `|χ_cc(ω, ω_c)|²` on a probe grid for a sweep of cavity frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissivitySweep {
    pub omega: Vec<f64>,
    pub cavity_grid: Vec<f64>,
    /// `data[i][j]` is the transmissivity at `omega[i]` with the cavity at `cavity_grid[j]`.
    pub data: Vec<Vec<f64>>,
}

/// Outcome of one Lorentzian fit `A/((ω_c − c)² + w²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzFit {
    pub amplitude: f64,
    pub center: f64,
    pub half_width: f64,
    /// RMS residual relative to the peak sample.
    pub residual: f64,
}

struct LorentzProblem<'a> {
    x: &'a [f64],
    y: &'a [f64],
    /// Parameters: log A, c, log w, in units where the sweep spans O(1).
    p: Vector3<f64>,
    shift: f64,
    span: f64,
    ynorm: f64,
}

impl LorentzProblem<'_> {
    fn model(&self, x: f64) -> (f64, [f64; 3]) {
        let (a, c, w) = (self.p[0].exp(), self.p[1], self.p[2].exp());
        let u = (x - self.shift) / self.span - c;
        let den = u * u + w * w;
        let f = a / den;
        (f, [f, 2.0 * f * u / den, -2.0 * f * w * w / den])
    }
}

impl LeastSquaresProblem<f64, Dyn, U3> for LorentzProblem<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, U3>;
    type ParameterStorage = Owned<f64, U3>;

    fn set_params(&mut self, p: &Vector3<f64>) {
        self.p = *p;
    }

    fn params(&self) -> Vector3<f64> {
        self.p
    }

    fn residuals(&self) -> Option<OVector<f64, Dyn>> {
        Some(OVector::<f64, Dyn>::from_iterator(
            self.x.len(),
            self.x
                .iter()
                .zip(self.y)
                .map(|(&x, &y)| (self.model(x).0 - y) / self.ynorm),
        ))
    }

    fn jacobian(&self) -> Option<OMatrix<f64, Dyn, U3>> {
        let mut j = OMatrix::<f64, Dyn, U3>::zeros(self.x.len());
        for (r, &x) in self.x.iter().enumerate() {
            let d = self.model(x).1;
            for c in 0..3 {
                j[(r, c)] = d[c] / self.ynorm;
            }
        }
        Some(j)
    }
}

/// Least-squares Lorentzian fit over a cavity sweep.
///
/// `None` when the samples do not bracket the half maximum on both sides of the
/// peak, so the width is not resolved.
pub fn fit_lorentzian(x: &[f64], y: &[f64]) -> Option<LorentzFit> {
    let (imax, &ymax) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(ymax > 0.0) || x.len() < 4 {
        return None;
    }
    let half = 0.5 * ymax;
    let cross = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = imax;
        for i in range {
            if y[i] < half {
                let t = (y[prev] - half) / (y[prev] - y[i]);
                return Some(x[prev] + t * (x[i] - x[prev]));
            }
            prev = i;
        }
        None
    };
    let left = cross(&mut (0..imax).rev())?;
    let right = cross(&mut (imax + 1..x.len()))?;
    let shift = x[imax];
    let span = x[x.len() - 1] - x[0];
    let w0 = 0.5 * (right - left) / span;
    let problem = LorentzProblem {
        x,
        y,
        p: Vector3::new((ymax * w0 * w0).ln(), 0.0, w0.ln()),
        shift,
        span,
        ynorm: ymax,
    };
    let (fitted, report) = LevenbergMarquardt::new()
        .with_ftol(1e-15)
        .with_xtol(1e-15)
        .with_gtol(1e-15)
        .with_patience(200)
        .minimize(problem);
    if !report.termination.was_successful() {
        return None;
    }
    let rms = (2.0 * report.objective_function / x.len() as f64).sqrt();
    let p = fitted.p;
    let w = p[2].exp();
    Some(LorentzFit {
        amplitude: p[0].exp() * span * span,
        center: shift + p[1] * span,
        half_width: w * span,
        residual: rms,
    })
}

/// Level shift from fits of the transmissivity against the cavity frequency.
///
/// For each probe `ω` the sweep is fitted with `A/((ω_c − c)² + w²)`; then
/// `Re K̃⁺ = ω − c` and `Im K̃⁺ = κ − w`.
pub fn levelshift_from_transmissivity(sweep: &TransmissivitySweep, kappa: f64) -> Result<LevelShiftTable> {
    check_increasing("probe grid", &sweep.omega)?;
    check_increasing("cavity grid", &sweep.cavity_grid)?;
    check_nonneg("cavity loss", kappa)?;
    if sweep.data.len() != sweep.omega.len() || sweep.data.iter().any(|r| r.len() != sweep.cavity_grid.len()) {
        return invalid("transmissivity data must be probes × cavity frequencies");
    }
    if sweep.data.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return invalid("transmissivity must be finite and non-negative");
    }
    let n = sweep.omega.len();
    let mut table = LevelShiftTable {
        omega: sweep.omega.clone(),
        k: Vec::with_capacity(n),
        sensitivity: Vec::with_capacity(n),
        flags: Vec::with_capacity(n),
    };
    for (&w, row) in sweep.omega.iter().zip(&sweep.data) {
        match fit_lorentzian(&sweep.cavity_grid, row) {
            Some(fit) if fit.residual <= FIT_RESIDUAL_TOL => {
                table.k.push(Complex64::new(w - fit.center, kappa - fit.half_width));
                table.sensitivity.push(fit.half_width);
                table.flags.push(PointFlags::empty());
            }
            other => {
                table.k.push(Complex64::new(f64::NAN, f64::NAN));
                table.sensitivity.push(f64::INFINITY);
                table.flags.push(if other.is_some() {
                    PointFlags::BAD_FIT
                } else {
                    PointFlags::UNRESOLVED
                });
            }
        }
    }
    Ok(table)
}

/// Recovered coupling density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub omega: Vec<f64>,
    pub k: Vec<Complex64>,
    pub rho: Vec<f64>,
    pub flags: Vec<PointFlags>,
    /// `∫ρ dω` over the grid plus inverse-square tails beyond its ends: the recovered `Ω²`.
    pub total_weight: f64,
    /// Largest disagreement between centered differences at one and two grid steps,
    /// relative to the largest derivative.
    pub derivative_mismatch: f64,
    pub warnings: Vec<String>,
}

/// Derivative mismatch above which the grid is reported as too coarse.
pub const DERIVATIVE_MISMATCH_TOL: f64 = 0.1;

/// Centered difference on a non-uniform grid through points `a < i < b`.
fn centered(x: &[f64], y: &[f64], a: usize, i: usize, b: usize) -> f64 {
    let (h1, h2) = (x[i] - x[a], x[b] - x[i]);
    (h1 * h1 * (y[b] - y[i]) + h2 * h2 * (y[i] - y[a])) / (h1 * h2 * (h1 + h2))
}

/// `ρ(ω) ≈ −Im K̃⁺(ω)/π + (γ_hom/2π) ∂_ω Re K̃⁺(ω)`.
///
/// Negative values down to `−1e−6·max ρ` are clamped to zero; anything lower is
/// kept and flagged.
pub fn density_from_levelshift(table: &LevelShiftTable, gamma_hom: f64) -> Result<DensityEstimate> {
    check_increasing("grid", &table.omega)?;
    check_nonneg("homogeneous width", gamma_hom)?;
    let n = table.len();
    if table.k.len() != n || table.flags.len() != n {
        return invalid("level-shift table columns differ in length");
    }
    let valid: Vec<usize> = (0..n).filter(|&i| table.is_valid(i)).collect();
    if valid.len() < 3 {
        return invalid("fewer than three valid level-shift points");
    }
    let x: Vec<f64> = valid.iter().map(|&i| table.omega[i]).collect();
    let re: Vec<f64> = valid.iter().map(|&i| table.k[i].re).collect();
    let m = valid.len();

    let mut flags = table.flags.clone();
    let mut deriv = vec![0.0; m];
    let mut mismatch: f64 = 0.0;
    let mut dmax: f64 = 0.0;
    for j in 0..m {
        let (a, b) = (j.saturating_sub(1), (j + 1).min(m - 1));
        deriv[j] = if j == 0 || j == m - 1 {
            flags[valid[j]] |= PointFlags::EDGE_DERIVATIVE;
            (re[b] - re[a]) / (x[b] - x[a])
        } else {
            // Skipped neighbours break the stencil symmetry; note it.
            if valid[b] - valid[a] != 2 {
                flags[valid[j]] |= PointFlags::EDGE_DERIVATIVE;
            }
            centered(&x, &re, a, j, b)
        };
        dmax = dmax.max(deriv[j].abs());
        if j >= 2 && j + 2 < m {
            mismatch = mismatch.max((deriv[j] - centered(&x, &re, j - 2, j, j + 2)).abs());
        }
    }
    let mismatch = if dmax > 0.0 { mismatch / dmax } else { 0.0 };

    let mut rho = vec![f64::NAN; n];
    for (j, &i) in valid.iter().enumerate() {
        rho[i] = -table.k[i].im / std::f64::consts::PI + gamma_hom / (2.0 * std::f64::consts::PI) * deriv[j];
    }
    let peak = valid.iter().map(|&i| rho[i]).fold(0.0, f64::max);
    for &i in &valid {
        if rho[i] < 0.0 {
            if rho[i] >= -1e-6 * peak {
                rho[i] = 0.0;
                flags[i] |= PointFlags::CLAMPED;
            } else {
                flags[i] |= PointFlags::NEGATIVE;
            }
        }
    }

    let r: Vec<f64> = valid.iter().map(|&i| rho[i]).collect();
    let body: f64 = (1..m).map(|j| 0.5 * (r[j] + r[j - 1]) * (x[j] - x[j - 1])).sum();
    let total_weight = body + tail(x[1], r[1], x[0], r[0]) + tail(x[m - 2], r[m - 2], x[m - 1], r[m - 1]);

    let mut warnings = Vec::new();
    if mismatch > DERIVATIVE_MISMATCH_TOL {
        warnings.push(format!(
            "grid too coarse for the derivative term: one- and two-step differences disagree by {:.1}%",
            100.0 * mismatch
        ));
    }
    let negatives = flags.iter().filter(|f| f.contains(PointFlags::NEGATIVE)).count();
    if negatives > 0 {
        warnings.push(format!(
            "{negatives} points have a negative density; the first-order homogeneous correction is not adequate there"
        ));
    }
    let excluded = n - m;
    if excluded > 0 {
        warnings.push(format!("{excluded} points excluded from the inversion"));
    }
    Ok(DensityEstimate {
        omega: table.omega.clone(),
        k: table.k.clone(),
        rho,
        flags,
        total_weight,
        derivative_mismatch: mismatch,
        warnings,
    })
}

/// Weight beyond the edge point `(xe, re)` assuming `ρ ∝ (ω − c)⁻²`, fixed by the
/// edge point and its inner neighbour `(xi, ri)`. Zero when the data does not decay.
fn tail(xi: f64, ri: f64, xe: f64, re: f64) -> f64 {
    if !(re > 0.0 && ri > re) {
        return 0.0;
    }
    // √(1/ρ) is linear in ω for an inverse-square tail.
    let (si, se) = (ri.sqrt().recip(), re.sqrt().recip());
    let slope = (se - si) / (xe - xi);
    let dist = se / slope;
    re * dist.abs()
}
