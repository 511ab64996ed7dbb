//! Complex poles of the cavity propagator, on the sheet the continuation puts them.
//!
//! Roots of `f(z) = z − ω_c + iκ − K̃⁺(z)` are found by damped Newton
//! iteration. `K̃⁺` is evaluated through the continuation below the cut, so a
//! root found under the cut line is a second-sheet pole.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_nonneg, invalid, Error, Result};
use crate::levelshift::{LevelShift, Sheet};
use crate::model::{moment_set, CavitySpec, CouplingDensity, Profile};

const I: Complex64 = Complex64::new(0.0, 1.0);
const MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleResult {
    pub location: Complex64,
    pub sheet: Sheet,
    /// Residue of `G̃⁺_cc`, `1/f′(z)`.
    pub residue: Complex64,
    pub iterations: usize,
    pub converged: bool,
    /// `|f(z)|` at the returned location.
    pub residual: f64,
}

/// Frequency scale used for tolerances: the source's own scale or the cavity loss.
pub fn pole_scale(ls: &LevelShift, cavity: &CavitySpec) -> f64 {
    ls.source().scale().max(cavity.loss)
}

/// `f(z) = z − ω̃_c − K̃⁺(z)`; its zeros are the poles of `G̃⁺_cc`.
pub fn pole_function(ls: &LevelShift, cavity: &CavitySpec, z: Complex64) -> Result<Complex64> {
    Ok(z - cavity.complex_frequency() - ls.eval(z)?)
}

/// Newton iteration from each seed. Roots closer than `1e−8·scale` are merged.
pub fn find_poles(ls: &LevelShift, cavity: &CavitySpec, seeds: &[Complex64]) -> Result<Vec<PoleResult>> {
    cavity.validate()?;
    if let Some(s) = seeds.iter().find(|s| !s.is_finite()) {
        return invalid(format!("seed {s} is not finite"));
    }
    let scale = pole_scale(ls, cavity);
    // A discrete source has exactly N+1 roots; a seed that lands on a known one
    // is retried with the known roots divided out.
    let root_count = ls.source().ensemble().map(|e| e.len() + 1);
    let mut out: Vec<PoleResult> = Vec::new();
    for &seed in seeds {
        let mut r = newton(ls, cavity, seed, scale, &[])?;
        let known = |out: &[PoleResult], z: Complex64| out.iter().position(|p| (p.location - z).norm() < 1e-8 * scale);
        if let (Some(count), Some(_)) = (root_count, known(&out, r.location)) {
            let found: Vec<Complex64> = out.iter().filter(|p| p.converged).map(|p| p.location).collect();
            if found.len() < count {
                let d = newton(ls, cavity, seed, scale, &found)?;
                if d.converged && known(&out, d.location).is_none() {
                    r = newton(ls, cavity, d.location, scale, &[])?;
                }
            }
        }
        match known(&out, r.location) {
            Some(i) if !out[i].converged && r.converged => out[i] = r,
            Some(_) => {}
            None => out.push(r),
        }
    }
    if let (Some(count), Some(e)) = (root_count, ls.source().ensemble()) {
        // Completion: starts on a small ring around each spin line, whose radius
        // is half the distance to the nearest other line.
        let lam: Vec<Complex64> = e
            .spins()
            .iter()
            .map(|s| Complex64::new(s.frequency, -0.5 * s.decay))
            .collect();
        'spins: for (j, &l) in lam.iter().enumerate() {
            let near = lam
                .iter()
                .enumerate()
                .filter(|&(k, m)| k != j && *m != l)
                .map(|(_, m)| (m - l).norm())
                .fold(scale, f64::min);
            for k in 0..6 {
                if out.iter().filter(|p| p.converged).count() >= count {
                    break 'spins;
                }
                let start = l + 0.5 * near * Complex64::from_polar(1.0, std::f64::consts::PI * (k as f64 + 0.5) / 3.0);
                let r = newton(ls, cavity, start, scale, &[])?;
                if r.converged && !out.iter().any(|p| (p.location - r.location).norm() < 1e-8 * scale) {
                    out.push(r);
                }
            }
        }
    }
    out.sort_by(|a, b| {
        a.location
            .re
            .total_cmp(&b.location.re)
            .then(b.location.im.total_cmp(&a.location.im))
    });
    Ok(out)
}

fn eval_f(ls: &LevelShift, cavity: &CavitySpec, z: Complex64) -> Result<(Complex64, Complex64)> {
    let f = pole_function(ls, cavity, z)?;
    let df = 1.0 - ls.derivative(z)?;
    Ok((f, df))
}

/// Newton iteration on `f(z)/Π(z − r_i)` over the `deflate` roots (Maehly's
/// correction); plain Newton when `deflate` is empty.
fn newton(
    ls: &LevelShift,
    cavity: &CavitySpec,
    seed: Complex64,
    scale: f64,
    deflate: &[Complex64],
) -> Result<PoleResult> {
    let tol = 1e-10 * scale;
    let mut z = seed;
    // Merit is log|f/Π(z − r_i)|, which stays finite for hundreds of roots.
    let deflated = |z: Complex64, f: Complex64, df: Complex64| -> (f64, Complex64) {
        let mut merit = f.norm().ln();
        let mut corr = Complex64::new(0.0, 0.0);
        for r in deflate {
            let d = z - r;
            merit -= d.norm().ln();
            corr += d.inv();
        }
        (merit, f / (df - f * corr))
    };
    // A seed on a discrete pole of K̃ is nudged off it.
    let (mut f, mut df) = loop {
        match eval_f(ls, cavity, z) {
            Ok(v) => break v,
            Err(Error::SingularPoint { .. }) => z += Complex64::new(1e-9 * scale, -1e-9 * scale),
            Err(e) => return Err(e),
        }
    };
    let mut iterations = 0;
    while iterations < MAX_ITER {
        iterations += 1;
        if f == Complex64::new(0.0, 0.0) || df == Complex64::new(0.0, 0.0) {
            break;
        }
        let (merit, step) = deflated(z, f, df);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial = z - lambda * step;
            if let Ok((ft, dft)) = eval_f(ls, cavity, trial) {
                let mt = deflated(trial, ft, dft).0;
                if mt < merit || (ft.norm() <= tol && f.norm() <= tol) {
                    accepted = Some((trial, ft, dft));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((zn, fn_, dfn)) = accepted else { break };
        let moved = (zn - z).norm();
        z = zn;
        f = fn_;
        df = dfn;
        if f.norm() <= tol && moved <= 4.0 * f64::EPSILON * z.norm().max(scale) {
            break;
        }
    }
    Ok(PoleResult {
        location: z,
        sheet: ls.sheet(z, 1e-12 * scale),
        residue: df.inv(),
        iterations,
        converged: f.norm() <= tol,
        residual: f.norm(),
    })
}

/// Zeroth-order polariton energies `(ω̄ + ω̃_c)/2 ± Ω_R` for a source.
fn polariton_seeds(source: &CouplingDensity, cavity: &CavitySpec) -> [Complex64; 2] {
    let mean = source.mean_frequency();
    let d = cavity.complex_frequency() - mean;
    let omega = source.collective_coupling();
    let rabi = (omega * omega + d * d / 4.0).sqrt();
    let mid = (mean + cavity.complex_frequency()) / 2.0;
    [mid + rabi, mid - rabi]
}

/// Default search depth below the real axis: ten times the larger of `κ` and the line width.
pub fn default_depth(source: &CouplingDensity, cavity: &CavitySpec) -> f64 {
    10.0 * cavity
        .loss
        .max(source.fwhm() + source.gamma_hom())
        .max(1e-12 * source.scale())
}

/// Starting points for [`find_poles`] suited to the source type.
pub fn default_seeds(ls: &LevelShift, cavity: &CavitySpec, depth: Option<f64>) -> Vec<Complex64> {
    let source = ls.source();
    let mut seeds = vec![cavity.complex_frequency()];
    seeds.extend(polariton_seeds(source, cavity));
    match source.profile() {
        Profile::Discrete(e) => {
            let wc = cavity.complex_frequency();
            let lam: Vec<Complex64> = e
                .spins()
                .iter()
                .map(|s| Complex64::new(s.frequency, -0.5 * s.decay))
                .collect();
            for (s, &l) in e.spins().iter().zip(&lam) {
                let g2 = s.coupling.re * s.coupling.re;
                let gap = l - wc;
                let shift = if gap.norm() > 0.0 {
                    g2 / gap
                } else {
                    Complex64::new(0.0, 0.0)
                };
                seeds.push(l + shift);
            }
            // One root lies between each pair of neighbouring spin lines when the
            // coupling exceeds their spacing; seed every gap.
            for w in lam.windows(2) {
                for t in [0.25, 0.5, 0.75] {
                    seeds.push(w[0] + t * (w[1] - w[0]));
                }
            }
        }
        Profile::Lorentzian {
            center,
            width,
            strength,
        } => {
            let lam = Complex64::new(*center, -0.5 * (width + source.gamma_hom()));
            let gap = lam - cavity.complex_frequency();
            seeds.push(lam);
            if gap.norm() > 0.0 {
                seeds.push(lam + strength * strength / gap);
            }
        }
        Profile::Gaussian { .. } | Profile::Tabulated(_) => {
            let depth = depth.unwrap_or_else(|| default_depth(source, cavity));
            let mean = source.mean_frequency().re;
            let reach = 3.0 * (source.collective_coupling() + source.fwhm());
            let lo = cavity.frequency.min(mean) - reach;
            let hi = cavity.frequency.max(mean) + reach;
            let top = ls.cut_line() + 0.05 * depth;
            for i in 0..25 {
                for k in 0..13 {
                    let re = lo + (hi - lo) * i as f64 / 24.0;
                    let im = top - depth * k as f64 / 12.0;
                    seeds.push(Complex64::new(re, im));
                }
            }
        }
    }
    seeds
}

/// [`find_poles`] from [`default_seeds`], keeping converged roots no deeper than `depth`.
pub fn search_poles(ls: &LevelShift, cavity: &CavitySpec, depth: Option<f64>) -> Result<Vec<PoleResult>> {
    let depth = depth.unwrap_or_else(|| default_depth(ls.source(), cavity));
    let seeds = default_seeds(ls, cavity, Some(depth));
    let mut poles = find_poles(ls, cavity, &seeds)?;
    poles.retain(|p| p.converged && p.location.im >= -depth * (1.0 + 1e-9));
    Ok(poles)
}

/// Closed-form two-oscillator poles and dressed amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianPoles {
    pub e_plus: Complex64,
    pub e_minus: Complex64,
    pub theta: Complex64,
    pub rabi_frequency: Complex64,
    pub eta_plus_c: Complex64,
    pub eta_minus_c: Complex64,
    pub eta_plus_s: Complex64,
    pub eta_minus_s: Complex64,
}

/// Poles for a line at `omega_a` of total width `gamma` coupled with strength `coupling`.
/// At the exceptional point the energies coincide and `theta` and the amplitudes are NaN.
pub fn lorentzian_poles(omega_a: f64, gamma: f64, coupling: f64, cavity: &CavitySpec) -> Result<LorentzianPoles> {
    check_finite("line center", omega_a)?;
    check_nonneg("line width", gamma)?;
    if !(coupling > 0.0 && coupling.is_finite()) {
        return invalid(format!("collective coupling must be positive, got {coupling}"));
    }
    cavity.validate()?;
    let delta = cavity.frequency - omega_a;
    let d = Complex64::new(delta, -(cavity.loss - 0.5 * gamma));
    let rabi = (coupling * coupling + d * d / 4.0).sqrt();
    let cos = d / (2.0 * rabi);
    let sin = coupling / rabi;
    // At the exceptional point Ω_R = 0 and θ is undefined; the energies are not.
    let theta = -I * (cos + I * sin).ln();
    let base = Complex64::new(omega_a, -0.5 * gamma) + d / 2.0;
    let norm = theta.im.cosh().sqrt();
    let (c, s) = ((theta / 2.0).cos() / norm, (theta / 2.0).sin() / norm);
    Ok(LorentzianPoles {
        e_plus: base + rabi,
        e_minus: base - rabi,
        theta,
        rabi_frequency: rabi,
        eta_plus_c: c,
        eta_minus_c: s,
        eta_plus_s: s,
        eta_minus_s: -c,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Oscillatory,
    Overdamped,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Oscillatory => "oscillatory",
            Regime::Overdamped => "overdamped",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    /// `Re E₊ − Re E₋`, zero when overdamped.
    pub splitting: f64,
    /// `−2 Im E₊` and `−2 Im E₋`.
    pub widths: (f64, f64),
}

/// Oscillatory when the real parts differ by more than `tol` times the larger width.
pub fn classify_regime(plus: Complex64, minus: Complex64, tol: f64) -> RegimeReport {
    let widths = (-2.0 * plus.im, -2.0 * minus.im);
    let split = (plus.re - minus.re).abs();
    let oscillatory = split > tol * widths.0.abs().max(widths.1.abs());
    RegimeReport {
        regime: if oscillatory {
            Regime::Oscillatory
        } else {
            Regime::Overdamped
        },
        splitting: if oscillatory { split } else { 0.0 },
        widths,
    }
}

/// One point of a pole track over the collective coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub omega: f64,
    pub plus: PoleResult,
    pub minus: PoleResult,
    /// The two tracks met; both were re-seeded from a grid search.
    pub collision: bool,
    pub regime: RegimeReport,
}

/// The two least-damped converged roots, ordered by real part (upper first).
fn least_damped_pair(poles: &[PoleResult]) -> Option<(PoleResult, PoleResult)> {
    let mut v: Vec<&PoleResult> = poles.iter().filter(|p| p.converged).collect();
    v.sort_by(|a, b| b.location.im.total_cmp(&a.location.im));
    match v.as_slice() {
        [a, b, ..] => Some(if a.location.re >= b.location.re {
            (**a, **b)
        } else {
            (**b, **a)
        }),
        [a] => Some((**a, **a)),
        [] => None,
    }
}

/// Follow the two principal poles as `Ω` steps through `omegas`.
pub fn track_poles(ls: &LevelShift, cavity: &CavitySpec, omegas: &[f64]) -> Result<Vec<TrackPoint>> {
    cavity.validate()?;
    if omegas.windows(2).any(|w| w[1] < w[0]) || omegas.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return invalid("coupling sweep must be finite, non-negative and non-decreasing");
    }
    let mut out: Vec<TrackPoint> = Vec::with_capacity(omegas.len());
    for &omega in omegas {
        let src = ls.source().with_strength(omega)?;
        let lsk = LevelShift::new(src);
        let scale = pole_scale(&lsk, cavity);
        let seeds: [Complex64; 2] = match out.last() {
            Some(prev) => [prev.plus.location, prev.minus.location],
            None if omega > 0.0 => {
                let s = lsk.source();
                let lp = lorentzian_poles(s.mean_frequency().re, s.fwhm() + s.gamma_hom(), omega, cavity)?;
                [lp.e_plus, lp.e_minus]
            }
            None => [cavity.complex_frequency(); 2],
        };
        let plus = newton(&lsk, cavity, seeds[0], scale, &[])?;
        let minus = newton(&lsk, cavity, seeds[1], scale, &[])?;
        let tracks_met = (plus.location - minus.location).norm() < 1e-6 * scale;
        let (plus, minus, collision) = if (tracks_met && omega > 0.0) || !plus.converged || !minus.converged {
            match least_damped_pair(&search_poles(&lsk, cavity, None)?) {
                Some((a, b)) => (a, b, tracks_met),
                None => (plus, minus, tracks_met),
            }
        } else {
            (plus, minus, false)
        };
        let regime = classify_regime(plus.location, minus.location, 1e-6);
        // Overdamped poles share a real part; order those by damping instead.
        let upper_first = match regime.regime {
            Regime::Oscillatory => plus.location.re >= minus.location.re,
            Regime::Overdamped => plus.location.im >= minus.location.im,
        };
        let (plus, minus) = if upper_first { (plus, minus) } else { (minus, plus) };
        out.push(TrackPoint {
            omega,
            plus,
            minus,
            collision,
            regime: classify_regime(plus.location, minus.location, 1e-6),
        });
    }
    Ok(out)
}

/// Real-part separation of the two least-damped poles at coupling `omega`.
pub fn pole_splitting(ls: &LevelShift, cavity: &CavitySpec, omega: f64) -> Result<f64> {
    let lsk = LevelShift::new(ls.source().with_strength(omega)?);
    let poles = search_poles(&lsk, cavity, None)?;
    let (a, b) = least_damped_pair(&poles)
        .ok_or_else(|| Error::NonConvergence(format!("no poles found at coupling {omega}")))?;
    Ok((a.location.re - b.location.re).abs())
}

/// Smallest coupling in `[lo, hi]` where the two least-damped poles split,
/// `|ΔRe E| > 1e−6·γ_FWHM`, located by bisection.
pub fn splitting_onset(ls: &LevelShift, cavity: &CavitySpec, lo: f64, hi: f64) -> Result<f64> {
    check_nonneg("lower coupling", lo)?;
    if !(hi > lo && hi.is_finite()) {
        return invalid("onset bracket must satisfy lo < hi");
    }
    let thresh = 1e-6 * (ls.source().fwhm() + ls.source().gamma_hom());
    let split = |w: f64| pole_splitting(ls, cavity, w).map(|s| s > thresh);
    if split(lo)? {
        return invalid(format!("poles are already split at the lower coupling {lo}"));
    }
    if !split(hi)? {
        return invalid(format!("poles are not split at the upper coupling {hi}"));
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > 1e-6 * hi {
        let m = 0.5 * (a + b);
        if split(m)? {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Strong,
    Weak,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticPrediction {
    pub plus: Complex64,
    pub minus: Complex64,
    pub order: u8,
    /// A non-zero `A₁` dominates; the order-1 result was returned for order 2.
    pub first_order_dominates: bool,
}

/// Perturbative pole positions from the large- or small-coupling expansions.
pub fn asymptotic_poles(
    source: &CouplingDensity,
    cavity: &CavitySpec,
    order: u8,
    branch: Branch,
) -> Result<AsymptoticPrediction> {
    cavity.validate()?;
    if order > 2 {
        return invalid(format!("orders 0, 1 and 2 are available, got {order}"));
    }
    let omega = source.collective_coupling();
    if omega <= 0.0 {
        return invalid("asymptotic poles need a positive collective coupling");
    }
    match branch {
        Branch::Strong => strong(source, cavity, order, omega),
        Branch::Weak => weak(source, cavity, order, omega),
    }
}

fn strong(source: &CouplingDensity, cavity: &CavitySpec, order: u8, omega: f64) -> Result<AsymptoticPrediction> {
    let mean = source.mean_frequency();
    let wc = cavity.complex_frequency();
    let d = wc - mean;
    let rabi = (omega * omega + d * d / 4.0).sqrt();
    let cos = d / (2.0 * rabi);
    let (sin2, cos2) = ((1.0 - cos) / 2.0, (1.0 + cos) / 2.0);
    let mid = (mean + wc) / 2.0;
    let mut plus = mid + rabi;
    let mut minus = mid - rabi;
    let moments = moment_set(source, 2);
    let a1 = moments.a(1);
    let a1_zero = a1.norm() <= 1e-12 * source.scale();
    if order >= 1 {
        plus += a1 * sin2;
        minus += a1 * cos2;
    }
    let mut first_order_dominates = false;
    if order == 2 {
        if !a1_zero {
            first_order_dominates = true;
        } else if let (Profile::Gaussian { center, stddev, .. }, true) = (
            source.profile(),
            cavity.frequency == source.mean_frequency().re && cavity.loss == 0.0 && source.gamma_hom() == 0.0,
        ) {
            // Resonant, lossless Gaussian: the first asymptotic term sets the
            // positions and the exponentially small imaginary part the widths.
            let s2 = stddev * stddev;
            let re = (omega * omega + s2).sqrt();
            let width = (2.0 * std::f64::consts::PI / std::f64::consts::E).sqrt()
                * (-omega * omega / (2.0 * s2)).exp()
                * (omega * omega - s2)
                / (2.0 * stddev);
            plus = Complex64::new(center + re, -0.5 * width);
            minus = Complex64::new(center - re, -0.5 * width);
        } else {
            let a2 = moments.a(2);
            plus = mid + rabi * (1.0 + 2.0 * sin2 * sin2 * a2 / (omega * omega));
            minus = mid - rabi * (1.0 + 2.0 * cos2 * cos2 * a2 / (omega * omega));
        }
    }
    Ok(AsymptoticPrediction {
        plus,
        minus,
        order,
        first_order_dominates,
    })
}

fn weak(source: &CouplingDensity, cavity: &CavitySpec, order: u8, omega: f64) -> Result<AsymptoticPrediction> {
    let Profile::Gaussian { center, stddev, .. } = source.profile() else {
        return invalid("the weak-coupling expansion is available for Gaussian profiles only");
    };
    let (sigma, gh, kappa) = (*stddev, source.gamma_hom(), cavity.loss);
    if omega >= sigma {
        return invalid(format!(
            "the weak-coupling branch needs Ω < σ (Ω = {omega}, σ = {sigma})"
        ));
    }
    let delta = cavity.frequency - center;
    let r = sigma * sigma / (omega * omega) - 1.0;
    let root2pi = (2.0 * std::f64::consts::PI).sqrt();
    let plus = Complex64::new(
        center + delta / (1.0 - omega * omega / (sigma * sigma)),
        -0.5 * (2.0 * kappa + (2.0 * kappa - gh + root2pi * sigma) / r),
    );
    let minus = Complex64::new(
        center - delta,
        -0.5 * (2.0 * gh - 2.0 * kappa + 8.0 * sigma / root2pi * r),
    );
    Ok(AsymptoticPrediction {
        plus,
        minus,
        order,
        first_order_dominates: false,
    })
}

/// Dispersive shift of the superradiant mode by a detuned cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapShift {
    pub delta_gap: f64,
    /// `Ω/Δω`, `|δ|/Ω` and `Ω²/(Δω|δ|)`; each must reach 5 for the regime to hold.
    pub ratios: [f64; 3],
    pub valid: bool,
}

pub const GAP_RATIO: f64 = 5.0;

/// `Δ_gap = −Ω²/δ` with the validity check `Δω ≪ Ω ≪ |δ| ≪ Ω²/Δω`.
pub fn gap_shift(omega: f64, delta: f64, inhomogeneous_width: f64) -> Result<GapShift> {
    check_nonneg("collective coupling", omega)?;
    check_finite("detuning", delta)?;
    check_nonneg("inhomogeneous width", inhomogeneous_width)?;
    if delta == 0.0 {
        return invalid("the gap shift needs a detuned cavity (delta = 0 is the resonant case)");
    }
    let dw = inhomogeneous_width;
    let ratios = [omega / dw, delta.abs() / omega, omega * omega / (dw * delta.abs())];
    Ok(GapShift {
        delta_gap: -omega * omega / delta,
        valid: ratios.iter().all(|&r| r >= GAP_RATIO),
        ratios,
    })
}
