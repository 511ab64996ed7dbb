//! Where an initially photonic excitation ends up, and how well a dressed
//! superradiant state survives.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::time::{EigenPropagator, KernelSolver, TimeTrace};
use super::{channel_from_k, Channel};
use crate::error::{check_increasing, invalid, Error, Result};
use crate::levelshift::LevelShift;
use crate::model::{CavitySpec, Ensemble, Profile};
use crate::spectral::eigenmodes;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationDistribution {
    /// Adaptive frequency grid and `p(ω) = ρ(ω)|G̃⁺_cc(ω)|²` on it (empty for discrete sources).
    pub omega: Vec<f64>,
    pub p: Vec<f64>,
    /// `∫ p(ω) dω`.
    pub integral: f64,
    /// `2κ ∫₀^∞ |G_cc(t)|² dt`, the share lost through the cavity.
    pub leak: f64,
    /// Estimated contribution of the truncated time tail, already included in `leak`.
    pub leak_tail: f64,
    pub total: f64,
}

/// Asymptotic distribution of spin excitation after a photon is injected.
///
/// Assumes non-decaying spins. For a discrete ensemble with `κ > 0` every
/// photon-overlapping mode decays, so all weight ends up in `leak`.
pub fn excitation_distribution(ls: &LevelShift, cavity: &CavitySpec) -> Result<ExcitationDistribution> {
    cavity.validate()?;
    let source = ls.source();
    let spins_decay = match source.profile() {
        Profile::Discrete(e) => !e.is_lossless(),
        _ => false,
    };
    if source.gamma_hom() > 0.0 || spins_decay {
        return invalid("the excitation distribution assumes non-decaying spins (gamma_j = gamma_hom = 0)");
    }
    let kappa = cavity.loss;
    if let Profile::Discrete(e) = source.profile() {
        if kappa == 0.0 {
            return invalid("a lossless discrete ensemble never settles; the distribution is undefined");
        }
        let leak = 2.0 * kappa * discrete_norm_integral(e, cavity)?;
        return Ok(ExcitationDistribution {
            omega: Vec::new(),
            p: Vec::new(),
            integral: 0.0,
            leak,
            leak_tail: 0.0,
            total: leak,
        });
    }
    let (omega, p, integral) = frequency_part(ls, cavity)?;
    let (leak, leak_tail) = if kappa > 0.0 {
        let (norm, tail) = time_norm_integral(ls, cavity)?;
        (2.0 * kappa * norm, 2.0 * kappa * tail)
    } else {
        (0.0, 0.0)
    };
    Ok(ExcitationDistribution {
        omega,
        p,
        integral,
        leak,
        leak_tail,
        total: integral + leak,
    })
}

/// `∫₀^∞ |Σ_q η_q² e^{−iE_q t}|² dt` in closed form.
fn discrete_norm_integral(e: &Ensemble, cavity: &CavitySpec) -> Result<f64> {
    let modes = eigenmodes(e, cavity)?;
    let w: Vec<(Complex64, Complex64)> = modes
        .iter()
        .map(|m| (m.photonic_amplitude * m.photonic_amplitude, m.energy))
        .collect();
    let mut sum = Complex64::new(0.0, 0.0);
    for &(a, ea) in &w {
        for &(b, eb) in &w {
            let d = ea - eb.conj();
            if d.im >= 0.0 {
                if a.norm() * b.norm() < 1e-30 {
                    continue;
                }
                return Err(Error::NoSteadyState);
            }
            sum += a * b.conj() * Complex64::new(0.0, -1.0) / d;
        }
    }
    Ok(sum.re)
}

/// `∫₀^∞ |G_cc|² dt` from the kernel integrator, stopped once `|G|² < 1e−10`
/// over a trailing window; returns the integral and its tail estimate.
fn time_norm_integral(ls: &LevelShift, cavity: &CavitySpec) -> Result<(f64, f64)> {
    let mut solver = KernelSolver::new(ls.source(), cavity, None)?;
    let h = solver.h();
    let window = 256usize;
    let mut sum = 0.0;
    let mut norms: Vec<f64> = vec![1.0];
    let max_steps = 4_000_000usize;
    loop {
        solver.advance()?;
        solver.advance()?;
        let n = solver.len() - 1;
        let (a, b, c) = (norms[n - 2], solver.g(n - 1).norm_sqr(), solver.g(n).norm_sqr());
        norms.push(b);
        norms.push(c);
        sum += h / 3.0 * (a + 4.0 * b + c);
        if n > window && norms[n - window..].iter().all(|&x| x < 1e-10) {
            let earlier = norms[n - window];
            let rate = (earlier / c).ln() / (window as f64 * h);
            let rate = if rate.is_finite() && rate > 0.0 {
                rate
            } else {
                2.0 * cavity.loss
            };
            let tail = c / rate;
            return Ok((sum + tail, tail));
        }
        if n > max_steps {
            return Err(Error::NonConvergence(format!(
                "|G_cc|² still {c:.3e} after t = {:.3e}",
                n as f64 * h
            )));
        }
    }
}

fn frequency_part(ls: &LevelShift, cavity: &CavitySpec) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let source = ls.source();
    let wc = cavity.frequency;
    let (lo, hi, tail): (f64, f64, f64) = match source.profile() {
        Profile::Gaussian { center, stddev, .. } => (center - 14.0 * stddev, center + 14.0 * stddev, 0.0),
        Profile::Lorentzian {
            center,
            width,
            strength,
        } => {
            let w = 1e3 * (width + strength + (wc - center).abs() + cavity.loss);
            // p ≈ (Ω²γ/2π)/ω⁴ beyond the window on both sides.
            let tail = 2.0 * strength * strength * width / (2.0 * std::f64::consts::PI * 3.0 * w.powi(3));
            (center - w, center + w, tail)
        }
        Profile::Tabulated(t) => (t.omega()[0], *t.omega().last().unwrap(), 0.0),
        Profile::Discrete(_) => unreachable!("discrete sources are handled separately"),
    };
    let p_at = |w: f64| -> Result<f64> {
        let z = Complex64::new(w, 0.0);
        let rho = source.density(w).unwrap_or(0.0);
        if rho == 0.0 {
            return Ok(0.0);
        }
        let g = channel_from_k(ls, cavity, z, ls.eval(z)?, Channel::Cc)?;
        Ok(rho * g.norm_sqr())
    };
    // Uniform panels plus a geometric cluster at the cavity, where the
    // Weisskopf–Wigner peak sits.
    let scale = source.scale();
    let mut breaks: Vec<f64> = (0..=256).map(|i| lo + (hi - lo) * i as f64 / 256.0).collect();
    for k in 0..24 {
        let d = scale * 0.5f64.powi(k);
        breaks.push(wc - d);
        breaks.push(wc + d);
    }
    breaks.push(wc);
    breaks.retain(|&x| x >= lo && x <= hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * scale);

    let mut nodes: Vec<(f64, f64)> = Vec::new();
    let mut integral = 0.0;
    let tol = 1e-10;
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (fa, fb) = (p_at(a)?, p_at(b)?);
        let m = 0.5 * (a + b);
        let fm = p_at(m)?;
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        let mut ctx = Simpson {
            f: &p_at,
            nodes: &mut nodes,
        };
        integral += ctx.refine([a, m, b], [fa, fm, fb], whole, tol * (b - a) / (hi - lo), 40)?;
    }
    nodes.push((hi, p_at(hi)?));
    let (omega, p) = nodes.into_iter().unzip();
    Ok((omega, p, integral + tail))
}

struct Simpson<'a, F: Fn(f64) -> Result<f64>> {
    f: &'a F,
    nodes: &'a mut Vec<(f64, f64)>,
}

impl<F: Fn(f64) -> Result<f64>> Simpson<'_, F> {
    fn refine(&mut self, x: [f64; 3], fx: [f64; 3], whole: f64, tol: f64, depth: u32) -> Result<f64> {
        let [a, m, b] = x;
        let [fa, fm, fb] = fx;
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = ((self.f)(lm)?, (self.f)(rm)?);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let err = left + right - whole;
        let peak = fa.max(fb).max(fm).max(flm).max(frm);
        // Refine where p varies by more than 1% between nodes, unless the panel is negligible.
        let smooth = [fa, flm, fm, frm, fb]
            .windows(2)
            .all(|w| (w[0] - w[1]).abs() <= 0.01 * peak)
            || peak * (b - a) < 1e-13;
        if depth == 0 || (err.abs() <= 15.0 * tol && smooth) {
            self.nodes.extend([(a, fa), (lm, flm), (m, fm), (rm, frm)]);
            return Ok(left + right + err / 15.0);
        }
        let l = self.refine([a, lm, m], [fa, flm, fm], left, 0.5 * tol, depth - 1)?;
        let r = self.refine([m, rm, b], [fm, frm, fb], right, 0.5 * tol, depth - 1)?;
        Ok(l + r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    /// `G₊₊(t)`, the survival amplitude of the zeroth-order dressed state.
    pub trace: TimeTrace,
    /// Complex mixing angle and Rabi frequency of the dressed state.
    pub theta: Complex64,
    pub rabi_frequency: Complex64,
    /// Largest overlap weight `|φ₊|²` with a single eigenmode.
    pub phi_plus_sq: f64,
    /// `2|φ₊|² − 1`, a lower bound on `|G₊₊(t)|` for lossless systems.
    pub bound: f64,
    pub min_abs: f64,
}

/// Survival of `Φ₊ = cos(θ/2) a_c + sin(θ/2) b` under the exact dynamics.
pub fn dressed_leakage(ensemble: &Ensemble, cavity: &CavitySpec, times: &[f64]) -> Result<LeakageReport> {
    cavity.validate()?;
    if times.is_empty() {
        return invalid("time grid is empty");
    }
    check_increasing("time grid", times)?;
    if ensemble.is_empty() {
        return invalid("dressed states need at least one spin");
    }
    let mean = ensemble.mean_frequency();
    let omega = ensemble.collective_coupling();
    let delta = cavity.frequency - mean.re;
    let gamma_hom = -2.0 * mean.im;
    let half = Complex64::new(0.5 * delta, -0.5 * (cavity.loss - 0.5 * gamma_hom));
    let rabi = (omega * omega + half * half).sqrt();
    if rabi.norm() < 1e-14 * omega {
        return invalid("the dressed basis is degenerate at the exceptional point");
    }
    let cos_theta = half / rabi;
    let theta = cos_theta.acos();
    let mut c0 = ((1.0 + cos_theta) / 2.0).sqrt();
    let mut c1 = ((1.0 - cos_theta) / 2.0).sqrt();
    let norm = (c0.norm_sqr() + c1.norm_sqr()).sqrt();
    c0 /= norm;
    c1 /= norm;

    let prop = EigenPropagator::new(ensemble, cavity)?;
    let alpha = ensemble.superradiant_weights();
    let weights: Vec<(Complex64, Complex64)> = prop
        .modes()
        .iter()
        .map(|m| {
            let s: Complex64 = m.mode_function.iter().zip(alpha).map(|(v, a)| v * a).sum();
            let x = c0 * m.photonic_amplitude + c1 * s;
            let y = c0.conj() * m.photonic_amplitude + c1.conj() * s;
            (x * y, m.energy)
        })
        .collect();
    let phi_plus_sq = weights.iter().map(|(w, _)| w.norm()).fold(0.0, f64::max);
    let values: Vec<Complex64> = times
        .iter()
        .map(|&t| {
            weights
                .iter()
                .map(|(w, e)| w * (Complex64::new(0.0, -1.0) * e * t).exp())
                .sum()
        })
        .collect();
    let min_abs = values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    Ok(LeakageReport {
        trace: TimeTrace {
            times: times.to_vec(),
            values,
            channel: "++".into(),
            error_estimate: None,
        },
        theta,
        rabi_frequency: rabi,
        phi_plus_sq,
        bound: 2.0 * phi_plus_sq - 1.0,
        min_abs,
    })
}
