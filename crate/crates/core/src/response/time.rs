//! Time-domain propagators by three independent routes, plus closed forms.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{channel_from_k, spin_of, Channel};
use crate::error::{check_nonneg, invalid, Error, Result};
use crate::levelshift::{memory_kernel, LevelShift};
use crate::model::{CavitySpec, CouplingDensity, Ensemble, Profile};
use crate::spectral::{eigenmodes, PolaritonMode};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMethod {
    /// Sum over eigenmodes (discrete sources).
    Eigen,
    /// Implicit trapezoidal integration of the memory-kernel equation.
    Kernel,
    /// Inverse Fourier integral of the frequency-domain propagator (lossy systems).
    Quadrature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
    pub channel: String,
    /// Richardson estimate of the remaining discretization error, when known.
    pub error_estimate: Option<f64>,
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.first() != Some(&0.0) {
        return invalid("time grid must start at 0");
    }
    crate::error::check_increasing("time grid", times)
}

/// `G_μν(t)` on `times`. `step` overrides the kernel method's default step.
pub fn green_time(
    ls: &LevelShift,
    cavity: &CavitySpec,
    times: &[f64],
    channel: Channel,
    method: TimeMethod,
    step: Option<f64>,
) -> Result<TimeTrace> {
    cavity.validate()?;
    check_times(times)?;
    let (values, error_estimate) = match method {
        TimeMethod::Eigen => {
            let Profile::Discrete(e) = ls.source().profile() else {
                return invalid("the eigenmode method needs a discrete ensemble");
            };
            let prop = EigenPropagator::new(e, cavity)?;
            let v = times
                .iter()
                .map(|&t| prop.element(channel, t))
                .collect::<Result<Vec<_>>>()?;
            (v, None)
        }
        TimeMethod::Kernel => kernel_trace(ls, cavity, times, channel, step)?,
        TimeMethod::Quadrature => (quadrature_trace(ls, cavity, times, channel)?, None),
    };
    Ok(TimeTrace {
        times: times.to_vec(),
        values,
        channel: channel.to_string(),
        error_estimate,
    })
}

/// `e^{−iHt} = Σ_q v_q v_qᵀ e^{−iE_q t}` over the complex-orthogonal eigenbasis.
#[derive(Debug, Clone)]
pub struct EigenPropagator {
    modes: Vec<PolaritonMode>,
    alpha: Vec<f64>,
    /// Superradiant component `Σ_j α_j η_qj` of each mode.
    s_comp: Vec<Complex64>,
}

impl EigenPropagator {
    pub fn new(ensemble: &Ensemble, cavity: &CavitySpec) -> Result<Self> {
        let modes = eigenmodes(ensemble, cavity)?;
        let alpha = ensemble.superradiant_weights().to_vec();
        let s_comp = modes
            .iter()
            .map(|m| m.mode_function.iter().zip(&alpha).map(|(v, a)| v * a).sum())
            .collect();
        Ok(Self { modes, alpha, s_comp })
    }

    pub fn modes(&self) -> &[PolaritonMode] {
        &self.modes
    }

    /// Component `μ` of mode `q`: 0 is the cavity, `j + 1` is spin `j`.
    fn comp(&self, q: usize, mu: usize) -> Complex64 {
        let m = &self.modes[q];
        if mu == 0 {
            m.photonic_amplitude
        } else {
            m.mode_function[mu - 1]
        }
    }

    fn index(&self, j: usize) -> Result<usize> {
        if j < self.alpha.len() {
            Ok(j + 1)
        } else {
            invalid(format!("spin index {j} out of range (N = {})", self.alpha.len()))
        }
    }

    pub fn element(&self, channel: Channel, t: f64) -> Result<Complex64> {
        let s_ok = || {
            if self.alpha.is_empty() {
                invalid("the superradiant mode is undefined without spins")
            } else {
                Ok(())
            }
        };
        let (a, b): (
            Box<dyn Fn(usize) -> Complex64 + '_>,
            Box<dyn Fn(usize) -> Complex64 + '_>,
        ) = match channel {
            Channel::Cc => (Box::new(|q| self.comp(q, 0)), Box::new(|q| self.comp(q, 0))),
            Channel::Sc | Channel::Cs => {
                s_ok()?;
                (Box::new(|q| self.s_comp[q]), Box::new(|q| self.comp(q, 0)))
            }
            Channel::Ss => {
                s_ok()?;
                (Box::new(|q| self.s_comp[q]), Box::new(|q| self.s_comp[q]))
            }
            Channel::Jc(j) | Channel::Ck(j) => {
                let mu = self.index(j)?;
                (Box::new(move |q| self.comp(q, mu)), Box::new(|q| self.comp(q, 0)))
            }
            Channel::Jk(j, k) => {
                let (mu, nu) = (self.index(j)?, self.index(k)?);
                (Box::new(move |q| self.comp(q, mu)), Box::new(move |q| self.comp(q, nu)))
            }
        };
        Ok((0..self.modes.len())
            .map(|q| a(q) * b(q) * (-I * self.modes[q].energy * t).exp())
            .sum())
    }

    /// The full row `G_μν(t)` over `ν` (cavity first).
    pub fn row(&self, mu: usize, t: f64) -> Vec<Complex64> {
        let n = self.alpha.len() + 1;
        let phases: Vec<Complex64> = self
            .modes
            .iter()
            .enumerate()
            .map(|(q, m)| self.comp(q, mu) * (-I * m.energy * t).exp())
            .collect();
        (0..n)
            .map(|nu| phases.iter().enumerate().map(|(q, p)| p * self.comp(q, nu)).sum())
            .collect()
    }
}

/// Frequency scale and rotating-frame frequency for a source and cavity.
fn frame(source: &CouplingDensity, cavity: &CavitySpec) -> (f64, f64) {
    let wr = 0.5 * (cavity.frequency + source.mean_frequency().re);
    let spread = match source.profile() {
        Profile::Discrete(e) => e
            .spins()
            .iter()
            .map(|s| (s.frequency - wr).abs().max(s.decay))
            .fold(0.0, f64::max),
        Profile::Lorentzian { center, width, .. } => (center - wr).abs() + width,
        Profile::Gaussian { center, stddev, .. } => (center - wr).abs() + stddev,
        Profile::Tabulated(t) => {
            let (lo, hi) = (t.omega()[0], *t.omega().last().unwrap());
            (lo - wr).abs().max((hi - wr).abs())
        }
    };
    let s = (cavity.frequency - wr)
        .abs()
        .max(cavity.loss)
        .max(source.collective_coupling())
        .max(source.gamma_hom())
        .max(spread);
    (if s > 0.0 { s } else { 1.0 }, wr)
}

/// Time beyond which the memory kernel is below `1e-17` of its peak, if it decays.
fn kernel_support(source: &CouplingDensity) -> Option<f64> {
    const LN: f64 = 39.2; // −ln 1e−17
    let gh = source.gamma_hom();
    let exp_rate = |r: f64| (r > 0.0).then(|| 2.0 * LN / r);
    match source.profile() {
        Profile::Discrete(e) => exp_rate(e.spins().iter().map(|s| s.decay).fold(f64::INFINITY, f64::min)),
        Profile::Lorentzian { width, .. } => exp_rate(width + gh),
        Profile::Gaussian { stddev, .. } => Some((2.0 * LN).sqrt() / stddev),
        Profile::Tabulated(_) => exp_rate(gh),
    }
}

/// One step size of the trapezoidal memory-kernel integrator, in the frame
/// rotating at `wr`.
struct Track {
    h: f64,
    stride: usize,
    g: Vec<Complex64>,
    c: Vec<Complex64>,
}

impl Track {
    fn new(h: f64, stride: usize) -> Self {
        Self {
            h,
            stride,
            g: vec![Complex64::new(1.0, 0.0)],
            c: vec![Complex64::new(0.0, 0.0)],
        }
    }

    fn step(&mut self, kf: &[Complex64], cutoff: usize, wt: Complex64) {
        let n = self.g.len();
        let k = |i: usize| kf[i * self.stride];
        let lmax = cutoff / self.stride;
        let h = self.h;
        let mut s = Complex64::new(0.0, 0.0);
        if n <= lmax {
            s += 0.5 * k(n) * self.g[0];
        }
        for m in n.saturating_sub(lmax).max(1)..n {
            s += k(n - m) * self.g[m];
        }
        s *= h;
        let prev = self.g[n - 1];
        let f_prev = -I * wt * prev - self.c[n - 1];
        let k0 = k(0);
        let g = (prev + 0.5 * h * (f_prev - s)) / (1.0 + 0.5 * h * (I * wt + 0.5 * h * k0));
        self.g.push(g);
        self.c.push(s + 0.5 * h * k0 * g);
    }
}

/// Paired coarse/fine integration of `dG/dt = −iω̃_c G − ∫K(t−s)G(s)ds`, with
/// Richardson extrapolation between the two.
pub(crate) struct KernelSolver<'a> {
    source: &'a CouplingDensity,
    pub(crate) wr: f64,
    wt: Complex64,
    kf: Vec<Complex64>,
    cutoff: usize,
    coarse: Track,
    fine: Track,
}

impl<'a> KernelSolver<'a> {
    pub(crate) fn new(source: &'a CouplingDensity, cavity: &CavitySpec, step: Option<f64>) -> Result<Self> {
        let (scale, wr) = frame(source, cavity);
        let h = match step {
            Some(h) if h > 0.0 && h.is_finite() => h,
            Some(h) => return invalid(format!("kernel step must be positive, got {h}")),
            None => 0.01 / scale,
        };
        let cutoff = kernel_support(source)
            .map(|t| (t / (0.5 * h)).ceil() as usize + 2)
            .unwrap_or(usize::MAX);
        Ok(Self {
            source,
            wr,
            wt: cavity.complex_frequency() - wr,
            kf: Vec::new(),
            cutoff,
            coarse: Track::new(h, 2),
            fine: Track::new(0.5 * h, 1),
        })
    }

    pub(crate) fn h(&self) -> f64 {
        self.coarse.h
    }

    fn kernel_to(&mut self, idx: usize) -> Result<()> {
        let hf = self.fine.h;
        while self.kf.len() <= idx {
            let i = self.kf.len();
            let t = i as f64 * hf;
            let k = if i > self.cutoff {
                Complex64::new(0.0, 0.0)
            } else {
                memory_kernel(self.source, t)? * Complex64::new(0.0, self.wr * t).exp()
            };
            self.kf.push(k);
        }
        Ok(())
    }

    /// Advance by one coarse step.
    pub(crate) fn advance(&mut self) -> Result<()> {
        let n = self.coarse.g.len();
        self.kernel_to(2 * n)?;
        self.coarse.step(&self.kf, self.cutoff, self.wt);
        self.fine.step(&self.kf, self.cutoff, self.wt);
        self.fine.step(&self.kf, self.cutoff, self.wt);
        Ok(())
    }

    pub(crate) fn len(&self) -> usize {
        self.coarse.g.len()
    }

    /// Extrapolated `G_cc` at coarse node `n`, rotating frame.
    pub(crate) fn g(&self, n: usize) -> Complex64 {
        (4.0 * self.fine.g[2 * n] - self.coarse.g[n]) / 3.0
    }

    fn c(&self, n: usize) -> Complex64 {
        (4.0 * self.fine.c[2 * n] - self.coarse.c[n]) / 3.0
    }

    fn error(&self) -> f64 {
        (0..self.len())
            .map(|n| (self.fine.g[2 * n] - self.coarse.g[n]).norm() / 3.0)
            .fold(0.0, f64::max)
    }

    /// `G_jc` by exponential recursion on both tracks, extrapolated.
    fn spin_channel(&self, g: f64, lam: Complex64) -> Vec<Complex64> {
        let run = |tr: &Track| {
            let mu = lam - self.wr;
            let e = (-I * mu * tr.h).exp();
            let mut out = vec![Complex64::new(0.0, 0.0)];
            for n in 1..tr.g.len() {
                let prev = out[n - 1];
                out.push(e * prev - I * g * 0.5 * tr.h * (e * tr.g[n - 1] + tr.g[n]));
            }
            out
        };
        let (c, f) = (run(&self.coarse), run(&self.fine));
        (0..c.len()).map(|n| (4.0 * f[2 * n] - c[n]) / 3.0).collect()
    }
}

/// Four-point Lagrange interpolation on a uniform grid starting at 0.
fn interpolate(v: &[Complex64], h: f64, t: f64) -> Complex64 {
    let x = t / h;
    let i = (x.floor() as usize).saturating_sub(1).min(v.len() - 4);
    let u = x - i as f64;
    let mut out = Complex64::new(0.0, 0.0);
    for a in 0..4 {
        let mut w = 1.0;
        for b in 0..4 {
            if a != b {
                w *= (u - b as f64) / (a as f64 - b as f64);
            }
        }
        out += w * v[i + a];
    }
    out
}

fn kernel_trace(
    ls: &LevelShift,
    cavity: &CavitySpec,
    times: &[f64],
    channel: Channel,
    step: Option<f64>,
) -> Result<(Vec<Complex64>, Option<f64>)> {
    let source = ls.source();
    let mut solver = KernelSolver::new(source, cavity, step)?;
    let t_end = *times.last().unwrap();
    let n = ((t_end / solver.h()).ceil() as usize + 1).max(3);
    if n > 5_000_000 {
        return invalid(format!("{n} kernel steps requested; use a larger step or shorter grid"));
    }
    for _ in 0..n {
        solver.advance()?;
    }
    let rotating: Vec<Complex64> = match channel {
        Channel::Cc => (0..solver.len()).map(|i| solver.g(i)).collect(),
        Channel::Sc | Channel::Cs => {
            let omega = source.collective_coupling();
            if omega == 0.0 {
                return invalid("the superradiant mode is undefined without spins");
            }
            (0..solver.len()).map(|i| -I * solver.c(i) / omega).collect()
        }
        Channel::Jc(j) | Channel::Ck(j) => {
            let (g, lam) = spin_of(ls, j)?;
            solver.spin_channel(g, lam)
        }
        Channel::Ss | Channel::Jk(..) => {
            return invalid(format!(
                "channel {channel} is not available from the kernel method; use eigen or quadrature"
            ))
        }
    };
    let h = solver.h();
    let values = times
        .iter()
        .map(|&t| interpolate(&rotating, h, t) * Complex64::new(0.0, -solver.wr * t).exp())
        .collect();
    Ok((values, Some(solver.error())))
}

/// Smallest positive loss rate in the system, if any.
fn loss_floor(source: &CouplingDensity, cavity: &CavitySpec) -> Option<f64> {
    let gh = 0.5 * source.gamma_hom();
    let mut rates = vec![cavity.loss, gh];
    match source.profile() {
        Profile::Discrete(e) => rates.extend(e.spins().iter().map(|s| 0.5 * s.decay)),
        Profile::Lorentzian { width, .. } => rates.push(0.5 * width + gh),
        _ => {}
    }
    rates.into_iter().filter(|&r| r > 0.0).reduce(f64::min)
}

fn quadrature_trace(ls: &LevelShift, cavity: &CavitySpec, times: &[f64], channel: Channel) -> Result<Vec<Complex64>> {
    let source = ls.source();
    let d = loss_floor(source, cavity)
        .ok_or_else(|| Error::InvalidInput("the quadrature method needs a lossy system".into()))?;
    let (scale, center) = frame(source, cavity);
    let half = 400.0 * scale;
    let h = 0.25 * d;
    let n = (2.0 * half / h).ceil() as usize + 1;
    if n > 4_000_000 {
        return invalid(format!(
            "quadrature needs {n} frequency nodes (loss {d:.3e} vs scale {scale:.3e}); use the kernel method"
        ));
    }
    // Subtract a/(ω−p) + b/(ω−p)², whose transforms are known, so the remainder decays as ω⁻³.
    let p = Complex64::new(center, -scale);
    let m1 = match source.profile() {
        Profile::Lorentzian { width, .. } => source.mean_frequency() - I * 0.5 * width,
        _ => source.mean_frequency(),
    };
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let (a, b) = match channel {
        Channel::Cc => (one, cavity.complex_frequency() - p),
        Channel::Sc | Channel::Cs => (zero, Complex64::new(source.collective_coupling(), 0.0)),
        Channel::Ss => (one, m1 - p),
        Channel::Jc(j) | Channel::Ck(j) => (zero, Complex64::new(spin_of(ls, j)?.0, 0.0)),
        Channel::Jk(j, k) if j == k => (one, spin_of(ls, j)?.1 - p),
        Channel::Jk(j, k) => {
            spin_of(ls, j)?;
            spin_of(ls, k)?;
            (zero, zero)
        }
    };
    let w0 = center - half;
    let mut rem = Vec::with_capacity(n);
    for i in 0..n {
        let w = w0 + i as f64 * h;
        let z = Complex64::new(w, 0.0);
        let k = ls.eval(z)?;
        let r = (z - p).inv();
        let weight = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        rem.push(weight * (channel_from_k(ls, cavity, z, k, channel)? - a * r - b * r * r));
    }
    Ok(times
        .iter()
        .map(|&t| {
            let step = Complex64::new(0.0, -h * t).exp();
            let mut ph = Complex64::new(0.0, -w0 * t).exp();
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, r) in rem.iter().enumerate() {
                acc += r * ph;
                ph *= step;
                // Re-anchor the phasor now and then to stop rounding drift.
                if i % 4096 == 4095 {
                    ph = Complex64::new(0.0, -(w0 + (i + 1) as f64 * h) * t).exp();
                }
            }
            let e = (-I * p * t).exp();
            I * h / (2.0 * PI) * acc + a * e - I * t * b * e
        })
        .collect())
}

/// Parameters of the closed-form limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ClosedForm {
    /// Narrow ensemble: a single oscillator at `ω_a`, detuning `δ = ω_c − ω_a`.
    Rabi { omega_a: f64, delta: f64, coupling: f64 },
    /// Lorentzian line of total width `gamma` (inhomogeneous plus homogeneous).
    Lorentzian {
        omega_a: f64,
        delta: f64,
        coupling: f64,
        gamma: f64,
        kappa: f64,
    },
    /// Exponential decay with the level shift frozen at the cavity frequency.
    WeisskopfWigner {
        cavity_frequency: f64,
        kappa: f64,
        delta_c: f64,
        gamma_c: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenPair {
    pub cc: Complex64,
    pub sc: Option<Complex64>,
}

/// Evaluate a closed-form limit at time `t`.
///
/// The two-oscillator forms are the exact `2×2` propagator
/// `e^{−imt}(cos Ω_R t − i cos θ sin Ω_R t)` with complex `Ω_R` and `cos θ`,
/// which stays valid when the mixing angle is complex.
pub fn closed_form_green(form: &ClosedForm, t: f64) -> GreenPair {
    match *form {
        ClosedForm::Rabi {
            omega_a,
            delta,
            coupling,
        } => two_mode(omega_a, delta, coupling, 0.0, 0.0, t),
        ClosedForm::Lorentzian {
            omega_a,
            delta,
            coupling,
            gamma,
            kappa,
        } => two_mode(omega_a, delta, coupling, gamma, kappa, t),
        ClosedForm::WeisskopfWigner {
            cavity_frequency,
            kappa,
            delta_c,
            gamma_c,
        } => GreenPair {
            cc: (-I * Complex64::new(cavity_frequency + delta_c, -0.5 * gamma_c - kappa) * t).exp(),
            sc: None,
        },
    }
}

fn two_mode(omega_a: f64, delta: f64, coupling: f64, gamma: f64, kappa: f64, t: f64) -> GreenPair {
    let mean = Complex64::new(omega_a + 0.5 * delta, -0.5 * (0.5 * gamma + kappa));
    let half = Complex64::new(0.5 * delta, -0.5 * (kappa - 0.5 * gamma));
    let rabi = (coupling * coupling + half * half).sqrt();
    let x = rabi * t;
    // sin(Ω_R t)/Ω_R, smooth through the exceptional point Ω_R = 0.
    let sinc = if x.norm() < 1e-4 {
        t * (1.0 - x * x / 6.0)
    } else {
        x.sin() / rabi
    };
    let e = (-I * mean * t).exp();
    GreenPair {
        cc: e * (x.cos() - I * half * sinc),
        sc: Some(-I * e * coupling * sinc),
    }
}

/// Weisskopf–Wigner parameters for a source, from `Δ_c` and `Γ_c` at `ω_c`.
pub fn weisskopf_wigner_form(ls: &LevelShift, cavity: &CavitySpec) -> Result<ClosedForm> {
    check_nonneg("cavity loss", cavity.loss)?;
    let cut = ls.cut_decomposition(cavity.frequency)?;
    Ok(ClosedForm::WeisskopfWigner {
        cavity_frequency: cavity.frequency,
        kappa: cavity.loss,
        delta_c: cut.delta_c,
        gamma_c: cut.gamma_c,
    })
}
