//! Single-excitation eigenmodes of a discrete ensemble coupled to the cavity.
//!
//! Lossless systems with distinct spin frequencies go through the secular
//! equation `E − ω_c − Σ g_j²/(E − ω_j) = 0`, whose roots interlace the spin
//! frequencies. Each root is stored as an offset from its nearest spin so that
//! interlacing stays decidable even when the offset is far below one ulp of
//! `E`. Everything else goes through a dense complex Schur decomposition.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{CavitySpec, Ensemble};

/// Threshold on `photon_fraction` separating photon-like from spin-like modes.
pub const DEFAULT_PHOTON_THRESHOLD: f64 = 0.4;

/// Exact location of a lossless root relative to a spin frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub spin: usize,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolaritonMode {
    pub energy: Complex64,
    /// Cavity component `η_qc` under the unconjugated normalization `vᵀv = 1`.
    pub photonic_amplitude: Complex64,
    /// Spin components `η_qj`, aligned with the ensemble's sorted spins.
    pub mode_function: Vec<Complex64>,
    /// `|η_qc|²/‖v‖²`, the share of the mode's norm held by the cavity.
    pub photon_fraction: f64,
    pub anchor: Option<Anchor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeClass {
    PhotonLike,
    SpinLike,
}

impl std::fmt::Display for ModeClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModeClass::PhotonLike => "photonlike",
            ModeClass::SpinLike => "spinlike",
        })
    }
}

pub fn classify_mode(mode: &PolaritonMode, threshold: f64) -> ModeClass {
    if mode.photon_fraction >= threshold {
        ModeClass::PhotonLike
    } else {
        ModeClass::SpinLike
    }
}

/// Single-excitation Hamiltonian, cavity first.
pub fn hamiltonian_matrix(ensemble: &Ensemble, cavity: &CavitySpec) -> DMatrix<Complex64> {
    let n = ensemble.len();
    let mut h = DMatrix::from_element(n + 1, n + 1, Complex64::new(0.0, 0.0));
    h[(0, 0)] = cavity.complex_frequency();
    for (j, s) in ensemble.spins().iter().enumerate() {
        h[(j + 1, j + 1)] = Complex64::new(s.frequency, -0.5 * s.decay);
        h[(0, j + 1)] = s.coupling;
        h[(j + 1, 0)] = s.coupling;
    }
    h
}

/// All `N + 1` eigenmodes, sorted by `Re E` (ties: larger photon fraction first).
pub fn eigenmodes(ensemble: &Ensemble, cavity: &CavitySpec) -> Result<Vec<PolaritonMode>> {
    cavity.validate()?;
    let secular_ok = cavity.loss == 0.0
        && ensemble.is_lossless()
        && ensemble.spins().iter().all(|s| s.coupling.re > 0.0)
        && ensemble.spins().windows(2).all(|w| w[0].frequency < w[1].frequency);
    let mut modes = if secular_ok && !ensemble.is_empty() {
        eigenmodes_secular(ensemble, cavity)?
    } else {
        eigenmodes_dense(ensemble, cavity)?
    };
    sort_modes(&mut modes);
    Ok(modes)
}

fn sort_modes(modes: &mut [PolaritonMode]) {
    modes.sort_by(|a, b| {
        a.energy
            .re
            .total_cmp(&b.energy.re)
            .then(b.photon_fraction.total_cmp(&a.photon_fraction))
    });
}

/// Lossless path. Requires `κ = γ_j = 0`, `g_j > 0`, strictly increasing `ω_j`.
pub fn eigenmodes_secular(ensemble: &Ensemble, cavity: &CavitySpec) -> Result<Vec<PolaritonMode>> {
    let spins = ensemble.spins();
    if spins.is_empty() {
        return invalid("secular solver needs at least one spin");
    }
    if cavity.loss != 0.0 || !ensemble.is_lossless() {
        return invalid("secular solver needs a lossless system");
    }
    if spins.windows(2).any(|w| w[0].frequency >= w[1].frequency) {
        return invalid("secular solver needs distinct spin frequencies; merge degenerate spins first");
    }
    if spins.iter().any(|s| s.coupling.re <= 0.0) {
        return invalid("secular solver needs every coupling to be positive");
    }
    let n = spins.len();
    let w: Vec<f64> = spins.iter().map(|s| s.frequency).collect();
    let g2: Vec<f64> = spins.iter().map(|s| s.coupling.re * s.coupling.re).collect();
    let wc = cavity.frequency;
    let mut modes = Vec::with_capacity(n + 1);

    // Lower exterior root, anchored at the lowest spin.
    {
        let sec = Secular::new(&w, &g2, wc, 0);
        let mut step = ensemble.collective_coupling() + (w[0] - wc).abs() + f64::MIN_POSITIVE;
        let mut tries = 0;
        while sec.f(-step) >= 0.0 {
            step *= 2.0;
            tries += 1;
            if tries > 200 || !step.is_finite() {
                return Err(Error::NonConvergence(format!(
                    "lower exterior bracket [{}, {}] never changed sign",
                    w[0] - step,
                    w[0]
                )));
            }
        }
        modes.push(sec.solve(-step, 0.0));
    }
    for q in 0..n - 1 {
        let half = 0.5 * (w[q + 1] - w[q]);
        let left = Secular::new(&w, &g2, wc, q);
        let mode = if left.f(half) >= 0.0 {
            left.solve(0.0, half)
        } else {
            let right = Secular::new(&w, &g2, wc, q + 1);
            right.solve((w[q] - w[q + 1]) * 0.5, 0.0)
        };
        modes.push(mode);
    }
    {
        let sec = Secular::new(&w, &g2, wc, n - 1);
        let mut step = ensemble.collective_coupling() + (w[n - 1] - wc).abs() + f64::MIN_POSITIVE;
        let mut tries = 0;
        while sec.f(step) <= 0.0 {
            step *= 2.0;
            tries += 1;
            if tries > 200 || !step.is_finite() {
                return Err(Error::NonConvergence(format!(
                    "upper exterior bracket [{}, {}] never changed sign",
                    w[n - 1],
                    w[n - 1] + step
                )));
            }
        }
        modes.push(sec.solve(0.0, step));
    }
    Ok(modes)
}

/// Secular function in the offset `τ = E − ω_k` from anchor spin `k`.
struct Secular<'a> {
    k: usize,
    wk: f64,
    base: f64,
    d: Vec<f64>,
    g2: &'a [f64],
}

impl<'a> Secular<'a> {
    fn new(w: &[f64], g2: &'a [f64], wc: f64, k: usize) -> Self {
        Self {
            k,
            wk: w[k],
            base: w[k] - wc,
            d: w.iter().map(|x| x - w[k]).collect(),
            g2,
        }
    }

    fn f(&self, tau: f64) -> f64 {
        let s: f64 = self.d.iter().zip(self.g2).map(|(d, g2)| g2 / (tau - d)).sum();
        tau + self.base - s
    }

    fn df(&self, tau: f64) -> f64 {
        1.0 + self
            .d
            .iter()
            .zip(self.g2)
            .map(|(d, g2)| g2 / (tau - d).powi(2))
            .sum::<f64>()
    }

    /// Bisection to full relative precision in `τ` on the open interval
    /// `(lo, hi)` where `f` increases through zero, then one guarded Newton step.
    fn solve(&self, mut lo: f64, mut hi: f64) -> PolaritonMode {
        for _ in 0..4000 {
            let mid = lo + 0.5 * (hi - lo);
            if mid <= lo || mid >= hi {
                break;
            }
            let fm = self.f(mid);
            if fm < 0.0 {
                lo = mid;
            } else if fm > 0.0 {
                hi = mid;
            } else {
                lo = mid;
                hi = mid;
                break;
            }
            if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                break;
            }
        }
        let mut tau = lo + 0.5 * (hi - lo);
        let step = tau - self.f(tau) / self.df(tau);
        if step >= lo && step <= hi && step.is_finite() {
            tau = step;
        }
        // Amplitudes from the closed forms, using τ − d_j for E − ω_j.
        let s: f64 = self.d.iter().zip(self.g2).map(|(d, g2)| g2 / (tau - d).powi(2)).sum();
        let eta_c = 1.0 / (1.0 + s).sqrt();
        let mode_function = self
            .d
            .iter()
            .zip(self.g2)
            .map(|(d, g2)| Complex64::new(g2.sqrt() * eta_c / (tau - d), 0.0))
            .collect();
        PolaritonMode {
            energy: Complex64::new(self.wk + tau, 0.0),
            photonic_amplitude: Complex64::new(eta_c, 0.0),
            mode_function,
            photon_fraction: eta_c * eta_c,
            anchor: Some(Anchor {
                spin: self.k,
                offset: tau,
            }),
        }
    }
}

/// General path: dense non-Hermitian eigendecomposition with `vᵀv = 1`.
pub fn eigenmodes_dense(ensemble: &Ensemble, cavity: &CavitySpec) -> Result<Vec<PolaritonMode>> {
    let h = hamiltonian_matrix(ensemble, cavity);
    let n = h.nrows();
    let scale = h.iter().map(|x| x.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let schur = nalgebra::linalg::Schur::try_new(h, f64::EPSILON, 100 * n.max(10))
        .ok_or_else(|| Error::NonConvergence("Schur decomposition did not converge".into()))?;
    let (q, t) = schur.unpack();
    let tiny = f64::EPSILON * scale;
    let mut modes = Vec::with_capacity(n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let mut y = vec![Complex64::new(0.0, 0.0); k + 1];
        y[k] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for j in i + 1..=k {
                s += t[(i, j)] * y[j];
            }
            let mut den = t[(i, i)] - lambda;
            if den.norm() < tiny {
                den = Complex64::new(tiny, 0.0);
            }
            y[i] = -s / den;
        }
        let mut v: Vec<Complex64> = (0..n).map(|r| (0..=k).map(|j| q[(r, j)] * y[j]).sum()).collect();
        let norm2: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        let dot: Complex64 = v.iter().map(|x| x * x).sum();
        if dot.norm() < 1e-13 * norm2 {
            return Err(Error::NonConvergence(format!(
                "eigenvector at E = {lambda} is self-orthogonal (exceptional point)"
            )));
        }
        let inv = dot.sqrt().inv();
        v.iter_mut().for_each(|x| *x *= inv);
        let norm2: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        let reference = if v[0].norm_sqr() > 1e-24 * norm2 {
            v[0]
        } else {
            *v.iter().max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr())).unwrap()
        };
        if reference.re < 0.0 || (reference.re == 0.0 && reference.im < 0.0) {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        modes.push(PolaritonMode {
            energy: lambda,
            photonic_amplitude: v[0],
            photon_fraction: v[0].norm_sqr() / norm2,
            mode_function: v[1..].to_vec(),
            anchor: None,
        });
    }
    sort_modes(&mut modes);
    Ok(modes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterlacingReport {
    /// One entry per mode in sorted order: does it sit in its interval?
    pub per_root: Vec<bool>,
    pub all_pass: bool,
}

/// Check `E_0 < ω_1 < E_1 < … < ω_N < E_N` for a lossless system.
pub fn interlacing_check(modes: &[PolaritonMode], ensemble: &Ensemble) -> Result<InterlacingReport> {
    if !ensemble.is_lossless() || modes.iter().any(|m| m.energy.im != 0.0) {
        return invalid("interlacing only holds for lossless systems");
    }
    let w: Vec<f64> = ensemble.spins().iter().map(|s| s.frequency).collect();
    let n = w.len();
    if modes.len() != n + 1 {
        return invalid(format!("expected {} modes, got {}", n + 1, modes.len()));
    }
    // Sign of E − ω_b, exact when an anchor is available.
    let cmp = |m: &PolaritonMode, b: usize| -> f64 {
        match m.anchor {
            Some(a) if a.spin == b => a.offset,
            Some(a) => (w[a.spin] - w[b]) + a.offset,
            None => m.energy.re - w[b],
        }
    };
    let per_root: Vec<bool> = modes
        .iter()
        .enumerate()
        .map(|(q, m)| {
            let above = q == 0 || cmp(m, q - 1) > 0.0;
            let below = q == n || cmp(m, q) < 0.0;
            above && below
        })
        .collect();
    Ok(InterlacingReport {
        all_pass: per_root.iter().all(|&p| p),
        per_root,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_ensemble, sample_ensemble, CouplingDensity, SamplingScheme, SpinSpec};
    use proptest::prelude::*;

    fn cav(w: f64, k: f64) -> CavitySpec {
        CavitySpec::new(w, k).unwrap()
    }

    /// Cyclic Jacobi rotations for a real symmetric matrix: an oracle that
    /// shares nothing with either production path.
    fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = a.len();
        let mut v: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
            .collect();
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .filter(|(i, j)| i != j)
                .map(|(i, j)| a[i][j].powi(2))
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                    for row in v.iter_mut() {
                        let (vp, vq) = (row[p], row[q]);
                        row[p] = c * vp - s * vq;
                        row[q] = s * vp + c * vq;
                    }
                }
            }
        }
        ((0..n).map(|i| a[i][i]).collect(), v)
    }

    #[test]
    fn matrix_shapes() {
        let h = hamiltonian_matrix(&Ensemble::empty(), &cav(0.5, 0.1));
        assert_eq!(h.shape(), (1, 1));
        assert_eq!(h[(0, 0)], Complex64::new(0.5, -0.1));
        let e = build_ensemble(vec![SpinSpec::new(0.0, 0.0, 1.0)]).unwrap();
        let h = hamiltonian_matrix(&e, &cav(0.0, 0.0));
        assert_eq!(h[(0, 1)], Complex64::new(1.0, 0.0));
        assert_eq!(h[(1, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(h[(1, 1)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn bare_cavity_mode() {
        let m = eigenmodes(&Ensemble::empty(), &cav(0.5, 0.1)).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].energy, Complex64::new(0.5, -0.1));
        assert!((m[0].photon_fraction - 1.0).abs() < 1e-15);
    }

    #[test]
    fn resonant_pair() {
        let e = build_ensemble(vec![SpinSpec::new(0.0, 0.0, 1.0)]).unwrap();
        let m = eigenmodes(&e, &cav(0.0, 0.0)).unwrap();
        assert!((m[0].energy.re + 1.0).abs() < 1e-15);
        assert!((m[1].energy.re - 1.0).abs() < 1e-15);
        for mode in &m {
            assert!((mode.photonic_amplitude.re - 0.5f64.sqrt()).abs() < 1e-15);
            assert_eq!(classify_mode(mode, DEFAULT_PHOTON_THRESHOLD), ModeClass::PhotonLike);
        }
        assert!(interlacing_check(&m, &e).unwrap().all_pass);
    }

    #[test]
    fn three_level_against_jacobi() {
        let e = build_ensemble(vec![SpinSpec::new(-1.0, 0.0, 1.0), SpinSpec::new(1.0, 0.0, 1.0)]).unwrap();
        let m = eigenmodes(&e, &cav(0.0, 0.0)).unwrap();
        let h = vec![vec![0.0, 1.0, 1.0], vec![1.0, -1.0, 0.0], vec![1.0, 0.0, 1.0]];
        let (vals, vecs) = jacobi_eigen(h);
        let mut idx: Vec<usize> = (0..3).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let expected = [-(3f64.sqrt()), 0.0, 3f64.sqrt()];
        for (q, &i) in idx.iter().enumerate() {
            assert!((m[q].energy.re - vals[i]).abs() < 1e-12);
            assert!((m[q].energy.re - expected[q]).abs() < 1e-12);
            assert!((m[q].photon_fraction - vecs[0][i].powi(2)).abs() < 1e-12);
        }
        assert!((m[1].photon_fraction - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn weak_coupling_interlacing() {
        let d = CouplingDensity::gaussian(0.0, 1.0, 1.0, 0.0).unwrap();
        let base = sample_ensemble(&d, 25, 3, SamplingScheme::Random).unwrap();
        let spins: Vec<SpinSpec> = base
            .spins()
            .iter()
            .map(|s| SpinSpec::new(s.frequency, 0.0, 1e-8))
            .collect();
        let e = build_ensemble(spins).unwrap();
        let m = eigenmodes(&e, &cav(0.1, 0.0)).unwrap();
        let report = interlacing_check(&m, &e).unwrap();
        assert!(report.all_pass, "{:?}", report.per_root);
        for (q, mode) in m.iter().enumerate().skip(1).take(e.len() - 1) {
            if mode.photon_fraction > 0.5 {
                continue;
            }
            let near = (mode.energy.re - e.spins()[q - 1].frequency)
                .abs()
                .min((mode.energy.re - e.spins()[q].frequency).abs());
            assert!(near < 1e-6);
        }
    }

    #[test]
    fn interlacing_rejects_lossy() {
        let e = build_ensemble(vec![SpinSpec::new(0.0, 0.1, 1.0)]).unwrap();
        let m = eigenmodes(&e, &cav(0.0, 0.0)).unwrap();
        assert!(interlacing_check(&m, &e).is_err());
    }

    #[test]
    fn degenerate_spins_use_dense_path() {
        let e = build_ensemble(vec![SpinSpec::new(0.0, 0.0, 1.0), SpinSpec::new(0.0, 0.0, 1.0)]).unwrap();
        let m = eigenmodes(&e, &cav(0.0, 0.0)).unwrap();
        assert_eq!(m.len(), 3);
        let r = 2f64.sqrt();
        assert!((m[0].energy.re + r).abs() < 1e-12 && (m[2].energy.re - r).abs() < 1e-12);
        assert!(m[1].energy.norm() < 1e-12 && m[1].photon_fraction < 1e-20);
    }

    fn arb_ensemble(lossy: bool) -> impl Strategy<Value = (Ensemble, CavitySpec)> {
        let spin = (-3.0f64..3.0, 0.0f64..0.4, 0.05f64..1.0);
        (prop::collection::vec(spin, 1..30), -1.0f64..1.0, 0.0f64..0.3).prop_map(move |(s, wc, k)| {
            let spins = s
                .into_iter()
                .map(|(w, d, g)| SpinSpec::new(w, if lossy { d } else { 0.0 }, g))
                .collect();
            (build_ensemble(spins).unwrap(), cav(wc, if lossy { k } else { 0.0 }))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn secular_and_dense_agree((e, c) in arb_ensemble(false)) {
            let a = eigenmodes_secular(&e, &c).unwrap();
            let b = eigenmodes_dense(&e, &c).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x.energy - y.energy).norm() < 1e-10, "{} vs {}", x.energy, y.energy);
                prop_assert!((x.photon_fraction - y.photon_fraction).abs() < 1e-8);
            }
            let total: f64 = a.iter().map(|m| m.photon_fraction).sum();
            prop_assert!((total - 1.0).abs() < 1e-8);
            prop_assert!(interlacing_check(&a, &e).unwrap().all_pass);
        }

        #[test]
        fn lossy_sum_rules((e, c) in arb_ensemble(true)) {
            let m = eigenmodes(&e, &c).unwrap();
            let completeness: Complex64 = m.iter().map(|q| q.photonic_amplitude.powi(2)).sum();
            prop_assert!((completeness - 1.0).norm() < 1e-8, "{}", completeness);
            let trace: f64 = m.iter().map(|q| q.energy.im).sum();
            let want = -c.loss - e.spins().iter().map(|s| 0.5 * s.decay).sum::<f64>();
            prop_assert!((trace - want).abs() < 1e-10);
            let lo = -c.loss.max(e.spins().iter().map(|s| 0.5 * s.decay).fold(0.0, f64::max));
            for q in &m {
                prop_assert!(q.energy.im <= 1e-12 && q.energy.im >= lo - 1e-12);
            }
            prop_assert!(m.windows(2).all(|w| w[0].energy.re <= w[1].energy.re));
        }
    }
}
