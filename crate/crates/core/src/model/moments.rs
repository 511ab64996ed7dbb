use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{CouplingDensity, Profile};

/// A statistical moment that may not exist (Lorentzian tails).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Moment {
    Defined(f64),
    Undefined,
}

impl Moment {
    pub fn value(self) -> Option<f64> {
        match self {
            Moment::Defined(x) => Some(x),
            Moment::Undefined => None,
        }
    }
}

/// Normalized moments of `ρ/Ω²` about `Re ω̄` and the coefficients of the
/// large-`z` expansion
/// `K̃⁺(ω̄ + u) = (Ω²/u) Σ_k A_k/u^k − 2πi Σ_n B_n/u^n` with `u = z − ω̄`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub moments: Vec<Moment>,
    pub tail_a: Vec<Complex64>,
    pub tail_b: Vec<f64>,
    pub max_order: usize,
}

impl MomentSet {
    pub fn a(&self, k: usize) -> Complex64 {
        self.tail_a[k]
    }
}

/// Moments and tail coefficients up to `max_order`.
pub fn moment_set(profile: &CouplingDensity, max_order: usize) -> MomentSet {
    let n = max_order + 1;
    let zero = Complex64::new(0.0, 0.0);
    match profile.profile() {
        Profile::Lorentzian { width, .. } => {
            let a = Complex64::new(0.0, -0.5 * width);
            let mut tail_a = Vec::with_capacity(n);
            let mut p = Complex64::new(1.0, 0.0);
            for _ in 0..n {
                tail_a.push(p);
                p *= a;
            }
            let mut tail_b = vec![0.0; n];
            let mut b = width / (2.0 * PI);
            for k in (1..n).step_by(2) {
                tail_b[k] = b;
                b *= -0.25 * width * width;
            }
            let mut moments = vec![Moment::Undefined; n];
            moments[0] = Moment::Defined(1.0);
            MomentSet {
                moments,
                tail_a,
                tail_b,
                max_order,
            }
        }
        Profile::Gaussian { stddev, .. } => {
            let s2 = stddev * stddev;
            let mut m = vec![0.0; n];
            m[0] = 1.0;
            for k in (2..n).step_by(2) {
                m[k] = m[k - 2] * (k as f64 - 1.0) * s2;
            }
            from_real(m)
        }
        Profile::Tabulated(t) => {
            let w = t.total_weight();
            let c = t.raw_moment(1, 0.0) / w;
            let mut m: Vec<f64> = (0..n as u32).map(|k| t.raw_moment(k, c) / w).collect();
            m[0] = 1.0;
            if n > 1 {
                m[1] = 0.0;
            }
            from_real(m)
        }
        Profile::Discrete(e) => {
            let mean = e.mean_frequency();
            let weights = e.superradiant_weights();
            let mut moments = Vec::with_capacity(n);
            let mut tail_a = Vec::with_capacity(n);
            for k in 0..n as i32 {
                let mut m = 0.0;
                let mut a = zero;
                for (s, al) in e.spins().iter().zip(weights) {
                    let p = al * al;
                    m += p * (s.frequency - mean.re).powi(k);
                    a += p * (Complex64::new(s.frequency, -0.5 * s.decay) - mean).powi(k);
                }
                moments.push(Moment::Defined(m));
                tail_a.push(a);
            }
            moments[0] = Moment::Defined(1.0);
            tail_a[0] = Complex64::new(1.0, 0.0);
            MomentSet {
                moments,
                tail_a,
                tail_b: vec![0.0; n],
                max_order,
            }
        }
    }
}

fn from_real(m: Vec<f64>) -> MomentSet {
    let n = m.len();
    MomentSet {
        tail_a: m.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        moments: m.into_iter().map(Moment::Defined).collect(),
        tail_b: vec![0.0; n],
        max_order: n - 1,
    }
}
