use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{build_ensemble, CouplingDensity, Ensemble, Profile, SpinSpec};
use crate::error::{invalid, Result};
use crate::special::normal_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplingScheme {
    /// Seeded pseudo-random draws.
    Random,
    /// Inverse-CDF at the midpoints `(k + ½)/n`; deterministic.
    #[default]
    Quantile,
}

/// Draw `n` equally coupled spins from a continuous profile.
///
/// Couplings are `Ω/√n` and every spin gets decay `γ_hom`.
pub fn sample_ensemble(profile: &CouplingDensity, n: usize, seed: u64, scheme: SamplingScheme) -> Result<Ensemble> {
    if n == 0 {
        return invalid("sample size must be at least 1");
    }
    let quantile: Box<dyn Fn(f64) -> f64 + '_> = match profile.profile() {
        Profile::Discrete(_) => return invalid("cannot sample from a discrete ensemble"),
        Profile::Lorentzian { center, width, .. } => {
            let (c, h) = (*center, 0.5 * width);
            Box::new(move |u| c + h * (PI * (u - 0.5)).tan())
        }
        Profile::Gaussian { center, stddev, .. } => {
            let (c, s) = (*center, *stddev);
            Box::new(move |u| c + s * normal_quantile(u))
        }
        Profile::Tabulated(t) => {
            let cum = t.cumulative();
            Box::new(move |u| t.quantile(&cum, u))
        }
    };
    let us: Vec<f64> = match scheme {
        SamplingScheme::Quantile => (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect(),
        SamplingScheme::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n)
                .map(|_| loop {
                    let u: f64 = rng.gen();
                    if u > 0.0 {
                        break u;
                    }
                })
                .collect()
        }
    };
    let g = profile.collective_coupling() / (n as f64).sqrt();
    let spins = us
        .into_iter()
        .map(|u| SpinSpec {
            frequency: quantile(u),
            decay: profile.gamma_hom(),
            coupling: Complex64::new(g, 0.0),
        })
        .collect();
    build_ensemble(spins)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_quantile_is_median() {
        let d = CouplingDensity::gaussian(0.3, 1.0, 1.0, 0.0).unwrap();
        let e = sample_ensemble(&d, 1, 0, SamplingScheme::Quantile).unwrap();
        assert_eq!(e.spins()[0].frequency, 0.3);
        assert_eq!(e.coupling(0), 1.0);
    }

    #[test]
    fn quantile_sample_is_symmetric() {
        let d = CouplingDensity::gaussian(0.0, 1.0, 1.0, 0.05).unwrap();
        let e = sample_ensemble(&d, 25, 0, SamplingScheme::Quantile).unwrap();
        let mean: f64 = e.spins().iter().map(|s| s.frequency).sum::<f64>() / 25.0;
        assert!(mean.abs() < 1e-12);
        assert!(e.spins().iter().all(|s| s.decay == 0.05));
        let again = sample_ensemble(&d, 25, 0, SamplingScheme::Quantile).unwrap();
        assert_eq!(e, again);
    }

    #[test]
    fn statistics_match_independent_recomputation() {
        let d = CouplingDensity::gaussian(0.0, 1.0, 2.0, 0.1).unwrap();
        let e = sample_ensemble(&d, 25, 42, SamplingScheme::Random).unwrap();
        // Plain re-computation without the ensemble's weights.
        let g2: Vec<f64> = e.spins().iter().map(|s| s.coupling.norm_sqr()).collect();
        let total: f64 = g2.iter().sum();
        let mean: f64 = e.spins().iter().zip(&g2).map(|(s, w)| s.frequency * w).sum::<f64>() / total;
        let var: f64 = e
            .spins()
            .iter()
            .zip(&g2)
            .map(|(s, w)| w * (s.frequency - mean).powi(2))
            .sum::<f64>()
            / total;
        assert!((e.collective_coupling() - total.sqrt()).abs() < 1e-12);
        assert!((e.inhomogeneous_width() - var.sqrt()).abs() < 1e-12);
        assert!((e.collective_coupling() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn random_lorentzian_cdf() {
        let d = CouplingDensity::lorentzian(0.0, 1.0, 1.0, 0.0).unwrap();
        let e = sample_ensemble(&d, 10_000, 7, SamplingScheme::Random).unwrap();
        let n = e.len() as f64;
        let mut ks: f64 = 0.0;
        for (i, s) in e.spins().iter().enumerate() {
            let cdf = 0.5 + (2.0 * s.frequency).atan() / PI;
            ks = ks.max((cdf - i as f64 / n).abs()).max((cdf - (i + 1) as f64 / n).abs());
        }
        assert!(ks < 0.02, "Kolmogorov distance {ks}");
    }

    #[test]
    fn discrete_is_rejected() {
        let e = build_ensemble(vec![SpinSpec::new(0.0, 0.0, 1.0)]).unwrap();
        assert!(sample_ensemble(&CouplingDensity::discrete(e), 3, 0, SamplingScheme::Quantile).is_err());
        let d = CouplingDensity::gaussian(0.0, 1.0, 1.0, 0.0).unwrap();
        assert!(sample_ensemble(&d, 0, 0, SamplingScheme::Quantile).is_err());
    }
}
