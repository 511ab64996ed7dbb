use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::complex_serde;
use crate::error::{check_finite, check_nonneg, invalid, Error, Result};

/// A single two-level emitter in the linear (single-excitation) regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinSpec {
    pub frequency: f64,
    #[serde(default)]
    pub decay: f64,
    #[serde(with = "complex_serde")]
    pub coupling: Complex64,
}

impl SpinSpec {
    pub fn new(frequency: f64, decay: f64, coupling: f64) -> Self {
        Self {
            frequency,
            decay,
            coupling: Complex64::new(coupling, 0.0),
        }
    }

    fn validate(&self, i: usize) -> Result<()> {
        check_finite(&format!("spins[{i}].frequency"), self.frequency)?;
        check_nonneg(&format!("spins[{i}].decay"), self.decay)?;
        if !(self.coupling.re.is_finite() && self.coupling.im.is_finite()) {
            return invalid(format!("spins[{i}].coupling must be finite"));
        }
        Ok(())
    }
}

/// Single cavity mode; its field decays as `e^{-κt}` with `κ = loss`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavitySpec {
    pub frequency: f64,
    #[serde(default)]
    pub loss: f64,
}

impl CavitySpec {
    pub fn new(frequency: f64, loss: f64) -> Result<Self> {
        let c = Self { frequency, loss };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("cavity.frequency", self.frequency)?;
        check_nonneg("cavity.loss", self.loss)
    }

    /// `ω_c − iκ`.
    pub fn complex_frequency(&self) -> Complex64 {
        Complex64::new(self.frequency, -self.loss)
    }
}

/// A validated, frequency-sorted list of spins with its collective quantities.
///
/// Couplings are stored real and non-negative; the phase removed from each
/// one is kept in [`Ensemble::gauge_phases`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnsembleDoc", into = "EnsembleDoc")]
pub struct Ensemble {
    spins: Vec<SpinSpec>,
    gauge: Vec<f64>,
    coupling_sq: f64,
    mean: Complex64,
    width: f64,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct EnsembleDoc {
    spins: Vec<SpinSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gauge: Option<Vec<f64>>,
    #[serde(default, skip_deserializing)]
    collective_coupling: f64,
    #[serde(default, skip_deserializing, with = "complex_serde")]
    mean_frequency: Complex64,
    #[serde(default, skip_deserializing)]
    inhomogeneous_width: f64,
    #[serde(default, skip_deserializing)]
    superradiant_weights: Vec<f64>,
}

impl TryFrom<EnsembleDoc> for Ensemble {
    type Error = Error;

    fn try_from(doc: EnsembleDoc) -> Result<Self> {
        if doc.spins.is_empty() {
            return Ok(Ensemble::empty());
        }
        let n = doc.spins.len();
        let prior = match doc.gauge {
            Some(g) if g.len() == n => g,
            Some(g) => {
                return invalid(format!("gauge has {} entries for {} spins", g.len(), n));
            }
            None => vec![0.0; n],
        };
        let mut e = build_ensemble(doc.spins.clone())?;
        // Re-associate the recorded phases with the sorted spins.
        let order = sort_order(&doc.spins);
        for (k, &i) in order.iter().enumerate() {
            e.gauge[k] += prior[i];
        }
        Ok(e)
    }
}

impl From<Ensemble> for EnsembleDoc {
    fn from(e: Ensemble) -> Self {
        let gauge = e.gauge.iter().any(|&p| p != 0.0).then(|| e.gauge.clone());
        EnsembleDoc {
            collective_coupling: e.collective_coupling(),
            mean_frequency: e.mean,
            inhomogeneous_width: e.width,
            superradiant_weights: e.weights,
            gauge,
            spins: e.spins,
        }
    }
}

fn sort_order(spins: &[SpinSpec]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..spins.len()).collect();
    order.sort_by(|&a, &b| spins[a].frequency.total_cmp(&spins[b].frequency));
    order
}

impl Ensemble {
    /// The bare cavity: no spins, zero level shift.
    pub fn empty() -> Self {
        Self {
            spins: Vec::new(),
            gauge: Vec::new(),
            coupling_sq: 0.0,
            mean: Complex64::new(0.0, 0.0),
            width: 0.0,
            weights: Vec::new(),
        }
    }

    pub fn spins(&self) -> &[SpinSpec] {
        &self.spins
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    /// Real, non-negative coupling of spin `j` after the gauge rotation.
    pub fn coupling(&self, j: usize) -> f64 {
        self.spins[j].coupling.re
    }

    /// `Ω = (Σ|g_j|²)^{1/2}`.
    pub fn collective_coupling(&self) -> f64 {
        self.coupling_sq.sqrt()
    }

    /// `Ω²`, summed directly.
    pub fn collective_coupling_sq(&self) -> f64 {
        self.coupling_sq
    }

    /// Coupling-weighted mean of the complex spin frequencies `ω_j − iγ_j/2`.
    pub fn mean_frequency(&self) -> Complex64 {
        self.mean
    }

    /// Coupling-weighted standard deviation of the real spin frequencies.
    pub fn inhomogeneous_width(&self) -> f64 {
        self.width
    }

    /// Superradiant mode weights `α_j = g_j/Ω` (real after the gauge rotation).
    pub fn superradiant_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Phase removed from each input coupling, aligned with [`Ensemble::spins`].
    pub fn gauge_phases(&self) -> &[f64] {
        &self.gauge
    }

    pub fn is_lossless(&self) -> bool {
        self.spins.iter().all(|s| s.decay == 0.0)
    }

    /// Same spins with every coupling scaled so that `Ω` becomes `target`.
    pub fn with_collective_coupling(&self, target: f64) -> Result<Self> {
        check_nonneg("collective coupling", target)?;
        if self.is_empty() {
            return invalid("cannot rescale the couplings of an empty ensemble");
        }
        let scale = target / self.collective_coupling();
        let spins = self
            .spins
            .iter()
            .map(|s| SpinSpec {
                coupling: s.coupling * scale,
                ..*s
            })
            .collect();
        let mut e = build_ensemble(spins)?;
        e.gauge.clone_from(&self.gauge);
        Ok(e)
    }
}

/// Validate, gauge-rotate and sort a list of spins.
pub fn build_ensemble(spins: Vec<SpinSpec>) -> Result<Ensemble> {
    if spins.is_empty() {
        return invalid("an ensemble needs at least one spin");
    }
    for (i, s) in spins.iter().enumerate() {
        s.validate(i)?;
    }
    let order = sort_order(&spins);
    let mut sorted = Vec::with_capacity(spins.len());
    let mut gauge = Vec::with_capacity(spins.len());
    for &i in &order {
        let s = spins[i];
        let g = s.coupling.norm();
        let phase = if g > 0.0 { s.coupling.arg() } else { 0.0 };
        gauge.push(phase);
        sorted.push(SpinSpec {
            coupling: Complex64::new(g, 0.0),
            ..s
        });
    }
    let coupling_sq: f64 = sorted.iter().map(|s| s.coupling.re * s.coupling.re).sum();
    if !coupling_sq.is_finite() {
        return invalid("collective coupling overflows");
    }
    if coupling_sq == 0.0 {
        return invalid("at least one spin must have a nonzero coupling");
    }
    let omega = coupling_sq.sqrt();
    let weights: Vec<f64> = sorted.iter().map(|s| s.coupling.re / omega).collect();
    let mean = sorted
        .iter()
        .zip(&weights)
        .map(|(s, a)| a * a * Complex64::new(s.frequency, -0.5 * s.decay))
        .sum::<Complex64>();
    let var: f64 = sorted
        .iter()
        .zip(&weights)
        .map(|(s, a)| a * a * (s.frequency - mean.re).powi(2))
        .sum();
    Ok(Ensemble {
        spins: sorted,
        gauge,
        coupling_sq,
        mean,
        width: var.sqrt(),
        weights,
    })
}

/// Replace runs of spins whose neighbouring frequencies differ by at most `tol`
/// with one effective spin carrying the summed coupling weight.
///
/// The effective frequency and decay are the `|g|²`-weighted means of the group,
/// which leaves `Ω` and `ω̄` unchanged.
pub fn merge_degenerate(ensemble: &Ensemble, tol: f64) -> Result<Ensemble> {
    check_nonneg("merge tolerance", tol)?;
    if ensemble.is_empty() {
        return Ok(ensemble.clone());
    }
    let spins = ensemble.spins();
    let mut merged = Vec::with_capacity(spins.len());
    let mut phases = Vec::with_capacity(spins.len());
    let mut start = 0;
    while start < spins.len() {
        let mut end = start + 1;
        while end < spins.len() && spins[end].frequency - spins[end - 1].frequency <= tol {
            end += 1;
        }
        let group = &spins[start..end];
        if group.len() == 1 {
            merged.push(group[0]);
            phases.push(ensemble.gauge[start]);
        } else {
            let w: f64 = group.iter().map(|s| s.coupling.re.powi(2)).sum();
            let (freq, decay) = if w > 0.0 {
                (
                    group.iter().map(|s| s.coupling.re.powi(2) * s.frequency).sum::<f64>() / w,
                    group.iter().map(|s| s.coupling.re.powi(2) * s.decay).sum::<f64>() / w,
                )
            } else {
                let n = group.len() as f64;
                (
                    group.iter().map(|s| s.frequency).sum::<f64>() / n,
                    group.iter().map(|s| s.decay).sum::<f64>() / n,
                )
            };
            merged.push(SpinSpec {
                frequency: freq,
                decay,
                coupling: Complex64::new(w.sqrt(), 0.0),
            });
            phases.push(0.0);
        }
        start = end;
    }
    let mut e = build_ensemble(merged)?;
    e.gauge = phases;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spin(w: f64, g: f64) -> SpinSpec {
        SpinSpec::new(w, 0.0, g)
    }

    #[test]
    fn single_spin() {
        let e = build_ensemble(vec![spin(0.0, 1.0)]).unwrap();
        assert_eq!(e.collective_coupling(), 1.0);
        assert_eq!(e.mean_frequency(), Complex64::new(0.0, 0.0));
        assert_eq!(e.inhomogeneous_width(), 0.0);
        assert_eq!(e.superradiant_weights(), &[1.0]);
    }

    #[test]
    fn symmetric_pair() {
        let e = build_ensemble(vec![spin(1.0, 1.0), spin(-1.0, 1.0)]).unwrap();
        assert!((e.collective_coupling() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(e.mean_frequency().re, 0.0);
        assert!((e.inhomogeneous_width() - 1.0).abs() < 1e-15);
        assert_eq!(e.spins()[0].frequency, -1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_ensemble(vec![]).is_err());
        assert!(build_ensemble(vec![spin(f64::NAN, 1.0)]).is_err());
        assert!(build_ensemble(vec![SpinSpec::new(0.0, -1.0, 1.0)]).is_err());
        assert!(build_ensemble(vec![SpinSpec {
            frequency: 0.0,
            decay: 0.0,
            coupling: Complex64::new(f64::INFINITY, 0.0)
        }])
        .is_err());
        assert!(build_ensemble(vec![spin(0.0, 0.0)]).is_err());
    }

    #[test]
    fn gauge_is_recorded() {
        let g = Complex64::from_polar(2.0, 0.7);
        let e = build_ensemble(vec![SpinSpec {
            frequency: 0.0,
            decay: 0.0,
            coupling: g,
        }])
        .unwrap();
        assert!((e.coupling(0) - 2.0).abs() < 1e-15);
        assert!((e.gauge_phases()[0] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn merge_examples() {
        let e = build_ensemble(vec![spin(0.0, 1.0), spin(0.0, 1.0)]).unwrap();
        let m = merge_degenerate(&e, 0.0).unwrap();
        assert_eq!(m.len(), 1);
        assert!((m.coupling(0) - 2f64.sqrt()).abs() < 1e-15);

        let e = build_ensemble(vec![spin(0.0, 1.0), spin(5.0, 1.0)]).unwrap();
        assert_eq!(merge_degenerate(&e, 0.0).unwrap(), e);

        let e = build_ensemble(vec![spin(0.0, 1.0), spin(1e-9, 1.0), spin(5.0, 1.0)]).unwrap();
        let m = merge_degenerate(&e, 1e-6).unwrap();
        assert_eq!(m.len(), 2);
        assert!((m.coupling(0) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.coupling(1), 1.0);
        assert!(merge_degenerate(&e, -1.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let e = build_ensemble(vec![
            SpinSpec {
                frequency: 0.3,
                decay: 0.1,
                coupling: Complex64::new(0.0, 1.0),
            },
            spin(-0.2, 0.5),
        ])
        .unwrap();
        let s = serde_json::to_string(&e).unwrap();
        assert!(s.contains("\"collective_coupling\""));
        let back: Ensemble = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
        let plain: Ensemble = serde_json::from_str(r#"{"spins":[{"frequency":1,"coupling":2}]}"#).unwrap();
        assert_eq!(plain.collective_coupling(), 2.0);
    }

    fn arb_spins() -> impl Strategy<Value = Vec<SpinSpec>> {
        prop::collection::vec(
            (-5.0f64..5.0, 0.0f64..0.5, 0.01f64..2.0, -3.0f64..3.0).prop_map(|(w, d, g, p)| SpinSpec {
                frequency: w,
                decay: d,
                coupling: Complex64::from_polar(g, p),
            }),
            1..40,
        )
    }

    proptest! {
        #[test]
        fn collective_invariants(spins in arb_spins()) {
            let e = build_ensemble(spins.clone()).unwrap();
            let direct: f64 = spins.iter().map(|s| s.coupling.norm_sqr()).sum();
            prop_assert!((e.collective_coupling_sq() - direct).abs() <= 1e-12 * direct);
            let norm: f64 = e.superradiant_weights().iter().map(|a| a * a).sum();
            prop_assert!((norm - 1.0).abs() <= 1e-12);
            prop_assert!(e.spins().windows(2).all(|w| w[0].frequency <= w[1].frequency));
        }

        #[test]
        fn merge_preserves_collective(spins in arb_spins(), tol in 0.0f64..1.0) {
            let e = build_ensemble(spins).unwrap();
            let m = merge_degenerate(&e, tol).unwrap();
            prop_assert!((m.collective_coupling() - e.collective_coupling()).abs()
                <= 1e-12 * e.collective_coupling());
            prop_assert!((m.mean_frequency() - e.mean_frequency()).norm() <= 1e-12 * (1.0 + e.mean_frequency().norm()));
            prop_assert!(m.spins().windows(2).all(|w| w[1].frequency - w[0].frequency > tol));
        }
    }
}
