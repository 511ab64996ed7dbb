use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::Read;
use std::sync::OnceLock;

use crate::error::{check_increasing, invalid, Error, Result};

/// Coupling density sampled on a grid, linear between samples and zero outside.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "TabulatedDoc")]
pub struct TabulatedDensity {
    omega: Vec<f64>,
    rho: Vec<f64>,
    #[serde(skip)]
    multipole: OnceLock<Multipole>,
}

impl PartialEq for TabulatedDensity {
    fn eq(&self, other: &Self) -> bool {
        self.omega == other.omega && self.rho == other.rho
    }
}

/// Moments about the grid midpoint, for evaluating the Cauchy integral far
/// from the support where the closed form cancels catastrophically.
#[derive(Debug, Clone)]
pub(crate) struct Multipole {
    pub center: f64,
    pub radius: f64,
    pub moments: Vec<f64>,
}

pub(crate) const MULTIPOLE_TERMS: u32 = 28;

#[derive(Deserialize)]
struct TabulatedDoc {
    omega: Vec<f64>,
    rho: Vec<f64>,
}

impl TryFrom<TabulatedDoc> for TabulatedDensity {
    type Error = Error;
    fn try_from(d: TabulatedDoc) -> Result<Self> {
        TabulatedDensity::new(d.omega, d.rho)
    }
}

impl TabulatedDensity {
    pub fn new(omega: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        if omega.len() != rho.len() {
            return invalid(format!(
                "tabulated density has {} frequencies but {} values",
                omega.len(),
                rho.len()
            ));
        }
        if omega.len() < 2 {
            return invalid("tabulated density needs at least two samples");
        }
        check_increasing("tabulated omega", &omega)?;
        if let Some(i) = rho.iter().position(|r| !r.is_finite() || *r < 0.0) {
            return invalid(format!(
                "tabulated rho[{i}] = {} is not a finite non-negative value",
                rho[i]
            ));
        }
        if rho.iter().all(|&r| r == 0.0) {
            return invalid("tabulated density is identically zero");
        }
        Ok(Self {
            omega,
            rho,
            multipole: OnceLock::new(),
        })
    }

    /// Read two columns `(ω, ρ)`. A header row is skipped if its first field
    /// is not a number.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let (mut omega, mut rho) = (Vec::new(), Vec::new());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
            if rec.len() < 2 {
                return invalid(format!("csv row {} has {} fields, need 2", line + 1, rec.len()));
            }
            let (a, b) = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    omega.push(a);
                    rho.push(b);
                }
                _ if line == 0 => continue,
                _ => return invalid(format!("csv row {}: cannot parse numbers", line + 1)),
            }
        }
        Self::new(omega, rho)
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            omega: self.omega.clone(),
            rho: self.rho.iter().map(|r| r * factor).collect(),
            multipole: OnceLock::new(),
        }
    }

    pub(crate) fn multipole(&self) -> &Multipole {
        self.multipole.get_or_init(|| {
            let (a, b) = (self.omega[0], self.omega[self.omega.len() - 1]);
            let center = 0.5 * (a + b);
            Multipole {
                center,
                radius: 0.5 * (b - a),
                moments: (0..MULTIPOLE_TERMS).map(|k| self.raw_moment(k, center)).collect(),
            }
        })
    }

    pub(crate) fn slope(&self, i: usize) -> f64 {
        (self.rho[i + 1] - self.rho[i]) / (self.omega[i + 1] - self.omega[i])
    }

    /// Index `i` with `omega[i] <= x < omega[i+1]`; the last node belongs to the
    /// last segment.
    pub(crate) fn segment(&self, x: f64) -> Option<usize> {
        let n = self.omega.len();
        if !(x >= self.omega[0] && x <= self.omega[n - 1]) {
            return None;
        }
        let i = self.omega.partition_point(|&w| w <= x);
        Some(i.saturating_sub(1).min(n - 2))
    }

    /// Linear interpolation, zero outside the grid.
    pub fn value(&self, x: f64) -> f64 {
        match self.segment(x) {
            Some(i) => self.rho[i] + self.slope(i) * (x - self.omega[i]),
            None => 0.0,
        }
    }

    /// The interpolating line of the segment under `Re ζ`, evaluated at
    /// complex `ζ`: the analytic continuation of `ρ` used below the cut.
    pub(crate) fn continued(&self, zeta: Complex64) -> Complex64 {
        match self.segment(zeta.re) {
            Some(i) => self.rho[i] + self.slope(i) * (zeta - self.omega[i]),
            None => Complex64::new(0.0, 0.0),
        }
    }

    pub(crate) fn continued_slope(&self, x: f64) -> f64 {
        self.segment(x).map_or(0.0, |i| self.slope(i))
    }

    /// Trapezoid integral, exact for the interpolant.
    pub fn total_weight(&self) -> f64 {
        self.omega
            .windows(2)
            .zip(self.rho.windows(2))
            .map(|(w, r)| 0.5 * (r[0] + r[1]) * (w[1] - w[0]))
            .sum()
    }

    /// `∫ (ω − c)^n ρ(ω) dω`, exact for the interpolant.
    pub fn raw_moment(&self, n: u32, c: f64) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.omega.len() - 1 {
            let m = self.slope(i);
            let p = self.rho[i] + m * (c - self.omega[i]);
            let (u0, u1) = (self.omega[i] - c, self.omega[i + 1] - c);
            let k = n as i32;
            sum += p * (u1.powi(k + 1) - u0.powi(k + 1)) / f64::from(n + 1)
                + m * (u1.powi(k + 2) - u0.powi(k + 2)) / f64::from(n + 2);
        }
        sum
    }

    /// Half-width of the grid around its centre of mass, used as a length scale.
    pub(crate) fn spread(&self) -> f64 {
        let w = self.total_weight();
        let mean = self.raw_moment(1, 0.0) / w;
        (self.raw_moment(2, mean) / w).max(0.0).sqrt()
    }

    /// Cumulative weight at each node.
    pub(crate) fn cumulative(&self) -> Vec<f64> {
        let mut c = Vec::with_capacity(self.omega.len());
        let mut acc = 0.0;
        c.push(0.0);
        for i in 0..self.omega.len() - 1 {
            acc += 0.5 * (self.rho[i] + self.rho[i + 1]) * (self.omega[i + 1] - self.omega[i]);
            c.push(acc);
        }
        c
    }

    /// Inverse of the normalized cumulative distribution at `u ∈ [0, 1]`.
    pub(crate) fn quantile(&self, cum: &[f64], u: f64) -> f64 {
        let total = *cum.last().unwrap();
        let target = u * total;
        let n = self.omega.len();
        let i = cum.partition_point(|&c| c <= target).clamp(1, n - 1) - 1;
        let r = target - cum[i];
        let (a, m) = (self.rho[i], self.slope(i));
        // Solve a d + m d²/2 = r for the offset d in the stable form.
        let disc = (a * a + 2.0 * m * r).max(0.0);
        let d = if a + disc.sqrt() > 0.0 {
            2.0 * r / (a + disc.sqrt())
        } else {
            0.0
        };
        (self.omega[i] + d).min(self.omega[i + 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tent() -> TabulatedDensity {
        TabulatedDensity::new(vec![-1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]).unwrap()
    }

    #[test]
    fn interpolation_and_weight() {
        let t = tent();
        assert_eq!(t.value(0.5), 0.5);
        assert_eq!(t.value(-0.25), 0.75);
        assert_eq!(t.value(2.0), 0.0);
        assert_eq!(t.value(1.0), 0.0);
        assert_eq!(t.total_weight(), 1.0);
        // Variance of the unit triangle distribution is 1/6.
        assert!((t.raw_moment(2, 0.0) - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(t.raw_moment(1, 0.0), 0.0);
    }

    #[test]
    fn quantile_of_tent() {
        let t = tent();
        let cum = t.cumulative();
        assert_eq!(t.quantile(&cum, 0.5), 0.0);
        // CDF on the left half is (x+1)²/2.
        let x = t.quantile(&cum, 0.125);
        assert!((x + 0.5).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(TabulatedDensity::new(vec![0.0], vec![1.0]).is_err());
        assert!(TabulatedDensity::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(TabulatedDensity::new(vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
        assert!(TabulatedDensity::new(vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn csv_with_header() {
        let data = "omega,rho\n-1,0\n0,1\n1,0\n";
        let t = TabulatedDensity::from_csv(data.as_bytes()).unwrap();
        assert_eq!(t, tent());
        assert!(TabulatedDensity::from_csv("0,1\nx,2\n".as_bytes()).is_err());
    }
}
