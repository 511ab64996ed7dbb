//! CSV readers and writers. Every file has a single header row.
//!
//! Floats are written in their shortest round-trip form, so identical inputs
//! give byte-identical files.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::inversion::{DensityEstimate, LevelShiftTable, TransmissivitySweep};
use crate::model::Ensemble;
use crate::poles::{PoleResult, TrackPoint};
use crate::response::{ExcitationDistribution, Spectrogram, SpectrumResult, TimeTrace};
use crate::spectral::{classify_mode, PolaritonMode};

pub const SPECTRUM_HEADER: [&str; 5] = ["omega", "re_chi", "im_chi", "abs_chi_sq", "phase"];
pub const SPECTROGRAM_HEADER: [&str; 4] = ["omega_c", "omega", "re_chi", "im_chi"];
pub const TRACE_HEADER: [&str; 4] = ["t", "re_g", "im_g", "abs_g"];
pub const MODES_HEADER: [&str; 4] = ["re_e", "im_e", "photon_fraction", "class"];
pub const POLES_HEADER: [&str; 7] = [
    "omega",
    "re_e_plus",
    "im_e_plus",
    "re_e_minus",
    "im_e_minus",
    "regime",
    "sheet",
];
pub const INVERSION_HEADER: [&str; 5] = ["omega", "re_k", "im_k", "rho", "flags"];
pub const POLE_LIST_HEADER: [&str; 8] = [
    "re_e",
    "im_e",
    "sheet",
    "re_residue",
    "im_residue",
    "iterations",
    "converged",
    "residual",
];
pub const DISTRIBUTION_HEADER: [&str; 2] = ["omega", "p"];
pub const SPINS_HEADER: [&str; 4] = ["frequency", "decay", "re_coupling", "im_coupling"];
pub const CHI_HEADER: [&str; 3] = ["omega", "re_chi", "im_chi"];
pub const TRANSMISSIVITY_HEADER: [&str; 3] = ["omega", "omega_c", "transmissivity"];

fn writer<W: Write>(w: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    Ok(out)
}

fn f(x: f64) -> String {
    ryu::Buffer::new().format(x).to_owned()
}

pub fn write_spectrum<W: Write>(w: W, s: &SpectrumResult) -> Result<()> {
    let mut out = writer(w, &SPECTRUM_HEADER)?;
    for i in 0..s.grid.len() {
        let c = s.chi_cc[i];
        out.write_record([f(s.grid[i]), f(c.re), f(c.im), f(s.transmissivity[i]), f(s.phase[i])])?;
    }
    out.flush()?;
    Ok(())
}

/// Long format: one row per `(ω_c, ω)` pair, cavity frequency outermost.
pub fn write_spectrogram<W: Write>(w: W, s: &Spectrogram) -> Result<()> {
    let mut out = writer(w, &SPECTROGRAM_HEADER)?;
    for (wc, row) in s.cavity_grid.iter().zip(&s.chi) {
        for (x, c) in s.omega_grid.iter().zip(row) {
            out.write_record([f(*wc), f(*x), f(c.re), f(c.im)])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_trace<W: Write>(w: W, t: &TimeTrace) -> Result<()> {
    let mut out = writer(w, &TRACE_HEADER)?;
    for (x, g) in t.times.iter().zip(&t.values) {
        out.write_record([f(*x), f(g.re), f(g.im), f(g.norm())])?;
    }
    out.flush()?;
    Ok(())
}

/// One row per mode. With `parameter`, a leading column of that name carries the
/// sweep value for each block of modes.
pub fn write_modes<W: Write>(
    w: W,
    blocks: &[(f64, Vec<PolaritonMode>)],
    parameter: Option<&str>,
    threshold: f64,
) -> Result<()> {
    let mut header: Vec<&str> = parameter.into_iter().collect();
    header.extend(MODES_HEADER);
    let mut out = writer(w, &header)?;
    for (p, modes) in blocks {
        for m in modes {
            let mut rec = Vec::with_capacity(5);
            if parameter.is_some() {
                rec.push(f(*p));
            }
            rec.extend([
                f(m.energy.re),
                f(m.energy.im),
                f(m.photon_fraction),
                classify_mode(m, threshold).to_string(),
            ]);
            out.write_record(rec)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Pole tracks. The sheet column holds one sheet when both poles share it and
/// `plus/minus` otherwise.
pub fn write_pole_track<W: Write>(w: W, track: &[TrackPoint]) -> Result<()> {
    let mut out = writer(w, &POLES_HEADER)?;
    for p in track {
        let (a, b) = (p.plus.location, p.minus.location);
        let sheet = if p.plus.sheet == p.minus.sheet {
            p.plus.sheet.to_string()
        } else {
            format!("{}/{}", p.plus.sheet, p.minus.sheet)
        };
        out.write_record([
            f(p.omega),
            f(a.re),
            f(a.im),
            f(b.re),
            f(b.im),
            p.regime.regime.to_string(),
            sheet,
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_poles<W: Write>(w: W, poles: &[PoleResult]) -> Result<()> {
    let mut out = writer(w, &POLE_LIST_HEADER)?;
    for p in poles {
        out.write_record([
            f(p.location.re),
            f(p.location.im),
            p.sheet.to_string(),
            f(p.residue.re),
            f(p.residue.im),
            p.iterations.to_string(),
            p.converged.to_string(),
            f(p.residual),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_distribution<W: Write>(w: W, d: &ExcitationDistribution) -> Result<()> {
    let mut out = writer(w, &DISTRIBUTION_HEADER)?;
    for (x, p) in d.omega.iter().zip(&d.p) {
        out.write_record([f(*x), f(*p)])?;
    }
    out.flush()?;
    Ok(())
}

/// Sorted spins with their couplings rotated back out of the real gauge.
pub fn write_spins<W: Write>(w: W, e: &Ensemble) -> Result<()> {
    let mut out = writer(w, &SPINS_HEADER)?;
    for (s, &phase) in e.spins().iter().zip(e.gauge_phases()) {
        let g = s.coupling * Complex64::from_polar(1.0, phase);
        out.write_record([f(s.frequency), f(s.decay), f(g.re), f(g.im)])?;
    }
    out.flush()?;
    Ok(())
}

/// Inversion output. `rho` is left empty when only the level shift was recovered.
pub fn write_inversion<W: Write>(w: W, table: &LevelShiftTable, density: Option<&DensityEstimate>) -> Result<()> {
    let mut out = writer(w, &INVERSION_HEADER)?;
    for i in 0..table.len() {
        let k = table.k[i];
        let (rho, flags) = match density {
            Some(d) => (f(d.rho[i]), d.flags[i]),
            None => (String::new(), table.flags[i]),
        };
        out.write_record([f(table.omega[i]), f(k.re), f(k.im), rho, flags.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(r)
}

fn parse(rec: &csv::StringRecord, col: usize, row: usize) -> Result<f64> {
    let s = rec
        .get(col)
        .ok_or_else(|| Error::InvalidInput(format!("csv row {row}: missing column {}", col + 1)))?;
    s.parse::<f64>()
        .map_err(|_| Error::InvalidInput(format!("csv row {row}, column {}: cannot parse {s:?}", col + 1)))
}

/// Complex susceptibility samples `(ω, Re χ, Im χ)`.
pub fn read_chi<R: Read>(r: R) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let mut omega = Vec::new();
    let mut chi = Vec::new();
    for (i, rec) in reader(r).records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        omega.push(parse(&rec, 0, row)?);
        chi.push(Complex64::new(parse(&rec, 1, row)?, parse(&rec, 2, row)?));
    }
    Ok((omega, chi))
}

/// Long-format transmissivity `(ω, ω_c, |χ|²)`. Every probe must share the same
/// cavity grid; rows may come in any order.
pub fn read_transmissivity<R: Read>(r: R) -> Result<TransmissivitySweep> {
    let mut rows = Vec::new();
    for (i, rec) in reader(r).records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        rows.push((parse(&rec, 0, row)?, parse(&rec, 1, row)?, parse(&rec, 2, row)?));
    }
    let mut omega: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mut cav: Vec<f64> = rows.iter().map(|r| r.1).collect();
    for v in [&mut omega, &mut cav] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    if omega.len() * cav.len() != rows.len() {
        return invalid(format!(
            "transmissivity table is not a full grid: {} probes × {} cavity frequencies but {} rows",
            omega.len(),
            cav.len(),
            rows.len()
        ));
    }
    let mut data = vec![vec![f64::NAN; cav.len()]; omega.len()];
    for (w, c, t) in rows {
        let i = omega.binary_search_by(|x| x.total_cmp(&w)).expect("probe present");
        let j = cav.binary_search_by(|x| x.total_cmp(&c)).expect("cavity present");
        if !data[i][j].is_nan() {
            return invalid(format!("duplicate transmissivity row at ω = {w}, ω_c = {c}"));
        }
        data[i][j] = t;
    }
    Ok(TransmissivitySweep {
        omega,
        cavity_grid: cav,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelshift::LevelShift;
    use crate::model::{CavitySpec, CouplingDensity};
    use crate::response::spectrum;

    #[test]
    fn spectrum_round_trip() {
        let ls = LevelShift::new(CouplingDensity::gaussian(0.0, 1.0, 1.0, 0.0).unwrap());
        let cav = CavitySpec::new(0.1, 0.2).unwrap();
        let grid: Vec<f64> = (0..11).map(|i| -2.0 + 0.4 * i as f64).collect();
        let s = spectrum(&ls, &cav, &grid).unwrap();
        let mut buf = Vec::new();
        write_spectrum(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("omega,re_chi,im_chi,abs_chi_sq,phase\n"));
        assert_eq!(text.lines().count(), 12);
        let (w, chi) = read_chi(buf.as_slice()).unwrap();
        assert_eq!(w, grid);
        assert_eq!(chi, s.chi_cc);
    }

    #[test]
    fn transmissivity_long_format() {
        let text = "omega,omega_c,transmissivity\n1,0,0.5\n0,1,0.25\n0,0,1\n1,1,2\n";
        let s = read_transmissivity(text.as_bytes()).unwrap();
        assert_eq!(s.omega, vec![0.0, 1.0]);
        assert_eq!(s.data, vec![vec![1.0, 0.25], vec![0.5, 2.0]]);
        assert!(read_transmissivity("omega,omega_c,transmissivity\n0,0,1\n0,1,1\n1,0,1\n".as_bytes()).is_err());
        assert!(read_transmissivity("omega,omega_c,transmissivity\n0,x,1\n".as_bytes()).is_err());
    }
}
