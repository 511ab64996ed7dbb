use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use cavspec::inversion::{
    density_from_levelshift, levelshift_from_chi, levelshift_from_transmissivity, DEFAULT_CHI_FLOOR,
};
use cavspec::io;
use cavspec::levelshift::LevelShift;
use cavspec::model::{sample_ensemble, CavitySpec, CouplingDensity, Ensemble};
use cavspec::poles::{find_poles, search_poles};
use cavspec::response::{
    dressed_leakage, excitation_distribution, green_time, propagator, spectrogram, Channel, Spectrogram, SpectrumResult,
};
use cavspec::spectral::{classify_mode, eigenmodes, ModeClass};
use cavspec::{Complex64, Error};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{open_input, Diagnostic, Loaded, Task};

/// Why a run stopped or degraded.
#[derive(Debug)]
pub enum Failure {
    /// Input that slipped past validation; exit 2.
    Config(Vec<Diagnostic>),
    /// Could not write results.
    Io(String),
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub outputs: Vec<Value>,
    pub warnings: Vec<String>,
    /// Numerical failures; any entry makes the run exit 3.
    pub flags: Vec<String>,
    pub summary: Value,
}

struct Ctx<'a> {
    dir: &'a Path,
    prefix: &'a str,
    out: Outcome,
}

impl Ctx<'_> {
    fn emit(
        &mut self,
        name: &str,
        rows: usize,
        parameters: Value,
        write: impl FnOnce(&mut BufWriter<File>) -> cavspec::Result<()>,
    ) -> Result<(), Failure> {
        let file = format!("{}{name}", self.prefix);
        let path: PathBuf = self.dir.join(&file);
        let f = File::create(&path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(f);
        write(&mut w).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        w.flush().map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        self.out
            .outputs
            .push(json!({ "file": file, "rows": rows, "parameters": parameters }));
        Ok(())
    }

    /// Route a core error: bad input is a config failure, anything else is a
    /// numerical flag that leaves earlier outputs in place.
    fn absorb(&mut self, what: &str, e: Error) -> Result<(), Failure> {
        match e {
            Error::InvalidInput(msg) => Err(Failure::Config(vec![Diagnostic::new("task", msg)])),
            Error::Io(msg) => Err(Failure::Io(msg)),
            e => {
                self.out.flags.push(format!("{what}: {e}"));
                Ok(())
            }
        }
    }
}

pub fn run(loaded: &Loaded, dir: &Path) -> Result<Outcome, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    let mut cx = Ctx {
        dir,
        prefix: &loaded.config.output,
        out: Outcome::default(),
    };
    let cav = loaded.cavity;
    let density = loaded.density.as_ref();
    match &loaded.config.task {
        Task::Spectrum { grid } => spectrum_task(&mut cx, density.unwrap(), &cav, &grid.values())?,
        Task::Spectrogram {
            omega,
            cavity,
            couplings,
        } => {
            let omega = omega.values();
            let cavity = cavity.values();
            let panels = panels(density.unwrap(), couplings).map_err(config_err)?;
            let results: Vec<_> = panels
                .par_iter()
                .map(|(_, d)| {
                    let ls = LevelShift::new(d.clone());
                    cavity
                        .par_iter()
                        .map(|&wc| spectrogram(&ls, cav.loss, &omega, &[wc]))
                        .collect::<Vec<_>>()
                })
                .collect();
            let mut peaks = Vec::new();
            for (i, ((c, _), rows)) in panels.iter().zip(results).enumerate() {
                let mut merged = Spectrogram {
                    cavity_grid: vec![],
                    omega_grid: omega.clone(),
                    chi: vec![],
                };
                for (wc, row) in cavity.iter().zip(rows) {
                    match row {
                        Ok(mut s) => {
                            merged.cavity_grid.push(*wc);
                            merged.chi.push(s.chi.remove(0));
                        }
                        Err(e) => cx.absorb(&format!("spectrogram row omega_c = {wc}"), e)?,
                    }
                }
                let name = if couplings.is_empty() {
                    "spectrogram.csv".to_string()
                } else {
                    format!("spectrogram_{i}.csv")
                };
                let rows = merged.cavity_grid.len() * omega.len();
                let params = json!({ "coupling": c, "omega_points": omega.len(), "cavity_points": cavity.len() });
                cx.emit(&name, rows, params, |w| io::write_spectrogram(w, &merged))?;
                peaks.push(json!({ "file": name, "coupling": c }));
            }
            cx.out.summary = json!({ "panels": peaks });
        }
        Task::Eigen {
            cavity,
            couplings,
            threshold,
        } => {
            let sweep = cavity.as_ref().map(|g| g.values());
            let points = sweep.clone().unwrap_or_else(|| vec![cav.frequency]);
            let panels = panels(density.unwrap(), couplings).map_err(config_err)?;
            let mut counts = Vec::new();
            for (i, (c, d)) in panels.iter().enumerate() {
                let e = d.ensemble().expect("checked discrete");
                let blocks: Vec<_> = points
                    .par_iter()
                    .map(|&wc| {
                        eigenmodes(
                            e,
                            &CavitySpec {
                                frequency: wc,
                                loss: cav.loss,
                            },
                        )
                        .map(|m| (wc, m))
                    })
                    .collect();
                let mut ok = Vec::with_capacity(blocks.len());
                for (wc, b) in points.iter().zip(blocks) {
                    match b {
                        Ok(b) => ok.push(b),
                        Err(e) => cx.absorb(&format!("eigenmodes at omega_c = {wc}"), e)?,
                    }
                }
                let photonlike: Vec<usize> = ok
                    .iter()
                    .map(|(_, m)| {
                        m.iter()
                            .filter(|m| classify_mode(m, *threshold) == ModeClass::PhotonLike)
                            .count()
                    })
                    .collect();
                let name = if couplings.is_empty() {
                    "modes.csv".to_string()
                } else {
                    format!("modes_{i}.csv")
                };
                let rows = ok.iter().map(|(_, m)| m.len()).sum();
                let param = sweep.as_ref().map(|_| "omega_c");
                cx.emit(&name, rows, json!({ "coupling": c, "threshold": threshold }), |w| {
                    io::write_modes(w, &ok, param, *threshold)
                })?;
                counts.push(json!({ "file": name, "coupling": c, "photonlike_per_point": photonlike }));
            }
            cx.out.summary = json!({ "panels": counts });
        }
        Task::Poles { seeds, depth } => {
            let ls = LevelShift::new(density.unwrap().clone());
            let found = if seeds.is_empty() {
                search_poles(&ls, &cav, *depth)
            } else {
                let seeds: Vec<Complex64> = seeds.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
                find_poles(&ls, &cav, &seeds)
            };
            match found {
                Ok(poles) => {
                    for p in poles.iter().filter(|p| !p.converged) {
                        cx.out.flags.push(format!(
                            "pole near {} did not converge (residual {:e})",
                            p.location, p.residual
                        ));
                    }
                    cx.emit(
                        "poles.csv",
                        poles.len(),
                        json!({ "depth": depth, "seeds": seeds.len() }),
                        |w| io::write_poles(w, &poles),
                    )?;
                    cx.out.summary = json!({ "poles": poles.len() });
                }
                Err(e) => cx.absorb("pole search", e)?,
            }
        }
        Task::Sweep { coupling } => {
            let ls = LevelShift::new(density.unwrap().clone());
            let omegas = coupling.values();
            // Continuation: each point seeds the next, so the sweep is sequential.
            match cavspec::poles::track_poles(&ls, &cav, &omegas) {
                Ok(track) => {
                    for p in &track {
                        if !(p.plus.converged && p.minus.converged) {
                            cx.out.flags.push(format!("unconverged pole at coupling {}", p.omega));
                        }
                        if p.collision {
                            cx.out
                                .warnings
                                .push(format!("pole tracks met at coupling {}; re-seeded", p.omega));
                        }
                    }
                    cx.emit("poles.csv", track.len(), json!({ "points": omegas.len() }), |w| {
                        io::write_pole_track(w, &track)
                    })?;
                }
                Err(e) => cx.absorb("pole sweep", e)?,
            }
        }
        Task::Timedomain {
            times,
            channels,
            method,
            step,
        } => {
            let ls = LevelShift::new(density.unwrap().clone());
            let times = times.values();
            let traces: Vec<_> = channels
                .par_iter()
                .map(|&ch| green_time(&ls, &cav, &times, ch, *method, *step))
                .collect();
            for (ch, t) in channels.iter().zip(traces) {
                match t {
                    Ok(t) => {
                        let name = format!("trace_{}.csv", ch.to_string().replace(':', "_"));
                        let params = json!({ "channel": ch, "method": method, "error_estimate": t.error_estimate });
                        cx.emit(&name, t.times.len(), params, |w| io::write_trace(w, &t))?;
                    }
                    Err(e) => cx.absorb(&format!("channel {ch}"), e)?,
                }
            }
        }
        Task::Pexc {} => {
            let ls = LevelShift::new(density.unwrap().clone());
            match excitation_distribution(&ls, &cav) {
                Ok(d) => {
                    if (d.total - 1.0).abs() > 1e-4 {
                        cx.out.warnings.push(format!(
                            "probability total {} differs from 1 by more than 1e-4",
                            d.total
                        ));
                    }
                    cx.emit("pexc.csv", d.omega.len(), json!({}), |w| io::write_distribution(w, &d))?;
                    cx.out.summary = json!({
                        "integral": d.integral, "leak": d.leak, "leak_tail": d.leak_tail, "total": d.total
                    });
                }
                Err(e) => cx.absorb("excitation distribution", e)?,
            }
        }
        Task::Leakage { times } => {
            let e = density.unwrap().ensemble().expect("checked discrete");
            match dressed_leakage(e, &cav, &times.values()) {
                Ok(r) => {
                    cx.emit(
                        "leakage.csv",
                        r.trace.times.len(),
                        json!({ "channel": "plus_plus" }),
                        |w| io::write_trace(w, &r.trace),
                    )?;
                    cx.out.summary = json!({
                        "theta": [r.theta.re, r.theta.im],
                        "rabi_frequency": [r.rabi_frequency.re, r.rabi_frequency.im],
                        "phi_plus_sq": r.phi_plus_sq,
                        "bound": r.bound,
                        "min_abs": r.min_abs,
                    });
                }
                Err(e) => cx.absorb("dressed-state leakage", e)?,
            }
        }
        Task::Invert {
            chi,
            transmissivity,
            floor,
            density: want_density,
        } => {
            let base = &loaded.base_dir;
            let table = match (chi, transmissivity) {
                (Some(p), _) => {
                    let f = open_input(base, p).map_err(|e| input_err("task.chi", p, e))?;
                    io::read_chi(f)
                        .and_then(|(w, c)| levelshift_from_chi(&w, &c, &cav, floor.unwrap_or(DEFAULT_CHI_FLOOR)))
                }
                (None, Some(p)) => {
                    let f = open_input(base, p).map_err(|e| input_err("task.transmissivity", p, e))?;
                    io::read_transmissivity(f).and_then(|s| levelshift_from_transmissivity(&s, cav.loss))
                }
                (None, None) => unreachable!("checked at load"),
            };
            let table = table.map_err(config_err)?;
            let excluded = table.flags.iter().filter(|f| !f.is_empty()).count();
            if excluded > 0 {
                cx.out.warnings.push(format!(
                    "{excluded} of {} points flagged during level-shift recovery",
                    table.len()
                ));
            }
            let est = if *want_density {
                match density_from_levelshift(&table, loaded.config.system.gamma_hom) {
                    Ok(d) => Some(d),
                    Err(e) => {
                        cx.absorb("density recovery", e)?;
                        None
                    }
                }
            } else {
                None
            };
            if let Some(d) = &est {
                cx.out.warnings.extend(d.warnings.iter().cloned());
                cx.out.summary = json!({
                    "total_weight": d.total_weight,
                    "collective_coupling": d.total_weight.max(0.0).sqrt(),
                    "derivative_mismatch": d.derivative_mismatch,
                });
            }
            cx.emit("inversion.csv", table.len(), json!({ "density": want_density }), |w| {
                io::write_inversion(w, &table, est.as_ref())
            })?;
        }
        Task::Sample { n, scheme } => {
            let e = sample_ensemble(density.unwrap(), *n, loaded.seed, *scheme).map_err(config_err)?;
            cx.emit(
                "spins.csv",
                e.len(),
                json!({ "n": n, "scheme": scheme, "seed": loaded.seed }),
                |w| io::write_spins(w, &e),
            )?;
            write_ensemble(&mut cx, &e)?;
            cx.out.summary = json!({
                "collective_coupling": e.collective_coupling(),
                "inhomogeneous_width": e.inhomogeneous_width(),
            });
        }
    }
    Ok(cx.out)
}

fn write_ensemble(cx: &mut Ctx, e: &Ensemble) -> Result<(), Failure> {
    cx.emit(
        "ensemble.json",
        e.len(),
        json!({ "format": "discrete ensemble" }),
        |w| {
            serde_json::to_writer_pretty(&mut *w, e).map_err(|err| Error::Io(err.to_string()))?;
            w.write_all(b"\n").map_err(Error::from)
        },
    )
}

fn spectrum_task(cx: &mut Ctx, density: &CouplingDensity, cav: &CavitySpec, grid: &[f64]) -> Result<(), Failure> {
    let ls = LevelShift::new(density.clone());
    let values: Vec<_> = grid.par_iter().map(|&w| propagator(&ls, cav, w, Channel::Cc)).collect();
    let (mut omega, mut chi) = (Vec::new(), Vec::new());
    for (w, v) in grid.iter().zip(values) {
        match v {
            Ok(c) => {
                omega.push(*w);
                chi.push(c);
            }
            Err(e) => cx.absorb(&format!("chi at omega = {w}"), e)?,
        }
    }
    let s = SpectrumResult {
        transmissivity: chi.iter().map(|c| c.norm_sqr()).collect(),
        phase: chi.iter().map(|c| c.arg()).collect(),
        grid: omega,
        chi_cc: chi,
    };
    let peak = s
        .transmissivity
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| s.grid[i]);
    cx.emit("spectrum.csv", s.grid.len(), json!({ "points": grid.len() }), |w| {
        io::write_spectrum(w, &s)
    })?;
    cx.out.summary = json!({ "peak_omega": peak });
    Ok(())
}

/// One density per requested coupling, or the configured one alone.
fn panels(d: &CouplingDensity, couplings: &[f64]) -> cavspec::Result<Vec<(f64, CouplingDensity)>> {
    if couplings.is_empty() {
        return Ok(vec![(d.collective_coupling(), d.clone())]);
    }
    couplings.iter().map(|&c| Ok((c, d.with_strength(c)?))).collect()
}

fn config_err(e: Error) -> Failure {
    match e {
        Error::Io(msg) => Failure::Config(vec![Diagnostic::new("", msg)]),
        e => Failure::Config(vec![Diagnostic::new("", e.to_string())]),
    }
}

fn input_err(field: &str, p: &Path, e: std::io::Error) -> Failure {
    Failure::Config(vec![Diagnostic::new(field, format!("{}: {e}", p.display()))])
}
