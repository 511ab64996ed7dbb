//! Run configuration: schema, loading and cross-field checks.

use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};

use cavspec::model::{
    build_ensemble, sample_ensemble, CavitySpec, CouplingDensity, Ensemble, Profile, SamplingScheme, SpinSpec,
    TabulatedDensity,
};
use cavspec::response::{Channel, TimeMethod};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Name of the reference unit every frequency is expressed in.
    #[serde(default = "default_units")]
    pub units: String,
    #[serde(default)]
    pub seed: u64,
    /// Prefix prepended to every output file name.
    #[serde(default)]
    pub output: String,
    pub system: SystemConfig,
    pub task: Task,
}

fn default_units() -> String {
    "reference".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default)]
    pub density: Option<DensityConfig>,
    #[serde(default)]
    pub gamma_hom: f64,
    pub cavity: CavitySpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityConfig {
    Gaussian {
        center: f64,
        stddev: f64,
        strength: f64,
    },
    Lorentzian {
        center: f64,
        width: f64,
        strength: f64,
    },
    /// Inline `omega`/`rho` arrays or a two-column CSV file; `strength`
    /// rescales the table so that its integral is `strength²`.
    Tabulated {
        #[serde(default)]
        file: Option<PathBuf>,
        #[serde(default)]
        omega: Option<Vec<f64>>,
        #[serde(default)]
        rho: Option<Vec<f64>>,
        #[serde(default)]
        strength: Option<f64>,
    },
    /// Inline spins or a JSON ensemble file such as the one `sample` writes.
    Discrete {
        #[serde(default)]
        spins: Option<Vec<SpinSpec>>,
        #[serde(default)]
        file: Option<PathBuf>,
    },
    /// `n` equally coupled spins drawn from a continuous profile.
    Sampled {
        from: Box<DensityConfig>,
        n: usize,
        #[serde(default)]
        scheme: SamplingScheme,
    },
}

/// Either `{start, stop, points}` or an explicit list of values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Linspace { start: f64, stop: f64, points: usize },
    Values(Vec<f64>),
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Values(v) => v.clone(),
            Grid::Linspace { start, stop, points } => match *points {
                0 => vec![],
                1 => vec![*start],
                n => (0..n)
                    .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
                    .collect(),
            },
        }
    }

    fn check(&self, field: &str, diags: &mut Vec<Diagnostic>) {
        if let Grid::Linspace { start, stop, points } = self {
            if *points == 0 {
                diags.push(Diagnostic::new(format!("{field}.points"), "must be at least 1"));
            }
            if !(start.is_finite() && stop.is_finite()) || (*points > 1 && stop <= start) {
                diags.push(Diagnostic::new(field, "needs finite start < stop"));
            }
            return;
        }
        let v = self.values();
        if v.is_empty() {
            diags.push(Diagnostic::new(field, "is empty"));
        } else if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[1] <= w[0]) {
            diags.push(Diagnostic::new(field, "values must be finite and strictly increasing"));
        }
    }
}

fn default_threshold() -> f64 {
    0.4
}

fn default_channels() -> Vec<Channel> {
    vec![Channel::Cc]
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    /// `χ_cc(ω)` on a frequency grid.
    Spectrum { grid: Grid },
    /// `χ_cc(ω; ω_c)`; one file per entry of `couplings` (or one file at the
    /// configured strength when the list is empty).
    Spectrogram {
        omega: Grid,
        cavity: Grid,
        #[serde(default)]
        couplings: Vec<f64>,
    },
    /// Eigenmodes of a discrete ensemble, optionally swept over the cavity frequency.
    Eigen {
        #[serde(default)]
        cavity: Option<Grid>,
        #[serde(default)]
        couplings: Vec<f64>,
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
    /// Poles of `G̃⁺_cc` from explicit seeds or the default search.
    Poles {
        #[serde(default)]
        seeds: Vec<[f64; 2]>,
        #[serde(default)]
        depth: Option<f64>,
    },
    /// Polariton pole tracks against the collective coupling.
    Sweep { coupling: Grid },
    Timedomain {
        times: Grid,
        #[serde(default = "default_channels")]
        channels: Vec<Channel>,
        method: TimeMethod,
        #[serde(default)]
        step: Option<f64>,
    },
    /// Final distribution of spin excitation after a photon is injected.
    Pexc {},
    /// Survival of the upper dressed state.
    Leakage { times: Grid },
    /// Recover the level shift (and density) from a measured response.
    Invert {
        #[serde(default)]
        chi: Option<PathBuf>,
        #[serde(default)]
        transmissivity: Option<PathBuf>,
        #[serde(default)]
        floor: Option<f64>,
        #[serde(default = "default_true")]
        density: bool,
    },
    /// Draw an ensemble from the configured continuous density.
    Sample {
        n: usize,
        #[serde(default)]
        scheme: SamplingScheme,
    },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Spectrum { .. } => "spectrum",
            Task::Spectrogram { .. } => "spectrogram",
            Task::Eigen { .. } => "eigen",
            Task::Poles { .. } => "poles",
            Task::Sweep { .. } => "sweep",
            Task::Timedomain { .. } => "timedomain",
            Task::Pexc {} => "pexc",
            Task::Leakage { .. } => "leakage",
            Task::Invert { .. } => "invert",
            Task::Sample { .. } => "sample",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

/// A parsed and checked configuration, with the system built.
pub struct Loaded {
    pub raw: serde_json::Value,
    pub config: RunConfig,
    pub seed: u64,
    pub base_dir: PathBuf,
    pub density: Option<CouplingDensity>,
    pub cavity: CavitySpec,
}

pub fn load(path: &Path, seed: Option<u64>) -> Result<Loaded, Vec<Diagnostic>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| vec![Diagnostic::new("", format!("cannot read {}: {e}", path.display()))])?;
    let raw: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| vec![Diagnostic::new("", format!("{}: {e}", path.display()))])?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        let field = if field == "." {
            path.display().to_string()
        } else {
            field
        };
        vec![Diagnostic::new(field, inner.to_string())]
    })?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let seed = seed.unwrap_or(config.seed);

    let mut diags = Vec::new();
    let cavity = config.system.cavity;
    if let Err(e) = cavity.validate() {
        diags.push(Diagnostic::new("system.cavity", e.to_string()));
    }
    let density = match &config.system.density {
        Some(d) => build_density(
            d,
            config.system.gamma_hom,
            seed,
            &base_dir,
            "system.density",
            &mut diags,
        ),
        None => None,
    };
    if !diags.is_empty() {
        return Err(diags);
    }
    check_task(&config, density.as_ref(), &base_dir, &mut diags);
    if !diags.is_empty() {
        return Err(diags);
    }
    Ok(Loaded {
        raw,
        config,
        seed,
        base_dir,
        density,
        cavity,
    })
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn open(base: &Path, p: &Path, field: &str, diags: &mut Vec<Diagnostic>) -> Option<File> {
    let full = resolve(base, p);
    match File::open(&full) {
        Ok(f) => Some(f),
        Err(e) => {
            diags.push(Diagnostic::new(field, format!("cannot open {}: {e}", full.display())));
            None
        }
    }
}

/// With a discrete ensemble, `gamma_hom` is added to every spin's decay.
fn build_density(
    cfg: &DensityConfig,
    gamma_hom: f64,
    seed: u64,
    base: &Path,
    field: &str,
    diags: &mut Vec<Diagnostic>,
) -> Option<CouplingDensity> {
    let with_decay = |e: Ensemble| -> cavspec::Result<CouplingDensity> {
        if gamma_hom == 0.0 || e.is_empty() {
            return Ok(CouplingDensity::discrete(e));
        }
        if !(gamma_hom.is_finite() && gamma_hom > 0.0) {
            return Err(cavspec::Error::InvalidInput(format!(
                "gamma_hom must be non-negative, got {gamma_hom}"
            )));
        }
        let spins = e
            .spins()
            .iter()
            .zip(e.gauge_phases())
            .map(|(s, &phase)| SpinSpec {
                decay: s.decay + gamma_hom,
                coupling: s.coupling * cavspec::Complex64::from_polar(1.0, phase),
                ..*s
            })
            .collect();
        Ok(CouplingDensity::discrete(build_ensemble(spins)?))
    };
    let built = match cfg {
        DensityConfig::Gaussian {
            center,
            stddev,
            strength,
        } => CouplingDensity::gaussian(*center, *stddev, *strength, gamma_hom),
        DensityConfig::Lorentzian {
            center,
            width,
            strength,
        } => CouplingDensity::lorentzian(*center, *width, *strength, gamma_hom),
        DensityConfig::Tabulated {
            file,
            omega,
            rho,
            strength,
        } => {
            let table = match (file, omega, rho) {
                (Some(p), None, None) => {
                    let f = open(base, p, &format!("{field}.file"), diags)?;
                    TabulatedDensity::from_csv(f)
                }
                (None, Some(w), Some(r)) => TabulatedDensity::new(w.clone(), r.clone()),
                _ => {
                    return bail(
                        diags,
                        field,
                        "tabulated density needs either `file` or both `omega` and `rho`",
                    )
                }
            };
            table
                .and_then(|t| CouplingDensity::tabulated(t, gamma_hom))
                .and_then(|d| match strength {
                    Some(s) => d.with_strength(*s),
                    None => Ok(d),
                })
        }
        DensityConfig::Discrete { spins, file } => {
            let ensemble = match (spins, file) {
                (Some(s), None) if s.is_empty() => Ok(Ensemble::empty()),
                (Some(s), None) => build_ensemble(s.clone()),
                (None, Some(p)) => {
                    let f = open(base, p, &format!("{field}.file"), diags)?;
                    match serde_json::from_reader::<_, Ensemble>(std::io::BufReader::new(f)) {
                        Ok(e) => Ok(e),
                        Err(e) => return bail(diags, field, format!("{}: {e}", resolve(base, p).display())),
                    }
                }
                _ => return bail(diags, field, "discrete density needs exactly one of `spins` or `file`"),
            };
            ensemble.and_then(with_decay)
        }
        DensityConfig::Sampled { from, n, scheme } => {
            let source = build_density(from, 0.0, seed, base, &format!("{field}.from"), diags)?;
            if source.is_discrete() {
                return bail(diags, field, "cannot sample from a discrete ensemble");
            }
            sample_ensemble(&source, *n, seed, *scheme).and_then(with_decay)
        }
    };
    built
        .map_err(|e| diags.push(Diagnostic::new(field, e.to_string())))
        .ok()
}

fn bail<T>(diags: &mut Vec<Diagnostic>, field: &str, msg: impl Into<String>) -> Option<T> {
    diags.push(Diagnostic::new(field, msg));
    None
}

fn lossless(d: &CouplingDensity) -> bool {
    match d.profile() {
        Profile::Discrete(e) => e.is_lossless(),
        _ => d.gamma_hom() == 0.0,
    }
}

fn check_task(cfg: &RunConfig, density: Option<&CouplingDensity>, base: &Path, diags: &mut Vec<Diagnostic>) {
    let task = &cfg.task;
    let mut need = |what: &str| -> Option<&CouplingDensity> {
        if density.is_none() {
            diags.push(Diagnostic::new(
                "system.density",
                format!("task `{}` needs {what}", task.name()),
            ));
        }
        density
    };
    let needs_discrete = matches!(task, Task::Eigen { .. } | Task::Leakage { .. })
        || matches!(
            task,
            Task::Timedomain {
                method: TimeMethod::Eigen,
                ..
            }
        );
    let d = match task {
        Task::Invert { .. } => None,
        Task::Sample { .. } => need("a continuous density to sample from"),
        _ if needs_discrete => need("a discrete ensemble"),
        _ => need("a coupling density"),
    };
    if let Some(d) = d {
        if needs_discrete && !d.is_discrete() {
            diags.push(Diagnostic::new(
                "system.density.kind",
                format!("task `{}` needs a discrete or sampled ensemble", task.name()),
            ));
        }
    }
    let n_spins = d.and_then(|d| d.ensemble()).map(|e| e.len());
    let couplings = |list: &[f64], diags: &mut Vec<Diagnostic>| {
        if let Some(i) = list.iter().position(|c| !(c.is_finite() && *c >= 0.0)) {
            diags.push(Diagnostic::new(
                format!("task.couplings[{i}]"),
                "must be finite and non-negative",
            ));
        }
    };
    match task {
        Task::Spectrum { grid } => grid.check("task.grid", diags),
        Task::Spectrogram {
            omega,
            cavity,
            couplings: c,
        } => {
            omega.check("task.omega", diags);
            cavity.check("task.cavity", diags);
            couplings(c, diags);
        }
        Task::Eigen {
            cavity,
            couplings: c,
            threshold,
        } => {
            if let Some(g) = cavity {
                g.check("task.cavity", diags);
            }
            couplings(c, diags);
            if !(0.0..=1.0).contains(threshold) {
                diags.push(Diagnostic::new("task.threshold", "must lie in [0, 1]"));
            }
        }
        Task::Poles { seeds, depth } => {
            if seeds.iter().flatten().any(|x| !x.is_finite()) {
                diags.push(Diagnostic::new("task.seeds", "seeds must be finite [re, im] pairs"));
            }
            if let Some(h) = depth {
                if !(h.is_finite() && *h > 0.0) {
                    diags.push(Diagnostic::new("task.depth", "must be positive"));
                }
            }
        }
        Task::Sweep { coupling } => {
            coupling.check("task.coupling", diags);
            if coupling.values().iter().any(|c| *c < 0.0) {
                diags.push(Diagnostic::new("task.coupling", "couplings must be non-negative"));
            }
        }
        Task::Timedomain {
            times,
            channels,
            method,
            step,
        } => {
            times.check("task.times", diags);
            if times.values().first().is_some_and(|&t| t != 0.0) {
                diags.push(Diagnostic::new("task.times", "time grid must start at 0"));
            }
            if channels.is_empty() {
                diags.push(Diagnostic::new("task.channels", "list at least one channel"));
            }
            for (i, ch) in channels.iter().enumerate() {
                let idx = match *ch {
                    Channel::Jc(j) | Channel::Ck(j) => Some(j),
                    Channel::Jk(j, k) => Some(j.max(k)),
                    _ => None,
                };
                if let Some(j) = idx {
                    match n_spins {
                        None => diags.push(Diagnostic::new(
                            format!("task.channels[{i}]"),
                            format!("channel {ch} addresses a single spin and needs a discrete ensemble"),
                        )),
                        Some(n) if j >= n => diags.push(Diagnostic::new(
                            format!("task.channels[{i}]"),
                            format!("spin index {j} out of range for {n} spins"),
                        )),
                        _ => {}
                    }
                }
            }
            if *method == TimeMethod::Quadrature {
                if let Some(d) = d {
                    if cfg.system.cavity.loss == 0.0 && lossless(d) {
                        diags.push(Diagnostic::new(
                            "task.method",
                            "quadrature needs a lossy system (cavity loss or spin decay)",
                        ));
                    }
                }
            }
            if let Some(h) = step {
                if !(h.is_finite() && *h > 0.0) {
                    diags.push(Diagnostic::new("task.step", "must be positive"));
                }
            }
        }
        Task::Pexc {} => {
            if let Some(d) = d {
                if !lossless(d) {
                    diags.push(Diagnostic::new(
                        "system.gamma_hom",
                        "pexc needs non-decaying spins (gamma_hom = 0 and every spin decay 0): \
                         the excitation distribution p(omega) is defined only when spin excitation is conserved",
                    ));
                }
            }
        }
        Task::Leakage { times } => times.check("task.times", diags),
        Task::Invert {
            chi,
            transmissivity,
            floor,
            ..
        } => {
            match (chi, transmissivity) {
                (Some(p), None) => {
                    open(base, p, "task.chi", diags);
                }
                (None, Some(p)) => {
                    open(base, p, "task.transmissivity", diags);
                }
                _ => diags.push(Diagnostic::new(
                    "task",
                    "invert needs exactly one of `chi` or `transmissivity`",
                )),
            }
            if let Some(f) = floor {
                if !(f.is_finite() && *f >= 0.0) {
                    diags.push(Diagnostic::new("task.floor", "must be non-negative"));
                }
            }
        }
        Task::Sample { n, .. } => {
            if *n == 0 {
                diags.push(Diagnostic::new("task.n", "must be at least 1"));
            }
            if let Some(d) = d {
                if d.is_discrete() {
                    diags.push(Diagnostic::new(
                        "system.density.kind",
                        "sample needs a continuous density, not an ensemble",
                    ));
                }
            }
        }
    }
}

pub fn open_input(base: &Path, p: &Path) -> std::io::Result<File> {
    File::open(resolve(base, p))
}
