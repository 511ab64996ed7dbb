use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cavspec"))
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn run(cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg(cfg)
        .arg("--output-dir")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn manifest(dir: &Path, prefix: &str) -> Value {
    let text = fs::read_to_string(dir.join(format!("{prefix}manifest.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn lossy_cavity(spins: Value) -> Value {
    json!({
        "system": {
            "density": { "kind": "discrete", "spins": spins },
            "cavity": { "frequency": 1.5, "loss": 0.1 }
        },
        "task": { "kind": "spectrum", "grid": { "start": 0.0, "stop": 3.0, "points": 301 } }
    })
}

#[test]
fn empty_ensemble_peaks_at_cavity() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bare.json", &lossy_cavity(json!([])));
    let out = run(&cfg, tmp.path(), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = rows(&tmp.path().join("spectrum.csv"));
    assert_eq!(table[0], ["omega", "re_chi", "im_chi", "abs_chi_sq", "phase"]);
    let peak = table[1..]
        .iter()
        .max_by(|a, b| a[3].parse::<f64>().unwrap().total_cmp(&b[3].parse().unwrap()))
        .unwrap();
    assert_eq!(peak[0].parse::<f64>().unwrap(), 1.5);
    // |χ|² = 1/κ² on resonance.
    assert!((peak[3].parse::<f64>().unwrap() - 100.0).abs() < 1e-9);
    assert_eq!(manifest(tmp.path(), "")["summary"]["peak_omega"], json!(1.5));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cfg = shipped("spectrogram_three_couplings.json");
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert!(run(&cfg, a.path(), &["--threads", "1"]).status.success());
    assert!(run(&cfg, b.path(), &["--threads", "3"]).status.success());
    let ma = manifest(a.path(), "three_couplings_");
    let files: Vec<&str> = ma["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["file"].as_str().unwrap())
        .collect();
    assert_eq!(files.len(), 3);
    for f in files {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let strip = |mut m: Value| {
        let o = m.as_object_mut().unwrap();
        o.remove("wall_time_seconds");
        o.remove("threads");
        m
    };
    assert_eq!(strip(ma), strip(manifest(b.path(), "three_couplings_")));
}

#[test]
fn shipped_configs_validate() {
    for entry in fs::read_dir(shipped("")).unwrap() {
        let p = entry.unwrap().path();
        let out = bin().arg("validate").arg(&p).output().unwrap();
        assert!(out.status.success(), "{}: {}", p.display(), stderr(&out));
        assert!(out.stderr.is_empty());
    }
}

#[test]
fn three_panel_modes_show_strong_coupling_pair() {
    let tmp = TempDir::new().unwrap();
    let out = run(&shipped("modes_cavity_sweep.json"), tmp.path(), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let m = manifest(tmp.path(), "three_couplings_");
    assert_eq!(m["units"], "inhomogeneous_width");
    // At the largest coupling and resonance only the two polaritons are photonlike.
    let panel = &m["summary"]["panels"][0];
    assert_eq!(panel["coupling"], json!(4.0));
    let counts = panel["photonlike_per_point"].as_array().unwrap();
    assert_eq!(counts[counts.len() / 2], json!(2));
}

#[test]
fn excitation_distribution_rejects_decaying_spins() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "pexc.json",
        &json!({
            "system": {
                "density": { "kind": "gaussian", "center": 0.0, "stddev": 1.0, "strength": 0.1 },
                "gamma_hom": 0.05,
                "cavity": { "frequency": 0.0, "loss": 0.2 }
            },
            "task": { "kind": "pexc" }
        }),
    );
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("system.gamma_hom") && err.contains("pexc"), "{err}");
}

#[test]
fn excitation_distribution_conserves_probability() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "pexc.json",
        &json!({
            "system": {
                "density": { "kind": "gaussian", "center": 0.0, "stddev": 1.0, "strength": 0.1 },
                "cavity": { "frequency": 0.0, "loss": 0.2 }
            },
            "task": { "kind": "pexc" }
        }),
    );
    let out = run(&cfg, tmp.path(), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let total = manifest(tmp.path(), "")["summary"]["total"].as_f64().unwrap();
    assert!((total - 1.0).abs() < 1e-4, "{total}");
    assert_eq!(rows(&tmp.path().join("pexc.csv"))[0], ["omega", "p"]);
}

#[test]
fn missing_table_file_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "tab.json",
        &json!({
            "system": {
                "density": { "kind": "tabulated", "file": "nowhere/rho.csv" },
                "cavity": { "frequency": 0.0, "loss": 0.1 }
            },
            "task": { "kind": "spectrum", "grid": [0.0, 1.0] }
        }),
    );
    for cmd in ["validate", "run"] {
        let out = bin()
            .arg(cmd)
            .arg(&cfg)
            .arg("--output-dir")
            .arg(tmp.path())
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(2));
        assert!(stderr(&out).contains("nowhere/rho.csv"), "{}", stderr(&out));
    }
    assert!(!tmp.path().join("manifest.json").exists());
}

#[test]
fn schema_errors_name_the_field() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.json",
        &json!({
            "system": {
                "density": { "kind": "gaussian", "center": 0.0, "stddev": "wide", "strength": 1.0 },
                "cavity": { "frequency": 0.0 }
            },
            "task": { "kind": "spectrum", "grid": [0.0] }
        }),
    );
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("system.density"), "{}", stderr(&out));

    let cfg = write_config(
        tmp.path(),
        "typo.json",
        &json!({
            "system": { "cavity": { "frequency": 0.0 } },
            "task": { "kind": "spectrum", "grdi": [0.0] }
        }),
    );
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("grdi"), "{}", stderr(&out));
}

#[test]
fn singular_points_exit_three_with_partial_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "singular.json",
        &json!({
            "system": {
                "density": { "kind": "discrete", "spins": [{ "frequency": 0.0, "coupling": 0.5 }] },
                "cavity": { "frequency": 0.0, "loss": 0.0 }
            },
            "task": { "kind": "spectrum", "grid": [-1.0, -0.2, 0.0, 0.2, 1.0] }
        }),
    );
    let out = run(&cfg, tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let m = manifest(tmp.path(), "");
    assert_eq!(m["status"], "numerical_failure");
    assert!(!m["flags"].as_array().unwrap().is_empty());
    // The other four points are still written.
    assert_eq!(rows(&tmp.path().join("spectrum.csv")).len(), 5);
}

#[test]
fn sampled_ensemble_round_trips_and_follows_seed() {
    let tmp = TempDir::new().unwrap();
    let sample = json!({
        "system": {
            "density": { "kind": "gaussian", "center": 0.0, "stddev": 1.0, "strength": 2.0 },
            "cavity": { "frequency": 0.0, "loss": 0.05 }
        },
        "task": { "kind": "sample", "n": 12, "scheme": "random" }
    });
    let cfg = write_config(tmp.path(), "sample.json", &sample);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&cfg, &a, &["--seed", "1"]).status.success());
    assert!(run(&cfg, &b, &["--seed", "2"]).status.success());
    assert_ne!(
        fs::read(a.join("spins.csv")).unwrap(),
        fs::read(b.join("spins.csv")).unwrap()
    );
    assert_eq!(manifest(&a, "")["seed"], json!(1));
    let omega = manifest(&a, "")["summary"]["collective_coupling"].as_f64().unwrap();
    assert!((omega - 2.0).abs() < 1e-12);

    // The written ensemble loads as a discrete density.
    let modes = json!({
        "system": {
            "density": { "kind": "discrete", "file": "a/ensemble.json" },
            "cavity": { "frequency": 0.0, "loss": 0.05 }
        },
        "task": { "kind": "eigen" }
    });
    let cfg = write_config(tmp.path(), "modes.json", &modes);
    let out = run(&cfg, &tmp.path().join("c"), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = rows(&tmp.path().join("c/modes.csv"));
    assert_eq!(table[0], ["re_e", "im_e", "photon_fraction", "class"]);
    assert_eq!(table.len(), 1 + 13);
}

#[test]
fn spectrum_output_feeds_inversion() {
    let tmp = TempDir::new().unwrap();
    let spectrum = json!({
        "system": {
            "density": { "kind": "lorentzian", "center": 0.0, "width": 1.0, "strength": 1.0 },
            "cavity": { "frequency": 0.5, "loss": 0.2 }
        },
        "task": { "kind": "spectrum", "grid": { "start": -40.0, "stop": 40.0, "points": 8001 } }
    });
    let cfg = write_config(tmp.path(), "spectrum.json", &spectrum);
    assert!(run(&cfg, tmp.path(), &[]).status.success());

    let invert = json!({
        "output": "inv_",
        "system": { "cavity": { "frequency": 0.5, "loss": 0.2 } },
        "task": { "kind": "invert", "chi": "spectrum.csv" }
    });
    let cfg = write_config(tmp.path(), "invert.json", &invert);
    let out = run(&cfg, tmp.path(), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let weight = manifest(tmp.path(), "inv_")["summary"]["total_weight"]
        .as_f64()
        .unwrap();
    assert!((weight - 1.0).abs() < 0.01, "{weight}");
    let table = rows(&tmp.path().join("inv_inversion.csv"));
    assert_eq!(table[0], ["omega", "re_k", "im_k", "rho", "flags"]);
    // ρ(0) = 1/(π·½) for a unit-weight Lorentzian of FWHM 1.
    let center = table.iter().find(|r| r[0] == "0.0").unwrap();
    let rho: f64 = center[3].parse().unwrap();
    assert!((rho - 2.0 / std::f64::consts::PI).abs() < 1e-3, "{rho}");
}

#[test]
fn time_traces_per_channel() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "time.json",
        &json!({
            "system": {
                "density": { "kind": "discrete", "spins": [
                    { "frequency": -0.3, "coupling": 0.2 },
                    { "frequency": 0.4, "coupling": 0.3 }
                ] },
                "cavity": { "frequency": 0.0, "loss": 0.0 }
            },
            "task": { "kind": "timedomain", "method": "eigen", "channels": ["cc", "jc:1"],
                      "times": { "start": 0.0, "stop": 10.0, "points": 11 } }
        }),
    );
    let out = run(&cfg, tmp.path(), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let cc = rows(&tmp.path().join("trace_cc.csv"));
    let jc = rows(&tmp.path().join("trace_jc_1.csv"));
    assert_eq!(cc[0], ["t", "re_g", "im_g", "abs_g"]);
    assert_eq!(cc[1][3], "1.0");
    assert_eq!(jc[1][3], "0.0");
    assert_eq!(cc.len(), 12);

    // Spin channels beyond the ensemble are caught before running.
    let bad = fs::read_to_string(&cfg).unwrap().replace("jc:1", "jc:5");
    fs::write(&cfg, bad).unwrap();
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("task.channels[1]"), "{}", stderr(&out));
}
