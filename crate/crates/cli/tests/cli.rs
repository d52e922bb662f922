//! End-to-end runs of the `xpcs` binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn xpcs(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xpcs"))
        .current_dir(dir)
        .env_remove("XPCS_OUT")
        .env_remove("XPCS_THREADS")
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

/// Column `name` of a CSV file as f64.
fn column(path: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header
        .iter()
        .position(|h| *h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(i).unwrap().parse().unwrap()).collect()
}

fn manifest(dir: &Path) -> BTreeMap<String, String> {
    fs::read_to_string(dir.join("manifest.sha256"))
        .unwrap()
        .lines()
        .map(|l| {
            let (hash, file) = l.split_once("  ").unwrap();
            (file.to_string(), hash.to_string())
        })
        .collect()
}

const STATIC: &str = r#"
method = "direct"
max_lag = 10
[input]
kind = "brownian"
n_atoms = 100
box_length = 15.0
diffusivity = 0.0
dt = 0.1
n_frames = 40
[[rings]]
q = 1.0
dq = 0.2
[[rings]]
q = 1.5
dq = 0.2
[[rings]]
q = 2.0
dq = 0.2
"#;

const BROWNIAN: &str = r#"
seed = 3
method = "direct"
max_lag = 30
[input]
kind = "brownian"
n_atoms = 400
box_length = 20.0
diffusivity = 1.0
dt = 0.05
n_frames = 2000
[[rings]]
q = 1.0
dq = 0.1
[[rings]]
q = 1.2
dq = 0.1
[[rings]]
q = 1.4
dq = 0.1
[fit]
diffusivity = "linear"
"#;

#[test]
fn speckle_writes_one_field_per_frame_with_checksums() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "[input]\nkind = \"ideal_gas\"\nn_atoms = 40\nbox_length = 10.0\nn_frames = 2\n[grid]\nn_grid = 16\n",
    );
    let o = xpcs(tmp.path(), &["-c", cfg.to_str().unwrap(), "--out", "run", "speckle"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run = tmp.path().join("run");
    let m = manifest(&run);
    let fields: Vec<_> = m.keys().filter(|k| k.starts_with("fields/fft/")).collect();
    assert_eq!(fields.len(), 2);
    for (file, hash) in &m {
        let digest = Sha256::digest(fs::read(run.join(file)).unwrap());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(&hex, hash, "{file}");
    }
    assert!(m.contains_key("provenance.json") && m.contains_key("config.toml"));
}

#[test]
fn both_routes_agree_at_low_q() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "method = \"both\"\n[input]\nkind = \"ideal_gas\"\nn_atoms = 50\nbox_length = 12.0\nn_frames = 1\n[grid]\nn_grid = 16\n",
    );
    let o = xpcs(tmp.path(), &["-c", cfg.to_str().unwrap(), "--out", "run", "speckle"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let path = tmp.path().join("run/comparison.csv");
    let q = column(&path, "q");
    let rel = column(&path, "rel_err");
    let low: Vec<f64> = q.iter().zip(&rel).filter(|(q, _)| **q < 1.6).map(|(_, r)| *r).collect();
    assert!(low.len() > 20);
    let worst = low.iter().cloned().fold(0.0, f64::max);
    assert!(worst < 1e-3, "worst low-q relative error {worst}");
}

#[test]
fn unknown_config_key_exits_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "seeed = 4\n");
    let o = xpcs(tmp.path(), &["-c", cfg.to_str().unwrap(), "bench"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seeed"));
}

#[test]
fn missing_trajectory_exits_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "[input]\nkind = \"xyz\"\npath = \"nowhere.xyz\"\n",
    );
    let o = xpcs(tmp.path(), &["-c", cfg.to_str().unwrap(), "--out", "run", "validate"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn frozen_sample_is_flagged_unless_lenient() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", STATIC);
    let c = cfg.to_str().unwrap();
    let o = xpcs(tmp.path(), &["-c", c, "--out", "strict", "fit"]);
    assert_eq!(code(&o), 4);
    // outputs are still complete
    assert!(tmp.path().join("strict/fits.csv").exists());
    assert!(tmp.path().join("strict/manifest.sha256").exists());
    let o = xpcs(tmp.path(), &["-c", c, "--out", "lenient", "--lenient", "fit"]);
    assert_eq!(code(&o), 0);
    let prov = fs::read_to_string(tmp.path().join("lenient/provenance.json")).unwrap();
    assert!(prov.contains("not fittable"));
}

#[test]
fn frozen_sample_has_flat_g2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", STATIC);
    let o = xpcs(tmp.path(), &["-c", cfg.to_str().unwrap(), "--out", "run", "correlate"]);
    assert_eq!(code(&o), 0);
    for ring in ["g2_ring00.csv", "g2_ring01.csv", "g2_ring02.csv"] {
        let g2 = column(&tmp.path().join("run").join(ring), "g2");
        assert!(g2.iter().all(|g| (g - 1.0).abs() < 1e-9), "{g2:?}");
    }
}

#[test]
fn brownian_decay_rates_follow_dq2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", BROWNIAN);
    let o = xpcs(tmp.path(), &["-c", cfg.to_str().unwrap(), "--out", "run", "fit"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fits = tmp.path().join("run/fits.csv");
    for (q, gamma) in column(&fits, "q_eff").iter().zip(column(&fits, "gamma")) {
        let want = q * q;
        assert!((gamma - want).abs() < 0.1 * want, "q = {q}: {gamma} vs {want}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("run/diffusivity.json")).unwrap()).unwrap();
    let d = report["diffusivity"]["d_a2_per_ps"].as_f64().unwrap();
    assert!((d - 1.0).abs() < 0.1, "D = {d}");
    let msd = report["msd"]["d_a2_per_ps"].as_f64().unwrap();
    assert!((msd - 1.0).abs() < 0.05, "MSD D = {msd}");

    let o = xpcs(tmp.path(), &["-c", cfg.to_str().unwrap(), "--out", "corr", "correlate"]);
    assert_eq!(code(&o), 0);
    let summary = tmp.path().join("corr/correlate_summary.csv");
    for (q, gamma) in column(&summary, "q_eff").iter().zip(column(&summary, "gamma")) {
        assert!((gamma - q * q).abs() < 0.1 * q * q, "correlate q = {q}: {gamma}");
    }
}

#[test]
fn reruns_are_bit_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", BROWNIAN);
    let c = cfg.to_str().unwrap();
    for out in ["a", "b"] {
        let o = xpcs(tmp.path(), &["-c", c, "--out", out, "contrast"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (manifest(&tmp.path().join("a")), manifest(&tmp.path().join("b")));
    assert_eq!(a.len(), b.len());
    // the config copy and provenance record the output path, nothing else differs
    for (file, hash) in a.iter().filter(|(f, _)| !f.ends_with(".toml") && !f.ends_with(".json")) {
        assert_eq!(Some(hash), b.get(file), "{file}");
    }
}

#[test]
fn environment_overrides_config_and_flags_override_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "out = \"from_config\"\nthreads = 2\n[input]\nkind = \"ideal_gas\"\nn_atoms = 10\nbox_length = 8.0\nn_frames = 2\n",
    );
    let c = cfg.to_str().unwrap();
    let run = |env_out: &str, args: &[&str]| {
        let mut all = vec!["-c", c];
        all.extend_from_slice(args);
        all.push("generate");
        let o = Command::new(env!("CARGO_BIN_EXE_xpcs"))
            .current_dir(tmp.path())
            .env("XPCS_OUT", env_out)
            .env("XPCS_THREADS", "1")
            .args(&all)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    };
    run("from_env", &[]);
    assert!(!tmp.path().join("from_config").exists());
    let prov = fs::read_to_string(tmp.path().join("from_env/provenance.json")).unwrap();
    let prov: serde_json::Value = serde_json::from_str(&prov).unwrap();
    assert_eq!(prov["config"]["threads"], 1);
    run("from_env2", &["--out", "from_flag"]);
    assert!(tmp.path().join("from_flag/trajectory.xyz").exists());
    assert!(!tmp.path().join("from_env2").exists());
}

#[test]
fn generated_cache_reproduces_the_generator() {
    let tmp = TempDir::new().unwrap();
    let gen = write_config(tmp.path(), "gen.toml", BROWNIAN);
    let o = xpcs(tmp.path(), &["-c", gen.to_str().unwrap(), "--out", "gen", "generate"]);
    assert_eq!(code(&o), 0);
    let o = xpcs(
        tmp.path(),
        &["-c", gen.to_str().unwrap(), "--out", "direct", "correlate"],
    );
    assert_eq!(code(&o), 0);
    let from_cache = BROWNIAN.replace(
        "kind = \"brownian\"\nn_atoms = 400\nbox_length = 20.0\ndiffusivity = 1.0\ndt = 0.05\nn_frames = 2000",
        "kind = \"cache\"\npath = \"gen/trajectory.cache\"",
    );
    assert_ne!(from_cache, BROWNIAN);
    let cached = write_config(tmp.path(), "cached.toml", &from_cache);
    let o = xpcs(
        tmp.path(),
        &["-c", cached.to_str().unwrap(), "--out", "cached", "correlate"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a = fs::read(tmp.path().join("direct/g2_ring00.csv")).unwrap();
    let b = fs::read(tmp.path().join("cached/g2_ring00.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn correlate_reads_speckle_fields() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "[input]\nkind = \"brownian\"\nn_atoms = 60\nbox_length = 10.0\ndiffusivity = 1.0\ndt = 0.1\nn_frames = 12\n\
         [grid]\nn_grid = 16\n[[rings]]\nq = 1.5\ndq = 0.4\n",
    );
    let o = xpcs(tmp.path(), &["-c", cfg.to_str().unwrap(), "--out", "sp", "speckle"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fields = write_config(
        tmp.path(),
        "f.toml",
        "[input]\nkind = \"fields\"\npath = \"sp/fields/fft\"\n[[rings]]\nq = 1.5\ndq = 0.4\n",
    );
    let o = xpcs(
        tmp.path(),
        &["-c", fields.to_str().unwrap(), "--out", "corr", "correlate"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = xpcs(tmp.path(), &["-c", cfg.to_str().unwrap(), "--out", "traj", "correlate"]);
    assert_eq!(code(&o), 0);
    let a = column(&tmp.path().join("corr/g2_ring00.csv"), "g2");
    let b = column(&tmp.path().join("traj/g2_ring00.csv"), "g2");
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-9 * y.abs(), "{x} vs {y}");
    }
}

const GAS: &str = r#"
ms = [1, 2, 4]
[input]
kind = "ideal_gas"
n_atoms = 300
box_length = 20.0
n_frames = 64
[grid]
n_grid = 32
[[rings]]
q = 1.844
dq = 0.2
[[rings]]
q = 1.2
dq = 0.2
"#;

/// Rows of a CSV file as maps from column name to raw text.
fn rows(path: &Path) -> Vec<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines
        .map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect())
        .collect()
}

fn num(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap()
}

#[test]
fn ideal_gas_contrast_follows_one_over_m() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", GAS);
    let o = xpcs(tmp.path(), &["-c", cfg.to_str().unwrap(), "--out", "run", "contrast"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run = tmp.path().join("run");
    let summary = rows(&run.join("contrast_summary.csv"));
    assert_eq!(summary.len(), 6);
    for r in &summary {
        let m = num(r, "M");
        let beta = num(r, "beta_ring");
        assert!((beta * m - 1.0).abs() < 0.1, "M = {m}: beta = {beta}");
        assert!((num(r, "m_hat") / m - 1.0).abs() < 0.1);
        if m == 1.0 {
            let (bt, et, er) = (num(r, "beta_time"), num(r, "beta_time_err"), num(r, "beta_ring_err"));
            assert!((beta - bt).abs() < 3.0 * (et * et + er * er).sqrt(), "{beta} vs {bt}");
        }
    }
    // a one-frame exposure without superposition is the ring contrast itself
    let curve = rows(&run.join("contrast_ring00.csv"));
    let first = &curve[0];
    assert_eq!(num(first, "M"), 1.0);
    assert_eq!(first["beta"], summary[0]["beta_ring"]);
    let master = rows(&run.join("contrast_master.csv"));
    assert!(["x", "beta_norm", "theory"].iter().all(|k| master[0].contains_key(*k)));
    assert!(run.join("histogram_ring00_m4.csv").exists());
}

#[test]
fn averaged_detector_image_loses_speckle() {
    let tmp = TempDir::new().unwrap();
    let text = GAS.replace("n_frames = 64", "n_frames = 40")
        + "[speckle]\nwrite_fields = false\n[detector]\nwavelength = 1.0\nhalf_angle_deg = 25.0\npixels = 24\nper_frame = true\naverage = 40\n";
    let cfg = write_config(tmp.path(), "c.toml", &text);
    let o = xpcs(tmp.path(), &["-c", cfg.to_str().unwrap(), "--out", "run", "speckle"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let contrast = |file: &str| {
        let data = rows(&tmp.path().join("run/detector").join(file));
        let i: Vec<f64> = data
            .iter()
            .filter(|r| {
                let q2: f64 = ["qx", "qy", "qz"].iter().map(|k| num(r, k).powi(2)).sum();
                q2 > 1.0
            })
            .map(|r| num(r, "I"))
            .filter(|v| v.is_finite())
            .collect();
        assert!(i.len() > 100);
        let mean = i.iter().sum::<f64>() / i.len() as f64;
        i.iter().map(|v| (v / mean - 1.0).powi(2)).sum::<f64>() / i.len() as f64
    };
    let single = contrast("frame_00000.csv");
    let average = contrast("average.csv");
    assert!(single > 0.5, "single-frame contrast {single}");
    assert!(average < 0.1 * single, "averaged contrast {average} vs {single}");
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &GAS.replace("n_frames = 64", "n_frames = 6"));
    for t in ["1", "3"] {
        let o = xpcs(
            tmp.path(),
            &["-c", cfg.to_str().unwrap(), "--out", t, "--threads", t, "speckle"],
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (manifest(&tmp.path().join("1")), manifest(&tmp.path().join("3")));
    let data: Vec<_> = a.iter().filter(|(f, _)| f.ends_with(".grid")).collect();
    assert_eq!(data.len(), 6);
    for (file, hash) in data {
        assert_eq!(Some(hash), b.get(file), "{file}");
    }
}

#[test]
fn ideal_gas_validation_curves_are_flat() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", GAS);
    let o = xpcs(tmp.path(), &["-c", cfg.to_str().unwrap(), "--out", "run", "validate"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let gr = rows(&tmp.path().join("run/gr.csv"));
    let far: Vec<f64> = gr.iter().filter(|r| num(r, "r") > 2.0).map(|r| num(r, "g")).collect();
    let g = far.iter().sum::<f64>() / far.len() as f64;
    assert!((g - 1.0).abs() < 0.02, "mean g(r) {g}");
    let sq = rows(&tmp.path().join("run/sq.csv"));
    let s: Vec<f64> = sq
        .iter()
        .filter(|r| num(r, "count") > 0.0)
        .map(|r| num(r, "s"))
        .collect();
    assert!(s.len() > 20);
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    assert!((mean - 1.0).abs() < 0.05, "mean S(q) {mean}");
}

#[test]
fn small_benchmark_reports_every_workload() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "[bench]\nn_atoms = 100\nbox_length = 15.0\nn_grid = 16\nside = 5\nrepeats = 1\ninclude_cube = true\n",
    );
    let o = xpcs(tmp.path(), &["-c", cfg.to_str().unwrap(), "--out", "run", "bench"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = rows(&tmp.path().join("run/bench.csv"));
    // single point, slice, cube, FFT, then the two scaling sizes
    assert_eq!(table.len(), 6);
    assert!(table.iter().all(|r| num(r, "wall_s") > 0.0));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("run/bench.json")).unwrap()).unwrap();
    assert!(report["machine"]["hardware_threads"].as_u64().unwrap() >= 1);
    assert!(report["fft_speedup"].as_f64().unwrap() > 0.0);
    assert!(report["point_scaling"].as_f64().unwrap() > 0.0);
}
