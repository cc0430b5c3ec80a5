//! End-to-end tests of the installed binary: every subcommand, the
//! exit-code contract, and byte-level reproducibility of seeded runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn trajgan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trajgan"))
        .args(args)
        .output()
        .expect("binary spawns")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Tiny but complete run configuration: 16px, 8 videos of exactly one
/// clip length, a handful of training steps.
fn tiny_config(dir: &Path) -> String {
    let cfg = serde_json::json!({
        "seed": 5,
        "n_videos": 8,
        "n_frames": 8,
        "resolution": 16,
        "steps": 4,
        "batch": 2,
        "log_every": 1,
        "epochs": 2,
        "probe_epochs": 1,
        "probe_min_accuracy": 0.0,
        "clips": 8
    });
    let path = dir.join("tiny.json");
    fs::write(&path, format!("{cfg:#}\n")).unwrap();
    path.to_string_lossy().into_owned()
}

/// Every file under `dir` keyed by relative path.
fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

#[test]
fn pipeline_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = tiny_config(dir);
    let data = dir.join("data");
    let bb = dir.join("bb.ckpt");
    let full = dir.join("full.ckpt");

    let out = trajgan(&["synth-data", "--spec", &cfg, "--out", data.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "synth-data: {}", stderr(&out));
    for f in ["config.json", "meta.json", "manifest.csv", "run.log", "videos/0000.clip"] {
        assert!(data.join(f).exists(), "missing {f}");
    }
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(data.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["command"], "synth-data");
    assert_eq!(meta["seed"], 5);

    let out = trajgan(&["train-backbone", "--config", &cfg, "--out", bb.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "train-backbone: {}", stderr(&out));
    let csv = fs::read_to_string(dir.join("bb.run").join("train.csv")).unwrap();
    assert!(csv.starts_with("step,d_loss,g_loss,gp,d_real,d_fake\n"));
    assert_eq!(csv.lines().count(), 1 + 4, "one row per logged step");

    let out = trajgan(&["train-plugin", "--backbone", bb.to_str().unwrap(), "--config", &cfg, "--out", full.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "train-plugin: {}", stderr(&out));
    let csv = fs::read_to_string(dir.join("full.run").join("train.csv")).unwrap();
    assert!(csv.starts_with("epoch,step,d_loss,g_loss,d_real,d_fake\n"));
    let log = fs::read_to_string(dir.join("full.run").join("run.log")).unwrap();
    assert!(log.contains("backbone checksum unchanged"), "log: {log}");

    // Same seed twice: bitwise identical output trees.
    let g1 = dir.join("g1");
    let g2 = dir.join("g2");
    for g in [&g1, &g2] {
        let out = trajgan(&["generate", "--ckpt", full.to_str().unwrap(), "--seed", "9", "--out", g.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "generate: {}", stderr(&out));
    }
    assert!(g1.join("frame_000.ppm").exists());
    assert!(g1.join("frame_007.ppm").exists());
    let (t1, t2) = (tree(&g1), tree(&g2));
    assert_eq!(t1.keys().collect::<Vec<_>>(), t2.keys().collect::<Vec<_>>());
    for (name, bytes) in &t1 {
        assert_eq!(Some(bytes), t2.get(name), "{name} differs between identical runs");
    }

    let raw = dir.join("graw");
    let out = trajgan(&["generate", "--ckpt", full.to_str().unwrap(), "--seed", "9", "--out", raw.to_str().unwrap(), "--format", "raw"]);
    assert_eq!(code(&out), 0, "generate raw: {}", stderr(&out));
    let clip = trajgan::imgio::read_clip(&raw.join("clip.clip")).unwrap();
    assert_eq!(clip.frames.shape(), &[8, 1, 16, 16]);

    let out = trajgan(&[
        "evaluate",
        "--ckpt",
        full.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--config",
        &cfg,
        "--json",
    ]);
    assert_eq!(code(&out), 0, "evaluate: {}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["clips"], 8);
    for key in ["fid", "fvd", "is_mean", "is_std"] {
        let v = report["metrics"][key].as_f64().unwrap_or(f64::NAN);
        assert!(v.is_finite(), "metric {key} = {v}");
    }
    let acc = report["probe_accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));

    // Text mode spells the inception score as mean +/- std over splits.
    let report_path = dir.join("report.txt");
    let out = trajgan(&[
        "evaluate",
        "--ckpt",
        full.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--config",
        &cfg,
        "--metrics",
        "is",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "evaluate is: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("+/-"), "missing spread: {text}");
    assert!(text.contains("splits"), "missing split count: {text}");
    assert_eq!(text, fs::read_to_string(&report_path).unwrap());
}

#[test]
fn train_plugin_requires_frozen_backbone() {
    use trajgan::backbone::{Backbone, BackboneConfig};
    use trajgan::checkpoint::Checkpoint;

    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = tiny_config(dir);
    let path = dir.join("unfrozen.ckpt");
    let bb = Backbone::<f32>::new(3, &BackboneConfig::for_resolution(16).unwrap()).unwrap();
    let mut ck = Checkpoint::new();
    for r in bb.to_roles() {
        ck.push_role(r);
    }
    ck.write(&path).unwrap();

    let out = trajgan(&[
        "train-plugin",
        "--backbone",
        path.to_str().unwrap(),
        "--config",
        &cfg,
        "--out",
        dir.join("full.ckpt").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3, "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("freeze contract"), "stderr: {}", stderr(&out));
}

#[test]
fn error_classes_map_to_distinct_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let unknown = dir.join("unknown.json");
    fs::write(&unknown, "{\"not_a_key\": 1}\n").unwrap();
    let out = trajgan(&["synth-data", "--spec", unknown.to_str().unwrap(), "--out", dir.join("a").to_str().unwrap()]);
    assert_eq!(code(&out), 1, "unknown key: {}", stderr(&out));

    let broken = dir.join("broken.json");
    fs::write(&broken, "{\n").unwrap();
    let out = trajgan(&["synth-data", "--spec", broken.to_str().unwrap(), "--out", dir.join("b").to_str().unwrap()]);
    assert_eq!(code(&out), 2, "bad json: {}", stderr(&out));

    let out = trajgan(&["synth-data", "--spec", dir.join("missing.json").to_str().unwrap(), "--out", dir.join("c").to_str().unwrap()]);
    assert_eq!(code(&out), 2, "missing file: {}", stderr(&out));

    let out = trajgan(&["evaluate", "--ckpt", dir.join("no.ckpt").to_str().unwrap(), "--data", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "missing checkpoint: {}", stderr(&out));

    let out = trajgan(&["--threads", "0", "mem-report", "--pipeline", "mevgan"]);
    assert_eq!(code(&out), 1, "zero threads: {}", stderr(&out));

    let out = trajgan(&["mem-report", "--pipeline", "nonsense"]);
    assert_eq!(code(&out), 1, "bad enum: {}", stderr(&out));

    let out = trajgan(&["--help"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn mem_report_prints_profiles_and_scaling() {
    let out = trajgan(&["mem-report"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    for needle in ["mevgan-stage2", "baseline-3d", "constant across resolutions"] {
        assert!(text.contains(needle), "missing '{needle}' in:\n{text}");
    }

    let out = trajgan(&["mem-report", "--pipeline", "mevgan", "--json"]);
    assert_eq!(code(&out), 0);
    let profile: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(profile["trainable_params"], 5_508_230);
    assert_eq!(profile["pipeline"], "mevgan-stage2");

    // Optimizer state is two Adam moments in f32 per trainable scalar.
    let opt = profile["optimizer_state_bytes"].as_u64().unwrap();
    assert_eq!(opt, 2 * 4 * 5_508_230);
}
