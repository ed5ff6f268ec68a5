use std::path::Path;
use std::process::{Command, Output};

fn snnconv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snnconv"))
        .args(args)
        .output()
        .expect("run snnconv")
}

fn write_config(dir: &Path, extra: &str) -> String {
    let text = format!(
        r#"{{
  "task": "blobs", "seed": 4, "net": [8], "L": 4, "epochs": 10, "lr": 0.05,
  "batch": 10, "T_list": [2, 4], "mode_list": ["IF", "DTN"],
  "v0_policy": "half_theta", "output_dir": "{}", "samples": 80{extra}
}}"#,
        dir.join("out").display()
    );
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn full_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("out");

    let r = snnconv(&["train", "--config", &cfg]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.join("ann.ckpt").exists());

    let r = snnconv(&["convert", "--config", &cfg]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.join("snn_IF.ckpt").exists() && out.join("snn_DTN.ckpt").exists());

    let r = snnconv(&[
        "simulate",
        "--config",
        &cfg,
        "--input",
        "-1.5,0.25",
        "--potentials",
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let sim: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("sim_DTN_T4.json")).unwrap())
            .unwrap();
    assert_eq!(sim["steps"], 4);
    assert_eq!(sim["layers"][0]["potentials"].as_array().unwrap().len(), 4);

    let ckpt = out.join("ann.ckpt").display().to_string();
    let r = snnconv(&["analyze", "--config", &cfg, "--ann", &ckpt]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = std::fs::read_to_string(out.join("reports.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 1 + 4);
}

#[test]
fn overrides_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#", "L_list": [2, 4]"#);
    let alt = dir.path().join("alt");
    let r = snnconv(&[
        "sweep",
        "--config",
        &cfg,
        "--seed",
        "9",
        "--out",
        alt.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = std::fs::read_to_string(alt.join("reports.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 5);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",9")));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), r#", "bogus": 1"#);
    assert_eq!(
        snnconv(&["analyze", "--config", &bad]).status.code(),
        Some(2)
    );
    assert_eq!(
        snnconv(&["train", "--config", "/nonexistent.json"])
            .status
            .code(),
        Some(2)
    );

    let cfg = write_config(dir.path(), "");
    let junk = dir.path().join("junk.ckpt");
    std::fs::write(&junk, b"not a checkpoint").unwrap();
    let r = snnconv(&["convert", "--config", &cfg, "--ann", junk.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(3));

    let idx = write_config(dir.path(), "").replace("config.json", "idx.json");
    let text = std::fs::read_to_string(&cfg).unwrap().replace(
        r#""task": "blobs""#,
        &format!(
            r#""task": "idx_images", "idx_images": "{0}/missing", "idx_labels": "{0}/missing""#,
            dir.path().display()
        ),
    );
    std::fs::write(&idx, text).unwrap();
    assert_eq!(
        snnconv(&["analyze", "--config", &idx]).status.code(),
        Some(3)
    );
}

#[test]
fn repro_figures_passes() {
    let r = snnconv(&["repro-figures"]);
    assert_eq!(r.status.code(), Some(0));
    let text = String::from_utf8(r.stdout).unwrap();
    assert_eq!(text.matches(" pass").count(), 6);
    assert!(!text.contains("FAIL"));
}
