use std::path::Path;

use snnconv::config::{ExperimentConfig, Mode, Task, V0Choice};
use snnconv::pipeline::{run_pipeline, run_sweep, REPORT_COLUMNS};
use snnconv::report::ERROR_REPORT_COLUMNS;

fn blobs(dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        task: Task::Blobs,
        seed: 11,
        net: vec![10],
        levels: 4,
        epochs: 15,
        lr: 0.05,
        batch: 10,
        t_list: vec![2, 4, 8],
        mode_list: vec![Mode::If, Mode::Dtn],
        v0_policy: V0Choice::HalfTheta,
        output_dir: dir.to_path_buf(),
        l_list: None,
        samples: 160,
        classes: 2,
        idx_images: None,
        idx_labels: None,
    }
}

#[test]
fn blobs_pipeline_rows() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = run_pipeline(&blobs(dir.path())).unwrap();
    assert_eq!(bundle.test_samples, 40);
    let csv = std::fs::read_to_string(dir.path().join("reports.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], REPORT_COLUMNS.join(","));
    assert_eq!(lines.len(), 1 + 7);
    assert!(lines[1].starts_with("blobs,4,,ANN,"));
    let order: Vec<(u32, &str)> = bundle
        .rows
        .iter()
        .filter_map(|r| r.steps.map(|t| (t, r.mode)))
        .collect();
    assert_eq!(
        order,
        vec![
            (2, "IF"),
            (2, "DTN"),
            (4, "IF"),
            (4, "DTN"),
            (8, "IF"),
            (8, "DTN")
        ]
    );
    let ann = bundle.ann_row(4).unwrap().acc;
    assert!(ann >= 0.95, "ANN accuracy {ann}");
    let t4 = bundle.row(4, 4, Mode::Dtn).unwrap().acc;
    assert!(t4 >= ann - 0.02, "T=L accuracy {t4} vs ANN {ann}");

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("reports.json")).unwrap())
            .unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["cells"].as_array().unwrap().len(), 6);

    let layer_csv = std::fs::read_to_string(dir.path().join("error_report_L4_T2_DTN.csv")).unwrap();
    let layer_lines: Vec<&str> = layer_csv.lines().collect();
    assert_eq!(layer_lines[0], ERROR_REPORT_COLUMNS.join(","));
    assert_eq!(layer_lines.len(), 1 + 2 + 1);
    assert!(layer_lines[3].starts_with("total,"));
}

#[test]
fn single_level_sweep_matches_pipeline() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = blobs(a.path());
    let mut sweep_cfg = blobs(b.path());
    sweep_cfg.l_list = Some(vec![4]);
    let p = run_pipeline(&cfg).unwrap();
    let s = run_sweep(&sweep_cfg).unwrap();
    assert_eq!(p.csv().unwrap(), s.csv().unwrap());
    assert_eq!(p.rows, s.rows);
}

#[test]
fn seed_changes_results() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut other = blobs(b.path());
    other.seed = 12;
    let p = run_pipeline(&blobs(a.path())).unwrap();
    let q = run_pipeline(&other).unwrap();
    assert_ne!(p.csv().unwrap(), q.csv().unwrap());
}
