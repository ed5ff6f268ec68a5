//! Train, convert, simulate and analyze, writing `reports.json` and
//! `reports.csv` into the configured output directory.

use std::path::Path;

use serde::Serialize;
use snnconv_core::analysis::evaluate;
use snnconv_core::ann::{train, AnnNetwork, TrainConfig, TrainLog};
use snnconv_core::convert::convert;
use snnconv_core::data::{gen_blobs, gen_spirals, Dataset};
use snnconv_core::Rng;

use crate::config::{ExperimentConfig, Mode, Task};
use crate::error::{Error, Result, StageExt};
use crate::idx::load_idx;
use crate::report::{opt, write_error_report_csv, ErrorReportJson};

/// Bumped whenever a column or field is added to the reports.
pub const SCHEMA_VERSION: u32 = 1;

pub const TEST_FRACTION: f64 = 0.25;

pub const REPORT_COLUMNS: [&str; 13] = [
    "task",
    "L",
    "T",
    "mode",
    "acc",
    "ann_acc",
    "rate_gap",
    "clip_fraction",
    "quant_mse",
    "sops",
    "energy_snn_j",
    "energy_ann_j",
    "seed",
];

const TAG_DATA: u64 = 0x6461_7461;
const TAG_SPLIT: u64 = 0x7370_6c69;
const TAG_INIT: u64 = 0x696e_6974;
const TAG_TRAIN: u64 = 0x7472_6e21;

/// Independent stream seed for one pipeline stage.
pub fn sub_seed(seed: u64, tag: u64) -> u64 {
    Rng::new(seed ^ tag.rotate_left(32)).next_u64()
}

/// One row of `reports.csv`. ANN rows have `steps = None` and mode `ANN`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub task: &'static str,
    #[serde(rename = "L")]
    pub levels: u32,
    #[serde(rename = "T")]
    pub steps: Option<u32>,
    pub mode: &'static str,
    pub acc: f64,
    pub ann_acc: f64,
    pub rate_gap: Option<f64>,
    pub clip_fraction: Option<f64>,
    pub quant_mse: Option<f64>,
    pub sops: Option<u64>,
    pub energy_snn_j: Option<f64>,
    pub energy_ann_j: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    #[serde(rename = "L")]
    pub levels: u32,
    #[serde(rename = "T")]
    pub steps: u32,
    pub mode: Mode,
    pub acc: f64,
    pub ann_acc: f64,
    pub report: ErrorReportJson,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnSummary {
    #[serde(rename = "L")]
    pub levels: u32,
    pub test_acc: f64,
    pub train_loss: Vec<f64>,
    pub train_acc: Vec<f64>,
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBundle {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub train_samples: usize,
    pub test_samples: usize,
    pub anns: Vec<AnnSummary>,
    pub cells: Vec<Cell>,
    pub rows: Vec<ReportRow>,
}

impl ReportBundle {
    pub fn csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(REPORT_COLUMNS)?;
        for r in &self.rows {
            w.write_record([
                r.task.to_string(),
                r.levels.to_string(),
                r.steps.map(|t| t.to_string()).unwrap_or_default(),
                r.mode.to_string(),
                r.acc.to_string(),
                r.ann_acc.to_string(),
                opt(r.rate_gap),
                opt(r.clip_fraction),
                opt(r.quant_mse),
                r.sops.map(|s| s.to_string()).unwrap_or_default(),
                opt(r.energy_snn_j),
                r.energy_ann_j.to_string(),
                r.seed.to_string(),
            ])?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| csv::Error::from(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// SNN rows matching `(L, T, mode)`.
    pub fn row(&self, levels: u32, steps: u32, mode: Mode) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.levels == levels && r.steps == Some(steps) && r.mode == mode.name())
    }

    pub fn ann_row(&self, levels: u32) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.levels == levels && r.steps.is_none())
    }
}

/// Generates or loads the configured dataset and splits off the test part.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let seed = sub_seed(cfg.seed, TAG_DATA);
    let data = match cfg.task {
        Task::Blobs => gen_blobs(seed, cfg.samples, cfg.classes).stage("data")?,
        Task::Spirals => gen_spirals(seed, cfg.samples).stage("data")?,
        Task::IdxImages => {
            let (Some(images), Some(labels)) = (&cfg.idx_images, &cfg.idx_labels) else {
                return Err(Error::Config("idx paths missing".into()));
            };
            load_idx(images, labels)?
        }
    };
    data.split(TEST_FRACTION, sub_seed(cfg.seed, TAG_SPLIT))
        .stage("data")
}

/// Initializes and trains an ANN with `levels` quantization steps.
pub fn train_ann(
    cfg: &ExperimentConfig,
    levels: u32,
    data: &Dataset,
) -> Result<(AnnNetwork, TrainLog)> {
    let mut sizes = vec![data.features()];
    sizes.extend(&cfg.net);
    sizes.push(data.classes());
    let mut rng = Rng::new(sub_seed(cfg.seed, TAG_INIT));
    let mut net = AnnNetwork::random(&sizes, levels, &mut rng).stage("init")?;
    let log = train(
        &mut net,
        data,
        &TrainConfig {
            lr: cfg.lr,
            epochs: cfg.epochs,
            batch: cfg.batch,
            seed: sub_seed(cfg.seed, TAG_TRAIN),
        },
    )
    .stage("train")?;
    Ok((net, log))
}

fn evaluate_levels(
    cfg: &ExperimentConfig,
    levels: u32,
    ann: &AnnNetwork,
    log: &TrainLog,
    test: &Dataset,
    bundle: &mut ReportBundle,
) -> Result<()> {
    let ann_acc = ann.accuracy(test).stage("evaluate")?;
    let flops = snnconv_core::analysis::count_flops(ann) * test.len() as u64;
    let energy_ann = snnconv_core::analysis::estimate_energy(0, flops).ann_joules;
    bundle.anns.push(AnnSummary {
        levels,
        test_acc: ann_acc,
        train_loss: log.loss.clone(),
        train_acc: log.accuracy.clone(),
        lambdas: ann.hidden().iter().map(|h| h.qcfs.lambda()).collect(),
    });
    bundle.rows.push(ReportRow {
        task: cfg.task.name(),
        levels,
        steps: None,
        mode: "ANN",
        acc: ann_acc,
        ann_acc,
        rate_gap: None,
        clip_fraction: None,
        quant_mse: None,
        sops: None,
        energy_snn_j: None,
        energy_ann_j: energy_ann,
        seed: cfg.seed,
    });

    let mut t_list = cfg.t_list.clone();
    t_list.sort_unstable();
    t_list.dedup();
    let mut modes = cfg.mode_list.clone();
    modes.sort_unstable();
    modes.dedup();
    for &steps in &t_list {
        for &mode in &modes {
            let snn = convert(ann, mode.into(), cfg.v0_policy.into()).stage("convert")?;
            let ev = evaluate(ann, &snn, test, steps).stage("simulate")?;
            let hidden = &ev.report.layers[..ev.report.layers.len() - 1];
            let mean = |f: fn(&snnconv_core::analysis::LayerErrors) -> Option<f64>| {
                let v: Vec<f64> = hidden.iter().filter_map(f).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            let clip = hidden
                .iter()
                .filter_map(|l| l.clip_fraction)
                .fold(0.0f64, f64::max);
            bundle.rows.push(ReportRow {
                task: cfg.task.name(),
                levels,
                steps: Some(steps),
                mode: mode.name(),
                acc: ev.snn_accuracy,
                ann_acc,
                rate_gap: mean(|l| l.rate_gap),
                clip_fraction: Some(clip),
                quant_mse: mean(|l| l.quant_mse),
                sops: Some(ev.report.totals.sops),
                energy_snn_j: Some(ev.report.totals.energy_snn),
                energy_ann_j: ev.report.totals.energy_ann,
                seed: cfg.seed,
            });
            bundle.cells.push(Cell {
                levels,
                steps,
                mode,
                acc: ev.snn_accuracy,
                ann_acc,
                report: ErrorReportJson::from(&ev.report),
            });
            let path = cfg.output_dir.join(format!(
                "error_report_L{levels}_T{steps}_{}.csv",
                mode.name()
            ));
            let file = create(&path)?;
            write_error_report_csv(&ev.report, file)?;
        }
    }
    Ok(())
}

fn create(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn run_levels(
    cfg: &ExperimentConfig,
    levels: &[u32],
    pretrained: Option<&AnnNetwork>,
) -> Result<ReportBundle> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|source| Error::Io {
        path: cfg.output_dir.clone(),
        source,
    })?;
    let (train_set, test_set) = load_data(cfg)?;
    let mut bundle = ReportBundle {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        train_samples: train_set.len(),
        test_samples: test_set.len(),
        anns: Vec::new(),
        cells: Vec::new(),
        rows: Vec::new(),
    };
    let mut levels = levels.to_vec();
    levels.sort_unstable();
    levels.dedup();
    for l in levels {
        match pretrained {
            Some(net) => {
                evaluate_levels(cfg, l, net, &TrainLog::default(), &test_set, &mut bundle)?
            }
            None => {
                let (net, log) = train_ann(cfg, l, &train_set)?;
                evaluate_levels(cfg, l, &net, &log, &test_set, &mut bundle)?;
            }
        }
    }
    write_file(&cfg.output_dir.join("reports.csv"), &bundle.csv()?)?;
    write_file(
        &cfg.output_dir.join("reports.json"),
        &serde_json::to_string_pretty(&bundle)?,
    )?;
    Ok(bundle)
}

/// Trains at `L`, then converts and evaluates every `(T, mode)` cell on the
/// held-out split.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<ReportBundle> {
    run_levels(cfg, &[cfg.levels], None)
}

/// Like [`run_pipeline`] but starts from an already trained network.
pub fn run_pipeline_pretrained(cfg: &ExperimentConfig, ann: &AnnNetwork) -> Result<ReportBundle> {
    let levels = ann.hidden().first().map_or(cfg.levels, |h| h.qcfs.levels());
    run_levels(cfg, &[levels], Some(ann))
}

/// Repeats the pipeline for every entry of `L_list` (or `L` if absent).
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<ReportBundle> {
    let levels = cfg.l_list.clone().unwrap_or_else(|| vec![cfg.levels]);
    run_levels(cfg, &levels, None)
}
