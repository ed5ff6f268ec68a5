use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use snnconv::checkpoint::{load_ann, load_snn, save_ann, save_snn};
use snnconv::config::ExperimentConfig;
use snnconv::error::{Error, Result};
use snnconv::figures::repro_figures;
use snnconv::pipeline::{load_data, run_pipeline, run_pipeline_pretrained, run_sweep, train_ann};
use snnconv::report::sim_record_json;
use snnconv_core::convert::convert;
use snnconv_core::snn::simulate;

#[derive(Parser)]
#[command(
    name = "snnconv",
    version,
    about = "Quantized ANN to spiking network conversion experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        cfg.validate()?;
        std::fs::create_dir_all(&cfg.output_dir).map_err(|source| Error::Io {
            path: cfg.output_dir.clone(),
            source,
        })?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train the QCFS network and write `ann.ckpt`.
    Train(Common),
    /// Convert `ann.ckpt` into one `snn_<mode>.ckpt` per configured mode.
    Convert {
        #[command(flatten)]
        common: Common,
        /// ANN checkpoint (default: `<out>/ann.ckpt`).
        #[arg(long)]
        ann: Option<PathBuf>,
    },
    /// Simulate converted networks on one input for every configured T.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated input vector (default: first test sample).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        input: Option<Vec<f64>>,
        /// Record membrane potentials after every step.
        #[arg(long)]
        potentials: bool,
    },
    /// Evaluate every (T, mode) cell and write the reports.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Use this trained network instead of training one.
        #[arg(long)]
        ann: Option<PathBuf>,
    },
    /// Run the pipeline for every entry of `L_list`.
    Sweep(Common),
    /// Check the reference neuron scenarios.
    ReproFigures,
}

fn snn_path(dir: &Path, mode: &str) -> PathBuf {
    dir.join(format!("snn_{mode}.ckpt"))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn print_summary(bundle: &snnconv::ReportBundle) {
    for r in &bundle.rows {
        let t = r.steps.map_or("-".to_string(), |t| t.to_string());
        println!(
            "L={:<3} T={:<4} {:<4} acc={:.4}",
            r.levels, t, r.mode, r.acc
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(common) => {
            let cfg = common.load()?;
            let (train_set, test_set) = load_data(&cfg)?;
            let (net, log) = train_ann(&cfg, cfg.levels, &train_set)?;
            let path = cfg.output_dir.join("ann.ckpt");
            save_ann(&net, &path)?;
            let summary = serde_json::json!({
                "train_loss": log.loss,
                "train_acc": log.accuracy,
                "test_acc": net.accuracy(&test_set)?,
                "lambdas": net.hidden().iter().map(|h| h.qcfs.lambda()).collect::<Vec<_>>(),
            });
            write(
                &cfg.output_dir.join("train_log.json"),
                &serde_json::to_string_pretty(&summary)?,
            )?;
            println!(
                "wrote {} (test accuracy {})",
                path.display(),
                summary["test_acc"]
            );
        }
        Command::Convert { common, ann } => {
            let cfg = common.load()?;
            let ann = load_ann(&ann.unwrap_or_else(|| cfg.output_dir.join("ann.ckpt")))?;
            for &mode in &cfg.mode_list {
                let snn = convert(&ann, mode.into(), cfg.v0_policy.into())?;
                let path = snn_path(&cfg.output_dir, mode.name());
                save_snn(&snn, &path)?;
                println!("wrote {}", path.display());
            }
        }
        Command::Simulate {
            common,
            input,
            potentials,
        } => {
            let cfg = common.load()?;
            let input = match input {
                Some(v) => v,
                None => load_data(&cfg)?.1.sample(0).0.to_vec(),
            };
            for &mode in &cfg.mode_list {
                let snn = load_snn(&snn_path(&cfg.output_dir, mode.name()))?;
                for &t in &cfg.t_list {
                    let sim = simulate(&snn, &input, t, potentials)?;
                    let path = cfg
                        .output_dir
                        .join(format!("sim_{}_T{t}.json", mode.name()));
                    write(&path, &sim_record_json(&sim)?)?;
                    println!("{} T={t}: prediction {:?}", mode.name(), sim.prediction);
                }
            }
        }
        Command::Analyze { common, ann } => {
            let cfg = common.load()?;
            let bundle = match ann {
                Some(p) => run_pipeline_pretrained(&cfg, &load_ann(&p)?)?,
                None => run_pipeline(&cfg)?,
            };
            print_summary(&bundle);
        }
        Command::Sweep(common) => {
            let cfg = common.load()?;
            print_summary(&run_sweep(&cfg)?);
        }
        Command::ReproFigures => repro_figures(std::io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
