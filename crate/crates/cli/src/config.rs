use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use snnconv_core::snn::{NeuronMode, V0Policy};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Blobs,
    Spirals,
    IdxImages,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Blobs => "blobs",
            Task::Spirals => "spirals",
            Task::IdxImages => "idx_images",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "IF")]
    If,
    #[serde(rename = "DTN")]
    Dtn,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::If => "IF",
            Mode::Dtn => "DTN",
        }
    }
}

impl From<Mode> for NeuronMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::If => NeuronMode::If,
            Mode::Dtn => NeuronMode::Dtn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum V0Choice {
    Zero,
    #[default]
    HalfTheta,
    Explicit(f64),
}

impl From<V0Choice> for V0Policy {
    fn from(v: V0Choice) -> Self {
        match v {
            V0Choice::Zero => V0Policy::Zero,
            V0Choice::HalfTheta => V0Policy::HalfTheta,
            V0Choice::Explicit(x) => V0Policy::Explicit(x),
        }
    }
}

fn default_samples() -> usize {
    400
}

fn default_classes() -> usize {
    2
}

/// One experiment, read from a JSON file. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub seed: u64,
    /// Hidden layer widths; input and output widths come from the data.
    pub net: Vec<usize>,
    #[serde(rename = "L")]
    pub levels: u32,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    #[serde(rename = "T_list")]
    pub t_list: Vec<u32>,
    pub mode_list: Vec<Mode>,
    #[serde(default)]
    pub v0_policy: V0Choice,
    pub output_dir: PathBuf,
    #[serde(rename = "L_list", default, skip_serializing_if = "Option::is_none")]
    pub l_list: Option<Vec<u32>>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_classes")]
    pub classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idx_images: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idx_labels: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.net.is_empty() || self.net.contains(&0) {
            return fail("net must list at least one positive hidden width");
        }
        if self.levels < 1 {
            return fail("L must be >= 1");
        }
        if self.t_list.is_empty() || self.t_list.contains(&0) {
            return fail("T_list must be nonempty with values >= 1");
        }
        if self.mode_list.is_empty() {
            return fail("mode_list must be nonempty");
        }
        if let Some(l) = &self.l_list {
            if l.is_empty() || l.contains(&0) {
                return fail("L_list must be nonempty with values >= 1");
            }
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return fail("lr must be positive");
        }
        if self.batch == 0 {
            return fail("batch must be >= 1");
        }
        if let V0Choice::Explicit(v) = self.v0_policy {
            if !v.is_finite() {
                return fail("v0_policy value must be finite");
            }
        }
        match self.task {
            Task::Blobs | Task::Spirals if self.samples < 8 => fail("samples must be >= 8"),
            Task::Blobs if self.classes < 2 => fail("classes must be >= 2"),
            Task::IdxImages if self.idx_images.is_none() || self.idx_labels.is_none() => {
                fail("idx_images task needs idx_images and idx_labels paths")
            }
            _ => Ok(()),
        }
    }
}
