//! JSON and CSV serialization of simulation records and error reports.

use std::io::Write;

use serde::Serialize;
use snnconv_core::analysis::{ErrorReport, JOULES_PER_FLOP, JOULES_PER_SOP};
use snnconv_core::snn::SimRecord;

use crate::error::Result;

pub const ERROR_REPORT_COLUMNS: [&str; 9] = [
    "layer",
    "clip_fraction",
    "clip_mass",
    "quant_mse",
    "rate_gap",
    "sops",
    "flops",
    "energy_snn_j",
    "energy_ann_j",
];

#[derive(Debug, Serialize)]
pub struct LayerSimJson<'a> {
    pub theta: f64,
    pub positive_spikes: &'a [u32],
    pub negative_spikes: &'a [u32],
    pub phi: &'a [f64],
    pub conservation_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potentials: Option<&'a [Vec<f64>]>,
}

#[derive(Debug, Serialize)]
pub struct SimRecordJson<'a> {
    pub steps: u32,
    pub prediction: Option<usize>,
    pub output: &'a [f64],
    pub layers: Vec<LayerSimJson<'a>>,
}

impl<'a> From<&'a SimRecord> for SimRecordJson<'a> {
    fn from(s: &'a SimRecord) -> Self {
        SimRecordJson {
            steps: s.steps,
            prediction: s.prediction,
            output: &s.output,
            layers: s
                .layers
                .iter()
                .map(|l| LayerSimJson {
                    theta: l.theta,
                    positive_spikes: &l.positive,
                    negative_spikes: &l.negative,
                    phi: &l.phi,
                    conservation_residual: l.conservation_residual,
                    potentials: l.potentials.as_deref(),
                })
                .collect(),
        }
    }
}

pub fn sim_record_json(sim: &SimRecord) -> Result<String> {
    Ok(serde_json::to_string_pretty(&SimRecordJson::from(sim))?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerErrorsJson {
    pub layer: String,
    pub clip_fraction: Option<f64>,
    pub clip_mass: Option<f64>,
    pub quant_mse: Option<f64>,
    pub rate_gap: Option<f64>,
    pub sops: u64,
    pub flops: u64,
    pub energy_snn_j: f64,
    pub energy_ann_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReportJson {
    pub steps: u32,
    pub samples: usize,
    pub layers: Vec<LayerErrorsJson>,
    pub total: LayerErrorsJson,
}

impl From<&ErrorReport> for ErrorReportJson {
    fn from(r: &ErrorReport) -> Self {
        let last = r.layers.len().saturating_sub(1);
        let layers = r
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| LayerErrorsJson {
                layer: if i == last {
                    "output".into()
                } else {
                    i.to_string()
                },
                clip_fraction: l.clip_fraction,
                clip_mass: l.clip_mass,
                quant_mse: l.quant_mse,
                rate_gap: l.rate_gap,
                sops: l.sops,
                flops: l.flops,
                energy_snn_j: l.sops as f64 * JOULES_PER_SOP,
                energy_ann_j: l.flops as f64 * JOULES_PER_FLOP,
            })
            .collect();
        ErrorReportJson {
            steps: r.steps,
            samples: r.samples,
            layers,
            total: LayerErrorsJson {
                layer: "total".into(),
                clip_fraction: None,
                clip_mass: None,
                quant_mse: None,
                rate_gap: None,
                sops: r.totals.sops,
                flops: r.totals.flops,
                energy_snn_j: r.totals.energy_snn,
                energy_ann_j: r.totals.energy_ann,
            },
        }
    }
}

pub(crate) fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per layer, then a `total` row.
pub fn write_error_report_csv<W: Write>(report: &ErrorReport, out: W) -> Result<()> {
    let json = ErrorReportJson::from(report);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ERROR_REPORT_COLUMNS)?;
    for l in json.layers.iter().chain([&json.total]) {
        w.write_record([
            l.layer.clone(),
            opt(l.clip_fraction),
            opt(l.clip_mass),
            opt(l.quant_mse),
            opt(l.rate_gap),
            l.sops.to_string(),
            l.flops.to_string(),
            l.energy_snn_j.to_string(),
            l.energy_ann_j.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn error_report_csv(report: &ErrorReport) -> Result<String> {
    let mut buf = Vec::new();
    write_error_report_csv(report, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}
