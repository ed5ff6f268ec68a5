//! Hard-coded neuron scenarios with known exact rates.

use std::io::Write;

use snnconv_core::analysis::{unevenness_enumeration, UnevennessInstance};
use snnconv_core::snn::{NeuronLayerState, NeuronMode, DEFAULT_THETA_NEG};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FigureCheck {
    pub name: &'static str,
    pub expected: f64,
    pub actual: f64,
    /// Spike train (or a short description) behind `actual`.
    pub trace: String,
}

impl FigureCheck {
    pub fn passed(&self) -> bool {
        self.expected == self.actual
    }
}

/// Feeds `charges` into one neuron with `θ = 1`, `v(0) = 0` and returns the
/// rate and spike train.
pub fn charge_trace(charges: &[f64], mode: NeuronMode) -> Result<(f64, Vec<i8>)> {
    let mut state = NeuronLayerState::new(1, 1.0, DEFAULT_THETA_NEG, mode, 0.0)?;
    let mut spikes = Vec::with_capacity(charges.len());
    let mut out = [0i8];
    for &c in charges {
        state.step_into(&[c], &mut out)?;
        spikes.push(out[0]);
    }
    state.check_conservation(0)?;
    Ok((state.rates()[0], spikes))
}

pub fn figure_checks() -> Result<Vec<FigureCheck>> {
    let mut checks = Vec::new();
    for (name, charges, mode, expected) in [
        (
            "IF (-2,-2,2,2)",
            [-2.0, -2.0, 2.0, 2.0],
            NeuronMode::If,
            0.0,
        ),
        (
            "IF (2,-2,2,-2)",
            [2.0, -2.0, 2.0, -2.0],
            NeuronMode::If,
            0.5,
        ),
        (
            "DTN (2,-2,2,-2)",
            [2.0, -2.0, 2.0, -2.0],
            NeuronMode::Dtn,
            0.0,
        ),
    ] {
        let (actual, spikes) = charge_trace(&charges, mode)?;
        checks.push(FigureCheck {
            name,
            expected,
            actual,
            trace: format!("spikes {spikes:?}"),
        });
    }
    let inst = UnevennessInstance::new(vec![2.0, -2.0], vec![3, 2], 1.0, 5, NeuronMode::If);
    let u = unevenness_enumeration(&inst)?;
    let summary = format!("{} orderings, histogram {:?}", u.orderings, u.histogram);
    for (name, expected, actual) in [
        ("ordering uniform", 0.4, u.uniform_phi),
        ("ordering worst high", 0.8, u.max_phi),
        ("ordering worst low", 0.2, u.min_phi),
    ] {
        checks.push(FigureCheck {
            name,
            expected,
            actual,
            trace: summary.clone(),
        });
    }
    Ok(checks)
}

/// Prints a pass/fail table; fails with [`Error::Figures`] on any mismatch.
pub fn repro_figures<W: Write>(mut out: W) -> Result<()> {
    let checks = figure_checks()?;
    let io = |source| Error::Io {
        path: "<stdout>".into(),
        source,
    };
    writeln!(
        out,
        "{:<22} {:>8} {:>8}  result",
        "scenario", "expected", "actual"
    )
    .map_err(io)?;
    let mut failed = 0;
    for c in &checks {
        let verdict = if c.passed() { "pass" } else { "FAIL" };
        writeln!(
            out,
            "{:<22} {:>8} {:>8}  {verdict}",
            c.name, c.expected, c.actual
        )
        .map_err(io)?;
        if !c.passed() {
            failed += 1;
            writeln!(out, "    {}", c.trace).map_err(io)?;
        }
    }
    if failed > 0 {
        return Err(Error::Figures(failed));
    }
    Ok(())
}
