//! Clocked simulation of integrate-and-fire (IF) and dual-threshold (DTN)
//! neurons.
//!
//! Each step charges `m = v + x`. A neuron fires `+1` when `m ≥ θ` and keeps
//! the residual `m − θ` (soft reset, at most one positive spike per step). A
//! dual-threshold neuron additionally fires `−1` when `m ≤ θ'` and it still
//! has at least one uncancelled positive spike; the reset then adds `θ` back.
//! The positive branch is checked first.
//!
//! A spike of layer `l` is delivered downstream as the current `s·θ^l`. The
//! first layer receives the analog input as a constant current every step and
//! the read-out layer only integrates, so the prediction is the argmax of its
//! mean potential.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::ann::{argmax, DenseLayer};
use crate::error::{Error, Result};
use crate::level_value;
use crate::tensor::Tensor;

/// Default negative threshold of dual-threshold neurons.
pub const DEFAULT_THETA_NEG: f64 = -1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NeuronMode {
    /// Integrate-and-fire with soft reset.
    If,
    /// Dual-threshold neuron with cancelling negative spikes.
    Dtn,
}

/// Initial membrane potential of every spiking neuron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum V0Policy {
    Zero,
    HalfTheta,
    Explicit(f64),
}

impl V0Policy {
    pub fn initial(&self, theta: f64) -> f64 {
        match *self {
            V0Policy::Zero => 0.0,
            V0Policy::HalfTheta => theta / 2.0,
            V0Policy::Explicit(v) => v,
        }
    }
}

/// Membrane state of one layer of spiking neurons.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronLayerState {
    v: Vec<f64>,
    v0: Vec<f64>,
    theta: f64,
    theta_neg: f64,
    mode: NeuronMode,
    net_spikes: Vec<u32>,
    positive: Vec<u32>,
    negative: Vec<u32>,
    charge: Vec<f64>,
    abs_charge: Vec<f64>,
    steps: u32,
}

impl NeuronLayerState {
    pub fn new(
        neurons: usize,
        theta: f64,
        theta_neg: f64,
        mode: NeuronMode,
        v0: f64,
    ) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::Argument(format!(
                "threshold must be finite and positive, got {theta}"
            )));
        }
        if !(theta_neg < 0.0) || !theta_neg.is_finite() {
            return Err(Error::Argument(format!(
                "negative threshold must be finite and negative, got {theta_neg}"
            )));
        }
        if !v0.is_finite() {
            return Err(Error::Argument(format!(
                "initial potential {v0} is not finite"
            )));
        }
        Ok(NeuronLayerState {
            v: vec![v0; neurons],
            v0: vec![v0; neurons],
            theta,
            theta_neg,
            mode,
            net_spikes: vec![0; neurons],
            positive: vec![0; neurons],
            negative: vec![0; neurons],
            charge: vec![0.0; neurons],
            abs_charge: vec![0.0; neurons],
            steps: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn potentials(&self) -> &[f64] {
        &self.v
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn theta_neg(&self) -> f64 {
        self.theta_neg
    }

    pub fn mode(&self) -> NeuronMode {
        self.mode
    }

    /// Positive minus negative spikes emitted so far, per neuron.
    pub fn net_spikes(&self) -> &[u32] {
        &self.net_spikes
    }

    pub fn positive_spikes(&self) -> &[u32] {
        &self.positive
    }

    pub fn negative_spikes(&self) -> &[u32] {
        &self.negative
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    /// Advances one time step, writing spikes in `{-1, 0, 1}` into `out`.
    pub fn step_into(&mut self, input: &[f64], out: &mut [i8]) -> Result<()> {
        if input.len() != self.v.len() || out.len() != self.v.len() {
            return Err(Error::Dimension {
                op: "step",
                left: vec![self.v.len()],
                right: vec![input.len()],
            });
        }
        let theta = self.theta;
        for i in 0..self.v.len() {
            let x = input[i];
            let m = self.v[i] + x;
            self.charge[i] += x;
            self.abs_charge[i] += x.abs();
            let s = if m >= theta {
                self.v[i] = m - theta;
                self.net_spikes[i] += 1;
                self.positive[i] += 1;
                1
            } else if self.mode == NeuronMode::Dtn && m <= self.theta_neg && self.net_spikes[i] >= 1
            {
                self.v[i] = m + theta;
                self.net_spikes[i] -= 1;
                self.negative[i] += 1;
                -1
            } else {
                self.v[i] = m;
                0
            };
            out[i] = s;
        }
        self.steps += 1;
        Ok(())
    }

    /// Advances one time step and returns the spikes as a tensor.
    pub fn step(&mut self, input: &Tensor) -> Result<Tensor> {
        let mut out = vec![0i8; self.v.len()];
        self.step_into(input.data(), &mut out)?;
        Tensor::new(
            input.shape().to_vec(),
            out.into_iter().map(f64::from).collect(),
        )
    }

    /// Largest `|(v(T) − v(0)) − (Σ_t x(t) − θ·(N⁺ − N⁻))|` over the layer,
    /// failing when it exceeds the rounding bound of the arithmetic performed.
    ///
    /// The bound is `(4T + 8)·ε·(|v(0)| + Σ|x| + θ·(N⁺ + N⁻))`; every
    /// intermediate magnitude is at most that sum, and inputs that are exact
    /// binary fractions produce a residual of exactly zero.
    pub fn check_conservation(&self, layer: usize) -> Result<f64> {
        let mut worst = 0.0f64;
        let ops = 4.0 * f64::from(self.steps) + 8.0;
        for i in 0..self.v.len() {
            let net = f64::from(self.positive[i]) - f64::from(self.negative[i]);
            let lhs = self.v[i] - self.v0[i];
            let rhs = self.charge[i] - self.theta * net;
            let residual = (lhs - rhs).abs();
            let events = f64::from(self.positive[i] + self.negative[i]);
            let scale = self.v0[i].abs() + self.abs_charge[i] + self.theta * events;
            let tolerance = ops * f64::EPSILON * scale;
            if !(residual <= tolerance) {
                return Err(Error::ChargeConservation {
                    layer,
                    neuron: i,
                    residual,
                    tolerance,
                });
            }
            worst = worst.max(residual);
        }
        Ok(worst)
    }

    /// `φ = θ·N/T` per neuron.
    pub fn rates(&self) -> Vec<f64> {
        self.net_spikes
            .iter()
            .map(|&n| level_value(self.theta, i64::from(n), self.steps.max(1)))
            .collect()
    }
}

/// A spiking hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SnnLayer {
    pub dense: DenseLayer,
    pub theta: f64,
}

/// Converted network: spiking hidden layers plus an integrating read-out.
#[derive(Debug, Clone, PartialEq)]
pub struct SnnNetwork {
    layers: Vec<SnnLayer>,
    output: DenseLayer,
    mode: NeuronMode,
    theta_neg: f64,
    v0_policy: V0Policy,
}

impl SnnNetwork {
    pub fn new(
        layers: Vec<SnnLayer>,
        output: DenseLayer,
        mode: NeuronMode,
        theta_neg: f64,
        v0_policy: V0Policy,
    ) -> Result<Self> {
        let mut width = None;
        for (i, layer) in layers.iter().enumerate() {
            if !(layer.theta > 0.0) || !layer.theta.is_finite() {
                return Err(Error::Argument(format!(
                    "layer {i} threshold must be finite and positive, got {}",
                    layer.theta
                )));
            }
            if let Some(w) = width {
                if layer.dense.inputs() != w {
                    return Err(Error::Argument(format!(
                        "layer {i} expects {} inputs but the previous layer emits {w}",
                        layer.dense.inputs()
                    )));
                }
            }
            width = Some(layer.dense.outputs());
        }
        if let Some(w) = width {
            if output.inputs() != w {
                return Err(Error::Argument(format!(
                    "output layer expects {} inputs but the last layer emits {w}",
                    output.inputs()
                )));
            }
        }
        if !(theta_neg < 0.0) || !theta_neg.is_finite() {
            return Err(Error::Argument(format!(
                "negative threshold must be finite and negative, got {theta_neg}"
            )));
        }
        if let V0Policy::Explicit(v) = v0_policy {
            if !v.is_finite() {
                return Err(Error::Argument(format!(
                    "initial potential {v} is not finite"
                )));
            }
        }
        Ok(SnnNetwork {
            layers,
            output,
            mode,
            theta_neg,
            v0_policy,
        })
    }

    pub fn layers(&self) -> &[SnnLayer] {
        &self.layers
    }

    pub fn output(&self) -> &DenseLayer {
        &self.output
    }

    pub fn mode(&self) -> NeuronMode {
        self.mode
    }

    pub fn theta_neg(&self) -> f64 {
        self.theta_neg
    }

    pub fn v0_policy(&self) -> V0Policy {
        self.v0_policy
    }

    pub fn with_mode(mut self, mode: NeuronMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_v0_policy(mut self, policy: V0Policy) -> Result<Self> {
        if let V0Policy::Explicit(v) = policy {
            if !v.is_finite() {
                return Err(Error::Argument(format!(
                    "initial potential {v} is not finite"
                )));
            }
        }
        self.v0_policy = policy;
        Ok(self)
    }

    pub fn input_dim(&self) -> usize {
        self.layers
            .first()
            .map_or(self.output.inputs(), |l| l.dense.inputs())
    }

    pub fn output_dim(&self) -> usize {
        self.output.outputs()
    }

    /// Number of synapses leaving each neuron of hidden layer `l`.
    pub fn fan_out(&self, l: usize) -> usize {
        self.layers
            .get(l + 1)
            .map_or(self.output.outputs(), |next| next.dense.outputs())
    }

    /// Fresh neuron state for hidden layer `l`.
    pub fn layer_state(&self, l: usize) -> Result<NeuronLayerState> {
        let layer = &self.layers[l];
        NeuronLayerState::new(
            layer.dense.outputs(),
            layer.theta,
            self.theta_neg,
            self.mode,
            self.v0_policy.initial(layer.theta),
        )
    }
}

/// Per-layer spike counts and rates of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerRecord {
    pub theta: f64,
    /// `spikes[t][i]`: spike of neuron `i` at step `t + 1`.
    pub spikes: Vec<Vec<i8>>,
    /// Membrane potential after each step, when requested.
    pub potentials: Option<Vec<Vec<f64>>>,
    pub positive: Vec<u32>,
    pub negative: Vec<u32>,
    /// Average postsynaptic potential `φ(T) = θ·Σ_t s(t) / T`.
    pub phi: Vec<f64>,
    /// Largest charge-conservation residual in the layer.
    pub conservation_residual: f64,
}

impl LayerRecord {
    /// Spike events (positive and negative) emitted by the layer.
    pub fn events(&self) -> u64 {
        self.positive
            .iter()
            .chain(&self.negative)
            .map(|&c| u64::from(c))
            .sum()
    }
}

/// Result of [`simulate`] or [`run_layer_with_trains`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub steps: u32,
    pub layers: Vec<LayerRecord>,
    /// Mean read-out potential over the window (empty for single layers).
    pub output: Vec<f64>,
    pub prediction: Option<usize>,
}

struct LayerRun {
    state: NeuronLayerState,
    spikes: Vec<Vec<i8>>,
    potentials: Option<Vec<Vec<f64>>>,
}

impl LayerRun {
    fn new(state: NeuronLayerState, steps: u32, record_potentials: bool) -> Self {
        LayerRun {
            state,
            spikes: Vec::with_capacity(steps as usize),
            potentials: record_potentials.then(|| Vec::with_capacity(steps as usize)),
        }
    }

    fn step(&mut self, current: &[f64]) -> Result<&[i8]> {
        let mut out = vec![0i8; self.state.len()];
        self.state.step_into(current, &mut out)?;
        if let Some(p) = self.potentials.as_mut() {
            p.push(self.state.v.clone());
        }
        self.spikes.push(out);
        Ok(self.spikes.last().map_or(&[][..], Vec::as_slice))
    }

    fn finish(self, layer: usize) -> Result<LayerRecord> {
        let conservation_residual = self.state.check_conservation(layer)?;
        Ok(LayerRecord {
            theta: self.state.theta,
            phi: self.state.rates(),
            positive: self.state.positive,
            negative: self.state.negative,
            spikes: self.spikes,
            potentials: self.potentials,
            conservation_residual,
        })
    }
}

fn postsynaptic(spikes: &[i8], theta: f64, out: &mut [f64]) {
    for (o, &s) in out.iter_mut().zip(spikes) {
        *o = f64::from(s) * theta;
    }
}

/// Runs the network for `steps` time steps on one input vector.
///
/// Fails with [`Error::ChargeConservation`] if any neuron's bookkeeping
/// drifts beyond the floating-point rounding bound.
pub fn simulate(
    net: &SnnNetwork,
    input: &[f64],
    steps: u32,
    record_potentials: bool,
) -> Result<SimRecord> {
    if steps < 1 {
        return Err(Error::Argument(
            "simulation needs at least one time step".into(),
        ));
    }
    if input.len() != net.input_dim() {
        return Err(Error::Dimension {
            op: "simulate",
            left: vec![net.input_dim()],
            right: vec![input.len()],
        });
    }
    let mut runs = (0..net.layers.len())
        .map(|l| Ok(LayerRun::new(net.layer_state(l)?, steps, record_potentials)))
        .collect::<Result<Vec<_>>>()?;
    // Constant-current encoding: the first layer's input current never changes.
    let first_current = match net.layers.first() {
        Some(layer) => layer.dense.affine(input)?,
        None => Vec::new(),
    };
    let mut buffers: Vec<(Vec<f64>, Vec<f64>)> = net
        .layers
        .iter()
        .map(|l| (vec![0.0; l.dense.inputs()], vec![0.0; l.dense.outputs()]))
        .collect();
    let mut readout_in = vec![0.0; net.output.inputs()];
    let mut readout = vec![0.0; net.output.outputs()];
    let mut acc = vec![0.0; net.output.outputs()];

    for _ in 0..steps {
        for l in 0..net.layers.len() {
            if l > 0 {
                let prev = runs[l - 1].spikes.last().map_or(&[][..], Vec::as_slice);
                let (x, z) = &mut buffers[l];
                postsynaptic(prev, net.layers[l - 1].theta, x);
                net.layers[l].dense.affine_into(x, z);
            }
            let current = if l == 0 {
                &first_current
            } else {
                &buffers[l].1
            };
            runs[l].step(current)?;
        }
        match runs.last() {
            Some(last) => {
                let theta = net.layers[net.layers.len() - 1].theta;
                let spikes = last.spikes.last().map_or(&[][..], Vec::as_slice);
                postsynaptic(spikes, theta, &mut readout_in);
            }
            None => readout_in.copy_from_slice(input),
        }
        net.output.affine_into(&readout_in, &mut readout);
        for (a, r) in acc.iter_mut().zip(&readout) {
            *a += r;
        }
    }

    let layers = runs
        .into_iter()
        .enumerate()
        .map(|(l, run)| run.finish(l))
        .collect::<Result<Vec<_>>>()?;
    let output: Vec<f64> = acc.iter().map(|a| a / f64::from(steps)).collect();
    let prediction = Some(argmax(&output));
    Ok(SimRecord {
        steps,
        layers,
        output,
        prediction,
    })
}

/// Drives a single layer with explicit presynaptic spike trains.
///
/// `trains[i][t]` is the spike of presynaptic neuron `i` at step `t + 1`;
/// it arrives as the current `trains[i][t]·presyn_theta`. `state` is used
/// as a template and left untouched.
pub fn run_layer_with_trains(
    dense: &DenseLayer,
    state: &NeuronLayerState,
    presyn_theta: f64,
    trains: &[Vec<i8>],
    steps: u32,
) -> Result<SimRecord> {
    if steps < 1 {
        return Err(Error::Argument(
            "simulation needs at least one time step".into(),
        ));
    }
    if trains.len() != dense.inputs() || state.len() != dense.outputs() {
        return Err(Error::Dimension {
            op: "run_layer_with_trains",
            left: dense.weights().shape().to_vec(),
            right: vec![trains.len(), state.len()],
        });
    }
    if let Some(bad) = trains.iter().find(|t| t.len() != steps as usize) {
        return Err(Error::Argument(format!(
            "spike train has {} steps, expected {steps}",
            bad.len()
        )));
    }
    let mut run = LayerRun::new(state.clone(), steps, true);
    let mut x = vec![0.0; dense.inputs()];
    let mut z = vec![0.0; dense.outputs()];
    for t in 0..steps as usize {
        for (xi, train) in x.iter_mut().zip(trains) {
            *xi = f64::from(train[t]) * presyn_theta;
        }
        dense.affine_into(&x, &mut z);
        run.step(&z)?;
    }
    Ok(SimRecord {
        steps,
        layers: vec![run.finish(0)?],
        output: Vec::new(),
        prediction: None,
    })
}

/// Evenly spread spike train of `count` spikes over `steps` steps: the train
/// an IF neuron with `v(0) = θ/2` emits under the constant current
/// `count·θ/steps`.
pub fn uniform_train(count: u32, steps: u32) -> Vec<i8> {
    let level = |t: u64| (2 * t * u64::from(count) + u64::from(steps)) / (2 * u64::from(steps));
    (1..=u64::from(steps))
        .map(|t| (level(t) - level(t - 1)) as i8)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drive(mode: NeuronMode, charges: &[f64]) -> (Vec<i8>, NeuronLayerState) {
        let mut s = NeuronLayerState::new(1, 1.0, DEFAULT_THETA_NEG, mode, 0.0).unwrap();
        let mut out = vec![0i8];
        let mut spikes = Vec::new();
        for &c in charges {
            s.step_into(&[c], &mut out).unwrap();
            spikes.push(out[0]);
        }
        (spikes, s)
    }

    #[test]
    fn if_negative_then_positive_charges() {
        let (spikes, s) = drive(NeuronMode::If, &[-2.0, -2.0, 2.0, 2.0]);
        assert_eq!(spikes, vec![0, 0, 0, 0]);
        assert_eq!(s.rates(), vec![0.0]);
        assert_eq!(s.check_conservation(0).unwrap(), 0.0);
    }

    #[test]
    fn if_alternating_charges_overfire() {
        let (spikes, s) = drive(NeuronMode::If, &[2.0, -2.0, 2.0, -2.0]);
        assert_eq!(spikes, vec![1, 0, 1, 0]);
        assert_eq!(s.rates(), vec![0.5]);
    }

    #[test]
    fn dtn_cancels_alternating_charges() {
        let (spikes, s) = drive(NeuronMode::Dtn, &[2.0, -2.0, 2.0, -2.0]);
        assert_eq!(spikes, vec![1, -1, 1, -1]);
        assert_eq!(s.rates(), vec![0.0]);
        assert_eq!(s.net_spikes(), &[0]);
        assert_eq!(s.check_conservation(0).unwrap(), 0.0);
    }

    #[test]
    fn dtn_never_fires_negative_without_credit() {
        let (spikes, _) = drive(NeuronMode::Dtn, &[-2.0, -2.0, 2.0, 2.0]);
        assert_eq!(spikes, vec![0, 0, 0, 0]);
    }

    #[test]
    fn state_validation() {
        assert!(NeuronLayerState::new(1, 0.0, -1e-3, NeuronMode::If, 0.0).is_err());
        assert!(NeuronLayerState::new(1, 1.0, 0.0, NeuronMode::If, 0.0).is_err());
        let mut s = NeuronLayerState::new(2, 1.0, -1e-3, NeuronMode::If, 0.0).unwrap();
        assert!(s.step_into(&[1.0], &mut [0, 0]).is_err());
    }

    #[test]
    fn tensor_step() {
        let mut s = NeuronLayerState::new(3, 1.0, -1e-3, NeuronMode::If, 0.5).unwrap();
        let x = Tensor::from_vec(vec![0.5, 0.2, -1.0]).unwrap();
        assert_eq!(s.step(&x).unwrap().data(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn uniform_trains() {
        assert_eq!(uniform_train(3, 5), vec![1, 0, 1, 0, 1]);
        assert_eq!(uniform_train(2, 5), vec![0, 1, 0, 1, 0]);
        assert_eq!(uniform_train(0, 4), vec![0, 0, 0, 0]);
        assert_eq!(uniform_train(4, 4), vec![1, 1, 1, 1]);
    }

    fn one_unit(weight: f64, theta: f64, policy: V0Policy) -> SnnNetwork {
        let w = Tensor::new(vec![1, 1], vec![weight]).unwrap();
        let dense = DenseLayer::new(w.clone(), Tensor::zeros(&[1])).unwrap();
        let out = DenseLayer::new(
            Tensor::new(vec![1, 1], vec![1.0]).unwrap(),
            Tensor::zeros(&[1]),
        )
        .unwrap();
        SnnNetwork::new(
            vec![SnnLayer { dense, theta }],
            out,
            NeuronMode::If,
            DEFAULT_THETA_NEG,
            policy,
        )
        .unwrap()
    }

    #[test]
    fn constant_current_trace() {
        let net = one_unit(1.0, 1.0, V0Policy::HalfTheta);
        let rec = simulate(&net, &[0.45], 5, true).unwrap();
        let spikes: Vec<i8> = rec.layers[0].spikes.iter().map(|s| s[0]).collect();
        assert_eq!(spikes, vec![0, 1, 0, 1, 0]);
        assert_eq!(rec.layers[0].phi, vec![0.4]);
        assert_eq!(rec.layers[0].potentials.as_ref().unwrap().len(), 5);
    }

    #[test]
    fn zero_input_never_fires() {
        let net = one_unit(1.0, 2.5, V0Policy::HalfTheta);
        let rec = simulate(&net, &[0.0], 16, false).unwrap();
        assert_eq!(rec.layers[0].events(), 0);
        assert_eq!(rec.layers[0].phi, vec![0.0]);
    }

    #[test]
    fn zero_steps_rejected() {
        let net = one_unit(1.0, 1.0, V0Policy::Zero);
        assert!(matches!(
            simulate(&net, &[0.1], 0, false),
            Err(Error::Argument(_))
        ));
        assert!(simulate(&net, &[0.1, 0.2], 3, false).is_err());
    }

    #[test]
    fn train_length_checked() {
        let dense = DenseLayer::new(
            Tensor::new(vec![1, 2], vec![2.0, -2.0]).unwrap(),
            Tensor::zeros(&[1]),
        )
        .unwrap();
        let state = NeuronLayerState::new(1, 1.0, -1e-3, NeuronMode::If, 0.0).unwrap();
        let trains = vec![vec![1, 0, 1], vec![0, 1]];
        assert!(run_layer_with_trains(&dense, &state, 1.0, &trains, 3).is_err());
    }
}
