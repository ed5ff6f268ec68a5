//! Conversion error metrics and energy accounting.
//!
//! Three error sources are measured: clipping (activations above the layer
//! threshold), quantization (rounding to the `θ/T` rate grid) and unevenness
//! (dependence of the output rate on presynaptic spike timing). Unevenness has
//! no closed form; [`unevenness_enumeration`] measures it by running every
//! possible placement of presynaptic spikes.
//!
//! Energy uses 77 fJ per synaptic operation (one spike crossing one synapse)
//! and 12.5 pJ per ANN floating-point operation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::ann::{AnnNetwork, DenseLayer};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::level_value;
use crate::snn::DEFAULT_THETA_NEG;
use crate::snn::{
    run_layer_with_trains, simulate, NeuronLayerState, NeuronMode, SimRecord, SnnNetwork,
};
use crate::tensor::{Rng, Tensor};

/// Energy per synaptic operation, in joules.
pub const JOULES_PER_SOP: f64 = 77e-15;
/// Energy per ANN floating-point operation, in joules.
pub const JOULES_PER_FLOP: f64 = 12.5e-12;
/// Upper bound on the number of spike orderings enumerated exhaustively.
pub const MAX_ORDERINGS: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipStats {
    /// Fraction of activations strictly above `λ`.
    pub fraction: f64,
    /// Mean of `max(a − λ, 0)`.
    pub mass: f64,
}

pub fn clipping_stats(acts: &[f64], lambda: f64) -> Result<ClipStats> {
    if !(lambda > 0.0) {
        return Err(Error::Argument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if acts.is_empty() {
        return Ok(ClipStats {
            fraction: 0.0,
            mass: 0.0,
        });
    }
    let (mut clipped, mut excess) = (0usize, 0.0f64);
    for &a in acts {
        if a > lambda {
            clipped += 1;
            excess += a - lambda;
        }
    }
    let n = acts.len() as f64;
    Ok(ClipStats {
        fraction: clipped as f64 / n,
        mass: excess / n,
    })
}

/// Mean of `(z − (θ/T)·floor((T·z + v0)/θ))²` over the entries with
/// `z ∈ [0, θ]`; zero when no entry qualifies.
pub fn quantization_mse(z: &[f64], theta: f64, steps: u32, v0: f64) -> Result<f64> {
    if steps < 1 {
        return Err(Error::Argument("quantization error needs T >= 1".into()));
    }
    if !(theta > 0.0) {
        return Err(Error::Argument(format!(
            "theta must be positive, got {theta}"
        )));
    }
    let t = f64::from(steps);
    let (mut sum, mut n) = (0.0f64, 0usize);
    for &v in z.iter().filter(|&&v| (0.0..=theta).contains(&v)) {
        let k = libm::floor((t * v + v0) / theta);
        let e = v - theta * k / t;
        sum += e * e;
        n += 1;
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// `n + 1` evenly spaced candidates `θ·k/n`, `k = 0..=n`.
pub fn v0_grid(theta: f64, n: u32) -> Vec<f64> {
    (0..=n)
        .map(|k| theta * f64::from(k) / f64::from(n))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct V0Sweep {
    /// `(v0, mse)` for every grid point, in grid order.
    pub curve: Vec<(f64, f64)>,
    /// First grid point attaining the minimum.
    pub argmin: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Monte-Carlo estimate of the quantization error for every initial
/// potential in `grid`, with `z ~ U[0, θ)` drawn once and shared by all
/// candidates.
pub fn v0_sweep(
    theta: f64,
    steps: u32,
    grid: &[f64],
    samples: usize,
    seed: u64,
) -> Result<V0Sweep> {
    if grid.is_empty() {
        return Err(Error::Argument("v0 grid is empty".into()));
    }
    if samples == 0 {
        return Err(Error::Argument("v0 sweep needs at least one sample".into()));
    }
    let z = Tensor::rand_uniform(&mut Rng::new(seed), &[samples], 0.0, theta)?;
    let curve = grid
        .iter()
        .map(|&v0| Ok((v0, quantization_mse(z.data(), theta, steps, v0)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut best = curve[0];
    for &point in &curve[1..] {
        if point.1 < best.1 {
            best = point;
        }
    }
    Ok(V0Sweep {
        curve,
        argmin: best.0,
        samples,
        seed,
    })
}

/// One postsynaptic neuron fed by presynaptic neurons with fixed spike
/// counts over a window of `steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnevennessInstance {
    pub weights: Vec<f64>,
    pub presyn_counts: Vec<u32>,
    /// Current delivered per presynaptic spike is `weight · presyn_theta`.
    pub presyn_theta: f64,
    pub theta: f64,
    pub steps: u32,
    pub mode: NeuronMode,
    pub v0: f64,
}

impl UnevennessInstance {
    /// Instance with unit presynaptic threshold and `v(0) = 0`.
    pub fn new(
        weights: Vec<f64>,
        presyn_counts: Vec<u32>,
        theta: f64,
        steps: u32,
        mode: NeuronMode,
    ) -> Self {
        UnevennessInstance {
            weights,
            presyn_counts,
            presyn_theta: 1.0,
            theta,
            steps,
            mode,
            v0: 0.0,
        }
    }

    /// Rate of the ideal (timing-free) neuron:
    /// `(θ/T)·clamp(floor(Σ w·θpre·count / θ), 0, T)`.
    pub fn target_phi(&self) -> f64 {
        let total: f64 = self
            .weights
            .iter()
            .zip(&self.presyn_counts)
            .map(|(&w, &c)| w * self.presyn_theta * f64::from(c))
            .sum();
        let k = libm::floor(total / self.theta).clamp(0.0, f64::from(self.steps)) as i64;
        level_value(self.theta, k, self.steps)
    }

    fn dense(&self) -> Result<DenseLayer> {
        DenseLayer::new(
            Tensor::new(vec![1, self.weights.len()], self.weights.clone())?,
            Tensor::zeros(&[1]),
        )
    }

    fn state(&self) -> Result<NeuronLayerState> {
        NeuronLayerState::new(1, self.theta, DEFAULT_THETA_NEG, self.mode, self.v0)
    }

    /// Rate produced by explicit presynaptic trains.
    pub fn phi_for(&self, trains: &[Vec<i8>]) -> Result<SimRecord> {
        run_layer_with_trains(
            &self.dense()?,
            &self.state()?,
            self.presyn_theta,
            trains,
            self.steps,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unevenness {
    pub min_phi: f64,
    pub max_phi: f64,
    /// Rate when every presynaptic train is evenly spread.
    pub uniform_phi: f64,
    /// Rate of the timing-free neuron.
    pub target_phi: f64,
    /// Mean of `|φ − target|` over all orderings.
    pub mean_abs_deviation: f64,
    pub max_abs_deviation: f64,
    /// `histogram[k]`: orderings that ended with `k` net spikes.
    pub histogram: Vec<u64>,
    pub orderings: u64,
}

fn binomial(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul(u128::from(n - i)) / u128::from(i + 1);
    }
    r
}

/// All spike trains of length `steps` containing exactly `count` spikes,
/// in lexicographic order of spike positions.
fn all_trains(count: u32, steps: u32) -> Vec<Vec<i8>> {
    let (n, k) = (steps as usize, count as usize);
    let mut out = Vec::new();
    let mut pos: Vec<usize> = (0..k).collect();
    loop {
        let mut train = vec![0i8; n];
        for &p in &pos {
            train[p] = 1;
        }
        out.push(train);
        // next combination
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if pos[i] < n - k + i {
                pos[i] += 1;
                for j in i + 1..k {
                    pos[j] = pos[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Runs every placement of the presynaptic spikes through the neuron.
pub fn unevenness_enumeration(inst: &UnevennessInstance) -> Result<Unevenness> {
    if inst.steps < 1 {
        return Err(Error::Argument("enumeration needs T >= 1".into()));
    }
    if inst.weights.len() != inst.presyn_counts.len() || inst.weights.is_empty() {
        return Err(Error::Argument(format!(
            "{} weights for {} presynaptic counts",
            inst.weights.len(),
            inst.presyn_counts.len()
        )));
    }
    if let Some(&c) = inst.presyn_counts.iter().find(|&&c| c > inst.steps) {
        return Err(Error::Argument(format!(
            "{c} presynaptic spikes cannot fit in {} steps",
            inst.steps
        )));
    }
    let orderings = inst
        .presyn_counts
        .iter()
        .fold(1u128, |acc, &c| acc.saturating_mul(binomial(inst.steps, c)));
    if orderings > MAX_ORDERINGS {
        return Err(Error::TooManyOrderings {
            orderings,
            limit: MAX_ORDERINGS,
        });
    }

    let choices: Vec<Vec<Vec<i8>>> = inst
        .presyn_counts
        .iter()
        .map(|&c| all_trains(c, inst.steps))
        .collect();
    let dense = inst.dense()?;
    let state = inst.state()?;
    let mut histogram = vec![0u64; inst.steps as usize + 1];
    let mut index = vec![0usize; choices.len()];
    let mut trains: Vec<Vec<i8>> = choices.iter().map(|c| c[0].clone()).collect();
    loop {
        let rec = run_layer_with_trains(&dense, &state, inst.presyn_theta, &trains, inst.steps)?;
        let layer = &rec.layers[0];
        let net = layer.positive[0] - layer.negative[0];
        histogram[net as usize] += 1;

        // odometer over the per-neuron choices
        let mut i = 0;
        loop {
            if i == choices.len() {
                return summarize(inst, histogram);
            }
            index[i] += 1;
            if index[i] < choices[i].len() {
                trains[i].clone_from(&choices[i][index[i]]);
                break;
            }
            index[i] = 0;
            trains[i].clone_from(&choices[i][0]);
            i += 1;
        }
    }
}

fn summarize(inst: &UnevennessInstance, histogram: Vec<u64>) -> Result<Unevenness> {
    let phi = |k: usize| level_value(inst.theta, k as i64, inst.steps);
    let target_phi = inst.target_phi();
    let uniform: Vec<Vec<i8>> = inst
        .presyn_counts
        .iter()
        .map(|&c| crate::snn::uniform_train(c, inst.steps))
        .collect();
    let uniform_phi = inst.phi_for(&uniform)?.layers[0].phi[0];
    let seen = || histogram.iter().enumerate().filter(|(_, &n)| n > 0);
    let min_k = seen().map(|(k, _)| k).min().unwrap_or(0);
    let max_k = seen().map(|(k, _)| k).max().unwrap_or(0);
    let orderings: u64 = histogram.iter().sum();
    let mut dev_sum = 0.0;
    let mut dev_max = 0.0f64;
    for (k, &n) in seen() {
        let d = (phi(k) - target_phi).abs();
        dev_sum += d * n as f64;
        dev_max = dev_max.max(d);
    }
    Ok(Unevenness {
        min_phi: phi(min_k),
        max_phi: phi(max_k),
        uniform_phi,
        target_phi,
        mean_abs_deviation: dev_sum / orderings as f64,
        max_abs_deviation: dev_max,
        histogram,
        orderings,
    })
}

/// Synaptic operations per hidden layer: spike events (either sign) times
/// the fan-out of the emitting neuron.
pub fn layer_sops(sim: &SimRecord, net: &SnnNetwork) -> Result<Vec<u64>> {
    if sim.layers.len() != net.layers().len() {
        return Err(Error::Argument(format!(
            "simulation has {} layers, network has {}",
            sim.layers.len(),
            net.layers().len()
        )));
    }
    Ok(sim
        .layers
        .iter()
        .enumerate()
        .map(|(l, rec)| rec.events() * net.fan_out(l) as u64)
        .collect())
}

pub fn count_sops(sim: &SimRecord, net: &SnnNetwork) -> Result<u64> {
    Ok(layer_sops(sim, net)?.iter().sum())
}

/// `2·in·out` per dense layer, read-out included.
pub fn layer_flops(ann: &AnnNetwork) -> Vec<u64> {
    ann.hidden()
        .iter()
        .map(|h| &h.dense)
        .chain(core::iter::once(ann.output()))
        .map(|d| 2 * (d.inputs() * d.outputs()) as u64)
        .collect()
}

pub fn count_flops(ann: &AnnNetwork) -> u64 {
    layer_flops(ann).iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy {
    pub snn_joules: f64,
    pub ann_joules: f64,
}

pub fn estimate_energy(sops: u64, flops: u64) -> Energy {
    Energy {
        snn_joules: sops as f64 * JOULES_PER_SOP,
        ann_joules: flops as f64 * JOULES_PER_FLOP,
    }
}

/// Error statistics of one layer. Statistics are `None` for the read-out,
/// which has no activation.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerErrors {
    pub clip_fraction: Option<f64>,
    pub clip_mass: Option<f64>,
    pub quant_mse: Option<f64>,
    pub rate_gap: Option<f64>,
    pub sops: u64,
    pub flops: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Totals {
    pub sops: u64,
    pub flops: u64,
    pub energy_snn: f64,
    pub energy_ann: f64,
}

/// Per-layer conversion errors plus operation and energy totals over an
/// evaluation set. FLOPs are per-sample FLOPs times the sample count so
/// they compare directly with the summed SOPs.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub steps: u32,
    pub samples: usize,
    pub layers: Vec<LayerErrors>,
    pub totals: Totals,
}

/// Outcome of running an ANN and its converted SNN over a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub ann_accuracy: f64,
    pub snn_accuracy: f64,
    pub report: ErrorReport,
}

/// Simulates `snn` on every sample for `steps` steps and compares it with
/// `ann` layer by layer.
pub fn evaluate(
    ann: &AnnNetwork,
    snn: &SnnNetwork,
    data: &Dataset,
    steps: u32,
) -> Result<Evaluation> {
    if ann.hidden().len() != snn.layers().len() {
        return Err(Error::Argument(format!(
            "ANN has {} hidden layers, SNN has {}",
            ann.hidden().len(),
            snn.layers().len()
        )));
    }
    if data.is_empty() {
        return Err(Error::Argument("evaluation set is empty".into()));
    }
    let depth = ann.hidden().len();
    let mut acts: Vec<Vec<f64>> = vec![Vec::new(); depth];
    let mut pre: Vec<Vec<f64>> = vec![Vec::new(); depth];
    let mut gap = vec![0.0f64; depth];
    let mut sops = vec![0u64; depth];
    let (mut ann_correct, mut snn_correct) = (0usize, 0usize);

    for i in 0..data.len() {
        let (x, y) = data.sample(i);
        let trace = ann.forward_sample(x)?;
        if crate::ann::argmax(&trace.logits) == y {
            ann_correct += 1;
        }
        let sim = simulate(snn, x, steps, false)?;
        if sim.prediction == Some(y) {
            snn_correct += 1;
        }
        for (total, s) in sops.iter_mut().zip(layer_sops(&sim, snn)?) {
            *total += s;
        }
        for l in 0..depth {
            for (a, phi) in trace.acts[l].iter().zip(&sim.layers[l].phi) {
                gap[l] += (phi - a).abs();
            }
            acts[l].extend_from_slice(&trace.acts[l]);
            pre[l].extend_from_slice(&trace.pre[l]);
        }
    }

    let n = data.len();
    let flops = layer_flops(ann);
    let mut layers = Vec::with_capacity(depth + 1);
    for l in 0..depth {
        let theta = snn.layers()[l].theta;
        let clip = clipping_stats(&acts[l], ann.hidden()[l].qcfs.lambda())?;
        let v0 = snn.v0_policy().initial(theta);
        layers.push(LayerErrors {
            clip_fraction: Some(clip.fraction),
            clip_mass: Some(clip.mass),
            quant_mse: Some(quantization_mse(&pre[l], theta, steps, v0)?),
            rate_gap: Some(gap[l] / acts[l].len() as f64),
            sops: sops[l],
            flops: flops[l] * n as u64,
        });
    }
    layers.push(LayerErrors {
        clip_fraction: None,
        clip_mass: None,
        quant_mse: None,
        rate_gap: None,
        sops: 0,
        flops: flops[depth] * n as u64,
    });
    let total_sops = sops.iter().sum();
    let total_flops = flops.iter().sum::<u64>() * n as u64;
    let energy = estimate_energy(total_sops, total_flops);
    Ok(Evaluation {
        ann_accuracy: ann_correct as f64 / n as f64,
        snn_accuracy: snn_correct as f64 / n as f64,
        report: ErrorReport {
            steps,
            samples: n,
            layers,
            totals: Totals {
                sops: total_sops,
                flops: total_flops,
                energy_snn: energy.snn_joules,
                energy_ann: energy.ann_joules,
            },
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clipping_examples() {
        assert_eq!(
            clipping_stats(&[0.2, 0.5], 1.0).unwrap(),
            ClipStats {
                fraction: 0.0,
                mass: 0.0
            }
        );
        assert_eq!(
            clipping_stats(&[0.5, 1.5], 1.0).unwrap(),
            ClipStats {
                fraction: 0.5,
                mass: 0.25
            }
        );
        assert!(clipping_stats(&[1.0], 0.0).is_err());
    }

    #[test]
    fn quantization_examples() {
        let e = quantization_mse(&[0.45], 1.0, 5, 0.5).unwrap();
        assert!((e - 0.0025).abs() < 1e-15, "{e}");
        assert_eq!(
            quantization_mse(&[0.0, 0.25, 0.5, 1.0], 1.0, 4, 0.0).unwrap(),
            0.0
        );
        // out-of-range entries are ignored
        assert_eq!(quantization_mse(&[-0.3, 1.7], 1.0, 4, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn half_threshold_beats_zero_on_dense_grid() {
        let z: Vec<f64> = (0..100_000).map(|i| f64::from(i) / 99_999.0).collect();
        let half = quantization_mse(&z, 1.0, 4, 0.5).unwrap();
        let zero = quantization_mse(&z, 1.0, 4, 0.0).unwrap();
        assert!(half <= zero, "{half} > {zero}");
    }

    #[test]
    fn single_point_grid() {
        let s = v0_sweep(1.0, 4, &[0.3], 100, 1).unwrap();
        assert_eq!(s.argmin, 0.3);
        assert!(v0_sweep(1.0, 4, &[], 100, 1).is_err());
    }

    #[test]
    fn grid_spacing() {
        let g = v0_grid(2.0, 20);
        assert_eq!(g.len(), 21);
        assert_eq!(g[10], 1.0);
        assert_eq!(g[20], 2.0);
    }

    #[test]
    fn combinations_enumerated() {
        let t = all_trains(2, 4);
        assert_eq!(t.len(), 6);
        assert_eq!(t[0], vec![1, 1, 0, 0]);
        assert_eq!(t[5], vec![0, 0, 1, 1]);
        assert_eq!(all_trains(0, 3), vec![vec![0, 0, 0]]);
        assert_eq!(binomial(5, 3), 10);
        assert_eq!(binomial(3, 5), 0);
    }

    #[test]
    fn enumeration_guard() {
        let inst = UnevennessInstance::new(vec![1.0; 4], vec![10; 4], 1.0, 20, NeuronMode::If);
        assert!(matches!(
            unevenness_enumeration(&inst),
            Err(Error::TooManyOrderings { .. })
        ));
        let bad = UnevennessInstance::new(vec![1.0], vec![6], 1.0, 5, NeuronMode::If);
        assert!(unevenness_enumeration(&bad).is_err());
    }

    #[test]
    fn flops_of_small_net() {
        let mut rng = Rng::new(0);
        let ann = AnnNetwork::random(&[2, 3, 1], 4, &mut rng).unwrap();
        assert_eq!(count_flops(&ann), 18);
    }

    #[test]
    fn energy_constants() {
        let e = estimate_energy(1000, 0);
        assert_eq!(e.snn_joules, 1000.0 * 77e-15);
        assert!((e.snn_joules - 7.7e-11).abs() <= 1e-25);
        assert_eq!(e.ann_joules, 0.0);
        assert_eq!(estimate_energy(0, 2).ann_joules, 25e-12);
    }
}
