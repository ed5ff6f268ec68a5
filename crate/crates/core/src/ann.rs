//! Feed-forward networks with the quantization clip-floor-shift activation
//!
//! ```text
//! a = λ · clip( floor(z·L/λ + φ) / L, 0, 1 ),   φ = 1/2
//! ```
//!
//! Each hidden layer carries its own learnable threshold `λ`, which later
//! becomes the firing threshold of the converted spiking layer. The output
//! layer emits raw logits.
//!
//! Trainable parameters are kept on the `f32` grid (every update is rounded
//! to single precision) so that checkpoints with 32-bit payloads round-trip
//! exactly. Forward and backward arithmetic runs in `f64`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::level_value;
use crate::tensor::{Rng, Tensor};

/// Fixed displacement of the quantizer.
pub const SHIFT: f64 = 0.5;
/// Threshold every hidden layer starts from.
pub const INITIAL_LAMBDA: f64 = 4.0;
/// Projection floor applied to `λ` after each SGD step.
pub const MIN_LAMBDA: f64 = 1e-4;

#[inline]
pub(crate) fn round_f32(v: f64) -> f64 {
    v as f32 as f64
}

/// Clamps to [`MIN_LAMBDA`] and rounds to the nearest `f32` not below it.
fn project_lambda(lambda: f64) -> f64 {
    let v = round_f32(lambda.max(MIN_LAMBDA));
    if v < MIN_LAMBDA {
        f64::from((v as f32).next_up())
    } else {
        v
    }
}

/// Per-layer QCFS parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QcfsParams {
    lambda: f64,
    levels: u32,
}

/// Where a pre-activation falls relative to the clip range, judged on the
/// shifted argument `u = z·L/λ + φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QcfsRegion {
    /// `u ≤ 0`: output 0, no gradient.
    Lower,
    /// `0 < u ≤ L`, carrying the quantized fraction `c ∈ [0, 1]`.
    Interior(f64),
    /// `u > L`: output saturates at `λ`.
    Upper,
}

impl QcfsParams {
    pub fn new(lambda: f64, levels: u32) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Argument(format!(
                "lambda must be finite and positive, got {lambda}"
            )));
        }
        if levels == 0 {
            return Err(Error::Argument("quantization levels must be >= 1".into()));
        }
        Ok(QcfsParams { lambda, levels })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn shift(&self) -> f64 {
        SHIFT
    }

    #[inline]
    fn shifted(&self, z: f64) -> f64 {
        z * f64::from(self.levels) / self.lambda + SHIFT
    }

    /// Quantization level `clamp(floor(z·L/λ + φ), 0, L)`.
    #[inline]
    pub fn level(&self, z: f64) -> i64 {
        let k = libm::floor(self.shifted(z));
        k.clamp(0.0, f64::from(self.levels)) as i64
    }

    /// Scalar activation.
    #[inline]
    pub fn activate(&self, z: f64) -> f64 {
        level_value(self.lambda, self.level(z), self.levels)
    }

    pub fn region(&self, z: f64) -> QcfsRegion {
        let u = self.shifted(z);
        let l = f64::from(self.levels);
        if u <= 0.0 {
            QcfsRegion::Lower
        } else if u > l {
            QcfsRegion::Upper
        } else {
            QcfsRegion::Interior(libm::floor(u).clamp(0.0, l) / l)
        }
    }

    /// Straight-through gradients of one element: `(∂a/∂z, ∂a/∂λ)`.
    #[inline]
    pub fn local_grad(&self, z: f64) -> (f64, f64) {
        match self.region(z) {
            QcfsRegion::Lower => (0.0, 0.0),
            QcfsRegion::Interior(c) => (1.0, c - z / self.lambda),
            QcfsRegion::Upper => (0.0, 1.0),
        }
    }
}

/// Elementwise QCFS activation.
pub fn qcfs_forward(z: &Tensor, p: &QcfsParams) -> Tensor {
    let data = z.data().iter().map(|&v| p.activate(v)).collect();
    Tensor::new(z.shape().to_vec(), data).expect("QCFS outputs lie in [0, λ]")
}

/// Gradients returned by [`qcfs_backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct QcfsGrad {
    pub dz: Tensor,
    pub dlambda: f64,
}

/// Straight-through backward pass of [`qcfs_forward`].
///
/// Interior elements pass `upstream` to `dz` and add `upstream·(c − z/λ)` to
/// `dλ`; upper-clipped elements add `upstream` to `dλ`; lower-clipped ones
/// contribute nothing.
pub fn qcfs_backward(z: &Tensor, p: &QcfsParams, upstream: &Tensor) -> Result<QcfsGrad> {
    if z.shape() != upstream.shape() {
        return Err(Error::Dimension {
            op: "qcfs_backward",
            left: z.shape().to_vec(),
            right: upstream.shape().to_vec(),
        });
    }
    let mut dlambda = 0.0;
    let dz = z
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&zi, &gi)| {
            let (dzi, dli) = p.local_grad(zi);
            dlambda += gi * dli;
            gi * dzi
        })
        .collect();
    Ok(QcfsGrad {
        dz: Tensor::new(z.shape().to_vec(), dz)?,
        dlambda,
    })
}

/// Fully connected layer `z = W·x + b` with `W` stored `[out×in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weights: Tensor,
    bias: Tensor,
}

impl DenseLayer {
    pub fn new(weights: Tensor, bias: Tensor) -> Result<Self> {
        if weights.shape().len() != 2 || bias.shape().len() != 1 || bias.len() != weights.shape()[0]
        {
            return Err(Error::Dimension {
                op: "dense",
                left: weights.shape().to_vec(),
                right: bias.shape().to_vec(),
            });
        }
        Ok(DenseLayer { weights, bias })
    }

    /// He-uniform weights on the `f32` grid, zero bias.
    pub fn random(rng: &mut Rng, inputs: usize, outputs: usize) -> Result<Self> {
        let bound = libm::sqrt(6.0 / inputs as f64);
        let mut weights = Tensor::rand_uniform(rng, &[outputs, inputs], -bound, bound)?;
        for w in weights.data_mut() {
            *w = round_f32(*w);
        }
        DenseLayer::new(weights, Tensor::zeros(&[outputs]))
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn bias(&self) -> &Tensor {
        &self.bias
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[0]
    }

    /// `out[j] = (Σ_i W[j,i]·x[i]) + b[j]`, summed left to right.
    ///
    /// Both the ANN forward pass and the SNN input current go through this
    /// function so the two see bit-identical pre-activations.
    pub fn affine_into(&self, x: &[f64], out: &mut [f64]) {
        let n_in = self.inputs();
        debug_assert_eq!(x.len(), n_in);
        debug_assert_eq!(out.len(), self.outputs());
        let w = self.weights.data();
        for (j, (o, b)) in out.iter_mut().zip(self.bias.data()).enumerate() {
            let row = &w[j * n_in..(j + 1) * n_in];
            let mut acc = 0.0;
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            *o = acc + b;
        }
    }

    pub fn affine(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.inputs() {
            return Err(Error::Dimension {
                op: "affine",
                left: self.weights.shape().to_vec(),
                right: vec![x.len()],
            });
        }
        let mut out = vec![0.0; self.outputs()];
        self.affine_into(x, &mut out);
        Ok(out)
    }
}

/// A hidden layer: dense map followed by QCFS.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenLayer {
    pub dense: DenseLayer,
    pub qcfs: QcfsParams,
}

/// Hidden QCFS layers followed by a linear read-out.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnNetwork {
    hidden: Vec<HiddenLayer>,
    output: DenseLayer,
}

/// Per-sample activations of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTrace {
    /// Pre-activations `z^l` of each hidden layer.
    pub pre: Vec<Vec<f64>>,
    /// Activations `a^l` of each hidden layer.
    pub acts: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
}

/// Batched forward pass; every tensor is `[n×width]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    pub pre: Vec<Tensor>,
    pub acts: Vec<Tensor>,
    pub logits: Tensor,
}

impl AnnNetwork {
    pub fn new(hidden: Vec<HiddenLayer>, output: DenseLayer) -> Result<Self> {
        let mut width = None;
        for (i, layer) in hidden.iter().enumerate() {
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
                    "output layer expects {} inputs but the last hidden layer emits {w}",
                    output.inputs()
                )));
            }
        }
        Ok(AnnNetwork { hidden, output })
    }

    /// Randomly initialised network; `sizes` lists the input width, every
    /// hidden width and the class count.
    pub fn random(sizes: &[usize], levels: u32, rng: &mut Rng) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Argument(format!(
                "network sizes must list at least input and output widths, got {sizes:?}"
            )));
        }
        let qcfs = QcfsParams::new(INITIAL_LAMBDA, levels)?;
        let last = sizes.len() - 1;
        let hidden = sizes[..last]
            .windows(2)
            .map(|w| {
                Ok(HiddenLayer {
                    dense: DenseLayer::random(rng, w[0], w[1])?,
                    qcfs,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let output = DenseLayer::random(rng, sizes[last - 1], sizes[last])?;
        AnnNetwork::new(hidden, output)
    }

    pub fn hidden(&self) -> &[HiddenLayer] {
        &self.hidden
    }

    pub fn output(&self) -> &DenseLayer {
        &self.output
    }

    pub fn input_dim(&self) -> usize {
        self.hidden
            .first()
            .map_or(self.output.inputs(), |l| l.dense.inputs())
    }

    pub fn output_dim(&self) -> usize {
        self.output.outputs()
    }

    /// Layer widths from input to output.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.hidden.iter().map(|l| l.dense.outputs()));
        s.push(self.output_dim());
        s
    }

    pub fn forward_sample(&self, x: &[f64]) -> Result<SampleTrace> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                op: "ann_forward",
                left: vec![self.input_dim()],
                right: vec![x.len()],
            });
        }
        let mut pre = Vec::with_capacity(self.hidden.len());
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.hidden.len());
        for layer in &self.hidden {
            let input = acts.last().map_or(x, |a| a.as_slice());
            let z = layer.dense.affine(input)?;
            let a = z.iter().map(|&v| layer.qcfs.activate(v)).collect();
            pre.push(z);
            acts.push(a);
        }
        let input = acts.last().map_or(x, |a| a.as_slice());
        let logits = self.output.affine(input)?;
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op: "ann_forward" });
        }
        Ok(SampleTrace { pre, acts, logits })
    }

    pub fn predict_sample(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward_sample(x)?.logits))
    }

    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        let mut correct = 0usize;
        for i in 0..data.len() {
            let (x, y) = data.sample(i);
            if self.predict_sample(x)? == y {
                correct += 1;
            }
        }
        Ok(correct as f64 / data.len() as f64)
    }
}

/// Forward pass over a batch `[n×d]` (or a single vector `[d]`).
pub fn ann_forward(net: &AnnNetwork, x: &Tensor) -> Result<ForwardPass> {
    let n = if x.shape().len() == 1 { 1 } else { x.rows() };
    let d = if x.shape().len() == 1 {
        x.len()
    } else {
        x.cols()
    };
    let traces = (0..n)
        .map(|i| net.forward_sample(&x.data()[i * d..(i + 1) * d]))
        .collect::<Result<Vec<_>>>()?;
    let stack = |get: &dyn Fn(&SampleTrace) -> &[f64]| -> Result<Tensor> {
        let width = get(&traces[0]).len();
        let data = traces.iter().flat_map(|t| get(t).iter().copied()).collect();
        Tensor::new(vec![n, width], data)
    };
    let pre = (0..net.hidden.len())
        .map(|l| stack(&|t: &SampleTrace| t.pre[l].as_slice()))
        .collect::<Result<Vec<_>>>()?;
    let acts = (0..net.hidden.len())
        .map(|l| stack(&|t: &SampleTrace| t.acts[l].as_slice()))
        .collect::<Result<Vec<_>>>()?;
    let logits = stack(&|t: &SampleTrace| t.logits.as_slice())?;
    Ok(ForwardPass { pre, acts, logits })
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Plain minibatch SGD settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

/// Mean softmax cross-entropy and training accuracy per epoch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub loss: Vec<f64>,
    pub accuracy: Vec<f64>,
}

struct Grads {
    weights: Vec<Vec<f64>>,
    bias: Vec<Vec<f64>>,
    lambda: Vec<f64>,
}

impl Grads {
    fn zeros(net: &AnnNetwork) -> Self {
        let layers = net
            .hidden
            .iter()
            .map(|l| &l.dense)
            .chain(core::iter::once(&net.output));
        let (weights, bias) = layers
            .map(|d| (vec![0.0; d.weights.len()], vec![0.0; d.bias.len()]))
            .unzip();
        Grads {
            weights,
            bias,
            lambda: vec![0.0; net.hidden.len()],
        }
    }

    fn clear(&mut self) {
        for g in self.weights.iter_mut().chain(self.bias.iter_mut()) {
            g.fill(0.0);
        }
        self.lambda.fill(0.0);
    }
}

/// Numerically stable softmax cross-entropy; writes `p − onehot(label)` into
/// `grad` and returns the loss.
fn softmax_xent(logits: &[f64], label: usize, grad: &mut [f64]) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&l| libm::exp(l - m)).sum();
    let lse = m + libm::log(sum);
    for (j, (g, &l)) in grad.iter_mut().zip(logits).enumerate() {
        *g = libm::exp(l - lse) - if j == label { 1.0 } else { 0.0 };
    }
    lse - logits[label]
}

fn accumulate_dense(
    dense: &DenseLayer,
    input: &[f64],
    delta: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
    upstream: Option<&mut [f64]>,
) {
    let n_in = dense.inputs();
    for (j, &dj) in delta.iter().enumerate() {
        gb[j] += dj;
        for (g, &x) in gw[j * n_in..(j + 1) * n_in].iter_mut().zip(input) {
            *g += dj * x;
        }
    }
    if let Some(up) = upstream {
        up.fill(0.0);
        let w = dense.weights.data();
        for (j, &dj) in delta.iter().enumerate() {
            for (u, &wji) in up.iter_mut().zip(&w[j * n_in..(j + 1) * n_in]) {
                *u += wji * dj;
            }
        }
    }
}

fn apply_update(dense: &mut DenseLayer, gw: &[f64], gb: &[f64], step: f64) {
    for (w, g) in dense.weights.data_mut().iter_mut().zip(gw) {
        *w = round_f32(*w - step * g);
    }
    for (b, g) in dense.bias.data_mut().iter_mut().zip(gb) {
        *b = round_f32(*b - step * g);
    }
}

fn params_finite(net: &AnnNetwork) -> bool {
    net.hidden
        .iter()
        .map(|l| &l.dense)
        .chain(core::iter::once(&net.output))
        .all(|d| {
            d.weights.data().iter().all(|v| v.is_finite())
                && d.bias.data().iter().all(|v| v.is_finite())
        })
        && net.hidden.iter().all(|l| l.qcfs.lambda.is_finite())
}

/// Minibatch SGD on softmax cross-entropy with straight-through QCFS
/// gradients. `λ` is projected to at least [`MIN_LAMBDA`] after every step.
pub fn train(net: &mut AnnNetwork, data: &Dataset, cfg: &TrainConfig) -> Result<TrainLog> {
    if data.is_empty() {
        return Err(Error::Training {
            epoch: 0,
            reason: "empty dataset".into(),
        });
    }
    if data.features() != net.input_dim() || data.classes() != net.output_dim() {
        return Err(Error::Argument(format!(
            "dataset is {}-d with {} classes, network expects {}-d with {} classes",
            data.features(),
            data.classes(),
            net.input_dim(),
            net.output_dim()
        )));
    }
    if cfg.batch == 0 || !(cfg.lr >= 0.0) || !cfg.lr.is_finite() {
        return Err(Error::Argument(format!(
            "invalid training settings: lr={}, batch={}",
            cfg.lr, cfg.batch
        )));
    }

    let n = data.len();
    let depth = net.hidden.len();
    let mut rng = Rng::new(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut grads = Grads::zeros(net);
    let mut losses = vec![0.0; n];
    let mut log = TrainLog::default();
    let mut dlogits = vec![0.0; net.output_dim()];

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut correct = 0usize;
        for batch in order.chunks(cfg.batch) {
            grads.clear();
            for &i in batch {
                let (x, y) = data.sample(i);
                let trace = net.forward_sample(x)?;
                let loss = softmax_xent(&trace.logits, y, &mut dlogits);
                if !loss.is_finite() {
                    return Err(Error::Training {
                        epoch,
                        reason: format!("non-finite loss on sample {i}"),
                    });
                }
                losses[i] = loss;
                if argmax(&trace.logits) == y {
                    correct += 1;
                }

                let mut delta = dlogits.clone();
                let mut upstream = vec![0.0; net.output.inputs()];
                let input = trace.acts.last().map_or(x, |a| a.as_slice());
                accumulate_dense(
                    &net.output,
                    input,
                    &delta,
                    &mut grads.weights[depth],
                    &mut grads.bias[depth],
                    (depth > 0).then_some(upstream.as_mut_slice()),
                );
                for l in (0..depth).rev() {
                    let layer = &net.hidden[l];
                    delta = trace.pre[l]
                        .iter()
                        .zip(&upstream)
                        .map(|(&z, &g)| {
                            let (dz, dl) = layer.qcfs.local_grad(z);
                            grads.lambda[l] += g * dl;
                            g * dz
                        })
                        .collect();
                    let input = if l == 0 {
                        x
                    } else {
                        trace.acts[l - 1].as_slice()
                    };
                    let mut next_up = vec![0.0; layer.dense.inputs()];
                    accumulate_dense(
                        &layer.dense,
                        input,
                        &delta,
                        &mut grads.weights[l],
                        &mut grads.bias[l],
                        (l > 0).then_some(next_up.as_mut_slice()),
                    );
                    upstream = next_up;
                }
            }

            let step = cfg.lr / batch.len() as f64;
            for l in 0..depth {
                let layer = &mut net.hidden[l];
                apply_update(&mut layer.dense, &grads.weights[l], &grads.bias[l], step);
                let lambda = layer.qcfs.lambda - step * grads.lambda[l];
                layer.qcfs.lambda = project_lambda(lambda);
            }
            apply_update(
                &mut net.output,
                &grads.weights[depth],
                &grads.bias[depth],
                step,
            );
            if !params_finite(net) {
                return Err(Error::Training {
                    epoch,
                    reason: "parameters diverged".into(),
                });
            }
        }
        log.loss.push(losses.iter().sum::<f64>() / n as f64);
        log.accuracy.push(correct as f64 / n as f64);
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_blobs;

    fn p(lambda: f64, levels: u32) -> QcfsParams {
        QcfsParams::new(lambda, levels).unwrap()
    }

    #[test]
    fn forward_examples() {
        let q = p(1.0, 4);
        assert_eq!(q.activate(0.0), 0.0);
        assert_eq!(q.activate(0.3), 0.25);
        assert_eq!(q.activate(2.0), 1.0);
        assert_eq!(q.activate(-0.5), 0.0);
    }

    #[test]
    fn backward_examples() {
        let q = p(1.0, 4);
        let z = Tensor::from_vec(vec![2.0, -1.0, 0.3]).unwrap();
        let up = Tensor::from_vec(vec![0.7, 0.9, 1.0]).unwrap();
        let g = qcfs_backward(&z, &q, &up).unwrap();
        assert_eq!(g.dz.data(), &[0.0, 0.0, 1.0]);
        // 0.7 from the clipped element, 0.25 - 0.3 from the interior one
        let expected = 0.7 + (0.25 - 0.3);
        assert!((g.dlambda - expected).abs() < 1e-15);
    }

    #[test]
    fn backward_against_per_element_evaluator() {
        // Hand-written restatement of the STE rule on u = zL/λ + 1/2.
        fn manual(z: f64, lambda: f64, levels: f64, up: f64) -> (f64, f64) {
            let u = z * levels / lambda + 0.5;
            if u <= 0.0 {
                (0.0, 0.0)
            } else if u > levels {
                (0.0, up)
            } else {
                let c = libm::floor(u).clamp(0.0, levels) / levels;
                (up, up * (c - z / lambda))
            }
        }
        let q = p(1.7, 5);
        let mut rng = Rng::new(4);
        let z = Tensor::rand_uniform(&mut rng, &[64], -1.0, 3.0).unwrap();
        let up = Tensor::rand_uniform(&mut rng, &[64], -1.0, 1.0).unwrap();
        let g = qcfs_backward(&z, &q, &up).unwrap();
        let mut dl = 0.0;
        for i in 0..64 {
            let (dz, d) = manual(z.data()[i], 1.7, 5.0, up.data()[i]);
            assert_eq!(g.dz.data()[i], dz);
            dl += d;
        }
        assert_eq!(g.dlambda, dl);
    }

    #[test]
    fn backward_shape_mismatch() {
        let z = Tensor::zeros(&[2]);
        let up = Tensor::zeros(&[3]);
        assert!(qcfs_backward(&z, &p(1.0, 4), &up).is_err());
    }

    #[test]
    fn params_validated() {
        assert!(QcfsParams::new(0.0, 4).is_err());
        assert!(QcfsParams::new(1.0, 0).is_err());
        assert_eq!(p(1.0, 4).shift(), 0.5);
    }

    fn single_unit(lambda: f64, levels: u32) -> AnnNetwork {
        let w = Tensor::new(vec![1, 1], vec![1.0]).unwrap();
        let dense = DenseLayer::new(w.clone(), Tensor::zeros(&[1])).unwrap();
        AnnNetwork::new(
            vec![HiddenLayer {
                dense,
                qcfs: p(lambda, levels),
            }],
            DenseLayer::new(w, Tensor::zeros(&[1])).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn forward_single_hidden_unit() {
        let net = single_unit(1.0, 4);
        let x = Tensor::from_vec(vec![0.3]).unwrap();
        let f = ann_forward(&net, &x).unwrap();
        assert_eq!(f.acts[0].data(), &[0.25]);
        assert_eq!(f.logits.data(), &[0.25]);
    }

    #[test]
    fn forward_zero_network() {
        let mut rng = Rng::new(1);
        let net = AnnNetwork::random(&[3, 4, 2], 4, &mut rng).unwrap();
        let zero = |d: &DenseLayer| {
            DenseLayer::new(
                Tensor::zeros(d.weights().shape()),
                Tensor::zeros(d.bias().shape()),
            )
            .unwrap()
        };
        let net = AnnNetwork::new(
            net.hidden()
                .iter()
                .map(|l| HiddenLayer {
                    dense: zero(&l.dense),
                    qcfs: l.qcfs,
                })
                .collect(),
            zero(net.output()),
        )
        .unwrap();
        let x = Tensor::new(vec![2, 3], vec![0.5, -1.0, 2.0, 3.0, 0.1, -0.4]).unwrap();
        let f = ann_forward(&net, &x).unwrap();
        assert!(f.acts[0].data().iter().all(|&a| a == 0.0));
        assert!(f.logits.data().iter().all(|&a| a == 0.0));
    }

    #[test]
    fn forward_identity_large_lambda_quantizes_inputs() {
        // λ = 64, L = 64: resolution 1, so a = floor(x + 1/2) for x in [0, 63].
        let dense = DenseLayer::new(Tensor::identity(3), Tensor::zeros(&[3])).unwrap();
        let net = AnnNetwork::new(
            vec![HiddenLayer {
                dense: dense.clone(),
                qcfs: p(64.0, 64),
            }],
            dense,
        )
        .unwrap();
        let f = net.forward_sample(&[0.2, 3.6, 10.5]).unwrap();
        assert_eq!(f.acts[0], vec![0.0, 4.0, 11.0]);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let net = single_unit(1.0, 4);
        assert!(net.forward_sample(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn chain_mismatch_rejected() {
        let a = DenseLayer::new(Tensor::zeros(&[3, 2]), Tensor::zeros(&[3])).unwrap();
        let b = DenseLayer::new(Tensor::zeros(&[1, 4]), Tensor::zeros(&[1])).unwrap();
        let h = HiddenLayer {
            dense: a,
            qcfs: p(1.0, 4),
        };
        assert!(AnnNetwork::new(vec![h], b).is_err());
    }

    #[test]
    fn zero_learning_rate_keeps_loss() {
        let data = gen_blobs(3, 60, 2).unwrap();
        let mut net = AnnNetwork::random(&[2, 8, 2], 4, &mut Rng::new(3)).unwrap();
        let before = net.clone();
        let cfg = TrainConfig {
            lr: 0.0,
            epochs: 4,
            batch: 7,
            seed: 3,
        };
        let log = train(&mut net, &data, &cfg).unwrap();
        assert!(log.loss.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(net, before);
    }

    #[test]
    fn divergence_reports_epoch() {
        let data = gen_blobs(3, 60, 2).unwrap();
        let mut net = AnnNetwork::random(&[2, 8, 2], 4, &mut Rng::new(3)).unwrap();
        let cfg = TrainConfig {
            lr: 1e300,
            epochs: 3,
            batch: 4,
            seed: 3,
        };
        match train(&mut net, &data, &cfg) {
            Err(Error::Training { epoch, .. }) => assert_eq!(epoch, 0),
            other => panic!("expected training error, got {other:?}"),
        }
    }

    #[test]
    fn lambda_stays_positive() {
        let data = gen_blobs(8, 80, 2).unwrap();
        let mut net = AnnNetwork::random(&[2, 6, 2], 2, &mut Rng::new(8)).unwrap();
        let cfg = TrainConfig {
            lr: 0.5,
            epochs: 10,
            batch: 8,
            seed: 8,
        };
        train(&mut net, &data, &cfg).unwrap();
        assert!(net.hidden().iter().all(|l| l.qcfs.lambda() >= MIN_LAMBDA));
    }
}
