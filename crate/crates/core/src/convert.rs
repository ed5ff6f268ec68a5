//! ANN to SNN conversion.
//!
//! Each hidden layer's learned `λ` becomes its firing threshold `θ`; weights
//! and biases are copied verbatim and the bias is injected as a constant
//! current every step.

use alloc::format;
use alloc::vec::Vec;

use crate::ann::AnnNetwork;
use crate::error::{Error, Result};
use crate::level_value;
use crate::snn::{NeuronMode, SnnLayer, SnnNetwork, V0Policy, DEFAULT_THETA_NEG};
use crate::tensor::Tensor;

/// Maps `ann` onto a spiking network with `θ^l = λ^l` and `θ' = −1e-3`.
pub fn convert(ann: &AnnNetwork, mode: NeuronMode, v0_policy: V0Policy) -> Result<SnnNetwork> {
    let layers = ann
        .hidden()
        .iter()
        .enumerate()
        .map(|(l, h)| {
            let lambda = h.qcfs.lambda();
            if !(lambda > 0.0) || !lambda.is_finite() {
                return Err(Error::Conversion {
                    layer: l,
                    reason: format!("threshold {lambda} is not finite and positive"),
                });
            }
            Ok(SnnLayer {
                dense: h.dense.clone(),
                theta: lambda,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SnnNetwork::new(
        layers,
        ann.output().clone(),
        mode,
        DEFAULT_THETA_NEG,
        v0_policy,
    )
}

/// Analytic rate an activation `a` maps to:
/// `clip((θ/T)·floor(a·T/λ), 0, θ)` elementwise.
pub fn predicted_rate(a: &Tensor, lambda: f64, theta: f64, steps: u32) -> Result<Tensor> {
    if steps < 1 {
        return Err(Error::Argument("predicted rate needs T >= 1".into()));
    }
    if !(lambda > 0.0) || !(theta > 0.0) {
        return Err(Error::Argument(format!(
            "lambda and theta must be positive, got {lambda} and {theta}"
        )));
    }
    let t = f64::from(steps);
    let data = a
        .data()
        .iter()
        .map(|&v| {
            let k = libm::floor(v * t / lambda).clamp(0.0, t) as i64;
            level_value(theta, k, steps)
        })
        .collect();
    Tensor::new(a.shape().to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ann::{DenseLayer, HiddenLayer, QcfsParams};
    use crate::tensor::Rng;
    use alloc::vec;

    fn two_layer(lambdas: [f64; 2]) -> AnnNetwork {
        let mut rng = Rng::new(2);
        let base = AnnNetwork::random(&[3, 4, 5, 2], 4, &mut rng).unwrap();
        let hidden = base
            .hidden()
            .iter()
            .zip(lambdas)
            .map(|(h, lambda)| HiddenLayer {
                dense: h.dense.clone(),
                qcfs: QcfsParams::new(lambda, 4).unwrap(),
            })
            .collect();
        AnnNetwork::new(hidden, base.output().clone()).unwrap()
    }

    #[test]
    fn thresholds_follow_lambda() {
        let ann = two_layer([1.5, 0.8]);
        let snn = convert(&ann, NeuronMode::Dtn, V0Policy::HalfTheta).unwrap();
        let thetas: Vec<f64> = snn.layers().iter().map(|l| l.theta).collect();
        assert_eq!(thetas, vec![1.5, 0.8]);
        for (s, a) in snn.layers().iter().zip(ann.hidden()) {
            assert_eq!(s.dense, a.dense);
        }
        assert_eq!(snn.output(), ann.output());
        assert_eq!(snn.theta_neg(), -1e-3);
    }

    #[test]
    fn half_threshold_initialisation() {
        let ann = two_layer([1.5, 0.8]);
        let snn = convert(&ann, NeuronMode::If, V0Policy::HalfTheta).unwrap();
        for l in 0..2 {
            let state = snn.layer_state(l).unwrap();
            let theta = snn.layers()[l].theta;
            assert!(state.potentials().iter().all(|&v| v == theta / 2.0));
        }
    }

    #[test]
    fn modes_share_parameters() {
        let ann = two_layer([1.5, 0.8]);
        let a = convert(&ann, NeuronMode::If, V0Policy::HalfTheta).unwrap();
        let b = convert(&ann, NeuronMode::Dtn, V0Policy::HalfTheta).unwrap();
        assert_eq!(a.layers(), b.layers());
        assert_ne!(a.mode(), b.mode());
        assert_eq!(a.clone().with_mode(NeuronMode::Dtn), b);
    }

    #[test]
    fn dense_copy_is_exact() {
        let w = Tensor::new(vec![1, 1], vec![0.1]).unwrap();
        let dense = DenseLayer::new(w, Tensor::from_vec(vec![-0.3]).unwrap()).unwrap();
        let ann = AnnNetwork::new(
            vec![HiddenLayer {
                dense: dense.clone(),
                qcfs: QcfsParams::new(1.0, 2).unwrap(),
            }],
            dense.clone(),
        )
        .unwrap();
        let snn = convert(&ann, NeuronMode::If, V0Policy::Zero).unwrap();
        assert_eq!(
            snn.layers()[0].dense.weights().data()[0].to_bits(),
            0.1f64.to_bits()
        );
    }

    #[test]
    fn predicted_rate_examples() {
        let a = Tensor::from_vec(vec![1.0, 0.45, 1.3, -0.2]).unwrap();
        let r = predicted_rate(&a, 1.0, 1.0, 5).unwrap();
        assert_eq!(r.data(), &[1.0, 0.4, 1.0, 0.0]);
        assert!(predicted_rate(&a, 1.0, 1.0, 0).is_err());
    }
}
