//! Core algorithms for ANN-to-SNN conversion with learnable clipping
//! thresholds and dual-threshold integrate-and-fire neurons.
//!
//! The crate is `no_std` and only needs an allocator. Everything here is a
//! pure function of its inputs plus an explicit [`Rng`]; file formats, the
//! experiment harness and the command line live in the `snnconv` crate.
//!
//! Module map:
//!
//! * [`tensor`]: dense row-major arithmetic and the seeded generator.
//! * [`ann`]: the quantization clip-floor-shift (QCFS) activation, dense
//!   networks built from it and straight-through SGD training.
//! * [`snn`]: IF and dual-threshold neuron dynamics and the clocked
//!   network simulator.
//! * [`convert`]: ANN to SNN mapping and the analytic rate predictor.
//! * [`analysis`]: conversion error metrics, exhaustive unevenness
//!   enumeration, membrane initialization sweeps and energy accounting.
//! * [`data`]: synthetic datasets and train/test splitting.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod ann;
pub mod convert;
pub mod data;
mod error;
pub mod snn;
pub mod tensor;

pub use crate::error::{Error, Result};
pub use crate::tensor::{Rng, Tensor};

/// Value of quantization level `k` out of `n` on a scale whose top level is
/// `scale`, i.e. `scale * k / n`.
///
/// Level `n` maps to `scale` exactly and level 0 to `0.0`, so rounding never
/// pushes a saturated value above the scale. Every rate, activation and
/// predicted value in this crate is produced through this function, which
/// makes equality between the ANN and SNN routes a question of integer levels
/// alone.
#[inline]
pub fn level_value(scale: f64, k: i64, n: u32) -> f64 {
    if k == 0 {
        0.0
    } else if k == i64::from(n) {
        scale
    } else {
        scale * k as f64 / f64::from(n)
    }
}
