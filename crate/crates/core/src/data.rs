//! Labelled datasets and seeded synthetic generators.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::tensor::{Rng, Tensor};

/// Inputs `[n×d]` with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Tensor,
    labels: Vec<usize>,
    classes: usize,
}

impl Dataset {
    pub fn new(inputs: Tensor, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if inputs.shape().len() != 2 {
            return Err(Error::Argument(format!(
                "dataset inputs must be 2-D, got {:?}",
                inputs.shape()
            )));
        }
        if inputs.rows() != labels.len() {
            return Err(Error::Dimension {
                op: "dataset",
                left: inputs.shape().to_vec(),
                right: alloc::vec![labels.len()],
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Argument(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        Ok(Dataset {
            inputs,
            labels,
            classes,
        })
    }

    pub fn inputs(&self) -> &Tensor {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> usize {
        self.inputs.cols()
    }

    pub fn sample(&self, i: usize) -> (&[f64], usize) {
        (self.inputs.row(i), self.labels[i])
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let inputs = self.inputs.select_rows(indices)?;
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Dataset::new(inputs, labels, self.classes)
    }

    /// Seeded shuffle followed by a split; the test part holds
    /// `round(n * test_fraction)` samples (at least one of each part).
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::Argument(format!(
                "test fraction must lie in (0, 1), got {test_fraction}"
            )));
        }
        let n = self.len();
        if n < 2 {
            return Err(Error::Argument("need at least two samples to split".into()));
        }
        let n_test = ((n as f64 * test_fraction) + 0.5) as usize;
        let n_test = n_test.clamp(1, n - 1);
        let mut order: Vec<usize> = (0..n).collect();
        Rng::new(seed).shuffle(&mut order);
        let (test, train) = order.split_at(n_test);
        Ok((self.subset(train)?, self.subset(test)?))
    }
}

/// Isotropic Gaussian blobs with centres evenly spaced on a circle of radius
/// 2 and standard deviation 0.3. Labels cycle `0, 1, …, classes-1`.
pub fn gen_blobs(seed: u64, n: usize, classes: usize) -> Result<Dataset> {
    if n == 0 || classes < 2 {
        return Err(Error::Argument(format!(
            "blobs need n > 0 and at least 2 classes, got n={n}, classes={classes}"
        )));
    }
    let mut rng = Rng::new(seed);
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        let angle = 2.0 * PI * c as f64 / classes as f64;
        data.push(2.0 * libm::cos(angle) + 0.3 * rng.normal());
        data.push(2.0 * libm::sin(angle) + 0.3 * rng.normal());
        labels.push(c);
    }
    Dataset::new(Tensor::new(alloc::vec![n, 2], data)?, labels, classes)
}

/// Two interleaved spiral arms of 1.25 turns each, radius in [0.1, 1],
/// with Gaussian jitter of 0.03. Class 1 is class 0 rotated by half a turn.
pub fn gen_spirals(seed: u64, n: usize) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Argument("spirals need n > 0".into()));
    }
    let mut rng = Rng::new(seed);
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % 2;
        let t = rng.uniform(0.0, 1.0);
        let r = 0.1 + 0.9 * t;
        let angle = 2.5 * PI * t + PI * c as f64;
        data.push(r * libm::cos(angle) + 0.03 * rng.normal());
        data.push(r * libm::sin(angle) + 0.03 * rng.normal());
        labels.push(c);
    }
    Dataset::new(Tensor::new(alloc::vec![n, 2], data)?, labels, 2)
}
