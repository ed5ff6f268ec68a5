//! Binary checkpoint container.
//!
//! All integers are little-endian `u32`. Parameters are little-endian `f32`;
//! the two SNN header reals are `f64`.
//!
//! ```text
//! "SNNC1"                      magic + format version
//! u8   kind                    0 = ANN, 1 = SNN
//! --- SNN only ---
//! u8   mode                    0 = IF, 1 = DTN
//! f64  theta_neg
//! u8   v0 policy               0 = zero, 1 = half threshold, 2 = explicit
//! f64  v0 value                0 unless explicit
//! --- both ---
//! u32  hidden layer count H
//! H × { u32 out, u32 in, f32[out·in] weights, f32[out] bias,
//!       f32 threshold (λ for ANN, θ for SNN), u32 L (0 in SNN files) }
//! u32 out, u32 in, f32[out·in] weights, f32[out] bias     read-out layer
//! ```
//!
//! Trailing bytes are rejected. Values that are not exactly representable as
//! `f32` cannot be written, so a write/read cycle is lossless.

use std::path::Path;

use snnconv_core::ann::{AnnNetwork, DenseLayer, HiddenLayer, QcfsParams};
use snnconv_core::snn::{NeuronMode, SnnLayer, SnnNetwork, V0Policy};
use snnconv_core::Tensor;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"SNNC1";
const KIND_ANN: u8 = 0;
const KIND_SNN: u8 = 1;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version '{0}'")]
    UnsupportedVersion(char),
    #[error("checkpoint truncated at byte {offset} while reading {what}")]
    Truncated { offset: usize, what: &'static str },
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("unknown {what} tag {tag}")]
    UnknownTag { what: &'static str, tag: u8 },
    #[error("expected a {expected} checkpoint, found a {found} checkpoint")]
    WrongKind {
        expected: &'static str,
        found: &'static str,
    },
    #[error("{0} is not exactly representable as f32")]
    NotRepresentable(&'static str),
    #[error("invalid checkpoint contents: {0}")]
    Invalid(String),
}

type CResult<T> = std::result::Result<T, CheckpointError>;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u32(&mut self, v: usize) -> CResult<()> {
        let v =
            u32::try_from(v).map_err(|_| CheckpointError::Invalid(format!("{v} overflows u32")))?;
        self.0.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }

    fn f32(&mut self, v: f64, what: &'static str) -> CResult<()> {
        let s = v as f32;
        if f64::from(s) != v {
            return Err(CheckpointError::NotRepresentable(what));
        }
        self.0.extend_from_slice(&s.to_le_bytes());
        Ok(())
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn dense(&mut self, d: &DenseLayer) -> CResult<()> {
        self.u32(d.outputs())?;
        self.u32(d.inputs())?;
        for &w in d.weights().data() {
            self.f32(w, "weight")?;
        }
        for &b in d.bias().data() {
            self.f32(b, "bias")?;
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> CResult<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(CheckpointError::Truncated {
                offset: self.bytes.len(),
                what,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> CResult<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &'static str) -> CResult<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f32(&mut self, what: &'static str) -> CResult<f64> {
        let b = self.take(4, what)?;
        Ok(f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
    }

    fn f64(&mut self, what: &'static str) -> CResult<f64> {
        let b = self.take(8, what)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn f32s(&mut self, n: usize, what: &'static str) -> CResult<Vec<f64>> {
        let bytes = n
            .checked_mul(4)
            .ok_or_else(|| CheckpointError::Invalid(format!("{what} count {n} too large")))?;
        let raw = self.take(bytes, what)?;
        Ok(raw
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect())
    }

    fn dense(&mut self) -> CResult<DenseLayer> {
        let out = self.u32("layer output width")?;
        let inp = self.u32("layer input width")?;
        let count = out
            .checked_mul(inp)
            .ok_or_else(|| CheckpointError::Invalid("layer too large".into()))?;
        let w = self.f32s(count, "weights")?;
        let b = self.f32s(out, "bias")?;
        let invalid = |e: snnconv_core::Error| CheckpointError::Invalid(e.to_string());
        DenseLayer::new(
            Tensor::new(vec![out, inp], w).map_err(invalid)?,
            Tensor::new(vec![out], b).map_err(invalid)?,
        )
        .map_err(invalid)
    }

    fn header(&mut self) -> CResult<u8> {
        let magic = self
            .take(5, "magic")
            .map_err(|_| CheckpointError::BadMagic)?;
        if &magic[..4] != b"SNNC" {
            return Err(CheckpointError::BadMagic);
        }
        if magic[4] != MAGIC[4] {
            return Err(CheckpointError::UnsupportedVersion(magic[4] as char));
        }
        self.u8("kind")
    }

    fn finish(&self) -> CResult<()> {
        match self.bytes.len() - self.pos {
            0 => Ok(()),
            n => Err(CheckpointError::TrailingBytes(n)),
        }
    }
}

fn kind_name(kind: u8) -> &'static str {
    match kind {
        KIND_ANN => "ANN",
        KIND_SNN => "SNN",
        _ => "unknown",
    }
}

/// Serializes a trained ANN.
pub fn export_checkpoint(net: &AnnNetwork) -> CResult<Vec<u8>> {
    let mut w = Writer(MAGIC.to_vec());
    w.u8(KIND_ANN);
    w.u32(net.hidden().len())?;
    for h in net.hidden() {
        w.dense(&h.dense)?;
        w.f32(h.qcfs.lambda(), "lambda")?;
        w.u32(h.qcfs.levels() as usize)?;
    }
    w.dense(net.output())?;
    Ok(w.0)
}

/// Parses an ANN checkpoint.
pub fn import_checkpoint(bytes: &[u8]) -> CResult<AnnNetwork> {
    let mut r = Reader { bytes, pos: 0 };
    let kind = r.header()?;
    if kind != KIND_ANN {
        return Err(CheckpointError::WrongKind {
            expected: "ANN",
            found: kind_name(kind),
        });
    }
    let n = r.u32("layer count")?;
    let mut hidden = Vec::new();
    for _ in 0..n {
        let dense = r.dense()?;
        let lambda = r.f32("lambda")?;
        let levels = r.u32("levels")?;
        let levels = u32::try_from(levels).unwrap_or(0);
        let qcfs =
            QcfsParams::new(lambda, levels).map_err(|e| CheckpointError::Invalid(e.to_string()))?;
        hidden.push(HiddenLayer { dense, qcfs });
    }
    let output = r.dense()?;
    r.finish()?;
    AnnNetwork::new(hidden, output).map_err(|e| CheckpointError::Invalid(e.to_string()))
}

/// Serializes a converted SNN.
pub fn export_snn_checkpoint(net: &SnnNetwork) -> CResult<Vec<u8>> {
    let mut w = Writer(MAGIC.to_vec());
    w.u8(KIND_SNN);
    w.u8(match net.mode() {
        NeuronMode::If => 0,
        NeuronMode::Dtn => 1,
    });
    w.f64(net.theta_neg());
    match net.v0_policy() {
        V0Policy::Zero => {
            w.u8(0);
            w.f64(0.0);
        }
        V0Policy::HalfTheta => {
            w.u8(1);
            w.f64(0.0);
        }
        V0Policy::Explicit(v) => {
            w.u8(2);
            w.f64(v);
        }
    }
    w.u32(net.layers().len())?;
    for l in net.layers() {
        w.dense(&l.dense)?;
        w.f32(l.theta, "theta")?;
        w.u32(0)?;
    }
    w.dense(net.output())?;
    Ok(w.0)
}

/// Parses an SNN checkpoint.
pub fn import_snn_checkpoint(bytes: &[u8]) -> CResult<SnnNetwork> {
    let mut r = Reader { bytes, pos: 0 };
    let kind = r.header()?;
    if kind != KIND_SNN {
        return Err(CheckpointError::WrongKind {
            expected: "SNN",
            found: kind_name(kind),
        });
    }
    let mode = match r.u8("mode")? {
        0 => NeuronMode::If,
        1 => NeuronMode::Dtn,
        tag => return Err(CheckpointError::UnknownTag { what: "mode", tag }),
    };
    let theta_neg = r.f64("theta_neg")?;
    let policy_tag = r.u8("v0 policy")?;
    let v0 = r.f64("v0")?;
    let v0_policy = match policy_tag {
        0 => V0Policy::Zero,
        1 => V0Policy::HalfTheta,
        2 => V0Policy::Explicit(v0),
        tag => {
            return Err(CheckpointError::UnknownTag {
                what: "v0 policy",
                tag,
            })
        }
    };
    let n = r.u32("layer count")?;
    let mut layers = Vec::new();
    for _ in 0..n {
        let dense = r.dense()?;
        let theta = r.f32("theta")?;
        r.u32("levels")?;
        layers.push(SnnLayer { dense, theta });
    }
    let output = r.dense()?;
    r.finish()?;
    SnnNetwork::new(layers, output, mode, theta_neg, v0_policy)
        .map_err(|e| CheckpointError::Invalid(e.to_string()))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save_ann(net: &AnnNetwork, path: &Path) -> Result<()> {
    write(path, &export_checkpoint(net)?)
}

pub fn load_ann(path: &Path) -> Result<AnnNetwork> {
    Ok(import_checkpoint(&read(path)?)?)
}

pub fn save_snn(net: &SnnNetwork, path: &Path) -> Result<()> {
    write(path, &export_snn_checkpoint(net)?)
}

pub fn load_snn(path: &Path) -> Result<SnnNetwork> {
    Ok(import_snn_checkpoint(&read(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use snnconv_core::convert::convert;
    use snnconv_core::Rng;

    fn net() -> AnnNetwork {
        AnnNetwork::random(&[3, 5, 4, 2], 8, &mut Rng::new(12)).unwrap()
    }

    #[test]
    fn ann_round_trip_preserves_forward_bits() {
        let a = net();
        let bytes = export_checkpoint(&a).unwrap();
        assert_eq!(&bytes[..5], b"SNNC1");
        let b = import_checkpoint(&bytes).unwrap();
        assert_eq!(a, b);
        let x = [0.3, -1.2, 0.8];
        let fa = a.forward_sample(&x).unwrap();
        let fb = b.forward_sample(&x).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&fa.logits), bits(&fb.logits));
        assert_eq!(b.hidden()[1].qcfs.lambda(), 4.0);
        assert_eq!(b.hidden()[1].qcfs.levels(), 8);
    }

    #[test]
    fn snn_round_trip() {
        let s = convert(&net(), NeuronMode::Dtn, V0Policy::Explicit(0.25)).unwrap();
        let bytes = export_snn_checkpoint(&s).unwrap();
        assert_eq!(import_snn_checkpoint(&bytes).unwrap(), s);
    }

    #[test]
    fn every_truncation_is_an_error() {
        let bytes = export_checkpoint(&net()).unwrap();
        for cut in 0..bytes.len() {
            assert!(import_checkpoint(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        assert!(matches!(
            import_checkpoint(&bytes[..20]),
            Err(CheckpointError::Truncated { .. })
        ));
    }

    #[test]
    fn header_errors() {
        assert_eq!(
            import_checkpoint(b"").unwrap_err(),
            CheckpointError::BadMagic
        );
        assert_eq!(
            import_checkpoint(b"PNG\x00\x01\x00").unwrap_err(),
            CheckpointError::BadMagic
        );
        let mut bytes = export_checkpoint(&net()).unwrap();
        bytes[4] = b'2';
        assert_eq!(
            import_checkpoint(&bytes).unwrap_err(),
            CheckpointError::UnsupportedVersion('2')
        );
        let mut bytes = export_checkpoint(&net()).unwrap();
        bytes.push(0);
        assert_eq!(
            import_checkpoint(&bytes).unwrap_err(),
            CheckpointError::TrailingBytes(1)
        );
        let bytes = export_checkpoint(&net()).unwrap();
        assert!(matches!(
            import_snn_checkpoint(&bytes),
            Err(CheckpointError::WrongKind { .. })
        ));
    }

    #[test]
    fn non_f32_values_rejected() {
        let w = Tensor::new(vec![1, 1], vec![0.1]).unwrap();
        let d = DenseLayer::new(w, Tensor::zeros(&[1])).unwrap();
        let a = AnnNetwork::new(Vec::new(), d).unwrap();
        assert_eq!(
            export_checkpoint(&a).unwrap_err(),
            CheckpointError::NotRepresentable("weight")
        );
    }
}
