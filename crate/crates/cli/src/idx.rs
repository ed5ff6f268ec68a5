//! Reader for the IDX image/label container (big-endian, as used by MNIST).

use std::path::{Path, PathBuf};

use snnconv_core::data::Dataset;
use snnconv_core::Tensor;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, thiserror::Error)]
pub enum IdxError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic {found:#010x}, expected {expected:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("file truncated: need {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
}

type IResult<T> = std::result::Result<T, IdxError>;

fn be_u32(bytes: &[u8], at: usize) -> IResult<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(IdxError::Truncated {
            needed: at + 4,
            have: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], expected: u32) -> IResult<()> {
    let found = be_u32(bytes, 0)?;
    if found != expected {
        return Err(IdxError::BadMagic { expected, found });
    }
    Ok(())
}

fn payload(bytes: &[u8], header: usize, count: usize) -> IResult<&[u8]> {
    let needed = header
        .checked_add(count)
        .ok_or_else(|| IdxError::LengthMismatch(format!("payload of {count} bytes")))?;
    match bytes.len().cmp(&needed) {
        std::cmp::Ordering::Less => Err(IdxError::Truncated {
            needed,
            have: bytes.len(),
        }),
        std::cmp::Ordering::Greater => Err(IdxError::LengthMismatch(format!(
            "{} trailing bytes",
            bytes.len() - needed
        ))),
        std::cmp::Ordering::Equal => Ok(&bytes[header..]),
    }
}

/// Parses an image file into `(rows·cols, pixels scaled to [0, 1])`.
pub fn parse_images(bytes: &[u8]) -> IResult<(usize, usize, Vec<f64>)> {
    check_magic(bytes, IMAGES_MAGIC)?;
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let dim = rows
        .checked_mul(cols)
        .filter(|&d| d > 0)
        .ok_or_else(|| IdxError::LengthMismatch(format!("image size {rows}x{cols}")))?;
    let total = n
        .checked_mul(dim)
        .ok_or_else(|| IdxError::LengthMismatch(format!("{n} images of {dim} pixels")))?;
    let pixels = payload(bytes, 16, total)?;
    Ok((
        n,
        dim,
        pixels.iter().map(|&p| f64::from(p) / 255.0).collect(),
    ))
}

pub fn parse_labels(bytes: &[u8]) -> IResult<Vec<usize>> {
    check_magic(bytes, LABELS_MAGIC)?;
    let n = be_u32(bytes, 4)? as usize;
    Ok(payload(bytes, 8, n)?
        .iter()
        .map(|&l| usize::from(l))
        .collect())
}

/// Combines parsed image and label buffers. The class count is one more
/// than the largest label.
pub fn dataset_from_bytes(images: &[u8], labels: &[u8]) -> IResult<Dataset> {
    let (n, dim, pixels) = parse_images(images)?;
    let labels = parse_labels(labels)?;
    if labels.len() != n {
        return Err(IdxError::LengthMismatch(format!(
            "{n} images but {} labels",
            labels.len()
        )));
    }
    if n == 0 {
        return Err(IdxError::LengthMismatch("no samples".into()));
    }
    let classes = labels.iter().max().map_or(1, |m| m + 1).max(2);
    let inputs =
        Tensor::new(vec![n, dim], pixels).map_err(|e| IdxError::LengthMismatch(e.to_string()))?;
    Dataset::new(inputs, labels, classes).map_err(|e| IdxError::LengthMismatch(e.to_string()))
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> IResult<Dataset> {
    let read = |p: &Path| {
        std::fs::read(p).map_err(|source| IdxError::Io {
            path: p.to_path_buf(),
            source,
        })
    };
    dataset_from_bytes(&read(images_path)?, &read(labels_path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn images(n: u32, rows: u32, cols: u32) -> Vec<u8> {
        let mut b = IMAGES_MAGIC.to_be_bytes().to_vec();
        for v in [n, rows, cols] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend((0..n * rows * cols).map(|i| (i % 256) as u8));
        b
    }

    fn labels(values: &[u8]) -> Vec<u8> {
        let mut b = LABELS_MAGIC.to_be_bytes().to_vec();
        b.extend_from_slice(&(values.len() as u32).to_be_bytes());
        b.extend_from_slice(values);
        b
    }

    #[test]
    fn parses_small_fixture() {
        let d = dataset_from_bytes(&images(3, 2, 2), &labels(&[0, 2, 1])).unwrap();
        assert_eq!(d.inputs().shape(), &[3, 4]);
        assert_eq!(d.classes(), 3);
        assert_eq!(
            d.sample(1).0,
            &[4.0 / 255.0, 5.0 / 255.0, 6.0 / 255.0, 7.0 / 255.0]
        );
        assert_eq!(d.sample(2).1, 1);
    }

    #[test]
    fn distinct_errors() {
        assert!(matches!(
            dataset_from_bytes(&labels(&[1]), &images(1, 1, 1)),
            Err(IdxError::BadMagic { .. })
        ));
        assert!(matches!(parse_images(&[]), Err(IdxError::Truncated { .. })));
        let mut short = images(2, 2, 2);
        short.pop();
        assert!(matches!(
            parse_images(&short),
            Err(IdxError::Truncated { .. })
        ));
        assert!(matches!(
            dataset_from_bytes(&images(2, 1, 1), &labels(&[0])),
            Err(IdxError::LengthMismatch(_))
        ));
    }
}
