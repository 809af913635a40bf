//! MNIST IDX reader (big-endian headers, unsigned-byte payloads).

use std::path::Path;

use crate::error::{Error, Result};
use crate::oracles::Sample;
use crate::scalar::Scalar;

use super::Dataset;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
const MNIST_CLASSES: usize = 10;

fn read_u32(bytes: &[u8], at: usize, file: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Truncated {
            file: file.to_owned(),
            expected: (at + 4) as u64,
            actual: bytes.len() as u64,
        })
}

fn check_len(bytes: &[u8], expected: usize, file: &str) -> Result<()> {
    if bytes.len() != expected {
        return Err(Error::Truncated {
            file: file.to_owned(),
            expected: expected as u64,
            actual: bytes.len() as u64,
        });
    }
    Ok(())
}

/// Loads an image/label IDX pair. Pixels are scaled to `[0, 1]`; digit labels map to `1..=10`.
pub fn load_idx<S: Scalar>(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset<S>> {
    let img_name = images_path.as_ref().display().to_string();
    let lbl_name = labels_path.as_ref().display().to_string();
    let images = std::fs::read(images_path.as_ref())?;
    let labels = std::fs::read(labels_path.as_ref())?;

    let magic = read_u32(&images, 0, &img_name)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::BadMagic {
            file: img_name,
            expected: IMAGE_MAGIC,
            found: magic,
        });
    }
    let n = read_u32(&images, 4, &img_name)? as usize;
    let rows = read_u32(&images, 8, &img_name)? as usize;
    let cols = read_u32(&images, 12, &img_name)? as usize;
    let d = rows * cols;
    check_len(&images, 16 + n * d, &img_name)?;

    let magic = read_u32(&labels, 0, &lbl_name)?;
    if magic != LABEL_MAGIC {
        return Err(Error::BadMagic {
            file: lbl_name,
            expected: LABEL_MAGIC,
            found: magic,
        });
    }
    let n_labels = read_u32(&labels, 4, &lbl_name)? as usize;
    if n_labels != n {
        return Err(Error::Malformed {
            file: lbl_name,
            reason: format!("{n_labels} labels for {n} images"),
        });
    }
    check_len(&labels, 8 + n, &lbl_name)?;

    let scale = S::one() / S::lit(255.0);
    let samples = images[16..]
        .chunks_exact(d.max(1))
        .zip(&labels[8..])
        .map(|(px, &y)| {
            if y as usize >= MNIST_CLASSES {
                return Err(Error::Malformed {
                    file: lbl_name.clone(),
                    reason: format!("label {y} outside 0..=9"),
                });
            }
            Ok(Sample::new(
                px.iter().map(|&p| S::lit(p as f64) * scale).collect(),
                y as usize + 1,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(samples, d, MNIST_CLASSES, "MNIST")
}
