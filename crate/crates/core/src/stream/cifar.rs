//! CIFAR-10 binary batches: 3073-byte records, label byte then 3072 pixel bytes.

use std::path::Path;

use crate::error::{Error, Result};
use crate::oracles::Sample;
use crate::scalar::Scalar;

use super::Dataset;

pub const CIFAR_PIXELS: usize = 3072;
pub const CIFAR_RECORD: usize = CIFAR_PIXELS + 1;
const CIFAR_CLASSES: usize = 10;

pub fn load_cifar10<S: Scalar, P: AsRef<Path>>(batch_paths: &[P]) -> Result<Dataset<S>> {
    let scale = S::one() / S::lit(255.0);
    let mut samples = Vec::new();
    for path in batch_paths {
        let name = path.as_ref().display().to_string();
        let bytes = std::fs::read(path.as_ref())?;
        if bytes.is_empty() || bytes.len() % CIFAR_RECORD != 0 {
            return Err(Error::Malformed {
                file: name,
                reason: format!(
                    "length {} is not a positive multiple of the {CIFAR_RECORD}-byte record",
                    bytes.len()
                ),
            });
        }
        for rec in bytes.chunks_exact(CIFAR_RECORD) {
            let label = rec[0] as usize;
            if label >= CIFAR_CLASSES {
                return Err(Error::Malformed {
                    file: name,
                    reason: format!("label {label} outside 0..=9"),
                });
            }
            samples.push(Sample::new(
                rec[1..].iter().map(|&p| S::lit(p as f64) * scale).collect(),
                label + 1,
            ));
        }
    }
    Dataset::new(samples, CIFAR_PIXELS, CIFAR_CLASSES, "CIFAR10")
}
