//! Datasets and the round streams built from them.
//!
//! A stochastic stream draws each round's batch i.i.d. (with replacement) from the
//! whole dataset; an adversarial stream sorts by label and hands out consecutive
//! blocks, so consecutive rounds see one class at a time.

mod cifar;
mod csv_io;
mod idx;
mod synthetic;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;

pub use cifar::{load_cifar10, CIFAR_PIXELS, CIFAR_RECORD};
pub use csv_io::{read_dataset_csv, write_dataset_csv};
pub use idx::{load_idx, IMAGE_MAGIC, LABEL_MAGIC};
pub use synthetic::{perturbation_dataset, synthetic_dataset, synthetic_quadratic};

use crate::algorithms::RoundSource;
use crate::error::{invalid, Error, Result};
use crate::keyed::{keyed_rng, Domain};
use crate::oracles::{LossModel, Reduction, RoundLoss, Sample};
use crate::scalar::Scalar;

/// An immutable labelled dataset.
#[derive(Clone, Debug)]
pub struct Dataset<S> {
    samples: Arc<[Sample<S>]>,
    features: usize,
    classes: usize,
    name: String,
}

impl<S: Scalar> Dataset<S> {
    pub fn new(samples: Vec<Sample<S>>, features: usize, classes: usize, name: &str) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != features {
                return Err(Error::DimensionMismatch {
                    expected: (features, 1),
                    actual: (s.features.len(), 1),
                });
            }
            if s.label == 0 || s.label > classes {
                return Err(invalid("label", format!("sample {i} has label {} outside 1..={classes}", s.label)));
            }
        }
        Ok(Self {
            samples: samples.into(),
            features,
            classes,
            name: name.to_owned(),
        })
    }

    pub fn samples(&self) -> &Arc<[Sample<S>]> {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// The first `n` samples.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            samples: self.samples[..n.min(self.len())].to_vec().into(),
            features: self.features,
            classes: self.classes,
            name: self.name.clone(),
        }
    }

    /// Whole-dataset loss scaled to match the expectation of one round of `batch` samples.
    pub fn reference_loss(&self, model: Arc<LossModel<S>>, batch: usize) -> Result<RoundLoss<S>> {
        let n = S::from_usize_lossy(self.len());
        let w = match model.reduction() {
            Reduction::Sum => S::from_usize_lossy(batch) / n,
            Reduction::Mean => S::one() / n,
        };
        RoundLoss::weighted(self.samples.clone(), (0..self.len()).map(|i| (i, w)).collect(), model)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamMode {
    Stochastic,
    Adversarial,
}

impl fmt::Display for StreamMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StreamMode::Stochastic => "stochastic",
            StreamMode::Adversarial => "adversarial",
        })
    }
}

impl FromStr for StreamMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "stochastic" => Ok(StreamMode::Stochastic),
            "adversarial" => Ok(StreamMode::Adversarial),
            _ => Err(invalid("mode", format!("unknown `{s}`, expected stochastic or adversarial"))),
        }
    }
}

/// A finite, deterministic sequence of round losses over a dataset.
#[derive(Clone, Debug)]
pub struct Stream<S> {
    pub mode: StreamMode,
    pub batch_size: usize,
    pub rounds: usize,
    pub seed: u64,
    dataset: Dataset<S>,
    model: Arc<LossModel<S>>,
    /// Label-sorted sample order (adversarial mode only).
    order: Vec<usize>,
}

pub fn build_stream<S: Scalar>(
    ds: &Dataset<S>,
    model: Arc<LossModel<S>>,
    mode: StreamMode,
    batch_size: usize,
    rounds: usize,
    seed: u64,
) -> Result<Stream<S>> {
    if batch_size == 0 {
        return Err(invalid("batch size", "must be at least 1"));
    }
    if rounds == 0 {
        return Err(invalid("T", "must be at least 1"));
    }
    if ds.is_empty() {
        return Err(invalid("dataset", "is empty"));
    }
    if model.feature_len() != ds.features() {
        return Err(Error::DimensionMismatch {
            expected: (model.feature_len(), 1),
            actual: (ds.features(), 1),
        });
    }
    let order = match mode {
        StreamMode::Stochastic => Vec::new(),
        StreamMode::Adversarial => {
            if batch_size * rounds > ds.len() {
                return Err(invalid(
                    "batch size",
                    format!(
                        "adversarial stream needs B·T = {} samples but the dataset has {}",
                        batch_size * rounds,
                        ds.len()
                    ),
                ));
            }
            let mut order: Vec<usize> = (0..ds.len()).collect();
            order.sort_by_key(|&i| ds.samples()[i].label);
            order
        }
    };
    Ok(Stream {
        mode,
        batch_size,
        rounds,
        seed,
        dataset: ds.clone(),
        model,
        order,
    })
}

impl<S: Scalar> Stream<S> {
    /// Dataset indices of round `t` (1-based).
    pub fn batch_indices(&self, t: usize) -> Result<Vec<usize>> {
        if t == 0 || t > self.rounds {
            return Err(Error::StreamExhausted {
                reached: t,
                requested: self.rounds,
            });
        }
        Ok(match self.mode {
            StreamMode::Stochastic => {
                let mut rng = keyed_rng(self.seed, Domain::Batch, t as u64, 0);
                let n = self.dataset.len();
                (0..self.batch_size).map(|_| rng.random_range(0..n)).collect()
            }
            StreamMode::Adversarial => self.order[(t - 1) * self.batch_size..t * self.batch_size].to_vec(),
        })
    }

    pub fn dataset(&self) -> &Dataset<S> {
        &self.dataset
    }

    pub fn model(&self) -> &Arc<LossModel<S>> {
        &self.model
    }

    /// All round losses in order.
    pub fn losses(&self) -> Result<Vec<RoundLoss<S>>> {
        (1..=self.rounds).map(|t| self.round_loss(t)).collect()
    }

    pub fn reference_loss(&self) -> Result<RoundLoss<S>> {
        self.dataset.reference_loss(self.model.clone(), self.batch_size)
    }
}

impl<S: Scalar> RoundSource<S> for Stream<S> {
    fn rounds(&self) -> usize {
        self.rounds
    }

    fn round_loss(&self, t: usize) -> Result<RoundLoss<S>> {
        RoundLoss::new(self.dataset.samples().clone(), &self.batch_indices(t)?, self.model.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labelled(labels: &[usize]) -> Dataset<f64> {
        let samples = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| Sample::new(vec![i as f64], y))
            .collect();
        Dataset::new(samples, 1, 2, "t").unwrap()
    }

    fn logistic() -> Arc<LossModel<f64>> {
        Arc::new(LossModel::logistic(1, 2).unwrap())
    }

    #[test]
    fn adversarial_sorts_then_chunks() {
        let ds = labelled(&[2, 1, 2, 1]);
        let s = build_stream(&ds, logistic(), StreamMode::Adversarial, 2, 2, 0).unwrap();
        assert_eq!(s.batch_indices(1).unwrap(), vec![1, 3]);
        assert_eq!(s.batch_indices(2).unwrap(), vec![0, 2]);
    }

    #[test]
    fn adversarial_requires_enough_samples() {
        let ds = labelled(&[2, 1, 2, 1]);
        assert!(build_stream(&ds, logistic(), StreamMode::Adversarial, 3, 2, 0).is_err());
    }

    #[test]
    fn stochastic_is_seeded() {
        let ds = labelled(&[1, 2, 1, 2, 1, 2, 1, 2]);
        let a = build_stream(&ds, logistic(), StreamMode::Stochastic, 5, 10, 42).unwrap();
        let b = build_stream(&ds, logistic(), StreamMode::Stochastic, 5, 10, 42).unwrap();
        let c = build_stream(&ds, logistic(), StreamMode::Stochastic, 5, 10, 43).unwrap();
        let batches = |s: &Stream<f64>| (1..=10).map(|t| s.batch_indices(t).unwrap()).collect::<Vec<_>>();
        assert_eq!(batches(&a), batches(&b));
        assert_ne!(batches(&a), batches(&c));
        assert!(a.batch_indices(11).is_err());
    }

    #[test]
    fn reference_loss_matches_expected_round_loss() {
        let ds = labelled(&[1, 2, 2]);
        let reference = ds.reference_loss(logistic(), 6).unwrap();
        let w = crate::Point::from_col_major(1, 2, vec![0.2, -0.1]).unwrap();
        // E f_t = B · mean per-sample loss
        let full = RoundLoss::new(ds.samples().clone(), &[0, 1, 2], logistic()).unwrap();
        assert!((reference.loss(&w).unwrap() - 2.0 * full.loss(&w).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("Adversarial".parse::<StreamMode>().unwrap(), StreamMode::Adversarial);
        assert!("random".parse::<StreamMode>().is_err());
    }
}
