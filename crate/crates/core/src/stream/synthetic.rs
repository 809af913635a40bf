//! Seeded synthetic problems with known structure.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::keyed::{keyed_rng, Domain};
use crate::oracles::{LossModel, Sample};
use crate::point::Point;
use crate::scalar::Scalar;

use super::Dataset;

/// Gaussian class clusters: class `c` has mean `separation · e_{(c−1) mod d}` and unit covariance.
/// Labels are uniform over `1..=classes`.
pub fn synthetic_dataset<S: Scalar>(
    features: usize,
    classes: usize,
    n: usize,
    separation: S,
    seed: u64,
) -> Result<Dataset<S>> {
    if features == 0 || classes == 0 || n == 0 {
        return Err(invalid("synthetic", "d, C and n must be at least 1"));
    }
    let mut rng = keyed_rng(seed, Domain::Dataset, 0, 0);
    let sep = separation.to_f64_lossy();
    let samples = (0..n)
        .map(|_| {
            let label = rng.random_range(1..=classes);
            let hot = (label - 1) % features;
            let x = (0..features)
                .map(|i| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    S::lit(z + if i == hot { sep } else { 0.0 })
                })
                .collect();
            Sample::new(x, label)
        })
        .collect();
    Dataset::new(samples, features, classes, "synthetic")
}

/// Quadratic `½xᵀAx + bᵀx` on `R^{dim}` with `A = MᵀM/dim + curvature·I` and Gaussian `b`.
pub fn synthetic_quadratic<S: Scalar>(dim: usize, curvature: S, seed: u64) -> Result<LossModel<S>> {
    if dim == 0 {
        return Err(invalid("dim", "must be at least 1"));
    }
    let mut rng = keyed_rng(seed, Domain::Dataset, 1, 0);
    let m: Vec<f64> = (0..dim * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut a = vec![S::zero(); dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            let mtm: f64 = (0..dim).map(|k| m[k * dim + i] * m[k * dim + j]).sum();
            let diag = if i == j { curvature.to_f64_lossy() } else { 0.0 };
            a[i * dim + j] = S::lit(mtm / dim as f64 + diag);
        }
    }
    let b: Vec<S> = (0..dim)
        .map(|_| S::lit(StandardNormal.sample(&mut rng)))
        .collect();
    LossModel::quadratic(a, Point::vector(&b)?)
}

/// Zero-mean Gaussian perturbations of a quadratic's linear term, `scale` per coordinate.
pub fn perturbation_dataset<S: Scalar>(dim: usize, n: usize, scale: S, seed: u64) -> Result<Dataset<S>> {
    let mut rng = keyed_rng(seed, Domain::Dataset, 2, 0);
    let s = scale.to_f64_lossy();
    let samples = (0..n)
        .map(|_| {
            let f = (0..dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    S::lit(s * z)
                })
                .collect();
            Sample::new(f, 1)
        })
        .collect();
    Dataset::new(samples, dim, 1, "perturbations")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        let a = synthetic_dataset::<f64>(4, 3, 50, 2.0, 7).unwrap();
        let b = synthetic_dataset::<f64>(4, 3, 50, 2.0, 7).unwrap();
        let c = synthetic_dataset::<f64>(4, 3, 50, 2.0, 8).unwrap();
        assert_eq!(a.samples()[..], b.samples()[..]);
        assert_ne!(a.samples()[..], c.samples()[..]);
    }

    #[test]
    fn single_sample() {
        let ds = synthetic_dataset::<f64>(3, 2, 1, 1.0, 0).unwrap();
        assert_eq!(ds.len(), 1);
        assert!(synthetic_dataset::<f64>(3, 2, 0, 1.0, 0).is_err());
    }

    #[test]
    fn quadratic_is_positive_definite() {
        let LossModel::SyntheticQuadratic { hessian, .. } = synthetic_quadratic::<f64>(5, 0.5, 1).unwrap() else {
            unreachable!()
        };
        // symmetric with diagonal dominance over the curvature floor
        for i in 0..5 {
            assert!(hessian[i * 5 + i] >= 0.5);
            for j in 0..5 {
                assert!((hessian[i * 5 + j] - hessian[j * 5 + i]).abs() < 1e-12);
            }
        }
    }
}
