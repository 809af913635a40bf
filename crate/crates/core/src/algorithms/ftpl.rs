//! Follow the Perturbed Leader for online linear losses over a feasible set.

use rand::Rng;

use crate::error::Result;
use crate::geometry::FeasibleSet;
use crate::keyed::{keyed_rng, Domain};
use crate::point::Point;
use crate::scalar::Scalar;

/// One perturbed-leader base learner. The perturbation is drawn once per run.
#[derive(Clone, Debug, PartialEq)]
pub struct FtplState<S> {
    pub accumulated: Point<S>,
    pub perturbation: Point<S>,
    pub index: usize,
}

impl<S: Scalar> FtplState<S> {
    pub fn new(accumulated: Point<S>, perturbation: Point<S>, index: usize) -> Result<Self> {
        perturbation.ensure_dims(accumulated.dims())?;
        Ok(Self {
            accumulated,
            perturbation,
            index,
        })
    }

    /// Learner `index` with coordinates of the perturbation i.i.d. uniform on `[0, scale·√T]`.
    pub fn seeded(dims: (usize, usize), index: usize, scale: S, horizon: usize, seed: u64) -> Self {
        let width = scale.to_f64_lossy() * (horizon as f64).sqrt();
        let mut rng = keyed_rng(seed, Domain::Perturbation, index as u64, 0);
        let mut perturbation = Point::zeros(dims.0, dims.1);
        for p in perturbation.as_mut_slice() {
            *p = S::lit(rng.random::<f64>() * width);
        }
        Self {
            accumulated: Point::zeros(dims.0, dims.1),
            perturbation,
            index,
        }
    }

    /// `lmo(set, accumulated + perturbation)`
    pub fn predict(&self, set: &FeasibleSet<S>) -> Result<Point<S>> {
        set.lmo(&self.accumulated.add(&self.perturbation))
    }

    /// Adds the linear loss vector of the last round.
    pub fn feedback(&mut self, linear_loss: &Point<S>) -> Result<()> {
        linear_loss.ensure_dims(self.accumulated.dims())?;
        self.accumulated.axpy(S::one(), linear_loss);
        Ok(())
    }
}
