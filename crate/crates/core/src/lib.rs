//! Projection-free online convex optimization.
//!
//! The learners only touch the feasible set through its linear minimization
//! oracle. ORGFW drives a single Frank-Wolfe step per round with a recursive
//! variance-reduced gradient estimate; MORGFW runs a `K`-step Frank-Wolfe
//! simulation per round fed by perturbed-leader base learners, for adversarial
//! loss sequences. OSFW, OFW and Meta-FW are included as baselines.
//!
//! Numerics are generic over [`Scalar`] (`f32` or `f64`); the `*64` and `*32`
//! aliases below name the common instantiations.

pub mod algorithms;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod keyed;
pub mod metrics;
pub mod oracles;
pub mod point;
pub mod scalar;
pub mod stream;
pub mod verify;

pub use algorithms::{run, run_monitored, Algorithm, Learner, LearnerConfig, LearnerState, Monitor, RoundSource};
pub use error::{Error, Result};
pub use estimators::{EstimatorKind, EstimatorState, ScheduleSpec};
pub use geometry::{FeasibleSet, SetKind};
pub use metrics::{Comparator, ComparatorMethod, RoundRecord};
pub use oracles::{LossModel, NoiseSpec, RoundLoss, Sample};
pub use point::Point;
pub use scalar::Scalar;
pub use stream::{Dataset, Stream, StreamMode};

pub type Point64 = Point<f64>;
pub type Point32 = Point<f32>;
pub type FeasibleSet64 = FeasibleSet<f64>;
pub type FeasibleSet32 = FeasibleSet<f32>;
pub type RoundLoss64 = RoundLoss<f64>;
pub type RoundLoss32 = RoundLoss<f32>;
pub type LearnerConfig64 = LearnerConfig<f64>;
pub type LearnerConfig32 = LearnerConfig<f32>;
pub type RoundRecord64 = RoundRecord<f64>;
pub type RoundRecord32 = RoundRecord<f32>;
pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
