//! Per-round losses `f_t`, their exact gradients, and seeded stochastic gradient oracles.
//!
//! A [`RoundLoss`] is a weighted sum of per-sample terms drawn from a shared sample
//! pool. Models whose round loss is a sum (multiclass logistic) use unit weights;
//! models whose round loss is a mean use `1/B`. Aggregating many rounds is then a
//! matter of merging weights, which keeps comparator solves cheap.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::geometry::{Block, FeasibleSet};
use crate::keyed::{keyed_rng, Domain};
use crate::point::Point;
use crate::scalar::Scalar;

/// One labelled example. Labels are 1-based: `1 ≤ label ≤ C`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<S> {
    pub features: Vec<S>,
    pub label: usize,
}

impl<S: Scalar> Sample<S> {
    pub fn new(features: Vec<S>, label: usize) -> Self {
        Self { features, label }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduction {
    Sum,
    Mean,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LossModel<S> {
    /// Summed softmax cross-entropy of a linear model `W ∈ R^{d×C}`.
    MulticlassLogistic { features: usize, classes: usize },
    /// Mean cross-entropy of `softmax(W₂ᵀ sigmoid(W₁ᵀa + b₁) + b₂)`.
    OneHiddenNN {
        features: usize,
        hidden: usize,
        classes: usize,
    },
    /// Mean over samples of `½xᵀAx + (b + a_i)ᵀx`; the sample features `a_i` are
    /// zero-mean perturbations of the linear term.
    SyntheticQuadratic { hessian: Vec<S>, linear: Point<S> },
}

/// Offsets of the four parameter groups inside a packed network vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NnLayout {
    pub features: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl NnLayout {
    pub fn w1(&self) -> usize {
        0
    }
    pub fn b1(&self) -> usize {
        self.features * self.hidden
    }
    pub fn w2(&self) -> usize {
        self.b1() + self.hidden
    }
    pub fn b2(&self) -> usize {
        self.w2() + self.hidden * self.classes
    }
    pub fn len(&self) -> usize {
        self.b2() + self.classes
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<S: Scalar> LossModel<S> {
    pub fn logistic(features: usize, classes: usize) -> Result<Self> {
        if features == 0 || classes < 2 {
            return Err(invalid("model", "logistic needs d ≥ 1 and C ≥ 2"));
        }
        Ok(Self::MulticlassLogistic { features, classes })
    }

    pub fn one_hidden_nn(features: usize, hidden: usize, classes: usize) -> Result<Self> {
        if features == 0 || hidden == 0 || classes < 2 {
            return Err(invalid("model", "network needs d, m ≥ 1 and C ≥ 2"));
        }
        Ok(Self::OneHiddenNN {
            features,
            hidden,
            classes,
        })
    }

    /// `hessian` is row-major `n × n` with `n = linear.len()`.
    pub fn quadratic(hessian: Vec<S>, linear: Point<S>) -> Result<Self> {
        let n = linear.len();
        if hessian.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: (n, n),
                actual: (hessian.len(), 1),
            });
        }
        if hessian.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("hessian"));
        }
        Ok(Self::SyntheticQuadratic { hessian, linear })
    }

    pub fn reduction(&self) -> Reduction {
        match self {
            Self::MulticlassLogistic { .. } => Reduction::Sum,
            _ => Reduction::Mean,
        }
    }

    pub fn is_convex(&self) -> bool {
        !matches!(self, Self::OneHiddenNN { .. })
    }

    /// Shape of the parameter point.
    pub fn param_dims(&self) -> (usize, usize) {
        match self {
            Self::MulticlassLogistic { features, classes } => (*features, *classes),
            Self::OneHiddenNN { .. } => (self.nn_layout().map_or(0, |l| l.len()), 1),
            Self::SyntheticQuadratic { linear, .. } => linear.dims(),
        }
    }

    /// Length of the feature vector every sample must carry.
    pub fn feature_len(&self) -> usize {
        match self {
            Self::MulticlassLogistic { features, .. } | Self::OneHiddenNN { features, .. } => *features,
            Self::SyntheticQuadratic { linear, .. } => linear.len(),
        }
    }

    pub fn classes(&self) -> Option<usize> {
        match self {
            Self::MulticlassLogistic { classes, .. } | Self::OneHiddenNN { classes, .. } => Some(*classes),
            Self::SyntheticQuadratic { .. } => None,
        }
    }

    pub fn nn_layout(&self) -> Option<NnLayout> {
        match self {
            Self::OneHiddenNN {
                features,
                hidden,
                classes,
            } => Some(NnLayout {
                features: *features,
                hidden: *hidden,
                classes: *classes,
            }),
            _ => None,
        }
    }

    /// Product of column-wise ℓ1 balls over `(W₁, b₁, W₂, b₂)`; biases are single columns.
    pub fn nn_feasible_set(&self, radius_w: S, radius_b: S) -> Result<FeasibleSet<S>> {
        let l = self
            .nn_layout()
            .ok_or_else(|| invalid("model", "not a one-hidden-layer network"))?;
        FeasibleSet::blocks(vec![
            Block { offset: l.w1(), rows: l.features, cols: l.hidden, radius: radius_w },
            Block { offset: l.b1(), rows: l.hidden, cols: 1, radius: radius_b },
            Block { offset: l.w2(), rows: l.hidden, cols: l.classes, radius: radius_w },
            Block { offset: l.b2(), rows: l.classes, cols: 1, radius: radius_b },
        ])
    }

    fn check_sample(&self, s: &Sample<S>) -> Result<()> {
        if s.features.len() != self.feature_len() {
            return Err(Error::DimensionMismatch {
                expected: (self.feature_len(), 1),
                actual: (s.features.len(), 1),
            });
        }
        if let Some(c) = self.classes() {
            if s.label == 0 || s.label > c {
                return Err(invalid("label", format!("{} outside 1..={c}", s.label)));
            }
        }
        if s.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample features"));
        }
        Ok(())
    }

    fn sample_loss(&self, s: &Sample<S>, w: &Point<S>, scratch: &mut Scratch<S>) -> S {
        match self {
            Self::MulticlassLogistic { classes, .. } => {
                let z = &mut scratch.scores;
                z.clear();
                z.extend((0..*classes).map(|c| dot(w.column(c), &s.features)));
                log_sum_exp(z) - z[s.label - 1]
            }
            Self::OneHiddenNN { .. } => {
                let layout = self.nn_layout().expect("network layout");
                nn_forward(layout, w.as_slice(), &s.features, scratch);
                log_sum_exp(&scratch.scores) - scratch.scores[s.label - 1]
            }
            Self::SyntheticQuadratic { hessian, linear } => {
                let x = w.as_slice();
                let n = x.len();
                let mut quad = S::zero();
                for i in 0..n {
                    quad = quad + x[i] * dot(&hessian[i * n..(i + 1) * n], x);
                }
                let lin = x
                    .iter()
                    .zip(linear.as_slice())
                    .zip(&s.features)
                    .fold(S::zero(), |acc, ((&xi, &bi), &ai)| acc + xi * (bi + ai));
                S::lit(0.5) * quad + lin
            }
        }
    }

    /// `out += weight * ∇ℓ(sample, w)`
    fn accumulate_grad(&self, s: &Sample<S>, w: &Point<S>, weight: S, out: &mut Point<S>, scratch: &mut Scratch<S>) {
        match self {
            Self::MulticlassLogistic { classes, .. } => {
                let z = &mut scratch.scores;
                z.clear();
                z.extend((0..*classes).map(|c| dot(w.column(c), &s.features)));
                softmax_in_place(z);
                for c in 0..*classes {
                    let indicator = if c + 1 == s.label { S::one() } else { S::zero() };
                    let coef = weight * (z[c] - indicator);
                    for (o, &a) in out.column_mut(c).iter_mut().zip(&s.features) {
                        *o = *o + coef * a;
                    }
                }
            }
            Self::OneHiddenNN { .. } => {
                let l = self.nn_layout().expect("network layout");
                let p = w.as_slice();
                nn_forward(l, p, &s.features, scratch);
                softmax_in_place(&mut scratch.scores);
                let (m, c_n) = (l.hidden, l.classes);
                let g = out.as_mut_slice();
                let h = &scratch.hidden;
                // output layer: dz2 = p - e_y
                let dz2: Vec<S> = (0..c_n)
                    .map(|c| scratch.scores[c] - if c + 1 == s.label { S::one() } else { S::zero() })
                    .collect();
                for c in 0..c_n {
                    let coef = weight * dz2[c];
                    for j in 0..m {
                        g[l.w2() + c * m + j] = g[l.w2() + c * m + j] + coef * h[j];
                    }
                    g[l.b2() + c] = g[l.b2() + c] + coef;
                }
                // hidden layer through the sigmoid
                for j in 0..m {
                    let back = (0..c_n).fold(S::zero(), |acc, c| acc + p[l.w2() + c * m + j] * dz2[c]);
                    let dz1 = weight * back * h[j] * (S::one() - h[j]);
                    let col = l.w1() + j * l.features;
                    for (gi, &a) in g[col..col + l.features].iter_mut().zip(&s.features) {
                        *gi = *gi + dz1 * a;
                    }
                    g[l.b1() + j] = g[l.b1() + j] + dz1;
                }
            }
            Self::SyntheticQuadratic { hessian, linear } => {
                let x = w.as_slice();
                let n = x.len();
                let g = out.as_mut_slice();
                for i in 0..n {
                    let ax = dot(&hessian[i * n..(i + 1) * n], x);
                    g[i] = g[i] + weight * (ax + linear.as_slice()[i] + s.features[i]);
                }
            }
        }
    }
}

#[derive(Default)]
struct Scratch<S> {
    scores: Vec<S>,
    hidden: Vec<S>,
}

fn nn_forward<S: Scalar>(l: NnLayout, p: &[S], a: &[S], scratch: &mut Scratch<S>) {
    let (d, m) = (l.features, l.hidden);
    scratch.hidden.clear();
    scratch.hidden.extend((0..m).map(|j| {
        let col = l.w1() + j * d;
        sigmoid(dot(&p[col..col + d], a) + p[l.b1() + j])
    }));
    scratch.scores.clear();
    let h = &scratch.hidden;
    scratch
        .scores
        .extend((0..l.classes).map(|c| dot(&p[l.w2() + c * m..l.w2() + (c + 1) * m], h) + p[l.b2() + c]));
}

#[inline]
fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (&x, &y)| acc + x * y)
}

fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

fn log_sum_exp<S: Scalar>(z: &[S]) -> S {
    let max = z.iter().copied().fold(S::neg_infinity(), S::max);
    max + z.iter().map(|&v| (v - max).exp()).sum::<S>().ln()
}

fn softmax_in_place<S: Scalar>(z: &mut [S]) {
    let max = z.iter().copied().fold(S::neg_infinity(), S::max);
    let mut total = S::zero();
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        total = total + *v;
    }
    for v in z.iter_mut() {
        *v = *v / total;
    }
}

/// The round loss `f_t`: a weighted sum of per-sample terms over a shared pool.
#[derive(Clone, Debug)]
pub struct RoundLoss<S> {
    pool: Arc<[Sample<S>]>,
    terms: Vec<(usize, S)>,
    model: Arc<LossModel<S>>,
}

impl<S: Scalar> RoundLoss<S> {
    /// Round loss over `batch` (indices into `pool`) with the model's natural weights.
    pub fn new(pool: Arc<[Sample<S>]>, batch: &[usize], model: Arc<LossModel<S>>) -> Result<Self> {
        if batch.is_empty() {
            return Err(invalid("batch", "round batch must be nonempty"));
        }
        let w = match model.reduction() {
            Reduction::Sum => S::one(),
            Reduction::Mean => S::one() / S::from_usize_lossy(batch.len()),
        };
        Self::weighted(pool, batch.iter().map(|&i| (i, w)).collect(), model)
    }

    /// Round loss over an owned batch of samples.
    pub fn from_samples(samples: Vec<Sample<S>>, model: LossModel<S>) -> Result<Self> {
        let idx: Vec<usize> = (0..samples.len()).collect();
        Self::new(samples.into(), &idx, Arc::new(model))
    }

    pub fn weighted(pool: Arc<[Sample<S>]>, terms: Vec<(usize, S)>, model: Arc<LossModel<S>>) -> Result<Self> {
        if terms.is_empty() {
            return Err(invalid("batch", "round batch must be nonempty"));
        }
        for &(i, w) in &terms {
            let s = pool
                .get(i)
                .ok_or_else(|| invalid("batch", format!("index {i} outside pool of {}", pool.len())))?;
            model.check_sample(s)?;
            if !(w >= S::zero()) || !w.is_finite() {
                return Err(invalid("weight", format!("{w}")));
            }
        }
        Ok(Self { pool, terms, model })
    }

    /// The average `(1/T) Σ_t f_t`, merging terms that reference the same pool entry.
    pub fn aggregate(losses: &[RoundLoss<S>]) -> Result<Self> {
        let first = losses
            .first()
            .ok_or_else(|| invalid("losses", "need at least one round loss"))?;
        let inv_t = S::one() / S::from_usize_lossy(losses.len());
        if losses
            .iter()
            .all(|l| Arc::ptr_eq(&l.pool, &first.pool) && *l.model == *first.model)
        {
            let mut merged: BTreeMap<usize, S> = BTreeMap::new();
            for l in losses {
                for &(i, w) in &l.terms {
                    let e = merged.entry(i).or_insert(S::zero());
                    *e = *e + w * inv_t;
                }
            }
            return Ok(Self {
                pool: first.pool.clone(),
                terms: merged.into_iter().collect(),
                model: first.model.clone(),
            });
        }
        if losses.iter().any(|l| *l.model != *first.model) {
            return Err(invalid("losses", "round losses use different models"));
        }
        let mut pool = Vec::new();
        let mut terms = Vec::new();
        for l in losses {
            for &(i, w) in &l.terms {
                terms.push((pool.len(), w * inv_t));
                pool.push(l.pool[i].clone());
            }
        }
        Ok(Self {
            pool: pool.into(),
            terms,
            model: first.model.clone(),
        })
    }

    pub fn model(&self) -> &LossModel<S> {
        &self.model
    }

    pub fn model_arc(&self) -> &Arc<LossModel<S>> {
        &self.model
    }

    pub fn terms(&self) -> &[(usize, S)] {
        &self.terms
    }

    pub fn pool(&self) -> &Arc<[Sample<S>]> {
        &self.pool
    }

    pub fn samples(&self) -> impl Iterator<Item = &Sample<S>> + '_ {
        self.terms.iter().map(move |&(i, _)| &self.pool[i])
    }

    pub fn param_dims(&self) -> (usize, usize) {
        self.model.param_dims()
    }

    pub fn loss(&self, w: &Point<S>) -> Result<S> {
        w.ensure_dims(self.param_dims())?;
        let mut scratch = Scratch::default();
        Ok(self.terms.iter().fold(S::zero(), |acc, &(i, wt)| {
            acc + wt * self.model.sample_loss(&self.pool[i], w, &mut scratch)
        }))
    }

    pub fn grad_exact(&self, w: &Point<S>) -> Result<Point<S>> {
        w.ensure_dims(self.param_dims())?;
        let (rows, cols) = self.param_dims();
        let mut g = Point::zeros(rows, cols);
        let mut scratch = Scratch::default();
        for &(i, wt) in &self.terms {
            self.model.accumulate_grad(&self.pool[i], w, wt, &mut g, &mut scratch);
        }
        Ok(g)
    }

    /// `∇F(w, ξ)` where `ξ` is a pure function of `(noise.seed, round, draw)`.
    ///
    /// Evaluating two points with the same key uses the identical realization.
    pub fn grad_stochastic(&self, w: &Point<S>, noise: &NoiseSpec<S>, round: u64, draw: u64) -> Result<Point<S>> {
        w.ensure_dims(self.param_dims())?;
        let mut rng = keyed_rng(noise.seed, Domain::Gradient, round, draw);
        match noise.kind {
            NoiseKind::MinibatchSubsample { size } => {
                let n = self.terms.len();
                let (rows, cols) = self.param_dims();
                let mut g = Point::zeros(rows, cols);
                let mut scratch = Scratch::default();
                let inflate = S::from_usize_lossy(n) / S::from_usize_lossy(size);
                for _ in 0..size {
                    let (i, wt) = self.terms[rng.random_range(0..n)];
                    self.model
                        .accumulate_grad(&self.pool[i], w, wt * inflate, &mut g, &mut scratch);
                }
                Ok(g)
            }
            NoiseKind::AdditiveGaussian { sigma } => {
                let mut g = self.grad_exact(w)?;
                if sigma > S::zero() {
                    let std = sigma.to_f64_lossy() / (g.len() as f64).sqrt();
                    for v in g.as_mut_slice() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *v = *v + S::lit(std * z);
                    }
                }
                Ok(g)
            }
        }
    }

    /// Largest observed `‖∇F(w, ξ) − ∇f(w)‖` over `draws` realizations at `round`.
    pub fn noise_radius(&self, w: &Point<S>, noise: &NoiseSpec<S>, round: u64, draws: u64) -> Result<S> {
        let exact = self.grad_exact(w)?;
        let mut worst = S::zero();
        for k in 0..draws {
            worst = worst.max(self.grad_stochastic(w, noise, round, k)?.distance(&exact));
        }
        Ok(worst)
    }

    /// Empirical gradient Lipschitz constant: max `‖∇f(x) − ∇f(y)‖ / ‖x − y‖` over random feasible pairs.
    pub fn lipschitz_estimate(&self, set: &FeasibleSet<S>, pairs: usize, seed: u64) -> Result<S> {
        let mut rng = keyed_rng(seed, Domain::Probe, 0, 0);
        let mut worst = S::zero();
        for _ in 0..pairs {
            let x = set.sample(&mut rng);
            let y = set.sample(&mut rng);
            let dist = x.distance(&y);
            if dist > S::zero() {
                let ratio = self.grad_exact(&x)?.distance(&self.grad_exact(&y)?) / dist;
                worst = worst.max(ratio);
            }
        }
        Ok(worst)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseKind<S> {
    /// Draw `size` terms uniformly with replacement and reweight to stay unbiased.
    MinibatchSubsample { size: usize },
    /// Exact gradient plus `N(0, σ²/n · I)` so the noise has expected squared norm `σ²`.
    AdditiveGaussian { sigma: S },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec<S> {
    kind: NoiseKind<S>,
    pub seed: u64,
}

impl<S: Scalar> NoiseSpec<S> {
    pub fn minibatch(size: usize, seed: u64) -> Result<Self> {
        if size == 0 {
            return Err(invalid("minibatch size", "must be at least 1"));
        }
        Ok(Self {
            kind: NoiseKind::MinibatchSubsample { size },
            seed,
        })
    }

    pub fn gaussian(sigma: S, seed: u64) -> Result<Self> {
        if !(sigma >= S::zero()) || !sigma.is_finite() {
            return Err(invalid("sigma", format!("must be finite and ≥ 0, got {sigma}")));
        }
        Ok(Self {
            kind: NoiseKind::AdditiveGaussian { sigma },
            seed,
        })
    }

    pub fn kind(&self) -> NoiseKind<S> {
        self.kind
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}
