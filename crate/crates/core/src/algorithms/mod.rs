//! Projection-free online learners.
//!
//! - ORGFW: one Frank-Wolfe step per round driven by the recursive estimator.
//! - OSFW: the same step driven by a momentum-averaged stochastic gradient.
//! - OFW: averages the exact gradients of every past round at the current point.
//! - MORGFW / Meta-FW: a `K`-step Frank-Wolfe simulation per round whose
//!   directions come from `K` perturbed-leader learners.

mod ftpl;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

pub use ftpl::FtplState;

use crate::error::{invalid, Error, Result};
use crate::estimators::{EstimatorKind, EstimatorState, ScheduleSpec};
use crate::geometry::FeasibleSet;
use crate::metrics::{fw_gap, RoundRecord};
use crate::oracles::{NoiseSpec, RoundLoss};
use crate::point::Point;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Orgfw,
    Osfw,
    Ofw,
    MetaFw,
    Morgfw,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Orgfw,
        Algorithm::Osfw,
        Algorithm::Ofw,
        Algorithm::MetaFw,
        Algorithm::Morgfw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Orgfw => "ORGFW",
            Algorithm::Osfw => "OSFW",
            Algorithm::Ofw => "OFW",
            Algorithm::MetaFw => "MetaFW",
            Algorithm::Morgfw => "MORGFW",
        }
    }

    pub fn is_meta(self) -> bool {
        matches!(self, Algorithm::MetaFw | Algorithm::Morgfw)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                invalid(
                    "algorithm",
                    format!("unknown `{s}`, expected one of ORGFW, OSFW, OFW, MetaFW, MORGFW"),
                )
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnerConfig<S> {
    pub algo: Algorithm,
    pub schedule: ScheduleSpec<S>,
    /// Inner steps `K` of the meta learners; `None` picks the horizon-based default.
    pub inner_steps: Option<usize>,
    pub ftpl_scale: S,
    pub seed: u64,
    /// `None` feeds exact gradients.
    pub noise: Option<NoiseSpec<S>>,
    /// Horizon `T`.
    pub horizon: usize,
    /// Starting point `x_1`; defaults to the origin, or an LMO vertex if the origin is infeasible.
    pub initial: Option<Point<S>>,
}

impl<S: Scalar> LearnerConfig<S> {
    pub fn new(algo: Algorithm, horizon: usize) -> Self {
        Self {
            algo,
            schedule: ScheduleSpec::harmonic(),
            inner_steps: None,
            ftpl_scale: S::one(),
            seed: 0,
            noise: None,
            horizon,
            initial: None,
        }
    }

    pub fn with_schedule(mut self, schedule: ScheduleSpec<S>) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_noise(mut self, noise: NoiseSpec<S>) -> Self {
        self.noise = Some(noise);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_inner_steps(mut self, k: usize) -> Self {
        self.inner_steps = Some(k);
        self
    }

    pub fn with_initial(mut self, x1: Point<S>) -> Self {
        self.initial = Some(x1);
        self
    }

    /// `K`: explicit value, else `T` for MORGFW and `⌈T^{3/2}⌉` for Meta-FW.
    pub fn inner_steps(&self) -> usize {
        self.inner_steps.unwrap_or(match self.algo {
            Algorithm::MetaFw => default_meta_fw_steps(self.horizon),
            _ => self.horizon,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(invalid("T", "horizon must be at least 1"));
        }
        if self.algo.is_meta() && self.inner_steps() == 0 {
            return Err(invalid("K", "meta learners need at least one inner step"));
        }
        if !(self.ftpl_scale > S::zero()) {
            return Err(invalid("ftpl_scale", "must be positive"));
        }
        Ok(())
    }
}

/// `⌈T^{3/2}⌉` computed in integers.
pub fn default_meta_fw_steps(horizon: usize) -> usize {
    let cube = (horizon as u128).pow(3);
    let mut r = (cube as f64).sqrt() as u128;
    while r * r < cube {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= cube {
        r -= 1;
    }
    r as usize
}

/// Mutable learner state between rounds.
#[derive(Clone, Debug)]
pub struct LearnerState<S> {
    /// Next point to play (`x_t`); for meta learners, the last played point.
    pub x: Point<S>,
    /// Global initial point `x_1`.
    pub initial: Point<S>,
    pub est: Option<EstimatorState<S>>,
    /// Index of the next round, starting at 1.
    pub round: usize,
    pub ftpl: Vec<FtplState<S>>,
    pub history: Vec<RoundLoss<S>>,
}

impl<S: Scalar> LearnerState<S> {
    pub fn new(set: &FeasibleSet<S>, cfg: &LearnerConfig<S>) -> Result<Self> {
        cfg.validate()?;
        let (rows, cols) = set.dims();
        let x1 = match &cfg.initial {
            Some(x) => {
                if !set.contains(x, S::lit(crate::geometry::DEFAULT_CONTAINS_TOL)) {
                    return Err(invalid("initial", "initial point is not feasible"));
                }
                x.clone()
            }
            None => {
                let origin = Point::zeros(rows, cols);
                if set.contains(&origin, S::zero()) {
                    origin
                } else {
                    set.lmo(&origin)?
                }
            }
        };
        Ok(Self {
            x: x1.clone(),
            initial: x1,
            est: None,
            round: 1,
            ftpl: Vec::new(),
            history: Vec::new(),
        })
    }
}

/// Result of one round before metrics are attached.
#[derive(Clone, Debug)]
pub struct StepOutcome<S> {
    pub round: usize,
    pub played: Point<S>,
}

fn gradient<S: Scalar>(rl: &RoundLoss<S>, x: &Point<S>, cfg: &LearnerConfig<S>, round: usize, draw: usize) -> Result<Point<S>> {
    match &cfg.noise {
        Some(noise) => rl.grad_stochastic(x, noise, round as u64, draw as u64),
        None => rl.grad_exact(x),
    }
}

fn expect_algo<S>(cfg: &LearnerConfig<S>, allowed: &[Algorithm]) -> Result<()> {
    if allowed.contains(&cfg.algo) {
        Ok(())
    } else {
        Err(invalid("algorithm", format!("{} does not use this step", cfg.algo)))
    }
}

/// Shared Frank-Wolfe move from `x_t` toward `lmo(d_t)`.
fn frank_wolfe_move<S: Scalar>(state: &mut LearnerState<S>, set: &FeasibleSet<S>, eta: S) -> Result<StepOutcome<S>> {
    let est = state.est.as_ref().expect("estimator initialized");
    let v = set.lmo(est.estimate())?;
    let played = state.x.clone();
    state.x = played.step_toward(&v, eta);
    let round = state.round;
    state.round += 1;
    Ok(StepOutcome { round, played })
}

/// One ORGFW round: recursive estimate from gradients at `x_t` and `x_{t−1}` on the same sample.
pub fn orgfw_step<S: Scalar>(
    state: &mut LearnerState<S>,
    rl: &RoundLoss<S>,
    set: &FeasibleSet<S>,
    cfg: &LearnerConfig<S>,
) -> Result<StepOutcome<S>> {
    expect_algo(cfg, &[Algorithm::Orgfw])?;
    let t = state.round;
    let g_new = gradient(rl, &state.x, cfg, t, 0)?;
    match state.est.as_mut() {
        None => state.est = Some(EstimatorState::init(EstimatorKind::Recursive, &state.x, g_new)?),
        Some(est) => {
            let g_old = gradient(rl, est.prev_x(), cfg, t, 0)?;
            est.update(&state.x, &g_new, &g_old, cfg.schedule.at(t))?;
        }
    }
    frank_wolfe_move(state, set, cfg.schedule.at(t))
}

/// One OSFW round: momentum-averaged single stochastic gradient.
pub fn osfw_step<S: Scalar>(
    state: &mut LearnerState<S>,
    rl: &RoundLoss<S>,
    set: &FeasibleSet<S>,
    cfg: &LearnerConfig<S>,
) -> Result<StepOutcome<S>> {
    expect_algo(cfg, &[Algorithm::Osfw])?;
    let t = state.round;
    let g_new = gradient(rl, &state.x, cfg, t, 0)?;
    match state.est.as_mut() {
        None => state.est = Some(EstimatorState::init(EstimatorKind::MomentumAverage, &state.x, g_new)?),
        Some(est) => est.update(&state.x, &g_new, &g_new, cfg.schedule.at(t))?,
    }
    frank_wolfe_move(state, set, cfg.schedule.at(t))
}

/// One OFW round: the average of all past exact round gradients at the current point.
///
/// Cost grows linearly with the round index.
pub fn ofw_step<S: Scalar>(
    state: &mut LearnerState<S>,
    rl: &RoundLoss<S>,
    set: &FeasibleSet<S>,
    cfg: &LearnerConfig<S>,
) -> Result<StepOutcome<S>> {
    expect_algo(cfg, &[Algorithm::Ofw])?;
    let t = state.round;
    state.history.push(rl.clone());
    let (rows, cols) = set.dims();
    let mut avg = Point::zeros(rows, cols);
    for past in &state.history {
        avg.axpy(S::one(), &past.grad_exact(&state.x)?);
    }
    avg.scale_mut(S::one() / S::from_usize_lossy(state.history.len()));
    match state.est.as_mut() {
        None => state.est = Some(EstimatorState::init(EstimatorKind::Plain, &state.x, avg)?),
        Some(est) => est.update(&state.x, &avg, &avg, cfg.schedule.at(t))?,
    }
    frank_wolfe_move(state, set, cfg.schedule.at(t))
}

/// One round of MORGFW or Meta-FW.
///
/// Prediction: starting from `x_1`, take `K` Frank-Wolfe steps toward the base
/// learners' predictions and play the last iterate. Feedback: estimate the
/// gradient at each inner iterate (recursively for MORGFW, plainly for Meta-FW)
/// and hand it to the matching base learner as a linear loss.
pub fn morgfw_round<S: Scalar>(
    state: &mut LearnerState<S>,
    rl: &RoundLoss<S>,
    set: &FeasibleSet<S>,
    cfg: &LearnerConfig<S>,
) -> Result<StepOutcome<S>> {
    expect_algo(cfg, &[Algorithm::Morgfw, Algorithm::MetaFw])?;
    let k_steps = cfg.inner_steps();
    if k_steps == 0 {
        return Err(invalid("K", "meta learners need at least one inner step"));
    }
    if state.ftpl.is_empty() {
        state.ftpl = (0..k_steps)
            .map(|k| FtplState::seeded(set.dims(), k, cfg.ftpl_scale, cfg.horizon, cfg.seed))
            .collect();
    }
    let t = state.round;

    let mut inner = Vec::with_capacity(k_steps + 1);
    inner.push(state.initial.clone());
    let mut directions = Vec::with_capacity(k_steps);
    for k in 1..=k_steps {
        let v = state.ftpl[k - 1].predict(set)?;
        let next = inner[k - 1].step_toward(&v, cfg.schedule.at(k));
        inner.push(next);
        directions.push(v);
    }
    let played = inner[k_steps].clone();

    let mut est: Option<EstimatorState<S>> = None;
    for k in 1..=k_steps {
        let g = gradient(rl, &inner[k - 1], cfg, t, k)?;
        match (cfg.algo, est.as_mut()) {
            (Algorithm::Morgfw, Some(e)) => {
                let g_old = gradient(rl, &inner[k - 2], cfg, t, k)?;
                e.update(&inner[k - 1], &g, &g_old, cfg.schedule.at(k))?;
            }
            (Algorithm::Morgfw, None) => est = Some(EstimatorState::init(EstimatorKind::Recursive, &inner[0], g)?),
            _ => est = Some(EstimatorState::init(EstimatorKind::Plain, &inner[k - 1], g)?),
        }
        let d = est.as_ref().expect("estimate set").estimate();
        state.ftpl[k - 1].feedback(d)?;
    }

    state.x = played.clone();
    state.round += 1;
    Ok(StepOutcome { round: t, played })
}

/// Reference loss whose gradient stands in for `∇f̄` when monitoring a run.
#[derive(Clone, Debug)]
pub struct Monitor<S> {
    pub reference: RoundLoss<S>,
    pub est_error: bool,
    pub fw_gap: bool,
}

/// A learner bound to its feasible set, advancing one round per call.
#[derive(Clone, Debug)]
pub struct Learner<S> {
    cfg: LearnerConfig<S>,
    set: FeasibleSet<S>,
    state: LearnerState<S>,
}

impl<S: Scalar> Learner<S> {
    pub fn new(cfg: LearnerConfig<S>, set: FeasibleSet<S>) -> Result<Self> {
        let state = LearnerState::new(&set, &cfg)?;
        Ok(Self { cfg, set, state })
    }

    pub fn state(&self) -> &LearnerState<S> {
        &self.state
    }

    pub fn config(&self) -> &LearnerConfig<S> {
        &self.cfg
    }

    /// Plays one round and returns the played point with its metrics row.
    pub fn step(&mut self, rl: &RoundLoss<S>, monitor: Option<&Monitor<S>>) -> Result<(Point<S>, RoundRecord<S>)> {
        let start = Instant::now();
        let out = match self.cfg.algo {
            Algorithm::Orgfw => orgfw_step(&mut self.state, rl, &self.set, &self.cfg)?,
            Algorithm::Osfw => osfw_step(&mut self.state, rl, &self.set, &self.cfg)?,
            Algorithm::Ofw => ofw_step(&mut self.state, rl, &self.set, &self.cfg)?,
            Algorithm::MetaFw | Algorithm::Morgfw => morgfw_round(&mut self.state, rl, &self.set, &self.cfg)?,
        };
        let elapsed = start.elapsed().as_nanos() as u64;

        let mut rec = RoundRecord::new(out.round, rl.loss(&out.played)?);
        rec.wall_time_ns = elapsed;
        if let Some(m) = monitor {
            let g_ref = m.reference.grad_exact(&out.played)?;
            if m.est_error && !self.cfg.algo.is_meta() {
                rec.est_error = self.state.est.as_ref().map(|e| e.error(&g_ref));
            }
            if m.fw_gap {
                rec.fw_gap = Some(fw_gap(&g_ref, &out.played, &self.set)?);
            }
        }
        Ok((out.played, rec))
    }
}

/// A finite sequence of round losses, indexed from 1.
pub trait RoundSource<S> {
    /// Number of rounds available.
    fn rounds(&self) -> usize;
    fn round_loss(&self, t: usize) -> Result<RoundLoss<S>>;
}

impl<S: Scalar> RoundSource<S> for [RoundLoss<S>] {
    fn rounds(&self) -> usize {
        self.len()
    }

    fn round_loss(&self, t: usize) -> Result<RoundLoss<S>> {
        t.checked_sub(1)
            .and_then(|i| self.get(i))
            .cloned()
            .ok_or(Error::StreamExhausted {
                reached: t,
                requested: self.len(),
            })
    }
}

impl<S: Scalar> RoundSource<S> for Vec<RoundLoss<S>> {
    fn rounds(&self) -> usize {
        self.as_slice().rounds()
    }

    fn round_loss(&self, t: usize) -> Result<RoundLoss<S>> {
        self.as_slice().round_loss(t)
    }
}

/// Drives a learner over `rounds` rounds of `stream`.
pub fn run<S: Scalar, R: RoundSource<S> + ?Sized>(
    cfg: &LearnerConfig<S>,
    stream: &R,
    set: &FeasibleSet<S>,
    rounds: usize,
) -> Result<Vec<RoundRecord<S>>> {
    run_monitored(cfg, stream, set, rounds, None, |_, _| {})
}

/// [`run`] with an optional reference monitor and a callback seeing every played point.
pub fn run_monitored<S: Scalar, R: RoundSource<S> + ?Sized>(
    cfg: &LearnerConfig<S>,
    stream: &R,
    set: &FeasibleSet<S>,
    rounds: usize,
    monitor: Option<&Monitor<S>>,
    mut on_play: impl FnMut(usize, &Point<S>),
) -> Result<Vec<RoundRecord<S>>> {
    if rounds == 0 {
        return Err(invalid("T", "must be at least 1"));
    }
    let mut learner = Learner::new(cfg.clone(), set.clone())?;
    let mut records = Vec::with_capacity(rounds);
    for t in 1..=rounds {
        if t > stream.rounds() {
            return Err(Error::StreamExhausted {
                reached: t,
                requested: rounds,
            });
        }
        let rl = stream.round_loss(t)?;
        let (played, rec) = learner.step(&rl, monitor)?;
        on_play(t, &played);
        records.push(rec);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{LossModel, Sample};

    fn v(xs: &[f64]) -> Point<f64> {
        Point::vector(xs).unwrap()
    }

    /// `f(x) = ½‖x‖²` with no noise.
    fn half_norm_sq(n: usize) -> RoundLoss<f64> {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 1.0;
        }
        let model = LossModel::quadratic(a, Point::zeros(n, 1)).unwrap();
        RoundLoss::from_samples(vec![Sample::new(vec![0.0; n], 1)], model).unwrap()
    }

    fn ball() -> FeasibleSet<f64> {
        FeasibleSet::column_l1_ball(2, 1, 1.0).unwrap()
    }

    #[test]
    fn orgfw_first_two_rounds_by_hand() {
        let cfg = LearnerConfig::new(Algorithm::Orgfw, 8).with_initial(v(&[1.0, 0.0]));
        let mut learner = Learner::new(cfg, ball()).unwrap();
        let rl = half_norm_sq(2);
        let (played, _) = learner.step(&rl, None).unwrap();
        assert_eq!(played.as_slice(), &[1.0, 0.0]);
        assert_eq!(learner.state().est.as_ref().unwrap().estimate().as_slice(), &[1.0, 0.0]);
        assert_eq!(learner.state().x.as_slice(), &[0.0, 0.0]);

        // d_2 = ∇f(x_2) + (2/3)(d_1 − ∇f(x_1)) = 0, so v_2 is the tie-break vertex (1, 0).
        let (played, _) = learner.step(&rl, None).unwrap();
        assert_eq!(played.as_slice(), &[0.0, 0.0]);
        assert_eq!(learner.state().est.as_ref().unwrap().estimate().as_slice(), &[0.0, 0.0]);
        let x3 = learner.state().x.as_slice();
        assert!((x3[0] - 1.0 / 3.0).abs() < 1e-15 && x3[1] == 0.0);
    }

    #[test]
    fn osfw_diverges_from_orgfw_at_round_two() {
        let cfg = LearnerConfig::new(Algorithm::Osfw, 8).with_initial(v(&[1.0, 0.0]));
        let mut learner = Learner::new(cfg, ball()).unwrap();
        let rl = half_norm_sq(2);
        learner.step(&rl, None).unwrap();
        assert_eq!(learner.state().x.as_slice(), &[0.0, 0.0]);
        learner.step(&rl, None).unwrap();
        // d_2 = (2/3)(1,0) + (1/3)(0,0); v_2 = (−1, 0); x_3 = (2/3)·0 + (1/3)(−1, 0)
        let d = learner.state().est.as_ref().unwrap().estimate().as_slice().to_vec();
        assert!((d[0] - 2.0 / 3.0).abs() < 1e-15 && d[1] == 0.0);
        let x3 = learner.state().x.as_slice();
        assert!((x3[0] + 1.0 / 3.0).abs() < 1e-15 && x3[1] == 0.0);
    }

    #[test]
    fn ofw_first_round_is_exact_fw_step() {
        let rl = half_norm_sq(2);
        let x1 = v(&[0.5, -0.25]);
        let cfg = LearnerConfig::new(Algorithm::Ofw, 4).with_initial(x1.clone());
        let mut learner = Learner::new(cfg, ball()).unwrap();
        learner.step(&rl, None).unwrap();
        let expected = x1.step_toward(&ball().lmo(&rl.grad_exact(&x1).unwrap()).unwrap(), 0.5);
        assert_eq!(learner.state().x, expected);
    }

    #[test]
    fn ofw_matches_exact_orgfw_on_fixed_loss() {
        let rl = half_norm_sq(2);
        let stream = vec![rl; 30];
        let x1 = v(&[0.3, 0.7]);
        let mut a = Vec::new();
        let mut b = Vec::new();
        run_monitored(
            &LearnerConfig::new(Algorithm::Ofw, 30).with_initial(x1.clone()),
            &stream,
            &ball(),
            30,
            None,
            |_, x| a.push(x.clone()),
        )
        .unwrap();
        run_monitored(
            &LearnerConfig::new(Algorithm::Orgfw, 30).with_initial(x1),
            &stream,
            &ball(),
            30,
            None,
            |_, x| b.push(x.clone()),
        )
        .unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!(p.distance(q) < 1e-12);
        }
    }

    #[test]
    fn meta_single_inner_step() {
        let rl = half_norm_sq(2);
        let cfg = LearnerConfig::new(Algorithm::Morgfw, 4).with_inner_steps(1);
        let mut learner = Learner::new(cfg.clone(), ball()).unwrap();
        let (played, _) = learner.step(&rl, None).unwrap();
        let v1 = FtplState::<f64>::seeded((2, 1), 0, 1.0, 4, 0).predict(&ball()).unwrap();
        assert_eq!(played, Point::zeros(2, 1).step_toward(&v1, 0.5));
    }

    #[test]
    fn meta_rejects_zero_inner_steps() {
        let cfg = LearnerConfig::<f64>::new(Algorithm::Morgfw, 4).with_inner_steps(0);
        assert!(Learner::new(cfg, ball()).is_err());
    }

    #[test]
    fn step_functions_check_algorithm() {
        let cfg = LearnerConfig::new(Algorithm::Osfw, 4);
        let mut st = LearnerState::new(&ball(), &cfg).unwrap();
        assert!(orgfw_step(&mut st, &half_norm_sq(2), &ball(), &cfg).is_err());
    }

    #[test]
    fn meta_fw_default_inner_steps() {
        assert_eq!(default_meta_fw_steps(100), 1000);
        assert_eq!(default_meta_fw_steps(64), 512);
        assert_eq!(default_meta_fw_steps(2), 3);
        assert_eq!(default_meta_fw_steps(10), 32);
        assert_eq!(LearnerConfig::<f64>::new(Algorithm::Morgfw, 64).inner_steps(), 64);
        assert_eq!(LearnerConfig::<f64>::new(Algorithm::MetaFw, 64).inner_steps(), 512);
    }

    #[test]
    fn run_single_round_plays_initial_point() {
        let stream = vec![half_norm_sq(2)];
        let x1 = v(&[0.2, 0.1]);
        let mut seen = Vec::new();
        let recs = run_monitored(
            &LearnerConfig::new(Algorithm::Orgfw, 1).with_initial(x1.clone()),
            &stream,
            &ball(),
            1,
            None,
            |_, x| seen.push(x.clone()),
        )
        .unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].round, 1);
        assert_eq!(seen, vec![x1]);
    }

    #[test]
    fn run_reports_exhaustion() {
        let stream = vec![half_norm_sq(2); 3];
        let err = run(&LearnerConfig::new(Algorithm::Orgfw, 5), &stream, &ball(), 5).unwrap_err();
        assert!(matches!(err, Error::StreamExhausted { reached: 4, requested: 5 }));
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("SGD".parse::<Algorithm>().is_err());
    }
}
