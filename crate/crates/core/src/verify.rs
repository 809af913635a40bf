//! Numerical checks of the convergence machinery behind the learners.
//!
//! These do not prove anything; they evaluate the relevant sequences and
//! estimators exhaustively or empirically and report how close they come to
//! the claimed inequalities.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::algorithms::{run_monitored, Algorithm, Learner, LearnerConfig, Monitor};
use crate::error::{invalid, Error, Result};
use crate::estimators::ScheduleSpec;
use crate::geometry::FeasibleSet;
use crate::keyed::{keyed_rng, Domain};
use crate::oracles::{LossModel, NoiseSpec, RoundLoss, Sample};
use crate::point::Point;
use crate::scalar::Scalar;

/// Result of evaluating `s_t = Σ_{τ=2}^t (ρ_{τ−1} Π_{k=τ}^t (1 − ρ_k))²` up to `t_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceProbe<S> {
    pub alpha: S,
    pub t_max: usize,
    /// `max_{2≤t≤t_max} s_t (t+1)^α`; the claimed bound is 1.
    pub worst_ratio: S,
    pub worst_t: usize,
}

fn rho<S: Scalar>(alpha: S, k: usize) -> S {
    S::from_usize_lossy(k + 1).powf(-alpha)
}

fn check_alpha<S: Scalar>(alpha: S) -> Result<()> {
    if !(alpha > S::zero() && alpha <= S::one()) {
        return Err(invalid("alpha", format!("must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

/// Walks `s_{t+1} = (1 − ρ_{t+1})² (s_t + ρ_t²)` from `s_1 = 0`.
pub fn sequence_bound_check<S: Scalar>(alpha: S, t_max: usize) -> Result<SequenceProbe<S>> {
    check_alpha(alpha)?;
    if t_max < 2 {
        return Err(invalid("t_max", "must be at least 2"));
    }
    let mut s = S::zero();
    let mut worst = (S::neg_infinity(), 2);
    for t in 1..t_max {
        let keep = S::one() - rho(alpha, t + 1);
        let r = rho(alpha, t);
        s = keep * keep * (s + r * r);
        let ratio = s * S::from_usize_lossy(t + 2).powf(alpha);
        if ratio > worst.0 {
            worst = (ratio, t + 1);
        }
    }
    Ok(SequenceProbe {
        alpha,
        t_max,
        worst_ratio: worst.0,
        worst_t: worst.1,
    })
}

/// Recurrence value of `s_t` for every `t` in `1..=t_max` (index 0 unused).
pub fn sequence_by_recurrence<S: Scalar>(alpha: S, t_max: usize) -> Vec<S> {
    let mut out = vec![S::zero(); t_max + 1];
    for t in 1..t_max {
        let keep = S::one() - rho(alpha, t + 1);
        let r = rho(alpha, t);
        out[t + 1] = keep * keep * (out[t] + r * r);
    }
    out
}

/// `s_t` from its defining double sum, `O(t²)`.
pub fn sequence_direct<S: Scalar>(alpha: S, t: usize) -> S {
    (2..=t)
        .map(|tau| {
            let prod = (tau..=t).fold(S::one(), |p, k| p * (S::one() - rho(alpha, k)));
            let term = rho(alpha, tau - 1) * prod;
            term * term
        })
        .sum()
}

/// Largest relative error of `Π_{j=r}^K (1 − 1/(j+1))` against `r/(K+1)` over `1 ≤ r ≤ K ≤ k_max`.
pub fn product_identity_check<S: Scalar>(k_max: usize) -> Result<S> {
    if k_max < 1 {
        return Err(invalid("K_max", "must be at least 1"));
    }
    let mut worst = S::zero();
    for k in 1..=k_max {
        let mut prod = S::one();
        for r in (1..=k).rev() {
            prod = prod * (S::one() - S::one() / S::from_usize_lossy(r + 1));
            let exact = S::from_usize_lossy(r) / S::from_usize_lossy(k + 1);
            worst = worst.max(((prod - exact) / exact).abs());
        }
    }
    Ok(worst)
}

/// A stochastic problem whose mean-loss gradient is available for the probe.
#[derive(Clone, Debug)]
pub struct ProbeProblem<S> {
    /// The loss observed every round.
    pub loss: RoundLoss<S>,
    /// Loss whose gradient is `∇f̄`.
    pub reference: RoundLoss<S>,
    pub set: FeasibleSet<S>,
    /// Noise template; the seed is replaced per probe seed.
    pub noise: NoiseSpec<S>,
}

/// Quantiles across seeds of `‖ε_t‖ (t+1)^{α/2}` on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationReport<S> {
    pub grid: Vec<usize>,
    pub median: Vec<S>,
    pub p90: Vec<S>,
}

/// Runs ORGFW `n_seeds` times for `horizon` rounds and summarizes the normalized estimator error.
pub fn concentration_probe<S: Scalar>(
    problem: &ProbeProblem<S>,
    alpha: S,
    horizon: usize,
    n_seeds: usize,
    grid: &[usize],
) -> Result<ConcentrationReport<S>> {
    if n_seeds < 2 {
        return Err(invalid("n_seeds", "need at least 2 seeds for quantiles"));
    }
    if grid.iter().any(|&t| t == 0 || t > horizon) {
        return Err(invalid("grid", format!("grid points must lie in 1..={horizon}")));
    }
    let schedule = ScheduleSpec::new(alpha)?;
    let stream = vec![problem.loss.clone(); horizon];
    let monitor = Monitor {
        reference: problem.reference.clone(),
        est_error: true,
        fw_gap: false,
    };
    let mut per_grid: Vec<Vec<S>> = vec![Vec::with_capacity(n_seeds); grid.len()];
    for seed in 0..n_seeds as u64 {
        let cfg = LearnerConfig::new(Algorithm::Orgfw, horizon)
            .with_schedule(schedule)
            .with_seed(seed)
            .with_noise(problem.noise.with_seed(seed));
        let recs = run_monitored(&cfg, &stream, &problem.set, horizon, Some(&monitor), |_, _| {})?;
        for (slot, &t) in per_grid.iter_mut().zip(grid) {
            let err = recs[t - 1].est_error.expect("monitored run reports estimator error");
            slot.push(err * S::from_usize_lossy(t + 1).powf(alpha / S::lit(2.0)));
        }
    }
    Ok(ConcentrationReport {
        grid: grid.to_vec(),
        median: per_grid.iter().map(|v| quantile(v, 0.5)).collect(),
        p90: per_grid.iter().map(|v| quantile(v, 0.9)).collect(),
    })
}

/// Linear-interpolated quantile of an unsorted slice.
pub fn quantile<S: Scalar>(values: &[S], q: f64) -> S {
    if values.is_empty() {
        return S::nan();
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = S::lit(pos - lo as f64);
    v[lo] + (v[hi] - v[lo]) * frac
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FdMode {
    /// Every coordinate.
    Coordinates,
    /// This many random unit directions per point.
    Directions(usize),
}

/// Largest `|fd − analytic| / max(1, |analytic|)` of central differences against `grad_exact`.
pub fn finite_difference_check<S: Scalar>(loss: &RoundLoss<S>, points: &[Point<S>], h: S, mode: FdMode, seed: u64) -> Result<S> {
    if !(h > S::zero()) {
        return Err(invalid("h", "step must be positive"));
    }
    let rel = |fd: S, an: S| (fd - an).abs() / an.abs().max(S::one());
    let two_h = S::lit(2.0) * h;
    let mut worst = S::zero();
    let mut rng = keyed_rng(seed, Domain::Probe, 1, 0);
    for x in points {
        let g = loss.grad_exact(x)?;
        match mode {
            FdMode::Coordinates => {
                for i in 0..x.len() {
                    let mut plus = x.clone();
                    let mut minus = x.clone();
                    plus.as_mut_slice()[i] = plus.as_slice()[i] + h;
                    minus.as_mut_slice()[i] = minus.as_slice()[i] - h;
                    let fd = (loss.loss(&plus)? - loss.loss(&minus)?) / two_h;
                    worst = worst.max(rel(fd, g.as_slice()[i]));
                }
            }
            FdMode::Directions(n) => {
                for _ in 0..n {
                    let mut u = Point::zeros(x.rows(), x.cols());
                    for v in u.as_mut_slice() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *v = S::lit(z);
                    }
                    let norm = u.norm();
                    u.scale_mut(S::one() / norm);
                    let mut plus = x.clone();
                    plus.axpy(h, &u);
                    let mut minus = x.clone();
                    minus.axpy(-h, &u);
                    let fd = (loss.loss(&plus)? - loss.loss(&minus)?) / two_h;
                    worst = worst.max(rel(fd, g.dot(&u)));
                }
            }
        }
    }
    Ok(worst)
}

/// Least-squares fit of `log y = slope · log T + intercept`.
#[derive(Clone, Debug, PartialEq)]
pub struct SlopeFit<S> {
    pub slope: S,
    pub intercept: S,
    pub r_squared: S,
    pub t_grid: Vec<usize>,
}

/// Fits the median over seeds at each horizon; non-positive medians are dropped.
pub fn fit_regret_slope<S: Scalar>(runs: &[(usize, Vec<S>)]) -> Result<SlopeFit<S>> {
    let mut pts = Vec::new();
    for (t, values) in runs {
        let m = quantile(values, 0.5);
        if *t > 0 && m > S::zero() && m.is_finite() {
            pts.push((*t, m));
        }
    }
    if pts.len() < 4 {
        return Err(Error::TooFewPoints(pts.len()));
    }
    let xs: Vec<S> = pts.iter().map(|&(t, _)| S::from_usize_lossy(t).ln()).collect();
    let ys: Vec<S> = pts.iter().map(|&(_, y)| y.ln()).collect();
    let n = S::from_usize_lossy(xs.len());
    let mx = xs.iter().copied().sum::<S>() / n;
    let my = ys.iter().copied().sum::<S>() / n;
    let sxy = xs.iter().zip(&ys).map(|(&x, &y)| (x - mx) * (y - my)).sum::<S>();
    let sxx = xs.iter().map(|&x| (x - mx) * (x - mx)).sum::<S>();
    let syy = ys.iter().map(|&y| (y - my) * (y - my)).sum::<S>();
    if sxx == S::zero() {
        return Err(invalid("t_grid", "needs at least two distinct horizons"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == S::zero() {
        S::one()
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
        t_grid: pts.iter().map(|&(t, _)| t).collect(),
    })
}

/// Random logistic problem used by the self-checks.
pub fn random_logistic_loss(features: usize, classes: usize, batch: usize, seed: u64) -> Result<RoundLoss<f64>> {
    let mut rng = keyed_rng(seed, Domain::Probe, 2, 0);
    let samples = (0..batch)
        .map(|_| {
            let x = (0..features).map(|_| StandardNormal.sample(&mut rng)).collect();
            Sample::new(x, rng.random_range(1..=classes))
        })
        .collect();
    RoundLoss::from_samples(samples, LossModel::logistic(features, classes)?)
}

/// Random network problem used by the self-checks.
pub fn random_nn_loss(features: usize, hidden: usize, classes: usize, batch: usize, seed: u64) -> Result<RoundLoss<f64>> {
    let mut rng = keyed_rng(seed, Domain::Probe, 3, 0);
    let samples = (0..batch)
        .map(|_| {
            let x = (0..features).map(|_| StandardNormal.sample(&mut rng)).collect();
            Sample::new(x, rng.random_range(1..=classes))
        })
        .collect();
    RoundLoss::from_samples(samples, LossModel::one_hidden_nn(features, hidden, classes)?)
}

/// Largest `‖d_t − ∇f(x_t)‖∞` of exact-gradient ORGFW on a fixed loss over `rounds` rounds.
pub fn estimator_exactness(loss: &RoundLoss<f64>, set: &FeasibleSet<f64>, rounds: usize) -> Result<f64> {
    let mut learner = Learner::new(LearnerConfig::new(Algorithm::Orgfw, rounds), set.clone())?;
    let mut worst = 0.0_f64;
    for _ in 0..rounds {
        let (played, _) = learner.step(loss, None)?;
        let d = learner.state().est.as_ref().expect("estimator").estimate();
        worst = worst.max(d.sub(&loss.grad_exact(&played)?).norm_inf());
    }
    Ok(worst)
}

/// Largest relative gap between the LMO value and the best enumerated vertex over random directions.
pub fn lmo_enumeration_gap(set: &FeasibleSet<f64>, directions: usize, seed: u64) -> Result<f64> {
    let vertices = set.vertex_enumerate()?;
    let mut rng = keyed_rng(seed, Domain::Probe, 4, 0);
    let (rows, cols) = set.dims();
    let mut worst = 0.0_f64;
    for _ in 0..directions {
        let mut d = Point::zeros(rows, cols);
        for v in d.as_mut_slice() {
            *v = StandardNormal.sample(&mut rng);
        }
        let got = d.dot(&set.lmo(&d)?);
        let best = vertices.iter().map(|v| d.dot(v)).fold(f64::INFINITY, f64::min);
        worst = worst.max((got - best).abs() / best.abs().max(1.0));
    }
    Ok(worst)
}

/// Quadratic on a column ℓ1 ball with additive Gaussian gradient noise, for the decay probe.
pub fn gaussian_quadratic_problem(dim: usize, sigma: f64, radius: f64, seed: u64) -> Result<ProbeProblem<f64>> {
    let model = Arc::new(crate::stream::synthetic_quadratic(dim, 0.5, seed)?);
    let pool: Arc<[Sample<f64>]> = vec![Sample::new(vec![0.0; dim], 1)].into();
    let loss = RoundLoss::new(pool, &[0], model)?;
    Ok(ProbeProblem {
        reference: loss.clone(),
        loss,
        set: FeasibleSet::column_l1_ball(dim, 1, radius)?,
        noise: NoiseSpec::gaussian(sigma, 0)?,
    })
}

/// Outcome of one self-check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name: name.to_owned(),
        passed,
        detail,
    }
}

/// Runs the fast deterministic self-checks.
pub fn run_suite() -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let mut push = |name: &str, r: Result<(bool, String)>| match r {
        Ok((ok, detail)) => out.push(outcome(name, ok, detail)),
        Err(e) => out.push(outcome(name, false, format!("error: {e}"))),
    };

    for alpha in [0.5, 2.0 / 3.0, 1.0] {
        push(
            &format!("sequence bound alpha={alpha:.4}"),
            sequence_bound_check(alpha, 100_000).map(|p| {
                (
                    p.worst_ratio <= 1.0 + 1e-12,
                    format!("max s_t(t+1)^a = {:.15} at t={}", p.worst_ratio, p.worst_t),
                )
            }),
        );
    }
    push("sequence recurrence vs direct sum", (|| {
        let mut worst = 0.0_f64;
        for alpha in [0.5, 2.0 / 3.0, 1.0] {
            let rec = sequence_by_recurrence::<f64>(alpha, 200);
            for (t, &r) in rec.iter().enumerate().take(201).skip(2) {
                let d = sequence_direct(alpha, t);
                worst = worst.max((r - d).abs() / d.abs());
            }
        }
        Ok((worst <= 1e-12, format!("max relative difference {worst:.3e}")))
    })());
    push(
        "product identity K<=1000",
        product_identity_check::<f64>(1000).map(|e| (e <= 1e-10, format!("max relative error {e:.3e}"))),
    );
    push("estimator exactness (1000 rounds)", (|| {
        let loss = random_logistic_loss(5, 3, 16, 11)?;
        let set = FeasibleSet::column_l1_ball(5, 3, 2.0)?;
        let e = estimator_exactness(&loss, &set, 1000)?;
        Ok((e <= 1e-9, format!("max |d_t - grad f(x_t)|_inf = {e:.3e}")))
    })());
    push("logistic gradient vs finite differences", (|| {
        let loss = random_logistic_loss(6, 4, 10, 12)?;
        let set = FeasibleSet::column_l1_ball(6, 4, 3.0)?;
        let mut rng = keyed_rng(12, Domain::Probe, 9, 0);
        let pts: Vec<_> = (0..20).map(|_| set.sample(&mut rng)).collect();
        let e = finite_difference_check(&loss, &pts, 1e-5, FdMode::Coordinates, 0)?;
        Ok((e <= 1e-5, format!("max relative error {e:.3e}")))
    })());
    push("network gradient vs directional differences", (|| {
        let loss = random_nn_loss(5, 4, 3, 10, 13)?;
        let set = loss.model().nn_feasible_set(2.0, 2.0)?;
        let mut rng = keyed_rng(13, Domain::Probe, 9, 0);
        let pts: Vec<_> = (0..5).map(|_| set.sample(&mut rng)).collect();
        let e = finite_difference_check(&loss, &pts, 1e-5, FdMode::Directions(50), 1)?;
        Ok((e <= 1e-4, format!("max relative error {e:.3e}")))
    })());
    push("LMO vs vertex enumeration", (|| {
        let mut worst = 0.0_f64;
        for (rows, cols) in [(1, 1), (2, 1), (3, 2), (2, 6), (12, 1), (4, 3), (1, 12)] {
            for set in [
                FeasibleSet::column_l1_ball(rows, cols, 1.7)?,
                FeasibleSet::simplex(rows, cols, 0.8)?,
            ] {
                worst = worst.max(lmo_enumeration_gap(&set, 1000, (rows * 31 + cols) as u64)?);
            }
        }
        Ok((worst == 0.0, format!("max relative gap {worst:.3e}")))
    })());
    push("slope fit on exact power law", (|| {
        let runs: Vec<(usize, Vec<f64>)> = [64, 128, 256, 512, 1024]
            .into_iter()
            .map(|t| (t, vec![3.0 * (t as f64).sqrt()]))
            .collect();
        let fit = fit_regret_slope(&runs)?;
        Ok((
            (fit.slope - 0.5).abs() < 1e-12 && (fit.r_squared - 1.0).abs() < 1e-12,
            format!("slope {:.6}, r2 {:.6}", fit.slope, fit.r_squared),
        ))
    })());
    push("estimator error decay shape", (|| {
        let problem = gaussian_quadratic_problem(6, 1.0, 2.0, 5)?;
        let rep = concentration_probe(&problem, 1.0, 1000, 20, &[10, 100, 1000])?;
        let m = &rep.median;
        let ok = m[2] <= 10.0 * m[0] && m[1] <= 1.2 * m[0] && m[2] <= 1.2 * m[1];
        Ok((ok, format!("median normalized error {:.4} / {:.4} / {:.4}", m[0], m[1], m[2])))
    })());
    out
}
