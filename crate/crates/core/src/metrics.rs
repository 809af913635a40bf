//! Regret, Frank-Wolfe gap, comparator computation and the closed-form regret bounds.

use crate::error::{invalid, Error, Result};
use crate::geometry::FeasibleSet;
use crate::oracles::{LossModel, RoundLoss};
use crate::point::Point;
use crate::scalar::Scalar;

/// One row of a run's per-round metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord<S> {
    pub round: usize,
    /// `f_t(x_t)` at the played point.
    pub loss: S,
    pub cum_regret: Option<S>,
    /// `‖d_t − ∇f̄(x_t)‖` when a reference gradient is available.
    pub est_error: Option<S>,
    pub fw_gap: Option<S>,
    pub wall_time_ns: u64,
}

impl<S: Scalar> RoundRecord<S> {
    pub fn new(round: usize, loss: S) -> Self {
        Self {
            round,
            loss,
            cum_regret: None,
            est_error: None,
            fw_gap: None,
            wall_time_ns: 0,
        }
    }
}

/// A fixed feasible point minimizing the cumulative loss of a round sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparator<S> {
    pub x_star: Point<S>,
    /// Average loss `(1/T) Σ_t f_t(x*)`.
    pub objective_value: S,
    /// Frank-Wolfe gap of `x*` on the average loss; bounds its suboptimality for convex losses.
    pub gap: S,
    pub method_note: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComparatorMethod {
    /// Exact-gradient Frank-Wolfe with `η_k = 2/(k+2)`.
    FrankWolfe { iters: usize },
    /// Accelerated projected gradient with backtracking and adaptive restart.
    ProjectedAccelerated { iters: usize },
    /// Both solvers; keeps the smaller certified gap.
    Auto { iters: usize },
}

/// Comparator for the average of `losses` with `iters` iterations of each solver.
///
/// Runs accelerated projected gradient and, unless its Frank-Wolfe certificate is
/// already negligible, Frank-Wolfe as well, keeping the smaller certified gap.
/// Synthetic quadratics use the analytic minimizer when it is feasible.
pub fn solve_comparator<S: Scalar>(losses: &[RoundLoss<S>], set: &FeasibleSet<S>, iters: usize) -> Result<Comparator<S>> {
    solve_comparator_with(losses, set, ComparatorMethod::Auto { iters })
}

pub fn solve_comparator_with<S: Scalar>(
    losses: &[RoundLoss<S>],
    set: &FeasibleSet<S>,
    method: ComparatorMethod,
) -> Result<Comparator<S>> {
    let iters = match method {
        ComparatorMethod::FrankWolfe { iters }
        | ComparatorMethod::ProjectedAccelerated { iters }
        | ComparatorMethod::Auto { iters } => iters,
    };
    if iters == 0 {
        return Err(invalid("iters", "must be at least 1"));
    }
    let avg = RoundLoss::aggregate(losses)?;
    if !avg.model().is_convex() {
        return Err(Error::ComparatorUndefined(
            "nonconvex model; report the Frank-Wolfe gap instead".into(),
        ));
    }
    if set.dims() != avg.param_dims() {
        return Err(Error::DimensionMismatch {
            expected: avg.param_dims(),
            actual: set.dims(),
        });
    }

    if let Some(x) = quadratic_stationary_point(&avg)? {
        if set.contains(&x, S::lit(1e-12)) {
            let g = avg.grad_exact(&x)?;
            return Ok(Comparator {
                objective_value: avg.loss(&x)?,
                gap: fw_gap(&g, &x, set)?,
                x_star: x,
                method_note: "analytic stationary point (feasible)".into(),
            });
        }
    }

    match method {
        ComparatorMethod::FrankWolfe { iters } => frank_wolfe(&avg, set, iters),
        ComparatorMethod::ProjectedAccelerated { iters } => projected_accelerated(&avg, set, iters),
        ComparatorMethod::Auto { iters } => {
            let apg = projected_accelerated(&avg, set, iters).ok();
            if let Some(a) = &apg {
                if a.gap <= S::lit(1e-11) * a.objective_value.abs().max(S::one()) {
                    return Ok(apg.unwrap());
                }
            }
            let fw = frank_wolfe(&avg, set, iters)?;
            match apg {
                Some(a) if a.gap < fw.gap => Ok(a),
                _ => Ok(fw),
            }
        }
    }
}

fn frank_wolfe<S: Scalar>(avg: &RoundLoss<S>, set: &FeasibleSet<S>, iters: usize) -> Result<Comparator<S>> {
    let (rows, cols) = set.dims();
    let mut x = Point::zeros(rows, cols);
    // The first step uses η = 1, so the start only needs the right shape.
    let mut best: Option<(S, Point<S>)> = None;
    for k in 0..iters {
        let g = avg.grad_exact(&x)?;
        let v = set.lmo(&g)?;
        if k > 0 {
            let gap = g.dot(&x.sub(&v));
            if best.as_ref().is_none_or(|(b, _)| gap < *b) {
                best = Some((gap, x.clone()));
            }
        }
        let eta = S::lit(2.0) / S::from_usize_lossy(k + 2);
        x = x.step_toward(&v, eta);
    }
    let g = avg.grad_exact(&x)?;
    let gap = fw_gap(&g, &x, set)?;
    let (gap, x) = match best {
        Some((b, bx)) if b < gap => (b, bx),
        _ => (gap, x),
    };
    Ok(Comparator {
        objective_value: avg.loss(&x)?,
        gap,
        x_star: x,
        method_note: format!("Frank-Wolfe, eta_k = 2/(k+2), {iters} iterations, smallest-gap iterate"),
    })
}

fn projected_accelerated<S: Scalar>(avg: &RoundLoss<S>, set: &FeasibleSet<S>, iters: usize) -> Result<Comparator<S>> {
    let (rows, cols) = set.dims();
    let mut x = set.project(&Point::zeros(rows, cols))?;
    let mut fx = avg.loss(&x)?;
    let mut best = (fw_gap(&avg.grad_exact(&x)?, &x, set)?, x.clone(), fx);
    let mut y = x.clone();
    let mut momentum = S::one();
    let mut lip = S::one();
    let mut used = 0;
    for _ in 0..iters {
        if best.0 <= S::lit(1e-11) * best.2.abs().max(S::one()) {
            break;
        }
        used += 1;
        let fy = avg.loss(&y)?;
        let gy = avg.grad_exact(&y)?;
        // backtracking on the quadratic upper model
        let (x_next, f_next) = loop {
            let cand = set.project(&y.sub(&gy.scaled(S::one() / lip)))?;
            let diff = cand.sub(&y);
            let f_cand = avg.loss(&cand)?;
            let model = fy + gy.dot(&diff) + S::lit(0.5) * lip * diff.norm_sq();
            if f_cand <= model + S::lit(1e-14) * fy.abs().max(S::one()) || lip > S::lit(1e30) {
                break (cand, f_cand);
            }
            lip = lip * S::lit(2.0);
        };
        let next_momentum = (S::one() + (S::one() + S::lit(4.0) * momentum * momentum).sqrt()) / S::lit(2.0);
        if f_next > fx && momentum > S::one() {
            momentum = S::one();
            y = x.clone();
            continue;
        }
        let beta = (momentum - S::one()) / next_momentum;
        y = x_next.add(&x_next.sub(&x).scaled(beta));
        x = x_next;
        fx = f_next;
        momentum = next_momentum;
        lip = lip * S::lit(0.9);
        let gap = fw_gap(&avg.grad_exact(&x)?, &x, set)?;
        if gap < best.0 {
            best = (gap, x.clone(), fx);
        }
    }
    let (gap, x_star, objective_value) = best;
    Ok(Comparator {
        objective_value,
        gap,
        x_star,
        method_note: format!("accelerated projected gradient with restart, {used} of {iters} iterations, smallest-gap iterate"),
    })
}

/// Unconstrained minimizer of an averaged synthetic quadratic, if the model is one.
fn quadratic_stationary_point<S: Scalar>(avg: &RoundLoss<S>) -> Result<Option<Point<S>>> {
    let LossModel::SyntheticQuadratic { hessian, linear } = avg.model() else {
        return Ok(None);
    };
    let n = linear.len();
    let total: S = avg.terms().iter().map(|&(_, w)| w).sum();
    let mut rhs: Vec<S> = linear.as_slice().iter().map(|&b| -b * total).collect();
    for s_w in avg.terms() {
        let s = &avg.pool()[s_w.0];
        for (r, &a) in rhs.iter_mut().zip(&s.features) {
            *r = *r - s_w.1 * a;
        }
    }
    let a: Vec<S> = hessian.iter().map(|&h| h * total).collect();
    let Some(sol) = solve_dense(a, rhs, n) else {
        return Ok(None);
    };
    let (rows, cols) = linear.dims();
    Ok(Point::from_col_major(rows, cols, sol).ok())
}

/// Gaussian elimination with partial pivoting on a row-major `n × n` system.
fn solve_dense<S: Scalar>(mut a: Vec<S>, mut b: Vec<S>, n: usize) -> Option<Vec<S>> {
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i * n + col]
                .abs()
                .partial_cmp(&a[j * n + col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot * n + col].abs() <= S::epsilon() {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
            }
            b.swap(pivot, col);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] = a[row * n + k] - f * a[col * n + k];
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let mut x = vec![S::zero(); n];
    for row in (0..n).rev() {
        let tail = (row + 1..n).fold(S::zero(), |acc, k| acc + a[row * n + k] * x[k]);
        x[row] = (b[row] - tail) / a[row * n + row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Cumulative regret `Σ_{s≤t} (f_s(x_s) − f_s(x*))` using the recorded `f_s(x_s)`.
pub fn regret_curve<S: Scalar>(
    records: &[RoundRecord<S>],
    losses: &[RoundLoss<S>],
    comparator: &Comparator<S>,
) -> Result<Vec<S>> {
    if records.len() != losses.len() {
        return Err(invalid(
            "records",
            format!("{} records for {} losses", records.len(), losses.len()),
        ));
    }
    let mut acc = S::zero();
    records
        .iter()
        .zip(losses)
        .map(|(r, f)| {
            acc = acc + r.loss - f.loss(&comparator.x_star)?;
            Ok(acc)
        })
        .collect()
}

/// Writes the regret curve into the records' `cum_regret` fields.
pub fn attach_regret<S: Scalar>(
    records: &mut [RoundRecord<S>],
    losses: &[RoundLoss<S>],
    comparator: &Comparator<S>,
) -> Result<()> {
    let curve = regret_curve(records, losses, comparator)?;
    for (r, c) in records.iter_mut().zip(curve) {
        r.cum_regret = Some(c);
    }
    Ok(())
}

/// Frank-Wolfe gap `max_{u∈C} ⟨g, x − u⟩ = ⟨g, x⟩ − ⟨g, lmo(g)⟩`.
pub fn fw_gap<S: Scalar>(grad: &Point<S>, x: &Point<S>, set: &FeasibleSet<S>) -> Result<S> {
    x.ensure_dims(set.dims())?;
    let v = set.lmo(grad)?;
    Ok(grad.dot(x) - grad.dot(&v))
}

/// Problem constants entering the high-probability regret bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundParams<S> {
    /// Gradient Lipschitz constant.
    pub l: S,
    /// Diameter of the feasible set.
    pub d: S,
    /// Stochastic-gradient deviation from `∇f̄`.
    pub sigma: S,
    /// Stochastic-gradient deviation from `∇f_t` (adversarial setting).
    pub sigma_hat: S,
    /// Bound on `|f_t − f̄|`.
    pub m: S,
    /// Initial suboptimality; `f̄(x_1) − f̄(x*)` in the stochastic bound.
    pub q: S,
    pub delta: S,
}

impl<S: Scalar> BoundParams<S> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("L", self.l),
            ("D", self.d),
            ("sigma", self.sigma),
            ("sigma_hat", self.sigma_hat),
            ("M", self.m),
            ("Q", self.q),
        ] {
            if !(v >= S::zero()) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "bound constant",
                    reason: format!("{name} = {v} must be finite and ≥ 0"),
                });
            }
        }
        if !(self.delta > S::zero() && self.delta < S::one()) {
            return Err(invalid("delta", format!("must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }
}

/// High-probability stochastic-setting regret bound of the recursive-gradient learner with `α = 1`:
///
/// `(log T + 1) Q + L D² (log T + 1)² / 2 + (16 L D² + 16 σ D + 4 M) √(2 T log(8T/δ))`.
pub fn theoretical_regret_bound<S: Scalar>(p: &BoundParams<S>, rounds: usize) -> S {
    let t = S::from_usize_lossy(rounds);
    let log1 = t.ln() + S::one();
    let c16 = S::lit(16.0);
    log1 * p.q
        + p.l * p.d * p.d * log1 * log1 / S::lit(2.0)
        + (c16 * p.l * p.d * p.d + c16 * p.sigma * p.d + S::lit(4.0) * p.m)
            * (S::lit(2.0) * t * (S::lit(8.0) * t / p.delta).ln()).sqrt()
}

/// Adversarial-setting regret bound of the meta learner with `K = T`, given base-learner regret:
///
/// `16 (L D² + σ̂ D) √(2 T log(4T²/δ)) + 2 L D² log(T+1) + Q + R_E`.
pub fn adversarial_regret_bound<S: Scalar>(p: &BoundParams<S>, rounds: usize, base_regret: S) -> S {
    let t = S::from_usize_lossy(rounds);
    S::lit(16.0)
        * (p.l * p.d * p.d + p.sigma_hat * p.d)
        * (S::lit(2.0) * t * (S::lit(4.0) * t * t / p.delta).ln()).sqrt()
        + S::lit(2.0) * p.l * p.d * p.d * (t + S::one()).ln()
        + p.q
        + base_regret
}
