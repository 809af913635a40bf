//! Gradient estimators shared by the learners.
//!
//! The estimator consumes gradients that the caller already evaluated, so the
//! same-realization coupling of the recursive correction stays visible at the
//! call site.

use crate::error::{invalid, Result};
use crate::point::Point;
use crate::scalar::Scalar;

/// Step and mixing schedule `ρ_t = η_t = 1/(t+1)^α`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleSpec<S> {
    alpha: S,
}

impl<S: Scalar> ScheduleSpec<S> {
    pub fn new(alpha: S) -> Result<Self> {
        if !(alpha > S::zero() && alpha <= S::one()) {
            return Err(invalid("alpha", format!("must lie in (0, 1], got {alpha}")));
        }
        Ok(Self { alpha })
    }

    /// `α = 1`, the convex-regret setting.
    pub fn harmonic() -> Self {
        Self { alpha: S::one() }
    }

    pub fn alpha(&self) -> S {
        self.alpha
    }

    pub fn rho(&self, t: usize) -> Result<S> {
        if t < 1 {
            return Err(invalid("t", "schedule index starts at 1"));
        }
        Ok(self.at(t))
    }

    /// Infallible form of [`rho`](Self::rho) for callers that already hold `t ≥ 1`.
    #[inline]
    pub(crate) fn at(&self, t: usize) -> S {
        debug_assert!(t >= 1);
        if self.alpha == S::one() {
            S::one() / S::from_usize_lossy(t + 1)
        } else {
            S::from_usize_lossy(t + 1).powf(-self.alpha)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorKind {
    /// `d_t = g(x_t) + (1 − ρ_t)(d_{t−1} − g(x_{t−1}))` with both gradients on the same sample.
    Recursive,
    /// `d_t = (1 − ρ_t) d_{t−1} + ρ_t g(x_t)`.
    MomentumAverage,
    /// `d_t = g(x_t)`.
    Plain,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorState<S> {
    d: Point<S>,
    prev_x: Point<S>,
    t: usize,
    kind: EstimatorKind,
}

impl<S: Scalar> EstimatorState<S> {
    /// First-round state: `d_1 = g_1`, recorded at iterate `x_1`.
    pub fn init(kind: EstimatorKind, x1: &Point<S>, g1: Point<S>) -> Result<Self> {
        g1.ensure_dims(x1.dims())?;
        if !g1.is_finite() {
            return Err(crate::Error::NonFinite("initial gradient"));
        }
        Ok(Self {
            d: g1,
            prev_x: x1.clone(),
            t: 1,
            kind,
        })
    }

    /// Advance to the next round at iterate `x_t`.
    ///
    /// `g_new = ∇F_t(x_t, ξ_t)` and `g_old = ∇F_t(x_{t−1}, ξ_t)` must share `ξ_t`;
    /// `g_old` is ignored by the non-recursive kinds.
    pub fn update(&mut self, x_t: &Point<S>, g_new: &Point<S>, g_old: &Point<S>, rho: S) -> Result<()> {
        if !(rho > S::zero() && rho <= S::one()) {
            return Err(invalid("rho", format!("must lie in (0, 1], got {rho}")));
        }
        let dims = self.d.dims();
        g_new.ensure_dims(dims)?;
        x_t.ensure_dims(dims)?;
        let keep = S::one() - rho;
        match self.kind {
            EstimatorKind::Recursive => {
                g_old.ensure_dims(dims)?;
                for ((d, &gn), &go) in self
                    .d
                    .as_mut_slice()
                    .iter_mut()
                    .zip(g_new.as_slice())
                    .zip(g_old.as_slice())
                {
                    *d = gn + keep * (*d - go);
                }
            }
            EstimatorKind::MomentumAverage => {
                for (d, &gn) in self.d.as_mut_slice().iter_mut().zip(g_new.as_slice()) {
                    *d = keep * *d + rho * gn;
                }
            }
            EstimatorKind::Plain => {
                self.d.as_mut_slice().copy_from_slice(g_new.as_slice());
            }
        }
        self.prev_x.as_mut_slice().copy_from_slice(x_t.as_slice());
        self.t += 1;
        Ok(())
    }

    /// `‖d_t − ∇f̄(x_t)‖`
    pub fn error(&self, true_grad: &Point<S>) -> S {
        self.d.distance(true_grad)
    }

    pub fn estimate(&self) -> &Point<S> {
        &self.d
    }

    pub fn prev_x(&self) -> &Point<S> {
        &self.prev_x
    }

    pub fn round(&self) -> usize {
        self.t
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Point<f64> {
        Point::vector(xs).unwrap()
    }

    #[test]
    fn rho_values() {
        let s = ScheduleSpec::<f64>::harmonic();
        assert_eq!(s.rho(3).unwrap(), 0.25);
        assert_eq!(s.rho(1).unwrap(), 0.5);
        assert!(s.rho(0).is_err());
        let s = ScheduleSpec::new(2.0 / 3.0).unwrap();
        assert!((s.rho(7).unwrap() - 0.25_f64).abs() < 1e-15);
        assert!(ScheduleSpec::new(0.0_f64).is_err());
        assert!(ScheduleSpec::new(1.5_f64).is_err());
    }

    #[test]
    fn init_sets_estimate() {
        let x = v(&[0.0, 0.0]);
        for (kind, g) in [
            (EstimatorKind::Recursive, [1.0, 0.0]),
            (EstimatorKind::Plain, [0.0, 0.0]),
            (EstimatorKind::MomentumAverage, [2.0, -1.0]),
        ] {
            let st = EstimatorState::init(kind, &x, v(&g)).unwrap();
            assert_eq!(st.estimate().as_slice(), &g);
            assert_eq!(st.round(), 1);
        }
    }

    #[test]
    fn recursive_update_substitution() {
        let x = v(&[0.0, 0.0]);
        let mut st = EstimatorState::init(EstimatorKind::Recursive, &x, v(&[1.0, 0.0])).unwrap();
        st.update(&x, &v(&[0.0, 1.0]), &v(&[1.0, 1.0]), 1.0 / 3.0).unwrap();
        // (0,1) + 2/3 * ((1,0) - (1,1)) = (0, 1/3)
        let d = st.estimate().as_slice();
        assert_eq!(d[0], 0.0);
        assert!((d[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(st.round(), 2);
    }

    #[test]
    fn full_reset_gives_fresh_gradient() {
        let x = v(&[0.0, 0.0]);
        for kind in [EstimatorKind::Recursive, EstimatorKind::MomentumAverage, EstimatorKind::Plain] {
            let mut st = EstimatorState::init(kind, &x, v(&[5.0, -3.0])).unwrap();
            st.update(&x, &v(&[0.25, 0.5]), &v(&[9.0, 9.0]), 1.0).unwrap();
            assert_eq!(st.estimate().as_slice(), &[0.25, 0.5]);
        }
    }

    #[test]
    fn rejects_bad_rho_and_dims() {
        let x = v(&[0.0]);
        let mut st = EstimatorState::init(EstimatorKind::Recursive, &x, v(&[1.0])).unwrap();
        assert!(st.update(&x, &v(&[1.0]), &v(&[1.0]), 0.0).is_err());
        assert!(st.update(&x, &v(&[1.0]), &v(&[1.0]), 1.5).is_err());
        assert!(st.update(&x, &v(&[1.0, 2.0]), &v(&[1.0]), 0.5).is_err());
    }

    #[test]
    fn error_is_euclidean() {
        let x = v(&[0.0, 0.0]);
        let st = EstimatorState::init(EstimatorKind::Plain, &x, v(&[3.0, 4.0])).unwrap();
        assert_eq!(st.error(&v(&[0.0, 0.0])), 5.0);
        assert_eq!(st.error(&v(&[3.0, 4.0])), 0.0);
        let st = EstimatorState::init(EstimatorKind::Plain, &x, v(&[1.0, 0.0])).unwrap();
        assert_eq!(st.error(&v(&[0.0, 0.0])), 1.0);
    }
}
