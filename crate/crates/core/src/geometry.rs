//! Constraint sets and their linear minimization oracles (LMOs).
//!
//! Every set exposes `lmo`, which is the only operation the learners need;
//! `project` exists for the comparator solver and is never called by a learner.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::point::Point;
use crate::scalar::Scalar;

/// Largest `rows * cols` accepted by [`FeasibleSet::vertex_enumerate`].
pub const MAX_ENUMERATION_ENTRIES: usize = 12;

/// Default additive tolerance for membership checks.
pub const DEFAULT_CONTAINS_TOL: f64 = 1e-9;

/// One column-wise ℓ1 ball acting on a contiguous slice of a packed parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Block<S> {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub radius: S,
}

impl<S: Scalar> Block<S> {
    #[inline]
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }

    fn diameter(&self) -> S {
        S::lit(2.0) * self.radius * S::from_usize_lossy(self.cols).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SetKind<S> {
    /// `{W : max_j Σ_i |W_ij| ≤ radius}`, i.e. every column in an ℓ1 ball.
    ColumnL1Ball { radius: S },
    /// `{x ≥ 0 : Σ x = scale}` over all entries.
    Simplex { scale: S },
    /// Euclidean (Frobenius) ball.
    L2Ball { radius: S },
    /// Product of column-wise ℓ1 balls over consecutive slices of a column vector.
    Blocks(Vec<Block<S>>),
}

/// A compact convex feasible set with its exact Euclidean diameter.
#[derive(Clone, Debug, PartialEq)]
pub struct FeasibleSet<S> {
    kind: SetKind<S>,
    dims: (usize, usize),
    diameter: S,
}

fn check_dims(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(invalid("dims", format!("must be positive, got ({rows}, {cols})")));
    }
    Ok(())
}

fn check_positive<S: Scalar>(name: &'static str, v: S) -> Result<()> {
    if !(v > S::zero()) || !v.is_finite() {
        return Err(invalid(name, format!("must be positive and finite, got {v}")));
    }
    Ok(())
}

impl<S: Scalar> FeasibleSet<S> {
    pub fn column_l1_ball(rows: usize, cols: usize, radius: S) -> Result<Self> {
        check_dims(rows, cols)?;
        check_positive("radius", radius)?;
        Ok(Self {
            kind: SetKind::ColumnL1Ball { radius },
            dims: (rows, cols),
            diameter: S::lit(2.0) * radius * S::from_usize_lossy(cols).sqrt(),
        })
    }

    pub fn simplex(rows: usize, cols: usize, scale: S) -> Result<Self> {
        check_dims(rows, cols)?;
        check_positive("scale", scale)?;
        let diameter = if rows * cols >= 2 {
            scale * S::SQRT_2()
        } else {
            S::zero()
        };
        Ok(Self {
            kind: SetKind::Simplex { scale },
            dims: (rows, cols),
            diameter,
        })
    }

    pub fn l2_ball(rows: usize, cols: usize, radius: S) -> Result<Self> {
        check_dims(rows, cols)?;
        check_positive("radius", radius)?;
        Ok(Self {
            kind: SetKind::L2Ball { radius },
            dims: (rows, cols),
            diameter: S::lit(2.0) * radius,
        })
    }

    /// Product set over a packed column vector. Blocks must tile `0..total` in order.
    pub fn blocks(blocks: Vec<Block<S>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(invalid("blocks", "at least one block required"));
        }
        let mut next = 0;
        for b in &blocks {
            check_dims(b.rows, b.cols)?;
            check_positive("radius", b.radius)?;
            if b.offset != next {
                return Err(invalid(
                    "blocks",
                    format!("block at offset {} does not follow offset {next}", b.offset),
                ));
            }
            next += b.len();
        }
        let diameter = blocks
            .iter()
            .map(|b| b.diameter() * b.diameter())
            .sum::<S>()
            .sqrt();
        Ok(Self {
            kind: SetKind::Blocks(blocks),
            dims: (next, 1),
            diameter,
        })
    }

    #[inline]
    pub fn kind(&self) -> &SetKind<S> {
        &self.kind
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    /// Exact Euclidean diameter `D`.
    #[inline]
    pub fn diameter(&self) -> S {
        self.diameter
    }

    /// A vertex minimizing `⟨direction, v⟩` over the set.
    ///
    /// Ties go to the lowest index; exactly-zero entries select the positive sign.
    pub fn lmo(&self, direction: &Point<S>) -> Result<Point<S>> {
        direction.ensure_dims(self.dims)?;
        if !direction.is_finite() {
            return Err(Error::NonFinite("lmo direction"));
        }
        let mut out = Point::zeros(self.dims.0, self.dims.1);
        match &self.kind {
            SetKind::ColumnL1Ball { radius } => {
                let rows = self.dims.0;
                for j in 0..self.dims.1 {
                    column_l1_lmo(direction.column(j), *radius, out.column_mut(j));
                    debug_assert_eq!(out.column(j).len(), rows);
                }
            }
            SetKind::Simplex { scale } => {
                let i = argmin_lowest(direction.as_slice());
                out.as_mut_slice()[i] = *scale;
            }
            SetKind::L2Ball { radius } => {
                let norm = direction.norm();
                if norm > S::zero() {
                    out = direction.scaled(-*radius / norm);
                } else {
                    out.as_mut_slice()[0] = *radius;
                }
            }
            SetKind::Blocks(blocks) => {
                let dir = direction.as_slice();
                let dst = out.as_mut_slice();
                for b in blocks {
                    let (d, o) = (&dir[b.range()], &mut dst[b.range()]);
                    for j in 0..b.cols {
                        let col = j * b.rows..(j + 1) * b.rows;
                        column_l1_lmo(&d[col.clone()], b.radius, &mut o[col]);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Whether `p` satisfies the defining inequalities within additive `tol`.
    pub fn contains(&self, p: &Point<S>, tol: S) -> bool {
        if p.dims() != self.dims || !p.is_finite() {
            return false;
        }
        match &self.kind {
            SetKind::ColumnL1Ball { radius } => {
                (0..self.dims.1).all(|j| l1(p.column(j)) <= *radius + tol)
            }
            SetKind::Simplex { scale } => {
                let xs = p.as_slice();
                xs.iter().all(|&v| v >= -tol) && (xs.iter().copied().sum::<S>() - *scale).abs() <= tol
            }
            SetKind::L2Ball { radius } => p.norm() <= *radius + tol,
            SetKind::Blocks(blocks) => {
                let xs = p.as_slice();
                blocks.iter().all(|b| {
                    let s = &xs[b.range()];
                    (0..b.cols).all(|j| l1(&s[j * b.rows..(j + 1) * b.rows]) <= b.radius + tol)
                })
            }
        }
    }

    /// All vertices of a small polytope. Only for `rows * cols ≤ 12`.
    pub fn vertex_enumerate(&self) -> Result<Vec<Point<S>>> {
        let (rows, cols) = self.dims;
        if rows * cols > MAX_ENUMERATION_ENTRIES {
            return Err(Error::Unsupported(format!(
                "instance with {} entries exceeds the limit of {MAX_ENUMERATION_ENTRIES}",
                rows * cols
            )));
        }
        match &self.kind {
            SetKind::ColumnL1Ball { radius } => {
                // Each column independently picks one of 2*rows signed scaled basis vectors.
                let per_col = 2 * rows;
                let total = per_col.pow(cols as u32);
                let mut out = Vec::with_capacity(total);
                for mut code in 0..total {
                    let mut p = Point::zeros(rows, cols);
                    for j in 0..cols {
                        let choice = code % per_col;
                        code /= per_col;
                        let sign = if choice % 2 == 0 { S::one() } else { -S::one() };
                        p.set(choice / 2, j, sign * *radius);
                    }
                    out.push(p);
                }
                Ok(out)
            }
            SetKind::Simplex { scale } => Ok((0..rows * cols)
                .map(|i| {
                    let mut p = Point::zeros(rows, cols);
                    p.as_mut_slice()[i] = *scale;
                    p
                })
                .collect()),
            SetKind::L2Ball { .. } => Err(Error::Unsupported("L2 ball has infinitely many extreme points".into())),
            SetKind::Blocks(_) => Err(Error::Unsupported("block product sets".into())),
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, p: &Point<S>) -> Result<Point<S>> {
        p.ensure_dims(self.dims)?;
        let mut out = p.clone();
        match &self.kind {
            SetKind::ColumnL1Ball { radius } => {
                for j in 0..self.dims.1 {
                    project_l1(out.column_mut(j), *radius);
                }
            }
            SetKind::Simplex { scale } => project_simplex(out.as_mut_slice(), *scale),
            SetKind::L2Ball { radius } => {
                let n = out.norm();
                if n > *radius {
                    out.scale_mut(*radius / n);
                }
            }
            SetKind::Blocks(blocks) => {
                let xs = out.as_mut_slice();
                for b in blocks {
                    let s = &mut xs[b.range()];
                    for j in 0..b.cols {
                        project_l1(&mut s[j * b.rows..(j + 1) * b.rows], b.radius);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Draws a random feasible point. Boundary points are hit with positive probability.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point<S> {
        let (rows, cols) = self.dims;
        let mut p = Point::zeros(rows, cols);
        match &self.kind {
            SetKind::ColumnL1Ball { radius } => {
                for j in 0..cols {
                    sample_l1(rng, p.column_mut(j), *radius);
                }
            }
            SetKind::Simplex { scale } => {
                let xs = p.as_mut_slice();
                let mut total = 0.0;
                for v in xs.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    total += e;
                    *v = S::lit(e);
                }
                for v in xs.iter_mut() {
                    *v = *v * *scale / S::lit(total);
                }
            }
            SetKind::L2Ball { radius } => {
                let xs = p.as_mut_slice();
                let mut sq = 0.0;
                let g: Vec<f64> = (0..xs.len())
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(rng);
                        sq += z * z;
                        z
                    })
                    .collect();
                let shrink = boundary_biased_fraction(rng).powf(1.0 / xs.len() as f64);
                let r = radius.to_f64_lossy() * shrink / sq.sqrt().max(f64::MIN_POSITIVE);
                for (v, z) in xs.iter_mut().zip(g) {
                    *v = S::lit(z * r);
                }
            }
            SetKind::Blocks(blocks) => {
                let xs = p.as_mut_slice();
                for b in blocks {
                    let s = &mut xs[b.range()];
                    for j in 0..b.cols {
                        sample_l1(rng, &mut s[j * b.rows..(j + 1) * b.rows], b.radius);
                    }
                }
            }
        }
        p
    }
}

/// Uniform on [0,1] but returns exactly 1 a quarter of the time.
fn boundary_biased_fraction<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random_bool(0.25) {
        1.0
    } else {
        rng.random::<f64>()
    }
}

fn sample_l1<S: Scalar, R: Rng + ?Sized>(rng: &mut R, col: &mut [S], radius: S) {
    let mut total = 0.0;
    let raw: Vec<f64> = (0..col.len())
        .map(|_| {
            let e: f64 = Exp1.sample(rng);
            total += e;
            if rng.random_bool(0.5) {
                e
            } else {
                -e
            }
        })
        .collect();
    let scale = radius.to_f64_lossy() * boundary_biased_fraction(rng) / total;
    for (v, e) in col.iter_mut().zip(raw) {
        *v = S::lit(e * scale);
    }
}

fn l1<S: Scalar>(xs: &[S]) -> S {
    xs.iter().fold(S::zero(), |acc, v| acc + v.abs())
}

fn argmin_lowest<S: Scalar>(xs: &[S]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v < xs[best] {
            best = i;
        }
    }
    best
}

/// Closed-form LMO of one ℓ1-ball column: `-r * sign(d_i*) e_i*` with `i* = argmax |d_i|`.
fn column_l1_lmo<S: Scalar>(dir: &[S], radius: S, out: &mut [S]) {
    let mut best = 0;
    let mut best_abs = dir[0].abs();
    for (i, v) in dir.iter().enumerate().skip(1) {
        if v.abs() > best_abs {
            best = i;
            best_abs = v.abs();
        }
    }
    out.iter_mut().for_each(|o| *o = S::zero());
    out[best] = if dir[best] > S::zero() { -radius } else { radius };
}

/// In-place projection of `v` onto `{w : Σ|w_i| ≤ radius}` by sorting.
fn project_l1<S: Scalar>(v: &mut [S], radius: S) {
    if l1(v) <= radius {
        return;
    }
    let mut mags: Vec<S> = v.iter().map(|x| x.abs()).collect();
    let theta = simplex_threshold(&mut mags, radius);
    for x in v.iter_mut() {
        let shrunk = (x.abs() - theta).max(S::zero());
        *x = if *x < S::zero() { -shrunk } else { shrunk };
    }
}

fn project_simplex<S: Scalar>(v: &mut [S], scale: S) {
    let mut sorted = v.to_vec();
    let theta = simplex_threshold(&mut sorted, scale);
    for x in v.iter_mut() {
        *x = (*x - theta).max(S::zero());
    }
}

/// Threshold `θ` with `Σ max(u_i − θ, 0) = z`; `u` is sorted in place (descending).
fn simplex_threshold<S: Scalar>(u: &mut [S], z: S) -> S {
    u.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = S::zero();
    let mut theta = S::zero();
    for (k, &uk) in u.iter().enumerate() {
        cumsum = cumsum + uk;
        let t = (cumsum - z) / S::from_usize_lossy(k + 1);
        if uk - t > S::zero() {
            theta = t;
        }
    }
    theta
}
