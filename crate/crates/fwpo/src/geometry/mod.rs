//! Convex constraint sets over action vectors, with the three oracles every
//! algorithm in this crate is built on: membership, linear maximization, and
//! Euclidean projection.
//!
//! A [`ConstraintSet`] is a tagged union of leaf sets plus one combinator,
//! `Intersection`. Leaves have closed-form or one-dimensional-solvable
//! projections; intersections are projected with Dykstra's alternating
//! projections. Linear maximization over purely polyhedral sets goes through
//! an exact two-phase simplex; intersections with a nonlinear member fall
//! back to projected gradient ascent, which is exact in the limit for linear
//! objectives over convex compacts.

mod dykstra;
mod simplex;
mod vertices;

pub use simplex::simplex_solve;
pub use vertices::enumerate_vertices;

use crate::linalg::{self, Matrix};
use crate::scalar::Scalar;

/// Default feasibility tolerance used throughout the crate.
pub const DEFAULT_TOL: f64 = 1e-6;

const DYKSTRA_TOL: f64 = 1e-8;
const DYKSTRA_MAX_PASSES: usize = 10_000;
const PGA_STEP_FRACTION: f64 = 0.1;
const PGA_MAX_ITERS: usize = 1_000;
const PGA_MOVE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, thiserror::Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid constraint set: {0}")]
    InvalidSet(String),
    #[error("constraint set is unbounded; linear maximization and diameter are undefined")]
    Unbounded,
    #[error("linear program infeasible")]
    Infeasible,
    #[error("point is infeasible (violation {violation:.3e})")]
    InfeasiblePoint { violation: f64 },
    #[error("projection did not converge after {passes} passes (residual {residual:.3e})")]
    ProjectionDidNotConverge {
        passes: usize,
        residual: f64,
        last: Vec<f64>,
    },
    #[error("linear maximization did not converge (last movement {residual:.3e})")]
    LmoDidNotConverge { residual: f64 },
}

/// Convex feasible-action set.
///
/// Immutable after construction; all oracle operations are pure functions of
/// the set and their inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintSet<R> {
    /// `lo ≤ x ≤ hi` componentwise.
    Box { lo: Vec<R>, hi: Vec<R> },
    /// `A x ≤ b`, one row per halfspace.
    Halfspaces { a: Matrix<R>, b: Vec<R> },
    /// `E x = d`, one row per hyperplane.
    Hyperplanes { e: Matrix<R>, d: Vec<R> },
    /// `‖x − center‖₂ ≤ radius`.
    L2Ball { center: Vec<R>, radius: R },
    /// For each group `(g, r)`: `Σ_{i∈g} x_i² ≤ r²`. Groups are disjoint.
    QuadraticGroups {
        dim: usize,
        groups: Vec<(Vec<usize>, R)>,
    },
    /// `Σ_i |w_i x_i| ≤ budget`.
    WeightedL1 { weights: Vec<R>, budget: R },
    /// Intersection of members, carrying a known feasible anchor point.
    Intersection {
        members: Vec<ConstraintSet<R>>,
        anchor: Vec<R>,
    },
}

impl<R: Scalar> ConstraintSet<R> {
    pub fn box_set(lo: Vec<R>, hi: Vec<R>) -> Result<Self, GeometryError> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(GeometryError::InvalidSet(
                "box bounds must be nonempty and same length".into(),
            ));
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(GeometryError::InvalidSet(
                "box requires lo <= hi componentwise".into(),
            ));
        }
        Ok(Self::Box { lo, hi })
    }

    pub fn halfspaces(a: Matrix<R>, b: Vec<R>) -> Result<Self, GeometryError> {
        if a.rows() == 0 || a.cols() == 0 || a.rows() != b.len() {
            return Err(GeometryError::InvalidSet(
                "halfspace system shape mismatch".into(),
            ));
        }
        for i in 0..a.rows() {
            if linalg::norm2(a.row(i)) < R::of(1e-12) {
                return Err(GeometryError::InvalidSet(format!(
                    "halfspace row {i} has zero normal"
                )));
            }
        }
        Ok(Self::Halfspaces { a, b })
    }

    pub fn hyperplanes(e: Matrix<R>, d: Vec<R>) -> Result<Self, GeometryError> {
        if e.rows() == 0 || e.cols() == 0 || e.rows() != d.len() {
            return Err(GeometryError::InvalidSet(
                "hyperplane system shape mismatch".into(),
            ));
        }
        for i in 0..e.rows() {
            if linalg::norm2(e.row(i)) < R::of(1e-12) {
                return Err(GeometryError::InvalidSet(format!(
                    "hyperplane row {i} has zero normal"
                )));
            }
        }
        Ok(Self::Hyperplanes { e, d })
    }

    pub fn l2_ball(center: Vec<R>, radius: R) -> Result<Self, GeometryError> {
        if center.is_empty() {
            return Err(GeometryError::InvalidSet(
                "ball center must be nonempty".into(),
            ));
        }
        if !(radius > R::zero()) {
            return Err(GeometryError::InvalidSet(
                "ball radius must be positive".into(),
            ));
        }
        Ok(Self::L2Ball { center, radius })
    }

    pub fn quadratic_groups(
        dim: usize,
        groups: Vec<(Vec<usize>, R)>,
    ) -> Result<Self, GeometryError> {
        if dim == 0 || groups.is_empty() {
            return Err(GeometryError::InvalidSet(
                "quadratic groups need dim > 0 and at least one group".into(),
            ));
        }
        let mut seen = vec![false; dim];
        for (idx, (group, radius)) in groups.iter().enumerate() {
            if group.is_empty() {
                return Err(GeometryError::InvalidSet(format!(
                    "quadratic group {idx} is empty"
                )));
            }
            if !(*radius > R::zero()) {
                return Err(GeometryError::InvalidSet(format!(
                    "quadratic group {idx} needs radius > 0"
                )));
            }
            for &i in group {
                if i >= dim {
                    return Err(GeometryError::InvalidSet(format!(
                        "quadratic group {idx} index {i} out of range"
                    )));
                }
                if seen[i] {
                    // Disjointness keeps the leaf projection exact (per-group radial shrink).
                    return Err(GeometryError::InvalidSet(format!(
                        "quadratic groups overlap at coordinate {i}"
                    )));
                }
                seen[i] = true;
            }
        }
        Ok(Self::QuadraticGroups { dim, groups })
    }

    pub fn weighted_l1(weights: Vec<R>, budget: R) -> Result<Self, GeometryError> {
        if weights.is_empty() {
            return Err(GeometryError::InvalidSet(
                "weighted-L1 needs at least one weight".into(),
            ));
        }
        if !(budget > R::zero()) {
            return Err(GeometryError::InvalidSet(
                "weighted-L1 budget must be positive".into(),
            ));
        }
        Ok(Self::WeightedL1 { weights, budget })
    }

    /// Members must share the anchor's dimension and the anchor must be
    /// feasible at [`DEFAULT_TOL`]. A weighted-L1 member with zero weights is
    /// accepted only when every zero-weight coordinate is bounded by some
    /// other member.
    pub fn intersection(
        members: Vec<ConstraintSet<R>>,
        anchor: Vec<R>,
    ) -> Result<Self, GeometryError> {
        if members.is_empty() {
            return Err(GeometryError::InvalidSet(
                "intersection needs at least one member".into(),
            ));
        }
        let n = anchor.len();
        for m in &members {
            if m.dim() != n {
                return Err(GeometryError::DimensionMismatch {
                    expected: n,
                    got: m.dim(),
                });
            }
        }
        let worst = members
            .iter()
            .map(|m| m.violation(&anchor))
            .fold(R::zero(), R::max);
        if worst > R::of(DEFAULT_TOL) {
            return Err(GeometryError::InvalidSet(
                "intersection anchor is not feasible".into(),
            ));
        }
        let mut covered = vec![false; n];
        for m in &members {
            for (c, b) in covered.iter_mut().zip(m.bounded_coords()) {
                *c = *c || b;
            }
        }
        for m in &members {
            if let Self::WeightedL1 { weights, .. } = m {
                for (i, w) in weights.iter().enumerate() {
                    if *w == R::zero() && !covered[i] {
                        return Err(GeometryError::InvalidSet(format!(
                            "weighted-L1 leaves coordinate {i} unconstrained and no member bounds it"
                        )));
                    }
                }
            }
        }
        Ok(Self::Intersection { members, anchor })
    }

    /// Ambient dimension N.
    pub fn dim(&self) -> usize {
        match self {
            Self::Box { lo, .. } => lo.len(),
            Self::Halfspaces { a, .. } => a.cols(),
            Self::Hyperplanes { e, .. } => e.cols(),
            Self::L2Ball { center, .. } => center.len(),
            Self::QuadraticGroups { dim, .. } => *dim,
            Self::WeightedL1 { weights, .. } => weights.len(),
            Self::Intersection { anchor, .. } => anchor.len(),
        }
    }

    /// Which coordinates this set bounds along the axes.
    fn bounded_coords(&self) -> Vec<bool> {
        match self {
            Self::Box { lo, .. } => vec![true; lo.len()],
            Self::L2Ball { center, .. } => vec![true; center.len()],
            Self::Halfspaces { a, .. } => vec![false; a.cols()],
            Self::Hyperplanes { e, .. } => vec![false; e.cols()],
            Self::QuadraticGroups { dim, groups } => {
                let mut v = vec![false; *dim];
                for (g, _) in groups {
                    for &i in g {
                        v[i] = true;
                    }
                }
                v
            }
            Self::WeightedL1 { weights, .. } => weights.iter().map(|w| *w != R::zero()).collect(),
            Self::Intersection { members, anchor } => {
                let mut v = vec![false; anchor.len()];
                for m in members {
                    for (vi, mi) in v.iter_mut().zip(m.bounded_coords()) {
                        *vi = *vi || mi;
                    }
                }
                v
            }
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.bounded_coords().into_iter().all(|b| b)
    }

    /// Axis-aligned box enclosing the set; errors when some coordinate is
    /// unbounded.
    pub fn enclosing_box(&self) -> Result<(Vec<R>, Vec<R>), GeometryError> {
        let (lo, hi) = self.enclosing_box_raw();
        if lo.iter().any(|v| v.is_infinite()) || hi.iter().any(|v| v.is_infinite()) {
            return Err(GeometryError::Unbounded);
        }
        Ok((lo, hi))
    }

    fn enclosing_box_raw(&self) -> (Vec<R>, Vec<R>) {
        let n = self.dim();
        match self {
            Self::Box { lo, hi } => (lo.clone(), hi.clone()),
            Self::L2Ball { center, radius } => (
                center.iter().map(|c| *c - *radius).collect(),
                center.iter().map(|c| *c + *radius).collect(),
            ),
            Self::QuadraticGroups { dim, groups } => {
                let mut lo = vec![R::neg_infinity(); *dim];
                let mut hi = vec![R::infinity(); *dim];
                for (g, r) in groups {
                    for &i in g {
                        lo[i] = -*r;
                        hi[i] = *r;
                    }
                }
                (lo, hi)
            }
            Self::WeightedL1 { weights, budget } => {
                let mut lo = vec![R::neg_infinity(); weights.len()];
                let mut hi = vec![R::infinity(); weights.len()];
                for (i, w) in weights.iter().enumerate() {
                    if *w != R::zero() {
                        let semi = *budget / w.abs();
                        lo[i] = -semi;
                        hi[i] = semi;
                    }
                }
                (lo, hi)
            }
            Self::Halfspaces { .. } | Self::Hyperplanes { .. } => {
                (vec![R::neg_infinity(); n], vec![R::infinity(); n])
            }
            Self::Intersection { members, .. } => {
                let mut lo = vec![R::neg_infinity(); n];
                let mut hi = vec![R::infinity(); n];
                for m in members {
                    let (mlo, mhi) = m.enclosing_box_raw();
                    for i in 0..n {
                        if mlo[i] > lo[i] {
                            lo[i] = mlo[i];
                        }
                        if mhi[i] < hi[i] {
                            hi[i] = mhi[i];
                        }
                    }
                }
                (lo, hi)
            }
        }
    }

    /// A deterministic feasible point: the box's lower corner, a ball's
    /// center, the origin for quadratic groups and weighted-L1 sets, the
    /// stored anchor of an intersection, and the projection of the origin for
    /// halfspace/hyperplane systems.
    pub fn feasible_point(&self) -> Result<Vec<R>, GeometryError> {
        match self {
            Self::Box { lo, .. } => Ok(lo.clone()),
            Self::L2Ball { center, .. } => Ok(center.clone()),
            Self::QuadraticGroups { dim, .. } => Ok(vec![R::zero(); *dim]),
            Self::WeightedL1 { weights, .. } => Ok(vec![R::zero(); weights.len()]),
            Self::Intersection { anchor, .. } => Ok(anchor.clone()),
            Self::Halfspaces { .. } | Self::Hyperplanes { .. } => {
                self.project(&vec![R::zero(); self.dim()])
            }
        }
    }

    /// True iff every defining inequality/equality holds within additive
    /// slack `tol`. Norm constraints compare norms, so the slack has distance
    /// units there.
    pub fn contains(&self, z: &[R], tol: R) -> Result<bool, GeometryError> {
        if z.len() != self.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(self.violation(z) <= tol)
    }

    /// Largest constraint violation at `z` (zero when feasible).
    pub fn violation(&self, z: &[R]) -> R {
        let zero = R::zero();
        match self {
            Self::Box { lo, hi } => z
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(x, (l, h))| (*l - *x).max(*x - *h).max(zero))
                .fold(zero, R::max),
            Self::Halfspaces { a, b } => (0..a.rows())
                .map(|i| (linalg::dot(a.row(i), z) - b[i]).max(zero))
                .fold(zero, R::max),
            Self::Hyperplanes { e, d } => (0..e.rows())
                .map(|i| (linalg::dot(e.row(i), z) - d[i]).abs())
                .fold(zero, R::max),
            Self::L2Ball { center, radius } => (linalg::dist2(z, center) - *radius).max(zero),
            Self::QuadraticGroups { groups, .. } => groups
                .iter()
                .map(|(g, r)| {
                    let norm = g.iter().map(|&i| z[i] * z[i]).sum::<R>().sqrt();
                    (norm - *r).max(zero)
                })
                .fold(zero, R::max),
            Self::WeightedL1 { weights, budget } => {
                let s = weights
                    .iter()
                    .zip(z)
                    .map(|(w, x)| (*w * *x).abs())
                    .sum::<R>();
                (s - *budget).max(zero)
            }
            Self::Intersection { members, .. } => {
                members.iter().map(|m| m.violation(z)).fold(zero, R::max)
            }
        }
    }

    /// Euclidean projection: the nearest feasible point to `z`.
    pub fn project(&self, z: &[R]) -> Result<Vec<R>, GeometryError> {
        if z.len() != self.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        dykstra::project(self, z)
    }

    /// Linear maximization oracle: a point of the set maximizing `⟨c, g⟩`.
    ///
    /// Purely polyhedral sets are solved exactly (vertex result); an
    /// intersection with a nonlinear member runs projected gradient ascent
    /// from the anchor. With `g = 0` the anchor/center/lo point is returned.
    pub fn lmo(&self, g: &[R]) -> Result<Vec<R>, GeometryError> {
        if g.len() != self.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                got: g.len(),
            });
        }
        if !self.is_bounded() {
            return Err(GeometryError::Unbounded);
        }
        match self {
            Self::Box { lo, hi } => Ok(g
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(gi, (l, h))| if *gi > R::zero() { *h } else { *l })
                .collect()),
            Self::L2Ball { center, radius } => {
                let gnorm = linalg::norm2(g);
                if gnorm == R::zero() {
                    return Ok(center.clone());
                }
                Ok(center
                    .iter()
                    .zip(g)
                    .map(|(c, gi)| *c + *radius * *gi / gnorm)
                    .collect())
            }
            Self::QuadraticGroups { dim, groups } => {
                let mut out = vec![R::zero(); *dim];
                for (group, r) in groups {
                    let gnorm = group.iter().map(|&i| g[i] * g[i]).sum::<R>().sqrt();
                    if gnorm > R::zero() {
                        for &i in group {
                            out[i] = *r * g[i] / gnorm;
                        }
                    }
                }
                Ok(out)
            }
            Self::WeightedL1 { weights, budget } => {
                // Scaled cross-polytope: the optimum sits on a vertex ±(p/w_i)·e_i.
                let mut best: Option<(usize, R)> = None;
                for (i, w) in weights.iter().enumerate() {
                    let semi = *budget / w.abs();
                    let value = g[i].abs() * semi;
                    let better = match best {
                        None => true,
                        Some((_, bv)) => value > bv,
                    };
                    if better {
                        best = Some((i, value));
                    }
                }
                let mut out = vec![R::zero(); weights.len()];
                let (i, value) = best.expect("nonempty weights");
                if value > R::zero() {
                    let semi = *budget / weights[i].abs();
                    out[i] = if g[i] >= R::zero() { semi } else { -semi };
                }
                Ok(out)
            }
            Self::Halfspaces { .. } | Self::Hyperplanes { .. } => Err(GeometryError::Unbounded),
            Self::Intersection { anchor, .. } => {
                let gnorm = linalg::norm2(g);
                if gnorm == R::zero() {
                    return Ok(anchor.clone());
                }
                if let Some((a, b, e, d)) = self.flatten_polyhedral() {
                    return simplex::simplex_solve(&a, &b, &e, &d, g);
                }
                // Projected gradient ascent from the anchor, with an adaptive
                // step around the nominal 0.1·diameter/‖g‖. For a linear
                // objective the projected step never decreases the value, so
                // the step doubles while the objective improves (handles
                // gradients nearly perpendicular to a face, where the iterate
                // would otherwise crawl tangentially) and halves when it
                // stalls (handles oscillation around corner optima). Movement
                // is bounded by the step, so the stop criteria terminate.
                let diameter = self.diameter()?;
                let nominal = R::of(PGA_STEP_FRACTION) * diameter / gnorm;
                let min_step = R::of(1e-9) * diameter / gnorm;
                let mut step = nominal;
                let mut x = anchor.clone();
                let mut value = linalg::dot(&x, g);
                let mut movement = R::infinity();
                let mut shrinking = false;
                for _ in 0..PGA_MAX_ITERS {
                    let mut trial = x.clone();
                    linalg::axpy(&mut trial, step, g);
                    let next = dykstra::project(self, &trial)?;
                    movement = linalg::dist2(&next, &x);
                    let next_value = linalg::dot(&next, g);
                    let progress = next_value - value;
                    x = next;
                    value = next_value;
                    if movement < R::of(PGA_MOVE_TOL) {
                        return Ok(x);
                    }
                    if progress <= R::of(1e-14) * (R::one() + value.abs()) {
                        // First stall ends the travel phase; from here the
                        // step only decays, so termination is guaranteed.
                        shrinking = true;
                        step = step * R::of(0.5);
                        if step < min_step {
                            return Ok(x);
                        }
                    } else if !shrinking {
                        step = step * R::of(2.0);
                    }
                }
                Err(GeometryError::LmoDidNotConverge {
                    residual: movement.as_f64(),
                })
            }
        }
    }

    /// Frank-Wolfe gap of the linear objective `g` at the feasible point `x`:
    /// `⟨lmo(g) − x, g⟩`. Zero exactly when `x` maximizes `⟨·, g⟩` over the set.
    pub fn fw_gap_point(&self, x: &[R], g: &[R]) -> Result<R, GeometryError> {
        if !self.contains(x, R::of(DEFAULT_TOL))? {
            return Err(GeometryError::InfeasiblePoint {
                violation: self.violation(x).as_f64(),
            });
        }
        let c = self.lmo(g)?;
        Ok(linalg::dot(&linalg::sub(&c, x), g))
    }

    /// Upper bound on the Euclidean diameter. Exact for boxes, balls,
    /// quadratic groups, weighted-L1 sets, and polytopes of dimension at most
    /// four (vertex enumeration); otherwise the enclosing-box diagonal.
    pub fn diameter(&self) -> Result<R, GeometryError> {
        if !self.is_bounded() {
            return Err(GeometryError::Unbounded);
        }
        match self {
            Self::Box { lo, hi } => Ok(linalg::dist2(hi, lo)),
            Self::L2Ball { radius, .. } => Ok(R::of(2.0) * *radius),
            Self::QuadraticGroups { groups, .. } => {
                // Product of disjoint balls.
                let sum = groups.iter().map(|(_, r)| *r * *r).sum::<R>();
                Ok(R::of(2.0) * sum.sqrt())
            }
            Self::WeightedL1 { weights, budget } => {
                let max_semi = weights
                    .iter()
                    .map(|w| *budget / w.abs())
                    .fold(R::zero(), R::max);
                Ok(R::of(2.0) * max_semi)
            }
            Self::Halfspaces { .. } | Self::Hyperplanes { .. } => Err(GeometryError::Unbounded),
            Self::Intersection { .. } => {
                if self.dim() <= 4 {
                    if let Some((a, b, e, d)) = self.flatten_polyhedral() {
                        let verts = vertices::enumerate_vertices(&a, &b, &e, &d);
                        if verts.len() >= 2 {
                            let mut best = R::zero();
                            for i in 0..verts.len() {
                                for j in (i + 1)..verts.len() {
                                    best = best.max(linalg::dist2(&verts[i], &verts[j]));
                                }
                            }
                            return Ok(best);
                        }
                        if verts.len() == 1 {
                            return Ok(R::zero());
                        }
                    }
                }
                let (lo, hi) = self.enclosing_box()?;
                Ok(linalg::dist2(&hi, &lo))
            }
        }
    }

    /// Flattens boxes/halfspaces/hyperplanes into one `(A, b, E, d)` system.
    /// Returns `None` when a nonlinear member is present.
    pub fn flatten_polyhedral(&self) -> Option<(Matrix<R>, Vec<R>, Matrix<R>, Vec<R>)> {
        let n = self.dim();
        let mut ineq_rows: Vec<Vec<R>> = Vec::new();
        let mut ineq_rhs: Vec<R> = Vec::new();
        let mut eq_rows: Vec<Vec<R>> = Vec::new();
        let mut eq_rhs: Vec<R> = Vec::new();
        if !self.collect_polyhedral(&mut ineq_rows, &mut ineq_rhs, &mut eq_rows, &mut eq_rhs) {
            return None;
        }
        let a = if ineq_rows.is_empty() {
            Matrix::zeros(0, n)
        } else {
            Matrix::from_rows(&ineq_rows)
        };
        let e = if eq_rows.is_empty() {
            Matrix::zeros(0, n)
        } else {
            Matrix::from_rows(&eq_rows)
        };
        Some((a, ineq_rhs, e, eq_rhs))
    }

    fn collect_polyhedral(
        &self,
        ineq_rows: &mut Vec<Vec<R>>,
        ineq_rhs: &mut Vec<R>,
        eq_rows: &mut Vec<Vec<R>>,
        eq_rhs: &mut Vec<R>,
    ) -> bool {
        let n = self.dim();
        match self {
            Self::Box { lo, hi } => {
                for i in 0..n {
                    let mut row = vec![R::zero(); n];
                    row[i] = R::one();
                    ineq_rows.push(row);
                    ineq_rhs.push(hi[i]);
                    let mut row = vec![R::zero(); n];
                    row[i] = -R::one();
                    ineq_rows.push(row);
                    ineq_rhs.push(-lo[i]);
                }
                true
            }
            Self::Halfspaces { a, b } => {
                for i in 0..a.rows() {
                    ineq_rows.push(a.row(i).to_vec());
                    ineq_rhs.push(b[i]);
                }
                true
            }
            Self::Hyperplanes { e, d } => {
                for i in 0..e.rows() {
                    eq_rows.push(e.row(i).to_vec());
                    eq_rhs.push(d[i]);
                }
                true
            }
            Self::Intersection { members, .. } => members
                .iter()
                .all(|m| m.collect_polyhedral(ineq_rows, ineq_rhs, eq_rows, eq_rhs)),
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests;
