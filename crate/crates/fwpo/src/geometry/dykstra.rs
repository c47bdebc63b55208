//! Euclidean projection onto constraint sets.
//!
//! A set is decomposed into "cells", each with an exact projection: clip for
//! boxes, closed forms for single halfspaces and affine subspaces, radial
//! shrink for balls and quadratic groups, and a weighted soft-threshold with
//! bisection on the Lagrange multiplier for weighted-L1 balls. A single cell
//! projects directly; multiple cells run Dykstra's alternating projections,
//! which converge to the exact projection for convex sets.

use super::{ConstraintSet, GeometryError, DYKSTRA_MAX_PASSES, DYKSTRA_TOL};
use crate::linalg::{self, Matrix};
use crate::scalar::Scalar;

enum Cell<'a, R> {
    Clip {
        lo: &'a [R],
        hi: &'a [R],
    },
    Halfspace {
        normal: &'a [R],
        offset: R,
        norm_sq: R,
    },
    /// Whole equality system `E x = d`, projected by least squares.
    Affine {
        e: &'a Matrix<R>,
        d: &'a [R],
        gram: Matrix<R>,
    },
    /// Single hyperplane `n·x = d` (used when the system's Gram matrix is
    /// singular; per-row cells keep every cell projection exact).
    Hyperplane {
        normal: &'a [R],
        offset: R,
        norm_sq: R,
    },
    Ball {
        center: &'a [R],
        radius: R,
    },
    QuadGroup {
        indices: &'a [usize],
        radius: R,
    },
    WeightedL1 {
        weights: &'a [R],
        budget: R,
    },
}

impl<'a, R: Scalar> Cell<'a, R> {
    fn project(&self, z: &[R]) -> Vec<R> {
        match self {
            Cell::Clip { lo, hi } => z
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .map(|(x, (l, h))| x.max(*l).min(*h))
                .collect(),
            Cell::Halfspace {
                normal,
                offset,
                norm_sq,
            } => {
                let excess = linalg::dot(normal, z) - *offset;
                if excess <= R::zero() {
                    z.to_vec()
                } else {
                    let shift = excess / *norm_sq;
                    z.iter()
                        .zip(normal.iter())
                        .map(|(x, n)| *x - shift * *n)
                        .collect()
                }
            }
            Cell::Affine { e, d, gram } => {
                let mut resid = e.matvec(z);
                for (r, di) in resid.iter_mut().zip(d.iter()) {
                    *r = *r - *di;
                }
                let lambda = linalg::lu_solve(gram.clone(), &resid)
                    .expect("nonsingular Gram checked at cell collection");
                let correction = e.matvec_t(&lambda);
                linalg::sub(z, &correction)
            }
            Cell::Hyperplane {
                normal,
                offset,
                norm_sq,
            } => {
                let excess = linalg::dot(normal, z) - *offset;
                let shift = excess / *norm_sq;
                z.iter()
                    .zip(normal.iter())
                    .map(|(x, n)| *x - shift * *n)
                    .collect()
            }
            Cell::Ball { center, radius } => {
                let dist = linalg::dist2(z, center);
                if dist <= *radius {
                    z.to_vec()
                } else {
                    let scale = *radius / dist;
                    center
                        .iter()
                        .zip(z.iter())
                        .map(|(c, x)| *c + scale * (*x - *c))
                        .collect()
                }
            }
            Cell::QuadGroup { indices, radius } => {
                let norm = indices.iter().map(|&i| z[i] * z[i]).sum::<R>().sqrt();
                let mut out = z.to_vec();
                if norm > *radius {
                    let scale = *radius / norm;
                    for &i in indices.iter() {
                        out[i] = out[i] * scale;
                    }
                }
                out
            }
            Cell::WeightedL1 { weights, budget } => project_weighted_l1(weights, *budget, z),
        }
    }
}

/// Projection onto `{y : Σ|w_i y_i| ≤ p}` via the weighted soft-threshold
/// `y_i = sign(z_i) max(|z_i| − λ|w_i|, 0)`, with λ found by bisection.
/// Zero-weight coordinates pass through unchanged.
fn project_weighted_l1<R: Scalar>(weights: &[R], budget: R, z: &[R]) -> Vec<R> {
    let total: R = weights.iter().zip(z).map(|(w, x)| (*w * *x).abs()).sum();
    if total <= budget {
        return z.to_vec();
    }
    let mut lambda_hi = R::zero();
    for (w, x) in weights.iter().zip(z) {
        if *w != R::zero() {
            lambda_hi = lambda_hi.max(x.abs() / w.abs());
        }
    }
    let weighted_sum = |lambda: R| -> R {
        weights
            .iter()
            .zip(z)
            .filter(|(w, _)| **w != R::zero())
            .map(|(w, x)| {
                let aw = w.abs();
                aw * (x.abs() - lambda * aw).max(R::zero())
            })
            .sum()
    };
    let mut lo = R::zero();
    let mut hi = lambda_hi;
    for _ in 0..200 {
        let mid = (lo + hi) * R::of(0.5);
        if weighted_sum(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= R::of(1e-16) * (R::one() + lambda_hi) {
            break;
        }
    }
    let lambda = hi;
    weights
        .iter()
        .zip(z)
        .map(|(w, x)| {
            if *w == R::zero() {
                *x
            } else {
                let mag = (x.abs() - lambda * w.abs()).max(R::zero());
                if *x >= R::zero() {
                    mag
                } else {
                    -mag
                }
            }
        })
        .collect()
}

fn collect_cells<'a, R: Scalar>(set: &'a ConstraintSet<R>, cells: &mut Vec<Cell<'a, R>>) {
    match set {
        ConstraintSet::Box { lo, hi } => cells.push(Cell::Clip { lo, hi }),
        ConstraintSet::Halfspaces { a, b } => {
            for i in 0..a.rows() {
                let normal = a.row(i);
                cells.push(Cell::Halfspace {
                    normal,
                    offset: b[i],
                    norm_sq: linalg::dot(normal, normal),
                });
            }
        }
        ConstraintSet::Hyperplanes { e, d } => {
            let gram = e.mul_transpose(e);
            let solvable = linalg::lu_solve(gram.clone(), &vec![R::zero(); e.rows()]).is_some();
            if solvable {
                cells.push(Cell::Affine { e, d, gram });
            } else {
                // Redundant rows: fall back to one exact cell per hyperplane.
                for i in 0..e.rows() {
                    let normal = e.row(i);
                    cells.push(Cell::Hyperplane {
                        normal,
                        offset: d[i],
                        norm_sq: linalg::dot(normal, normal),
                    });
                }
            }
        }
        ConstraintSet::L2Ball { center, radius } => cells.push(Cell::Ball {
            center,
            radius: *radius,
        }),
        ConstraintSet::QuadraticGroups { groups, .. } => {
            for (indices, radius) in groups {
                cells.push(Cell::QuadGroup {
                    indices,
                    radius: *radius,
                });
            }
        }
        ConstraintSet::WeightedL1 { weights, budget } => cells.push(Cell::WeightedL1 {
            weights,
            budget: *budget,
        }),
        ConstraintSet::Intersection { members, .. } => {
            for m in members {
                collect_cells(m, cells);
            }
        }
    }
}

pub(super) fn project<R: Scalar>(set: &ConstraintSet<R>, z: &[R]) -> Result<Vec<R>, GeometryError> {
    let mut cells = Vec::new();
    collect_cells(set, &mut cells);
    debug_assert!(!cells.is_empty());
    if cells.len() == 1 {
        return Ok(cells[0].project(z));
    }

    let mut x = z.to_vec();
    let mut corrections: Vec<Vec<R>> = vec![vec![R::zero(); z.len()]; cells.len()];
    let tol = R::of(DYKSTRA_TOL);
    let mut residual = R::infinity();
    for _pass in 0..DYKSTRA_MAX_PASSES {
        let x_before = x.clone();
        // Convergence needs both the iterate and the correction vectors to
        // stabilize: the iterate alone can stall for whole passes while the
        // corrections charge up before tipping it off a pseudo-solution.
        let mut correction_drift = R::zero();
        for (cell, correction) in cells.iter().zip(corrections.iter_mut()) {
            let shifted = linalg::add(&x, correction);
            let projected = cell.project(&shifted);
            let updated = linalg::sub(&shifted, &projected);
            correction_drift = correction_drift + linalg::dist2(&updated, correction);
            *correction = updated;
            x = projected;
        }
        residual = linalg::dist2(&x, &x_before) + correction_drift;
        if residual < tol {
            return Ok(x);
        }
    }
    Err(GeometryError::ProjectionDidNotConverge {
        passes: DYKSTRA_MAX_PASSES,
        residual: residual.as_f64(),
        last: x.iter().map(|v| v.as_f64()).collect(),
    })
}
