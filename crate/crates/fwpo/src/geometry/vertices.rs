//! Vertex enumeration for small polytopes `{x : A x ≤ b, E x = d}`.
//!
//! Every equality row is active at a vertex; the remaining active set is an
//! (n − q)-subset of the inequality rows. All candidate square systems are
//! solved and filtered for feasibility. Intended for n ≤ 4 and a handful of
//! rows, which is where the diameter oracle uses it.

use crate::linalg::{self, Matrix};
use crate::scalar::Scalar;

const FEAS_TOL: f64 = 1e-6;
const DEDUP_TOL: f64 = 1e-7;

pub fn enumerate_vertices<R: Scalar>(
    a: &Matrix<R>,
    b: &[R],
    e: &Matrix<R>,
    d: &[R],
) -> Vec<Vec<R>> {
    let n = if a.rows() > 0 { a.cols() } else { e.cols() };
    let q = e.rows();
    let mut vertices: Vec<Vec<R>> = Vec::new();
    if q > n {
        return vertices;
    }
    let picks = n - q;
    let m = a.rows();
    if picks > m {
        return vertices;
    }

    let mut subset: Vec<usize> = (0..picks).collect();
    loop {
        let mut rows: Vec<Vec<R>> = Vec::with_capacity(n);
        let mut rhs: Vec<R> = Vec::with_capacity(n);
        for i in 0..q {
            rows.push(e.row(i).to_vec());
            rhs.push(d[i]);
        }
        for &i in &subset {
            rows.push(a.row(i).to_vec());
            rhs.push(b[i]);
        }
        if rows.len() == n {
            if let Some(x) = linalg::lu_solve(Matrix::from_rows(&rows), &rhs) {
                if is_feasible(a, b, e, d, &x) && !is_duplicate(&vertices, &x) {
                    vertices.push(x);
                }
            }
        }
        if picks == 0 || !advance(&mut subset, m) {
            break;
        }
    }
    vertices
}

fn is_feasible<R: Scalar>(a: &Matrix<R>, b: &[R], e: &Matrix<R>, d: &[R], x: &[R]) -> bool {
    let tol = R::of(FEAS_TOL);
    for i in 0..a.rows() {
        if linalg::dot(a.row(i), x) > b[i] + tol {
            return false;
        }
    }
    for i in 0..e.rows() {
        if (linalg::dot(e.row(i), x) - d[i]).abs() > tol {
            return false;
        }
    }
    true
}

fn is_duplicate<R: Scalar>(vertices: &[Vec<R>], x: &[R]) -> bool {
    let tol = R::of(DEDUP_TOL);
    vertices.iter().any(|v| linalg::dist2(v, x) < tol)
}

/// Next lexicographic combination of `subset` drawn from `0..m`.
fn advance(subset: &mut [usize], m: usize) -> bool {
    let k = subset.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] < m - (k - i) {
            subset[i] += 1;
            for j in (i + 1)..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
