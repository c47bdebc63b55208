//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Solves `maximize ⟨g, x⟩ subject to A x ≤ b, E x = d` for free `x`, via the
//! split `x = u − v` with `u, v ≥ 0`. Ties are broken by lowest
//! entering-variable index and, in the ratio test, by lowest basic-variable
//! index, so results are deterministic.

use super::GeometryError;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

const PIVOT_EPS: f64 = 1e-9;
const FEAS_EPS: f64 = 1e-7;

struct Tableau<R> {
    rows: Vec<Vec<R>>,
    active: Vec<bool>,
    basis: Vec<usize>,
    obj1: Vec<R>,
    obj2: Vec<R>,
    cols: usize,
    art_start: usize,
}

impl<R: Scalar> Tableau<R> {
    fn rhs(&self, r: usize) -> R {
        self.rows[r][self.cols]
    }

    fn pivot(&mut self, prow: usize, pcol: usize) {
        let pivot = self.rows[prow][pcol];
        let inv = R::one() / pivot;
        for v in self.rows[prow].iter_mut() {
            *v = *v * inv;
        }
        let pivot_row = self.rows[prow].clone();
        for (r, row) in self.rows.iter_mut().enumerate() {
            if r == prow || !self.active[r] {
                continue;
            }
            let factor = row[pcol];
            if factor != R::zero() {
                for (x, p) in row.iter_mut().zip(&pivot_row) {
                    *x = *x - factor * *p;
                }
            }
        }
        for obj in [&mut self.obj1, &mut self.obj2] {
            let factor = obj[pcol];
            if factor != R::zero() {
                for (x, p) in obj.iter_mut().zip(&pivot_row) {
                    *x = *x - factor * *p;
                }
            }
        }
        self.basis[prow] = pcol;
    }

    /// One simplex phase: Bland's rule on the given objective row.
    /// Returns `Ok(())` at optimality, `Err(Unbounded)` otherwise.
    fn run(&mut self, phase_one: bool) -> Result<(), GeometryError> {
        let eps = R::of(PIVOT_EPS);
        let mut guard = 0usize;
        loop {
            guard += 1;
            assert!(guard < 1_000_000, "simplex exceeded iteration cap");
            let obj = if phase_one { &self.obj1 } else { &self.obj2 };
            // Entering: lowest index with positive reduced cost; artificials
            // never re-enter.
            let entering = (0..self.art_start).find(|&j| obj[j] > eps);
            let Some(pcol) = entering else {
                return Ok(());
            };
            let mut choice: Option<(usize, R)> = None;
            for r in 0..self.rows.len() {
                if !self.active[r] {
                    continue;
                }
                let coef = self.rows[r][pcol];
                if coef > eps {
                    let ratio = self.rhs(r) / coef;
                    let better = match choice {
                        None => true,
                        Some((br, bratio)) => {
                            ratio < bratio - eps
                                || (ratio <= bratio + eps && self.basis[r] < self.basis[br])
                        }
                    };
                    if better {
                        choice = Some((r, ratio));
                    }
                }
            }
            let Some((prow, _)) = choice else {
                return Err(GeometryError::Unbounded);
            };
            self.pivot(prow, pcol);
        }
    }
}

/// Maximizes `⟨g, x⟩` over `{x : A x ≤ b, E x = d}`; returns the optimal
/// vertex.
pub fn simplex_solve<R: Scalar>(
    a: &Matrix<R>,
    b: &[R],
    e: &Matrix<R>,
    d: &[R],
    g: &[R],
) -> Result<Vec<R>, GeometryError> {
    let n = g.len();
    if n == 0 {
        return Err(GeometryError::InvalidSet("empty objective".into()));
    }
    if a.rows() != b.len() || e.rows() != d.len() {
        return Err(GeometryError::InvalidSet(
            "constraint system shape mismatch".into(),
        ));
    }
    if (a.rows() > 0 && a.cols() != n) || (e.rows() > 0 && e.cols() != n) {
        return Err(GeometryError::DimensionMismatch {
            expected: n,
            got: if a.rows() > 0 { a.cols() } else { e.cols() },
        });
    }
    let m = a.rows();
    let q = e.rows();
    if m + q == 0 {
        return Err(GeometryError::Unbounded);
    }

    // Columns: u(n) | v(n) | slack(m) | artificial.
    let slack_start = 2 * n;
    let art_start = slack_start + m;
    let mut art_cols = 0usize;
    let mut raw_rows: Vec<(Vec<R>, R, Option<usize>)> = Vec::with_capacity(m + q);

    for i in 0..m {
        let mut coeffs = vec![R::zero(); slack_start + m];
        for j in 0..n {
            coeffs[j] = a[(i, j)];
            coeffs[n + j] = -a[(i, j)];
        }
        coeffs[slack_start + i] = R::one();
        let mut rhs = b[i];
        if rhs < R::zero() {
            for c in coeffs.iter_mut() {
                *c = -*c;
            }
            rhs = -rhs;
            raw_rows.push((coeffs, rhs, None));
            art_cols += 1;
        } else {
            raw_rows.push((coeffs, rhs, Some(slack_start + i)));
        }
    }
    for i in 0..q {
        let mut coeffs = vec![R::zero(); slack_start + m];
        for j in 0..n {
            coeffs[j] = e[(i, j)];
            coeffs[n + j] = -e[(i, j)];
        }
        let mut rhs = d[i];
        if rhs < R::zero() {
            for c in coeffs.iter_mut() {
                *c = -*c;
            }
            rhs = -rhs;
        }
        raw_rows.push((coeffs, rhs, None));
        art_cols += 1;
    }

    let cols = art_start + art_cols;
    let mut rows = Vec::with_capacity(m + q);
    let mut basis = Vec::with_capacity(m + q);
    let mut next_art = art_start;
    for (coeffs, rhs, basic) in raw_rows {
        let mut row = vec![R::zero(); cols + 1];
        row[..coeffs.len()].copy_from_slice(&coeffs);
        row[cols] = rhs;
        match basic {
            Some(col) => basis.push(col),
            None => {
                row[next_art] = R::one();
                basis.push(next_art);
                next_art += 1;
            }
        }
        rows.push(row);
    }
    debug_assert_eq!(next_art, cols);

    // Phase-1 reduced costs: maximize −Σ artificials, priced out against the
    // artificial basic rows.
    let mut obj1 = vec![R::zero(); cols + 1];
    for j in art_start..cols {
        obj1[j] = -R::one();
    }
    for (r, row) in rows.iter().enumerate() {
        if basis[r] >= art_start {
            for (o, x) in obj1.iter_mut().zip(row) {
                *o = *o + *x;
            }
        }
    }
    let mut obj2 = vec![R::zero(); cols + 1];
    for j in 0..n {
        obj2[j] = g[j];
        obj2[n + j] = -g[j];
    }

    let row_count = rows.len();
    let mut t = Tableau {
        rows,
        active: vec![true; row_count],
        basis,
        obj1,
        obj2,
        cols,
        art_start,
    };

    if art_cols > 0 {
        t.run(true)?;
        if t.obj1[t.cols] > R::of(FEAS_EPS) {
            return Err(GeometryError::Infeasible);
        }
        // Drive leftover artificials out of the basis; rows that cannot
        // pivot are redundant and dropped.
        for r in 0..t.rows.len() {
            if t.basis[r] >= t.art_start {
                let eps = R::of(PIVOT_EPS);
                let pcol = (0..t.art_start).find(|&j| t.rows[r][j].abs() > eps);
                match pcol {
                    Some(j) => t.pivot(r, j),
                    None => t.active[r] = false,
                }
            }
        }
    }

    t.run(false)?;

    let mut x = vec![R::zero(); n];
    for (r, &bv) in t.basis.iter().enumerate() {
        if !t.active[r] {
            continue;
        }
        if bv < n {
            x[bv] = x[bv] + t.rhs(r);
        } else if bv < 2 * n {
            x[bv - n] = x[bv - n] - t.rhs(r);
        }
    }
    Ok(x)
}
