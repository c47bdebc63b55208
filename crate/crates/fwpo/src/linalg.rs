//! Small dense linear algebra used by the geometry and tabular modules.
//!
//! Everything here is sized for desk-scale problems (action dimensions below
//! ten, state counts in the hundreds), so plain row-major storage and
//! unblocked algorithms are the right tool.

use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<R> {
    rows: usize,
    cols: usize,
    data: Vec<R>,
}

impl<R: Scalar> Matrix<R> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![R::zero(); rows * cols],
        }
    }

    /// Builds from a row-major slice of rows; all rows must share a length.
    pub fn from_rows(rows: &[Vec<R>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = R::one();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[R] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [R] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// y = A x
    pub fn matvec(&self, x: &[R]) -> Vec<R> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// y = Aᵀ x
    pub fn matvec_t(&self, x: &[R]) -> Vec<R> {
        assert_eq!(x.len(), self.rows, "matvec_t dimension mismatch");
        let mut y = vec![R::zero(); self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            for (yj, aij) in y.iter_mut().zip(self.row(i)) {
                *yj = *yj + *aij * xi;
            }
        }
        y
    }

    /// A Bᵀ, with B given by rows.
    pub fn mul_transpose(&self, other: &Matrix<R>) -> Matrix<R> {
        assert_eq!(self.cols, other.cols);
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            for j in 0..other.rows {
                out[(i, j)] = dot(self.row(i), other.row(j));
            }
        }
        out
    }
}

impl<R> std::ops::Index<(usize, usize)> for Matrix<R> {
    type Output = R;
    fn index(&self, (i, j): (usize, usize)) -> &R {
        &self.data[i * self.cols + j]
    }
}

impl<R> std::ops::IndexMut<(usize, usize)> for Matrix<R> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut R {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<R: Scalar>(a: &[R], b: &[R]) -> R {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(R::zero(), |acc, (x, y)| acc + *x * *y)
}

pub fn norm2<R: Scalar>(a: &[R]) -> R {
    dot(a, a).sqrt()
}

pub fn sub<R: Scalar>(a: &[R], b: &[R]) -> Vec<R> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| *x - *y).collect()
}

pub fn add<R: Scalar>(a: &[R], b: &[R]) -> Vec<R> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| *x + *y).collect()
}

pub fn scale<R: Scalar>(a: &[R], s: R) -> Vec<R> {
    a.iter().map(|x| *x * s).collect()
}

/// a += s * b
pub fn axpy<R: Scalar>(a: &mut [R], s: R, b: &[R]) {
    debug_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter_mut().zip(b) {
        *x = *x + s * *y;
    }
}

pub fn dist2<R: Scalar>(a: &[R], b: &[R]) -> R {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(R::zero(), |acc, (x, y)| {
            let d = *x - *y;
            acc + d * d
        })
        .sqrt()
}

/// Solves A x = b by Gaussian elimination with partial pivoting.
///
/// Returns `None` when a pivot falls below `tiny` (singular to working
/// precision). `A` is consumed as scratch space.
pub fn lu_solve<R: Scalar>(mut a: Matrix<R>, b: &[R]) -> Option<Vec<R>> {
    let n = a.rows();
    assert_eq!(a.cols(), n, "lu_solve requires a square matrix");
    assert_eq!(b.len(), n);
    let tiny = R::of(1e-300);
    let mut x = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        let (pivot_row, pivot_abs) =
            (k..n)
                .map(|i| (i, a[(i, k)].abs()))
                .fold(
                    (k, R::zero()),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if pivot_abs < tiny {
            return None;
        }
        if pivot_row != k {
            for j in 0..n {
                let tmp = a[(k, j)];
                a[(k, j)] = a[(pivot_row, j)];
                a[(pivot_row, j)] = tmp;
            }
            x.swap(k, pivot_row);
            perm.swap(k, pivot_row);
        }
        let pivot = a[(k, k)];
        for i in (k + 1)..n {
            let factor = a[(i, k)] / pivot;
            if factor == R::zero() {
                continue;
            }
            for j in (k + 1)..n {
                let akj = a[(k, j)];
                a[(i, j)] = a[(i, j)] - factor * akj;
            }
            x[i] = x[i] - factor * x[k];
        }
    }

    for k in (0..n).rev() {
        let mut acc = x[k];
        for j in (k + 1)..n {
            acc = acc - a[(k, j)] * x[j];
        }
        x[k] = acc / a[(k, k)];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solve_identity() {
        let a = Matrix::<f64>::identity(3);
        let x = lu_solve(a, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn lu_solve_general() {
        let a = Matrix::<f64>::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let x = lu_solve(a.clone(), &[5.0, 10.0]).unwrap();
        let back = a.matvec(&x);
        assert!((back[0] - 5.0).abs() < 1e-12);
        assert!((back[1] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn lu_solve_singular_is_none() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(lu_solve(a, &[1.0, 1.0]).is_none());
    }

    #[test]
    fn matvec_transpose() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        assert_eq!(a.matvec(&[1.0, 1.0, 1.0]), vec![6.0, 15.0]);
        assert_eq!(a.matvec_t(&[1.0, 1.0]), vec![5.0, 7.0, 9.0]);
    }
}
