//! Dense complex matrix helpers and the 2x2 block operator.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>` (column-major). The hot product in
//! the evolution loop goes through `matrixmultiply::zgemm`, which is several
//! times faster than nalgebra's generic complex kernel.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// `c <- alpha * a * b + beta * c`.
pub fn gemm(alpha: C64, a: &CMatrix, b: &CMatrix, beta: C64, c: &mut CMatrix) {
    let (m, k) = a.shape();
    let (k2, n) = b.shape();
    assert_eq!(k, k2, "inner dimensions differ");
    assert_eq!(c.shape(), (m, n), "output shape mismatch");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        *c *= beta;
        return;
    }
    // SAFETY: Complex64 is repr(C) with layout [f64; 2]; DMatrix storage is a
    // contiguous column-major buffer of exactly nrows * ncols elements, so the
    // strides (1, nrows) address every element in bounds. `c` does not alias
    // `a` or `b` because it is borrowed mutably.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [alpha.re, alpha.im],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [beta.re, beta.im],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
}

pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut c = CMatrix::zeros(a.nrows(), b.ncols());
    gemm(ONE, a, b, ZERO, &mut c);
    c
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖lhs - rhs‖_F / ‖lhs‖_F`, or the absolute difference when `lhs` vanishes.
pub fn relative_residual(lhs: &CMatrix, rhs: &CMatrix) -> f64 {
    let diff = frobenius(&(lhs - rhs));
    let scale = frobenius(lhs);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

pub fn is_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Largest and smallest singular values.
pub fn singular_extremes(a: &CMatrix) -> (f64, f64) {
    if a.is_empty() {
        return (0.0, 0.0);
    }
    let sv = a.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    (max, min)
}

/// 2-norm condition number; infinite for a singular matrix.
pub fn condition_number(a: &CMatrix) -> f64 {
    let (max, min) = singular_extremes(a);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Selects rows and columns by index.
pub fn submatrix(a: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

/// Permutation matrix with `P[i, perm[i]] = 1`, so `(P v)[i] = v[perm[i]]`.
pub fn permutation_matrix(perm: &[usize]) -> CMatrix {
    let n = perm.len();
    let mut p = CMatrix::zeros(n, n);
    for (i, &j) in perm.iter().enumerate() {
        p[(i, j)] = ONE;
    }
    p
}

pub fn diagonal(values: &[C64]) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values))
}

/// A 2x2 block of N x N complex matrices acting on two-component grid functions.
///
/// Stored as one dense 2N x 2N matrix: rows/columns `0..N` are the first
/// component, `N..2N` the second.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockOperator {
    n: usize,
    data: CMatrix,
}

impl BlockOperator {
    pub fn identity(n: usize) -> Self {
        Self { n, data: CMatrix::identity(2 * n, 2 * n) }
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, data: CMatrix::zeros(2 * n, 2 * n) }
    }

    pub fn from_blocks(b11: &CMatrix, b12: &CMatrix, b21: &CMatrix, b22: &CMatrix) -> Self {
        let n = b11.nrows();
        for b in [b11, b12, b21, b22] {
            assert_eq!(b.shape(), (n, n), "all blocks must be N x N");
        }
        let mut data = CMatrix::zeros(2 * n, 2 * n);
        data.view_mut((0, 0), (n, n)).copy_from(b11);
        data.view_mut((0, n), (n, n)).copy_from(b12);
        data.view_mut((n, 0), (n, n)).copy_from(b21);
        data.view_mut((n, n), (n, n)).copy_from(b22);
        Self { n, data }
    }

    pub fn from_matrix(data: CMatrix) -> Self {
        assert!(data.is_square() && data.nrows().is_multiple_of(2), "block operator must be 2N x 2N");
        Self { n: data.nrows() / 2, data }
    }

    /// Grid size N.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Block `(row, col)` with `row, col ∈ {0, 1}`.
    pub fn block(&self, row: usize, col: usize) -> CMatrix {
        assert!(row < 2 && col < 2);
        self.data.view((row * self.n, col * self.n), (self.n, self.n)).into_owned()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn compose(&self, rhs: &BlockOperator) -> BlockOperator {
        assert_eq!(self.n, rhs.n);
        BlockOperator { n: self.n, data: matmul(&self.data, &rhs.data) }
    }
}
