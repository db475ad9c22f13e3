//! Small dense complex linear-algebra helpers on top of `nalgebra`.
//!
//! Determinants go through partial-pivoting LU. Log-magnitudes are summed
//! pivot by pivot so that large homogeneity degrees do not overflow.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Largest entry magnitude; zero for an empty matrix.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).norm()))
}

/// `log2 |det m|`, `-inf` when a pivot vanishes exactly. The empty matrix has
/// determinant one.
pub fn log2_abs_det(m: &CMat) -> f64 {
    assert!(m.is_square(), "determinant of non-square matrix");
    if m.nrows() == 0 {
        return 0.0;
    }
    let lu = m.clone().lu();
    let u = lu.u();
    u.diagonal().iter().map(|p| p.norm().log2()).sum()
}

pub fn det(m: &CMat) -> Complex64 {
    assert!(m.is_square(), "determinant of non-square matrix");
    if m.nrows() == 0 {
        return ONE;
    }
    m.clone().lu().determinant()
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Orthonormal basis (as columns) of the right nullspace of `m`.
///
/// A singular value counts as zero when it is at most `rel_tol` times the
/// largest one. Wide matrices are padded with zero rows so the SVD yields a
/// full set of right singular vectors.
pub fn nullspace(m: &CMat, rel_tol: f64) -> CMat {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return CMat::zeros(0, 0);
    }
    if rows == 0 {
        return CMat::identity(cols, cols);
    }
    let padded = if rows < cols {
        let mut p = CMat::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let sigma_max = svd.singular_values.iter().fold(0.0_f64, |a, &s| a.max(s));
    let null: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= rel_tol * sigma_max)
        .map(|(i, _)| i)
        .collect();
    let mut basis = CMat::zeros(cols, null.len());
    for (c, &i) in null.iter().enumerate() {
        for r in 0..cols {
            basis[(r, c)] = v_t[(i, r)].conj();
        }
    }
    basis
}

/// Rows of `m` indexed (0-based) by `rows`, in the given order.
pub fn select_rows(m: &CMat, rows: &[usize]) -> CMat {
    CMat::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// Numerical rank with singular values compared against `rel_tol * sigma_max`.
pub fn rank(m: &CMat, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    let Some(&top) = sv.first() else { return 0 };
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn log_det_of_diagonal() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![c(2.0, 0.0), c(0.0, 4.0), c(0.5, 0.0)]));
        assert!((log2_abs_det(&m) - 2.0).abs() < 1e-14);
        assert!((det(&m) - c(0.0, 4.0)).norm() < 1e-14);
    }

    #[test]
    fn log_det_of_singular_is_neg_inf() {
        let m = CMat::from_row_slice(2, 2, &[ONE, ONE, ONE, ONE]);
        assert_eq!(log2_abs_det(&m), f64::NEG_INFINITY);
    }

    #[test]
    fn empty_determinant_is_one() {
        let m = CMat::zeros(0, 0);
        assert_eq!(log2_abs_det(&m), 0.0);
        assert_eq!(det(&m), ONE);
    }

    #[test]
    fn nullspace_of_wide_matrix() {
        // rows (1, 1, 0) and (0, 1, 1): kernel spanned by (1, -1, 1)
        let m = CMat::from_row_slice(2, 3, &[ONE, ONE, ZERO, ZERO, ONE, ONE]);
        let n = nullspace(&m, 1e-10);
        assert_eq!(n.ncols(), 1);
        let v = n.column(0);
        assert!((&m * v).norm() < 1e-12);
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert!((v[0] + v[1]).norm() < 1e-12 && (v[0] - v[2]).norm() < 1e-12);
    }

    #[test]
    fn rank_detects_repeated_row() {
        let m = CMat::from_row_slice(3, 2, &[ONE, c(2.0, 0.0), ONE, c(2.0, 0.0), ZERO, ONE]);
        assert_eq!(rank(&m, 1e-10), 2);
        assert_eq!(rank(&select_rows(&m, &[0, 1]), 1e-10), 1);
    }
}
