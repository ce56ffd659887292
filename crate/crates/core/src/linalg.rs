//! Thin helpers over nalgebra's dense Cholesky and triangular solves.

use nalgebra::{DMatrix, DVector};

/// Lower Cholesky factor of a symmetric matrix, or `None` if a pivot is not
/// strictly positive and finite.
pub(crate) fn cholesky_lower(m: DMatrix<f64>) -> Option<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Some(m);
    }
    let l = m.cholesky()?.unpack();
    if l.diagonal().iter().all(|d| d.is_finite() && *d > 0.0) {
        Some(l)
    } else {
        None
    }
}

/// Solves `L x = b` in place.
pub(crate) fn solve_lower(l: &DMatrix<f64>, b: &mut DVector<f64>) {
    if l.nrows() > 0 {
        let ok = l.solve_lower_triangular_mut(b);
        debug_assert!(ok, "singular triangular factor");
    }
}

/// Solves `L X = B` in place.
pub(crate) fn solve_lower_mat(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    if l.nrows() > 0 {
        let ok = l.solve_lower_triangular_mut(b);
        debug_assert!(ok, "singular triangular factor");
    }
}

/// Solves `Lᵀ x = b` in place.
pub(crate) fn solve_lower_transpose(l: &DMatrix<f64>, b: &mut DVector<f64>) {
    if l.nrows() > 0 {
        let ok = l.tr_solve_lower_triangular_mut(b);
        debug_assert!(ok, "singular triangular factor");
    }
}
