use nalgebra::DMatrix;

use super::{DenseMatrix, HouseholderQr, LinalgError, Result};

/// Singular values of an n×r matrix (n ≥ r), descending, via the SVD of the
/// r×r triangular factor of its QR decomposition.
pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>> {
    let qr = HouseholderQr::new(a)?;
    Ok(triangular_singular_values(qr.r()))
}

pub(crate) fn triangular_singular_values(r: &DenseMatrix) -> Vec<f64> {
    let k = r.rows();
    let m = DMatrix::from_row_slice(k, k, r.as_slice());
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// `σ_max / σ_min`; +∞ when the matrix is numerically rank deficient.
pub fn condition_number(a: &DenseMatrix) -> f64 {
    match singular_values(a) {
        Ok(s) => ratio(&s),
        // Zero-width or non-finite input: nothing sensible to report but ∞.
        Err(LinalgError::DimensionMismatch { .. }) | Err(_) => f64::INFINITY,
    }
}

pub(crate) fn ratio(s: &[f64]) -> f64 {
    let (Some(&max), Some(&min)) = (s.first(), s.last()) else {
        return f64::INFINITY;
    };
    if min <= 0.0 || !(max / min).is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_sketch, householder_qr};

    #[test]
    fn isometry_has_unit_condition() {
        let q = householder_qr(&gaussian_sketch(30, 6, 9)).unwrap().q;
        assert!((condition_number(&q) - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn diagonal_condition() {
        let k = condition_number(&DenseMatrix::diag(&[10.0, 0.1]));
        assert!((k - 100.0).abs() <= 1e-8 * 100.0);
    }

    #[test]
    fn rank_deficient_is_infinite() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(condition_number(&a), f64::INFINITY);
    }

    #[test]
    fn invariant_under_orthogonal_left_multiplication() {
        let a = gaussian_sketch(20, 5, 1);
        let q = householder_qr(&gaussian_sketch(20, 20, 2)).unwrap().q;
        let k1 = condition_number(&a);
        let k2 = condition_number(&q.matmul(&a).unwrap());
        assert!((k1 - k2).abs() <= 1e-8 * k1);
    }
}
