use super::{DenseMatrix, LinalgError, Result};

/// Relative pivot threshold below which a triangular system counts as singular.
const SINGULAR_TOL: f64 = 1e-14;

/// Back substitution for upper-triangular `r·y = z`.
pub fn solve_triangular(r: &DenseMatrix, z: &[f64]) -> Result<Vec<f64>> {
    let k = r.rows();
    if r.cols() != k || z.len() != k {
        return Err(LinalgError::DimensionMismatch {
            op: "solve_triangular",
            expected: (k, k),
            got: (r.cols(), z.len()),
        });
    }
    let max_diag = (0..k).fold(0.0f64, |m, i| m.max(r.get(i, i).abs()));
    for i in 0..k {
        let d = r.get(i, i).abs();
        if !(d >= SINGULAR_TOL * max_diag) || d == 0.0 {
            return Err(LinalgError::Singular {
                index: i,
                value: r.get(i, i),
            });
        }
    }
    let mut y = z.to_vec();
    for i in (0..k).rev() {
        let row = r.row(i);
        let s: f64 = row[i + 1..].iter().zip(&y[i + 1..]).map(|(a, b)| a * b).sum();
        y[i] = (y[i] - s) / row[i];
    }
    Ok(y)
}
