//! Linearized subspace refinement.
//!
//! At a fixed state θ₀ the residual is replaced by its linearization
//! `f₀ + G·Δθ` with `G = AJ`, and the correction is restricted to
//! `Δθ = V·y` for a basis `V` drawn from a randomized SVD of `J` (or `G`).
//! The reduced problem `min ‖f₀ + GV·y‖` is small and dense, so it is solved
//! directly by Householder QR instead of by gradient iterations.
//!
//! The correction defines the refined predictor `q₀ + J·Δθ`; θ₀ itself is
//! never modified here.

mod basis;
mod batch;
mod solve;
mod sweep;

pub use basis::{build_subspace, random_mask, SubspaceBasis, SubspaceOptions, SubspaceSource};
pub use batch::{batch_lsr, batch_lsr_with_basis, batch_subspace, ReducedSystem};
pub use solve::{lsr_predict_at, one_shot_lsr, reduced_matrix, LsrResult};
pub use sweep::{rank_sweep, RankSweep, SweepRow, TestError};

use std::fmt::Write as _;

use thiserror::Error;

use crate::linalg::LinalgError;
use crate::opt::fmt_f64;
use crate::residual::ResidualError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LsrError {
    #[error(transparent)]
    Residual(#[from] ResidualError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid options: {0}")]
    Invalid(String),
    #[error("requested rank {requested} but only {available} singular values survive truncation")]
    RankDeficient { requested: usize, available: usize },
    #[error("no batch has the {needed} rows needed for the sketch QR (largest has {largest})")]
    InsufficientBatch { needed: usize, largest: usize },
    #[error("{what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
}

impl From<crate::net::NetError> for LsrError {
    fn from(e: crate::net::NetError) -> Self {
        LsrError::Residual(e.into())
    }
}

pub type Result<T> = std::result::Result<T, LsrError>;

/// One line of the LSR result table. Test errors are blank when the caller
/// has no held-out set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsrRow {
    pub rank: usize,
    pub loss_before: f64,
    pub loss_after: f64,
    pub test_error_before: Option<f64>,
    pub test_error_after: Option<f64>,
    pub kappa: f64,
    pub y_norm: f64,
    pub seconds: f64,
}

pub const LSR_CSV_HEADER: &str = "rank,loss_before,loss_after,test_error_before,test_error_after,kappa,y_norm,seconds";

pub fn lsr_csv(rows: &[LsrRow]) -> String {
    let mut s = format!("{LSR_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.rank,
            fmt_f64(r.loss_before),
            fmt_f64(r.loss_after),
            opt_cell(r.test_error_before),
            opt_cell(r.test_error_after),
            fmt_f64(r.kappa),
            fmt_f64(r.y_norm),
            fmt_f64(r.seconds)
        );
    }
    s
}

/// Raw vector file: u64 length, then the values, all little-endian.
pub fn encode_vector(v: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * v.len());
    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_vector(bytes: &[u8]) -> Result<Vec<f64>> {
    let (head, body) = bytes
        .split_first_chunk::<8>()
        .ok_or_else(|| LsrError::Invalid("vector file shorter than its length header".into()))?;
    let n = u64::from_le_bytes(*head);
    if body.len() as u64 != n.saturating_mul(8) {
        return Err(LsrError::Invalid(format!(
            "vector file declares {n} values but carries {} bytes",
            body.len()
        )));
    }
    Ok(body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

pub(crate) fn opt_cell(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// `mat[:, ..y.len()]·y` for a row-major matrix.
pub(crate) fn prefix_matvec(mat: &crate::linalg::DenseMatrix, y: &[f64]) -> Vec<f64> {
    debug_assert!(y.len() <= mat.cols());
    (0..mat.rows())
        .map(|i| crate::linalg::dot(&mat.row(i)[..y.len()], y))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_leaves_missing_test_errors_blank() {
        let row = LsrRow {
            rank: 3,
            loss_before: 1.0,
            loss_after: 0.25,
            test_error_before: None,
            test_error_after: Some(0.5),
            kappa: 10.0,
            y_norm: 2.0,
            seconds: 0.0,
        };
        assert_eq!(
            lsr_csv(&[row]),
            format!("{LSR_CSV_HEADER}\n3,1.0,0.25,,0.5,10.0,2.0,0.0\n")
        );
    }

    #[test]
    fn vector_file_round_trip() {
        let v = vec![1.5, -0.0, f64::MAX, 3e-310];
        let bytes = encode_vector(&v);
        assert_eq!(bytes.len(), 8 + 32);
        assert_eq!(&bytes[..8], &4u64.to_le_bytes());
        let back = decode_vector(&bytes).unwrap();
        assert_eq!(
            back.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            v.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(decode_vector(&encode_vector(&[])).unwrap(), Vec::<f64>::new());
        assert!(decode_vector(&bytes[..7]).is_err());
        assert!(decode_vector(&bytes[..bytes.len() - 8]).is_err());
    }
}
