use nalgebra::{DMatrix, SymmetricEigen};

use super::{gemm, DenseMatrix, HouseholderQr, LinalgError, MatRef, Result};

/// Singular values below this fraction of the largest are dropped.
pub const SVD_TRUNCATION: f64 = 1e-12;

/// Thin SVD `a ≈ u·diag(sigma)·vᵀ` keeping only the numerically nonzero
/// singular triplets, sorted by descending singular value.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

impl ThinSvd {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (x, s) in us.row_mut(i).iter_mut().zip(&self.sigma) {
                *x *= s;
            }
        }
        us.matmul(&self.v.transpose()).expect("conformant by construction")
    }
}

/// Thin SVD of a matrix with one short dimension, computed through the Gram
/// matrix of the short side.
///
/// For a short-fat `a` (rows ≤ cols) the eigenpairs of `a·aᵀ` give `u` and
/// `sigma²`; the long-side vectors follow as `v = aᵀ·u·Σ⁻¹`. Tall inputs are
/// handled by transposition. Cost is O(short²·long) plus a short×short
/// eigensolve.
pub fn thin_svd_tall(a: &DenseMatrix) -> Result<ThinSvd> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(LinalgError::DimensionMismatch {
            op: "thin_svd_tall",
            expected: (1, 1),
            got: a.shape(),
        });
    }
    if !a.is_finite() {
        return Err(LinalgError::NonFinite { op: "thin_svd_tall" });
    }
    if a.rows() > a.cols() {
        let t = short_fat_svd(&a.transpose())?;
        return Ok(ThinSvd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        });
    }
    short_fat_svd(a)
}

fn short_fat_svd(a: &DenseMatrix) -> Result<ThinSvd> {
    let (k, m) = a.shape();
    let mut gram = vec![0.0; k * k];
    let view = MatRef::new(a.as_slice(), k, m);
    gemm(1.0, view, view.t(), 0.0, &mut gram);
    // Symmetrise against rounding in the product.
    for i in 0..k {
        for j in 0..i {
            let s = 0.5 * (gram[i * k + j] + gram[j * k + i]);
            gram[i * k + j] = s;
            gram[j * k + i] = s;
        }
    }
    let eig = SymmetricEigen::try_new(DMatrix::from_row_slice(k, k, &gram), f64::EPSILON, 0)
        .ok_or_else(|| LinalgError::Decomposition("symmetric eigensolver did not converge".into()))?;

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let sigma_max = eig.eigenvalues[order[0]].max(0.0).sqrt();
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| {
            let s = eig.eigenvalues[i].max(0.0).sqrt();
            s > 0.0 && s >= SVD_TRUNCATION * sigma_max
        })
        .collect();
    let r = kept.len();
    if r == 0 {
        return Ok(ThinSvd {
            u: DenseMatrix::zeros(k, 0),
            sigma: Vec::new(),
            v: DenseMatrix::zeros(m, 0),
        });
    }

    let mut u = DenseMatrix::zeros(k, r);
    let mut sigma = Vec::with_capacity(r);
    for (c, &i) in kept.iter().enumerate() {
        sigma.push(eig.eigenvalues[i].sqrt());
        for row in 0..k {
            u.set(row, c, eig.eigenvectors[(row, i)]);
        }
    }
    // v = aᵀ·u·Σ⁻¹
    let mut v = DenseMatrix::zeros(m, r);
    gemm(1.0, view.t(), MatRef::new(u.as_slice(), k, r), 0.0, v.as_mut_slice());
    for i in 0..m {
        for (x, s) in v.row_mut(i).iter_mut().zip(&sigma) {
            *x /= s;
        }
    }
    Ok(ThinSvd { u, sigma, v })
}

/// Thin SVD through a QR factorization of the long side.
///
/// For short-fat `a`, `aᵀ = Q·R` and the small SVD `Rᵀ = U·Σ·Wᵀ` give
/// `a = U·Σ·(Q·W)ᵀ`. Both singular-vector sets are orthonormal to working
/// precision however fast the spectrum decays, at roughly twice the cost of
/// the Gram route. Truncation matches [`thin_svd_tall`].
pub fn thin_svd_qr(a: &DenseMatrix) -> Result<ThinSvd> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(LinalgError::DimensionMismatch {
            op: "thin_svd_qr",
            expected: (1, 1),
            got: a.shape(),
        });
    }
    if !a.is_finite() {
        return Err(LinalgError::NonFinite { op: "thin_svd_qr" });
    }
    if a.rows() > a.cols() {
        let t = short_fat_svd_qr(&a.transpose())?;
        return Ok(ThinSvd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        });
    }
    short_fat_svd_qr(a)
}

fn short_fat_svd_qr(a: &DenseMatrix) -> Result<ThinSvd> {
    let (k, m) = a.shape();
    let qr = HouseholderQr::new(&a.transpose())?;
    let rt = qr.r().transpose();
    let svd = DMatrix::from_row_slice(k, k, rt.as_slice())
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| LinalgError::Decomposition("small SVD did not converge".into()))?;
    let (su, svt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(LinalgError::Decomposition("small SVD returned no vectors".into())),
    };
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma_max = svd.singular_values[order[0]];
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| {
            let s = svd.singular_values[i];
            s > 0.0 && s >= SVD_TRUNCATION * sigma_max
        })
        .collect();
    let r = kept.len();
    let mut u = DenseMatrix::zeros(k, r);
    let mut w = DenseMatrix::zeros(k, r);
    let mut sigma = Vec::with_capacity(r);
    for (c, &i) in kept.iter().enumerate() {
        sigma.push(svd.singular_values[i]);
        for row in 0..k {
            u.set(row, c, su[(row, i)]);
            // W = Vᵀᵀ: column i of W is row i of v_t
            w.set(row, c, svt[(i, row)]);
        }
    }
    let q = qr.thin_q();
    let mut v = DenseMatrix::zeros(m, r);
    if r > 0 {
        gemm(
            1.0,
            MatRef::new(q.as_slice(), m, k),
            MatRef::new(w.as_slice(), k, r),
            0.0,
            v.as_mut_slice(),
        );
    }
    Ok(ThinSvd { u, sigma, v })
}
