use super::{dot, solve_triangular, DenseMatrix, LinalgError, Result};

/// Economy QR factors: `a = q·r`, `q` is n×k with orthonormal columns and
/// `r` is k×k upper triangular with a non-negative diagonal.
#[derive(Debug, Clone)]
pub struct QrFactors {
    pub q: DenseMatrix,
    pub r: DenseMatrix,
}

/// Householder factorisation kept in reflector form.
///
/// Reflector `j` acts on rows `j..n`; the diagonal sign flips that make
/// `R[j][j] ≥ 0` are recorded separately so `Qᵀb` can be applied to new
/// right-hand sides without materialising `Q`.
#[derive(Debug, Clone)]
pub struct HouseholderQr {
    n: usize,
    k: usize,
    // reflectors[j] has length n - j
    reflectors: Vec<Vec<f64>>,
    betas: Vec<f64>,
    signs: Vec<f64>,
    r: DenseMatrix,
}

impl HouseholderQr {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        let (n, k) = a.shape();
        if k == 0 || n < k {
            return Err(LinalgError::DimensionMismatch {
                op: "householder_qr",
                expected: (k.max(1), k.max(1)),
                got: (n, k),
            });
        }
        if !a.is_finite() {
            return Err(LinalgError::NonFinite { op: "householder_qr" });
        }
        // Column-major working copy: cols[c] is column c of `a`.
        let mut cols: Vec<Vec<f64>> = (0..k).map(|c| a.column(c)).collect();
        let mut reflectors = Vec::with_capacity(k);
        let mut betas = Vec::with_capacity(k);

        for j in 0..k {
            let x = &cols[j][j..];
            let norm = dot(x, x).sqrt();
            if norm == 0.0 {
                reflectors.push(vec![0.0; n - j]);
                betas.push(0.0);
                continue;
            }
            let alpha = if x[0] >= 0.0 { -norm } else { norm };
            let mut v = x.to_vec();
            v[0] -= alpha;
            let vtv = dot(&v, &v);
            let beta = if vtv > 0.0 { 2.0 / vtv } else { 0.0 };
            cols[j][j] = alpha;
            cols[j][j + 1..].iter_mut().for_each(|e| *e = 0.0);
            for col in cols.iter_mut().skip(j + 1) {
                let tail = &mut col[j..];
                let s = beta * dot(&v, tail);
                if s != 0.0 {
                    for (t, vi) in tail.iter_mut().zip(&v) {
                        *t -= s * vi;
                    }
                }
            }
            reflectors.push(v);
            betas.push(beta);
        }

        let mut r = DenseMatrix::zeros(k, k);
        let mut signs = vec![1.0; k];
        for (c, col) in cols.iter().enumerate() {
            for i in 0..=c {
                r.set(i, c, col[i]);
            }
        }
        for (j, s) in signs.iter_mut().enumerate() {
            if r.get(j, j) < 0.0 {
                *s = -1.0;
                for e in r.row_mut(j) {
                    *e = -*e;
                }
            }
        }
        Ok(Self {
            n,
            k,
            reflectors,
            betas,
            signs,
            r,
        })
    }

    pub fn r(&self) -> &DenseMatrix {
        &self.r
    }

    pub fn into_r(self) -> DenseMatrix {
        self.r
    }

    /// Full-length `Qᵀb` for the implicit n×n orthogonal factor. The first
    /// k entries are the thin projection; the tail holds the part of `b`
    /// orthogonal to range(a).
    pub fn apply_qt(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(LinalgError::DimensionMismatch {
                op: "apply_qt",
                expected: (self.n, 1),
                got: (b.len(), 1),
            });
        }
        let mut w = b.to_vec();
        for j in 0..self.k {
            let tail = &mut w[j..];
            let v = &self.reflectors[j];
            let s = self.betas[j] * dot(v, tail);
            if s != 0.0 {
                for (t, vi) in tail.iter_mut().zip(v) {
                    *t -= s * vi;
                }
            }
        }
        for (wj, s) in w.iter_mut().zip(&self.signs) {
            *wj *= s;
        }
        Ok(w)
    }

    /// Explicit thin `Q` (n×k).
    pub fn thin_q(&self) -> DenseMatrix {
        let (n, k) = (self.n, self.k);
        let mut q = DenseMatrix::zeros(n, k);
        let mut col = vec![0.0; n];
        for c in 0..k {
            col.iter_mut().for_each(|x| *x = 0.0);
            col[c] = self.signs[c];
            for j in (0..k).rev() {
                let tail = &mut col[j..];
                let v = &self.reflectors[j];
                let s = self.betas[j] * dot(v, tail);
                if s != 0.0 {
                    for (t, vi) in tail.iter_mut().zip(v) {
                        *t -= s * vi;
                    }
                }
            }
            q.set_column(c, &col);
        }
        q
    }

    /// Least-squares solution of `a·x ≈ b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let qtb = self.apply_qt(b)?;
        solve_triangular(&self.r, &qtb[..self.k])
    }
}

/// Economy Householder QR of an n×k matrix with n ≥ k ≥ 1. No pivoting; the
/// diagonal of `r` is made non-negative so the factors are deterministic.
pub fn householder_qr(a: &DenseMatrix) -> Result<QrFactors> {
    let h = HouseholderQr::new(a)?;
    let q = h.thin_q();
    Ok(QrFactors { q, r: h.into_r() })
}

/// Dense least squares `min ‖a·x − b‖` through Householder QR.
pub fn lstsq(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    HouseholderQr::new(a)?.solve(b)
}
