use super::{check_len, Linearization, ResidualProblem, Result, SampleBatches};
use crate::linalg::DenseMatrix;

/// Affine model `q = Aθ`, residual `f = Aθ − b`. The Jacobian is the fixed
/// matrix `A`, so every linearization is exact; used as a dense oracle.
#[derive(Debug, Clone)]
pub struct LinearResidual {
    a: DenseMatrix,
    b: Vec<f64>,
}

impl LinearResidual {
    pub fn new(a: DenseMatrix, b: Vec<f64>) -> Result<Self> {
        check_len("right-hand side length", a.rows(), b.len())?;
        Ok(Self { a, b })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }
}

struct LinearLin<'a> {
    a: &'a DenseMatrix,
    q: Vec<f64>,
    f: Vec<f64>,
}

impl Linearization for LinearLin<'_> {
    fn residual(&self) -> &[f64] {
        &self.f
    }

    fn outputs(&self) -> &[f64] {
        &self.q
    }

    fn j_action(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.a.matvec(v)?)
    }

    fn jt_action(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.a.t_matvec(u)?)
    }

    fn aj_action(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.j_action(v)
    }

    fn gt_action(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.jt_action(w)
    }
}

impl ResidualProblem for LinearResidual {
    fn param_dim(&self) -> usize {
        self.a.cols()
    }

    fn residual_dim(&self) -> usize {
        self.a.rows()
    }

    fn output_dim(&self) -> usize {
        self.a.rows()
    }

    fn linearize<'a>(&'a self, theta: &'a [f64]) -> Result<Box<dyn Linearization + 'a>> {
        let q = self.a.matvec(theta)?;
        let f = q.iter().zip(&self.b).map(|(x, y)| x - y).collect();
        Ok(Box::new(LinearLin { a: &self.a, q, f }))
    }
}

impl SampleBatches for LinearResidual {
    fn sample_count(&self) -> usize {
        self.a.rows()
    }

    fn subset(&self, indices: &[usize]) -> Result<Self> {
        Ok(Self {
            a: self.a.select_rows(indices),
            b: indices.iter().map(|&i| self.b[i]).collect(),
        })
    }
}
