use super::{check_len, Linearization, ResidualProblem, Result, SampleBatches};
use crate::linalg::DenseMatrix;
use crate::net::{ForwardPass, MlpArchitecture};

/// Pointwise misfit `f = q(x; θ) − y`, rows ordered sample-major. `A = I`.
#[derive(Debug, Clone)]
pub struct SupervisedProblem {
    arch: MlpArchitecture,
    x: DenseMatrix,
    targets: DenseMatrix,
}

pub fn supervised_residual(
    arch: &MlpArchitecture,
    x: &DenseMatrix,
    targets: &DenseMatrix,
) -> Result<SupervisedProblem> {
    check_len("input width", arch.input_dim, x.cols())?;
    check_len("target width", arch.output_dim, targets.cols())?;
    check_len("target count", x.rows(), targets.rows())?;
    Ok(SupervisedProblem {
        arch: arch.clone(),
        x: x.clone(),
        targets: targets.clone(),
    })
}

impl SupervisedProblem {
    pub fn architecture(&self) -> &MlpArchitecture {
        &self.arch
    }

    pub fn inputs(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn targets(&self) -> &DenseMatrix {
        &self.targets
    }
}

struct SupervisedLin<'a> {
    pass: ForwardPass<'a>,
    q: Vec<f64>,
    f: Vec<f64>,
    n: usize,
    out: usize,
}

impl Linearization for SupervisedLin<'_> {
    fn residual(&self) -> &[f64] {
        &self.f
    }

    fn outputs(&self) -> &[f64] {
        &self.q
    }

    fn j_action(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.pass.tangent(v)?.value().to_vec())
    }

    fn jt_action(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len("output cotangent length", self.n * self.out, u.len())?;
        let u = DenseMatrix::from_vec(self.n, self.out, u.to_vec())?;
        Ok(self.pass.pullback_values(&u)?)
    }

    fn aj_action(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.j_action(v)
    }

    fn gt_action(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.jt_action(w)
    }
}

impl ResidualProblem for SupervisedProblem {
    fn param_dim(&self) -> usize {
        self.arch.param_count()
    }

    fn residual_dim(&self) -> usize {
        self.targets.rows() * self.targets.cols()
    }

    fn output_dim(&self) -> usize {
        self.residual_dim()
    }

    fn linearize<'a>(&'a self, theta: &'a [f64]) -> Result<Box<dyn Linearization + 'a>> {
        let pass = ForwardPass::plain(&self.arch, theta, &self.x)?;
        let q = pass.outputs().into_vec();
        let f = q.iter().zip(self.targets.as_slice()).map(|(a, b)| a - b).collect();
        Ok(Box::new(SupervisedLin {
            pass,
            q,
            f,
            n: self.x.rows(),
            out: self.arch.output_dim,
        }))
    }
}

impl SampleBatches for SupervisedProblem {
    fn sample_count(&self) -> usize {
        self.x.rows()
    }

    fn subset(&self, indices: &[usize]) -> Result<Self> {
        Ok(Self {
            arch: self.arch.clone(),
            x: self.x.select_rows(indices),
            targets: self.targets.select_rows(indices),
        })
    }
}
