use super::{check_len, Linearization, ResidualError, ResidualProblem, Result, SampleBatches};
use crate::linalg::DenseMatrix;
use crate::net::{ForwardPass, MlpArchitecture};

/// Numerically stable softmax of one logit row.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Per-sample residual `softmax(q) − onehot(label)`; `A = diag(s) − ssᵀ`
/// block-diagonally.
#[derive(Debug, Clone)]
pub struct ClassificationProblem {
    arch: MlpArchitecture,
    x: DenseMatrix,
    labels: Vec<usize>,
}

pub fn classification_residual(
    arch: &MlpArchitecture,
    x: &DenseMatrix,
    labels: &[usize],
    num_classes: usize,
) -> Result<ClassificationProblem> {
    check_len("output width (classes)", num_classes, arch.output_dim)?;
    check_len("input width", arch.input_dim, x.cols())?;
    check_len("label count", x.rows(), labels.len())?;
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
        return Err(ResidualError::LabelOutOfRange {
            index,
            label,
            classes: num_classes,
        });
    }
    Ok(ClassificationProblem {
        arch: arch.clone(),
        x: x.clone(),
        labels: labels.to_vec(),
    })
}

impl ClassificationProblem {
    pub fn architecture(&self) -> &MlpArchitecture {
        &self.arch
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn inputs(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn num_classes(&self) -> usize {
        self.arch.output_dim
    }

    /// Fraction of rows of `logits` (sample-major, `num_classes` wide) whose
    /// argmax is the label.
    pub fn accuracy(&self, logits: &[f64]) -> f64 {
        accuracy(logits, &self.labels, self.num_classes())
    }
}

/// Fraction of sample-major logit rows whose argmax is the label.
pub fn accuracy(logits: &[f64], labels: &[usize], classes: usize) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = logits
        .chunks_exact(classes)
        .zip(labels)
        .filter(|(row, &l)| {
            let best = row.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
            );
            best.0 == l
        })
        .count();
    hits as f64 / labels.len() as f64
}

struct ClassificationLin<'a> {
    pass: ForwardPass<'a>,
    logits: Vec<f64>,
    probs: Vec<f64>,
    f: Vec<f64>,
    n: usize,
    c: usize,
}

impl ClassificationLin<'_> {
    /// Applies the symmetric per-sample softmax Jacobian.
    fn apply_a(&self, t: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; t.len()];
        for ((o, ti), s) in out
            .chunks_exact_mut(self.c)
            .zip(t.chunks_exact(self.c))
            .zip(self.probs.chunks_exact(self.c))
        {
            let st: f64 = s.iter().zip(ti).map(|(a, b)| a * b).sum();
            for k in 0..self.c {
                o[k] = s[k] * (ti[k] - st);
            }
        }
        out
    }
}

impl Linearization for ClassificationLin<'_> {
    fn residual(&self) -> &[f64] {
        &self.f
    }

    fn outputs(&self) -> &[f64] {
        &self.logits
    }

    fn j_action(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.pass.tangent(v)?.value().to_vec())
    }

    fn jt_action(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len("output cotangent length", self.n * self.c, u.len())?;
        let u = DenseMatrix::from_vec(self.n, self.c, u.to_vec())?;
        Ok(self.pass.pullback_values(&u)?)
    }

    fn aj_action(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.apply_a(&self.j_action(v)?))
    }

    fn gt_action(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_len("residual cotangent length", self.n * self.c, w.len())?;
        self.jt_action(&self.apply_a(w))
    }
}

impl ResidualProblem for ClassificationProblem {
    fn param_dim(&self) -> usize {
        self.arch.param_count()
    }

    fn residual_dim(&self) -> usize {
        self.labels.len() * self.arch.output_dim
    }

    fn output_dim(&self) -> usize {
        self.residual_dim()
    }

    fn linearize<'a>(&'a self, theta: &'a [f64]) -> Result<Box<dyn Linearization + 'a>> {
        let pass = ForwardPass::plain(&self.arch, theta, &self.x)?;
        let c = self.arch.output_dim;
        let logits = pass.outputs().into_vec();
        let mut probs = Vec::with_capacity(logits.len());
        for row in logits.chunks_exact(c) {
            probs.extend(softmax(row));
        }
        let mut f = probs.clone();
        for (i, &l) in self.labels.iter().enumerate() {
            f[i * c + l] -= 1.0;
        }
        Ok(Box::new(ClassificationLin {
            pass,
            logits,
            probs,
            f,
            n: self.labels.len(),
            c,
        }))
    }
}

impl SampleBatches for ClassificationProblem {
    fn sample_count(&self) -> usize {
        self.labels.len()
    }

    fn subset(&self, indices: &[usize]) -> Result<Self> {
        Ok(Self {
            arch: self.arch.clone(),
            x: self.x.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_sketch;
    use crate::net::{init_params, Activation};
    use crate::residual::testing::check_problem;

    #[test]
    fn uniform_logits_two_classes() {
        let arch = MlpArchitecture::new(1, 2, vec![], Activation::Tanh).unwrap();
        let theta = vec![0.0; arch.param_count()];
        let p = classification_residual(&arch, &DenseMatrix::from_rows(&[vec![0.4]]), &[0], 2).unwrap();
        assert_eq!(p.residual_at(&theta).unwrap(), vec![-0.5, 0.5]);
    }

    #[test]
    fn rows_sum_to_zero() {
        let arch = MlpArchitecture::new(2, 4, vec![6], Activation::Tanh).unwrap();
        let theta = init_params(&arch, 1);
        let labels = [0, 3, 1, 2, 2];
        let p = classification_residual(&arch, &gaussian_sketch(5, 2, 2), &labels, 4).unwrap();
        for row in p.residual_at(&theta).unwrap().chunks(4) {
            assert!(row.iter().sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn actions_match_finite_differences() {
        for act in [Activation::Tanh, Activation::Relu] {
            let arch = MlpArchitecture::new(2, 2, vec![7], act).unwrap();
            let theta = init_params(&arch, 3);
            let labels: Vec<usize> = (0..12).map(|i| i % 2).collect();
            let p = classification_residual(&arch, &gaussian_sketch(12, 2, 4), &labels, 2).unwrap();
            check_problem(&p, &theta, 11);
        }
    }

    #[test]
    fn label_out_of_range() {
        let arch = MlpArchitecture::new(2, 3, vec![], Activation::Tanh).unwrap();
        let err = classification_residual(&arch, &DenseMatrix::zeros(2, 2), &[0, 3], 3).unwrap_err();
        assert!(matches!(err, ResidualError::LabelOutOfRange { index: 1, label: 3, .. }));
    }

    #[test]
    fn accuracy_counts_argmax() {
        assert_eq!(accuracy(&[1.0, 0.0, 0.0, 2.0, 5.0, 1.0], &[0, 1, 1], 2), 2.0 / 3.0);
    }
}
