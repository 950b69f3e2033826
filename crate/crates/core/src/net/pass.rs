//! Layer-wise derivative propagation.
//!
//! Every quantity is carried as a stack of *streams*, each an n×width block:
//! the value, then one first-derivative stream per input axis, then one pure
//! second-derivative stream per axis. With zero axes this is a plain forward
//! pass. A single GEMM per layer pushes all streams through the weights;
//! the activation then mixes them pointwise:
//!
//! ```text
//! a   = σ(z)
//! ȧ_k = σ'(z)·ż_k
//! ä_k = σ''(z)·ż_k² + σ'(z)·z̈_k
//! ```
//!
//! [`ForwardPass::tangent`] differentiates these recurrences along a
//! parameter direction, [`ForwardPass::pullback`] runs them in reverse.

use super::{LayerShape, MlpArchitecture, NetError, Result};
use crate::linalg::{gemm, DenseMatrix, MatRef};

/// Stacked jets for a batch: value, ∂q/∂x_k and ∂²q/∂x_k² per axis.
///
/// Each block is n×output_dim, row-major; blocks are stored back to back in
/// the order value, grad(0..axes), hess_diag(0..axes).
#[derive(Debug, Clone, PartialEq)]
pub struct JetBatch {
    n: usize,
    out: usize,
    axes: usize,
    data: Vec<f64>,
}

/// Jet of one point.
#[derive(Debug, Clone, PartialEq)]
pub struct InputJet {
    pub value: Vec<f64>,
    /// `grad[k][o] = ∂q_o/∂x_k`
    pub grad: Vec<Vec<f64>>,
    /// `hess_diag[k][o] = ∂²q_o/∂x_k²`
    pub hess_diag: Vec<Vec<f64>>,
}

impl JetBatch {
    pub fn zeros(n: usize, out: usize, axes: usize) -> Self {
        Self {
            n,
            out,
            axes,
            data: vec![0.0; (1 + 2 * axes) * n * out],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn output_dim(&self) -> usize {
        self.out
    }

    pub fn axes(&self) -> usize {
        self.axes
    }

    fn block(&self, b: usize) -> &[f64] {
        let len = self.n * self.out;
        &self.data[b * len..(b + 1) * len]
    }

    fn block_mut(&mut self, b: usize) -> &mut [f64] {
        let len = self.n * self.out;
        &mut self.data[b * len..(b + 1) * len]
    }

    pub fn value(&self) -> &[f64] {
        self.block(0)
    }

    pub fn grad(&self, axis: usize) -> &[f64] {
        assert!(axis < self.axes);
        self.block(1 + axis)
    }

    pub fn hess_diag(&self, axis: usize) -> &[f64] {
        assert!(axis < self.axes);
        self.block(1 + self.axes + axis)
    }

    pub fn value_mut(&mut self) -> &mut [f64] {
        self.block_mut(0)
    }

    pub fn grad_mut(&mut self, axis: usize) -> &mut [f64] {
        assert!(axis < self.axes);
        self.block_mut(1 + axis)
    }

    pub fn hess_diag_mut(&mut self, axis: usize) -> &mut [f64] {
        assert!(axis < self.axes);
        let a = self.axes;
        self.block_mut(1 + a + axis)
    }

    pub fn value_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_vec(self.n, self.out, self.value().to_vec()).expect("block shape")
    }

    pub fn point(&self, i: usize) -> InputJet {
        let o = self.out;
        let slice = |b: &[f64]| b[i * o..(i + 1) * o].to_vec();
        InputJet {
            value: slice(self.value()),
            grad: (0..self.axes).map(|k| slice(self.grad(k))).collect(),
            hess_diag: (0..self.axes).map(|k| slice(self.hess_diag(k))).collect(),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Cached forward evaluation at fixed (θ, x), reusable for any number of
/// tangent and cotangent propagations.
pub struct ForwardPass<'a> {
    arch: &'a MlpArchitecture,
    theta: &'a [f64],
    layers: Vec<LayerShape>,
    n: usize,
    axes: usize,
    /// Input streams of every layer, (streams·n) × fan_in.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation streams of every hidden layer, (streams·n) × fan_out.
    pre: Vec<Vec<f64>>,
    /// σ', σ'', σ''' at the value stream of every hidden layer (n × fan_out
    /// each; the higher two are empty for plain passes).
    derivs: Vec<[Vec<f64>; 3]>,
    output: Vec<f64>,
}

impl<'a> ForwardPass<'a> {
    /// Values only; supports every activation.
    pub fn plain(arch: &'a MlpArchitecture, theta: &'a [f64], x: &DenseMatrix) -> Result<Self> {
        Self::build(arch, theta, x, 0)
    }

    /// Values plus first and pure second derivatives along every input axis.
    pub fn with_jets(arch: &'a MlpArchitecture, theta: &'a [f64], x: &DenseMatrix) -> Result<Self> {
        if !arch.activation.twice_differentiable() {
            return Err(NetError::UnsupportedActivation(arch.activation));
        }
        Self::build(arch, theta, x, arch.input_dim)
    }

    fn streams(&self) -> usize {
        1 + 2 * self.axes
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn architecture(&self) -> &MlpArchitecture {
        self.arch
    }

    fn build(arch: &'a MlpArchitecture, theta: &'a [f64], x: &DenseMatrix, axes: usize) -> Result<Self> {
        arch.check_params(theta)?;
        arch.check_inputs(x)?;
        let n = x.rows();
        let d = arch.input_dim;
        let streams = 1 + 2 * axes;
        let sn = streams * n;

        let mut cur = vec![0.0; sn * d];
        cur[..n * d].copy_from_slice(x.as_slice());
        for k in 0..axes {
            let block = &mut cur[(1 + k) * n * d..(2 + k) * n * d];
            for i in 0..n {
                block[i * d + k] = 1.0;
            }
        }

        let layers = arch.layers();
        let last = layers.len() - 1;
        let mut inputs = Vec::with_capacity(layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut derivs = Vec::with_capacity(last);
        let mut output = Vec::new();

        for (li, l) in layers.iter().enumerate() {
            let (fin, fout) = (l.fan_in, l.fan_out);
            let w = &theta[l.offset..l.bias_offset()];
            let b = &theta[l.bias_offset()..l.offset + l.param_len()];
            let mut z = vec![0.0; sn * fout];
            gemm(
                1.0,
                MatRef::new(&cur, sn, fin),
                MatRef::new(w, fout, fin).t(),
                0.0,
                &mut z,
            );
            for row in z[..n * fout].chunks_exact_mut(fout) {
                for (zi, bi) in row.iter_mut().zip(b) {
                    *zi += bi;
                }
            }
            if li == last {
                inputs.push(cur);
                output = z;
                break;
            }

            let len = n * fout;
            let mut next = vec![0.0; sn * fout];
            let mut d1 = vec![0.0; len];
            let (mut d2, mut d3) = (Vec::new(), Vec::new());
            if axes == 0 {
                for idx in 0..len {
                    let (v, s1) = arch.activation.first(z[idx]);
                    next[idx] = v;
                    d1[idx] = s1;
                }
            } else {
                d2 = vec![0.0; len];
                d3 = vec![0.0; len];
                for idx in 0..len {
                    let [v, s1, s2, s3] = arch.activation.third(z[idx]);
                    next[idx] = v;
                    d1[idx] = s1;
                    d2[idx] = s2;
                    d3[idx] = s3;
                }
                for k in 0..axes {
                    let o1 = (1 + k) * len;
                    let o2 = (1 + axes + k) * len;
                    for idx in 0..len {
                        let zd = z[o1 + idx];
                        next[o1 + idx] = d1[idx] * zd;
                        next[o2 + idx] = d2[idx] * zd * zd + d1[idx] * z[o2 + idx];
                    }
                }
            }
            inputs.push(cur);
            pre.push(z);
            derivs.push([d1, d2, d3]);
            cur = next;
        }

        Ok(Self {
            arch,
            theta,
            layers,
            n,
            axes,
            inputs,
            pre,
            derivs,
            output,
        })
    }

    pub fn outputs(&self) -> DenseMatrix {
        let out = self.arch.output_dim;
        DenseMatrix::from_vec(self.n, out, self.output[..self.n * out].to_vec()).expect("output block")
    }

    pub fn jets(&self) -> JetBatch {
        JetBatch {
            n: self.n,
            out: self.arch.output_dim,
            axes: self.axes,
            data: self.output.clone(),
        }
    }

    /// Directional derivative of every output stream along parameter
    /// direction `v`.
    pub fn tangent(&self, v: &[f64]) -> Result<JetBatch> {
        self.arch.check_params(v)?;
        let n = self.n;
        let axes = self.axes;
        let sn = self.streams() * n;
        let last = self.layers.len() - 1;
        let mut dcur: Option<Vec<f64>> = None;

        for (li, l) in self.layers.iter().enumerate() {
            let (fin, fout) = (l.fan_in, l.fan_out);
            let w = &self.theta[l.offset..l.bias_offset()];
            let dw = &v[l.offset..l.bias_offset()];
            let db = &v[l.bias_offset()..l.offset + l.param_len()];
            let mut dz = vec![0.0; sn * fout];
            gemm(
                1.0,
                MatRef::new(&self.inputs[li], sn, fin),
                MatRef::new(dw, fout, fin).t(),
                0.0,
                &mut dz,
            );
            if let Some(ds) = &dcur {
                gemm(
                    1.0,
                    MatRef::new(ds, sn, fin),
                    MatRef::new(w, fout, fin).t(),
                    1.0,
                    &mut dz,
                );
            }
            for row in dz[..n * fout].chunks_exact_mut(fout) {
                for (zi, bi) in row.iter_mut().zip(db) {
                    *zi += bi;
                }
            }
            if li == last {
                return Ok(JetBatch {
                    n,
                    out: fout,
                    axes,
                    data: dz,
                });
            }

            let len = n * fout;
            let z = &self.pre[li];
            let [d1, d2, d3] = &self.derivs[li];
            let mut next = vec![0.0; sn * fout];
            for idx in 0..len {
                next[idx] = d1[idx] * dz[idx];
            }
            for k in 0..axes {
                let o1 = (1 + k) * len;
                let o2 = (1 + axes + k) * len;
                for idx in 0..len {
                    let dz0 = dz[idx];
                    let zd = z[o1 + idx];
                    let zdd = z[o2 + idx];
                    let dzd = dz[o1 + idx];
                    let dzdd = dz[o2 + idx];
                    next[o1 + idx] = d2[idx] * dz0 * zd + d1[idx] * dzd;
                    next[o2 + idx] = d3[idx] * dz0 * zd * zd + d2[idx] * (2.0 * zd * dzd + dz0 * zdd) + d1[idx] * dzdd;
                }
            }
            dcur = Some(next);
        }
        unreachable!("architecture has at least one layer")
    }

    /// Parameter gradient of `⟨cot, jets⟩`, i.e. the transpose of
    /// [`tangent`](Self::tangent) applied to a cotangent jet.
    pub fn pullback(&self, cot: &JetBatch) -> Result<Vec<f64>> {
        if cot.n != self.n || cot.out != self.arch.output_dim || cot.axes != self.axes {
            return Err(NetError::DimensionMismatch {
                what: "cotangent jet size",
                expected: self.output.len(),
                got: cot.data.len(),
            });
        }
        Ok(self.pullback_raw(cot.data.clone()))
    }

    /// `Jᵀu` for cotangents on the output values only.
    pub fn pullback_values(&self, u: &DenseMatrix) -> Result<Vec<f64>> {
        if u.rows() != self.n || u.cols() != self.arch.output_dim {
            return Err(NetError::DimensionMismatch {
                what: "output cotangent size",
                expected: self.n * self.arch.output_dim,
                got: u.rows() * u.cols(),
            });
        }
        let mut data = vec![0.0; self.output.len()];
        data[..u.as_slice().len()].copy_from_slice(u.as_slice());
        Ok(self.pullback_raw(data))
    }

    fn pullback_raw(&self, mut zbar: Vec<f64>) -> Vec<f64> {
        let n = self.n;
        let axes = self.axes;
        let sn = self.streams() * n;
        let mut grad = vec![0.0; self.arch.param_count()];

        for li in (0..self.layers.len()).rev() {
            let l = self.layers[li];
            let (fin, fout) = (l.fan_in, l.fan_out);
            gemm(
                1.0,
                MatRef::new(&zbar, sn, fout).t(),
                MatRef::new(&self.inputs[li], sn, fin),
                0.0,
                &mut grad[l.offset..l.bias_offset()],
            );
            let gb = &mut grad[l.bias_offset()..l.offset + l.param_len()];
            for row in zbar[..n * fout].chunks_exact(fout) {
                for (g, r) in gb.iter_mut().zip(row) {
                    *g += r;
                }
            }
            if li == 0 {
                break;
            }

            let w = &self.theta[l.offset..l.bias_offset()];
            let mut sbar = vec![0.0; sn * fin];
            gemm(
                1.0,
                MatRef::new(&zbar, sn, fout),
                MatRef::new(w, fout, fin),
                0.0,
                &mut sbar,
            );

            // Back through the activation of the previous layer (width fin).
            let len = n * fin;
            let z = &self.pre[li - 1];
            let [d1, d2, d3] = &self.derivs[li - 1];
            let mut prev = vec![0.0; sn * fin];
            for idx in 0..len {
                prev[idx] = d1[idx] * sbar[idx];
            }
            for k in 0..axes {
                let o1 = (1 + k) * len;
                let o2 = (1 + axes + k) * len;
                for idx in 0..len {
                    let zd = z[o1 + idx];
                    let zdd = z[o2 + idx];
                    let a1 = sbar[o1 + idx];
                    let a2 = sbar[o2 + idx];
                    prev[idx] += d2[idx] * zd * a1 + (d3[idx] * zd * zd + d2[idx] * zdd) * a2;
                    prev[o1 + idx] = d1[idx] * a1 + 2.0 * d2[idx] * zd * a2;
                    prev[o2 + idx] = d1[idx] * a2;
                }
            }
            zbar = prev;
        }
        grad
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, gaussian_sketch};
    use crate::net::{forward, init_params, input_jet, jet_param_tangent, jvp, vjp, Activation};

    fn arch(act: Activation, hidden: Vec<usize>) -> MlpArchitecture {
        MlpArchitecture::new(2, 1, hidden, act).unwrap()
    }

    /// Straight scalar re-implementation of the forward map.
    fn reference_forward(arch: &MlpArchitecture, theta: &[f64], x: &[f64]) -> Vec<f64> {
        let layers = arch.layers();
        let mut a = x.to_vec();
        for (li, l) in layers.iter().enumerate() {
            let mut z = vec![0.0; l.fan_out];
            for o in 0..l.fan_out {
                let mut s = theta[l.bias_offset() + o];
                for i in 0..l.fan_in {
                    s += theta[l.offset + o * l.fan_in + i] * a[i];
                }
                z[o] = s;
            }
            a = if li + 1 == layers.len() {
                z
            } else {
                z.into_iter().map(|v| arch.activation.value(v)).collect()
            };
        }
        a
    }

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300);
        diff / scale
    }

    #[test]
    fn identity_linear_layer() {
        let a = MlpArchitecture::new(2, 2, vec![], Activation::Tanh).unwrap();
        let theta = vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        let x = DenseMatrix::from_rows(&[vec![1.0, 2.0]]);
        assert_eq!(forward(&a, &theta, &x).unwrap().as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let a = arch(Activation::Tanh, vec![8, 8]);
        let theta = vec![0.0; a.param_count()];
        let x = gaussian_sketch(5, 2, 1);
        assert!(forward(&a, &theta, &x).unwrap().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_matches_reference() {
        let a = arch(Activation::Tanh, vec![8]);
        let theta = init_params(&a, 4);
        let x = DenseMatrix::from_rows(&[vec![0.3, -0.7]]);
        let q = forward(&a, &theta, &x).unwrap();
        let r = reference_forward(&a, &theta, &[0.3, -0.7]);
        assert!((q.get(0, 0) - r[0]).abs() <= 1e-15);
    }

    #[test]
    fn linear_model_jvp_and_vjp() {
        let a = MlpArchitecture::new(2, 1, vec![], Activation::Tanh).unwrap();
        let theta = vec![0.5, -1.0, 0.25];
        let x = DenseMatrix::from_rows(&[vec![2.0, 3.0]]);
        let v = vec![1.0, 2.0, 3.0];
        // δW·x + δb
        assert_eq!(jvp(&a, &theta, &x, &v).unwrap().as_slice(), &[2.0 + 6.0 + 3.0]);
        let g = vjp(&a, &theta, &x, &DenseMatrix::from_rows(&[vec![1.0]])).unwrap();
        assert_eq!(g, vec![2.0, 3.0, 1.0]);
        let zero = vjp(&a, &theta, &x, &DenseMatrix::zeros(1, 1)).unwrap();
        assert!(zero.iter().all(|&z| z == 0.0));
        assert!(jvp(&a, &theta, &x, &[0.0; 3])
            .unwrap()
            .as_slice()
            .iter()
            .all(|&z| z == 0.0));
    }

    #[test]
    fn jvp_matches_finite_differences() {
        for act in [Activation::Tanh, Activation::Relu, Activation::TanhSin] {
            let a = MlpArchitecture::new(3, 2, vec![7, 5], act).unwrap();
            let theta = init_params(&a, 1);
            let x = gaussian_sketch(6, 3, 2);
            let v = gaussian_sketch(a.param_count(), 1, 3).into_vec();
            let h = 1e-5;
            let tp: Vec<f64> = theta.iter().zip(&v).map(|(t, d)| t + h * d).collect();
            let tm: Vec<f64> = theta.iter().zip(&v).map(|(t, d)| t - h * d).collect();
            let fp = forward(&a, &tp, &x).unwrap();
            let fm = forward(&a, &tm, &x).unwrap();
            let fd: Vec<f64> = fp
                .as_slice()
                .iter()
                .zip(fm.as_slice())
                .map(|(p, m)| (p - m) / (2.0 * h))
                .collect();
            let an = jvp(&a, &theta, &x, &v).unwrap();
            assert!(rel(an.as_slice(), &fd) <= 1e-6, "{act:?}");
        }
    }

    #[test]
    fn adjoint_identity() {
        let a = MlpArchitecture::new(2, 3, vec![6, 4], Activation::TanhSin).unwrap();
        let theta = init_params(&a, 8);
        let x = gaussian_sketch(9, 2, 1);
        let pass = ForwardPass::plain(&a, &theta, &x).unwrap();
        for seed in 0..10 {
            let v = gaussian_sketch(a.param_count(), 1, 100 + seed).into_vec();
            let u = gaussian_sketch(9, 3, 200 + seed);
            let jv = pass.tangent(&v).unwrap();
            let jtu = pass.pullback_values(&u).unwrap();
            let lhs = dot(u.as_slice(), jv.value());
            let rhs = dot(&jtu, &v);
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
        }
    }

    #[test]
    fn single_tanh_unit_jet_at_origin() {
        let a = MlpArchitecture::new(1, 1, vec![1], Activation::Tanh).unwrap();
        // hidden: w = 1, b = 0; head: w = 1, b = 0
        let theta = vec![1.0, 0.0, 1.0, 0.0];
        let jet = input_jet(&a, &theta, &DenseMatrix::from_rows(&[vec![0.0]])).unwrap();
        assert_eq!(jet.value(), &[0.0]);
        assert_eq!(jet.grad(0), &[1.0]);
        assert_eq!(jet.hess_diag(0), &[0.0]);
    }

    #[test]
    fn affine_network_has_zero_curvature() {
        let a = MlpArchitecture::new(2, 2, vec![], Activation::Tanh).unwrap();
        let theta = vec![1.0, 2.0, 3.0, 4.0, 0.5, -0.5];
        let x = gaussian_sketch(4, 2, 1);
        let jet = input_jet(&a, &theta, &x).unwrap();
        for k in 0..2 {
            assert!(jet.hess_diag(k).iter().all(|&h| h == 0.0));
        }
        // grad along axis 0 is the first weight column
        assert_eq!(&jet.grad(0)[..2], &[1.0, 3.0]);
        let p = jet.point(1);
        assert_eq!(p.grad[1], vec![2.0, 4.0]);
        let v = gaussian_sketch(6, 1, 3).into_vec();
        let t = jet_param_tangent(&a, &theta, &x, &v).unwrap();
        assert_eq!(t.value(), jvp(&a, &theta, &x, &v).unwrap().as_slice());
        assert!(t.hess_diag(0).iter().chain(t.hess_diag(1)).all(|&h| h == 0.0));
    }

    #[test]
    fn relu_rejected_for_jets() {
        let a = arch(Activation::Relu, vec![4]);
        let theta = init_params(&a, 1);
        let x = gaussian_sketch(2, 2, 1);
        assert!(matches!(
            input_jet(&a, &theta, &x),
            Err(NetError::UnsupportedActivation(_))
        ));
    }

    #[test]
    fn input_jet_matches_finite_differences() {
        let a = arch(Activation::Tanh, vec![16]);
        let theta = init_params(&a, 5);
        let x = gaussian_sketch(5, 2, 6);
        let jet = input_jet(&a, &theta, &x).unwrap();
        let h = 1e-4;
        for k in 0..2 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            for i in 0..5 {
                xp.set(i, k, x.get(i, k) + h);
                xm.set(i, k, x.get(i, k) - h);
            }
            let fp = forward(&a, &theta, &xp).unwrap();
            let fm = forward(&a, &theta, &xm).unwrap();
            let f0 = forward(&a, &theta, &x).unwrap();
            let g: Vec<f64> = (0..5).map(|i| (fp.get(i, 0) - fm.get(i, 0)) / (2.0 * h)).collect();
            let hd: Vec<f64> = (0..5)
                .map(|i| (fp.get(i, 0) - 2.0 * f0.get(i, 0) + fm.get(i, 0)) / (h * h))
                .collect();
            assert!(rel(jet.grad(k), &g) <= 1e-5);
            assert!(
                rel(jet.hess_diag(k), &hd) <= 1e-5,
                "hess {}",
                rel(jet.hess_diag(k), &hd)
            );
        }
    }

    #[test]
    fn jet_tangent_matches_finite_differences() {
        for act in [Activation::Tanh, Activation::TanhSin] {
            let a = arch(act, vec![6, 5]);
            let theta = init_params(&a, 7);
            let x = gaussian_sketch(4, 2, 8);
            let v = gaussian_sketch(a.param_count(), 1, 9).into_vec();
            let h = 1e-5;
            let tp: Vec<f64> = theta.iter().zip(&v).map(|(t, d)| t + h * d).collect();
            let tm: Vec<f64> = theta.iter().zip(&v).map(|(t, d)| t - h * d).collect();
            let jp = input_jet(&a, &tp, &x).unwrap();
            let jm = input_jet(&a, &tm, &x).unwrap();
            let fd: Vec<f64> = jp
                .as_slice()
                .iter()
                .zip(jm.as_slice())
                .map(|(p, m)| (p - m) / (2.0 * h))
                .collect();
            let an = jet_param_tangent(&a, &theta, &x, &v).unwrap();
            assert!(rel(an.as_slice(), &fd) <= 1e-5, "{act:?}: {}", rel(an.as_slice(), &fd));
        }
    }

    #[test]
    fn jet_pullback_is_adjoint_of_tangent() {
        let a = arch(Activation::TanhSin, vec![5, 4]);
        let theta = init_params(&a, 2);
        let x = gaussian_sketch(7, 2, 3);
        let pass = ForwardPass::with_jets(&a, &theta, &x).unwrap();
        let v = gaussian_sketch(a.param_count(), 1, 4).into_vec();
        let mut cot = JetBatch::zeros(7, 1, 2);
        cot.data = gaussian_sketch(cot.data.len(), 1, 5).into_vec();
        let lhs = dot(cot.as_slice(), pass.tangent(&v).unwrap().as_slice());
        let rhs = dot(&pass.pullback(&cot).unwrap(), &v);
        assert!((lhs - rhs).abs() <= 1e-11 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn batch_evaluation_equals_pointwise() {
        let a = arch(Activation::Tanh, vec![9, 9]);
        let theta = init_params(&a, 3);
        let x = gaussian_sketch(11, 2, 4);
        let v = gaussian_sketch(a.param_count(), 1, 5).into_vec();
        let q = forward(&a, &theta, &x).unwrap();
        let jv = jvp(&a, &theta, &x, &v).unwrap();
        for i in 0..11 {
            let xi = x.row_range(i, i + 1);
            assert!((forward(&a, &theta, &xi).unwrap().get(0, 0) - q.get(i, 0)).abs() <= 1e-14);
            assert!((jvp(&a, &theta, &xi, &v).unwrap().get(0, 0) - jv.get(i, 0)).abs() <= 1e-14);
        }
    }

    #[test]
    fn dimension_errors() {
        let a = arch(Activation::Tanh, vec![3]);
        let theta = init_params(&a, 1);
        assert!(forward(&a, &theta, &DenseMatrix::zeros(2, 3)).is_err());
        assert!(forward(&a, &theta[1..], &DenseMatrix::zeros(2, 2)).is_err());
        assert!(jvp(&a, &theta, &DenseMatrix::zeros(2, 2), &[0.0; 2]).is_err());
        assert!(vjp(&a, &theta, &DenseMatrix::zeros(2, 2), &DenseMatrix::zeros(3, 1)).is_err());
    }
}
