//! Collocation residuals for the Poisson and viscous Burgers equations.
//!
//! Rows are stacked as `[interior][boundary][initial][periodic]`, each group
//! scaled by the square root of its weight. An interior row is a pointwise
//! function of the input jet `(q, ∂q/∂x_k, ∂²q/∂x_k²)`; its linearization is
//! a per-point coefficient on every jet component, so `(AJ)v` is the
//! coefficient-weighted parameter tangent of the jet and `(AJ)ᵀw` is the jet
//! pullback of the coefficient-weighted cotangent.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::{check_len, CollocationSet, GroupWeights, Linearization, ResidualError, ResidualProblem, Result};
use crate::linalg::{axpy, DenseMatrix};
use crate::net::{ForwardPass, JetBatch, MlpArchitecture, NetError};

pub const BURGERS_NU: f64 = 0.01 / PI;

/// q(x, y) = sin(4πx²)·sin(πy)
pub fn poisson_exact(x: f64, y: f64) -> f64 {
    (4.0 * PI * x * x).sin() * (PI * y).sin()
}

/// Laplacian of [`poisson_exact`]:
/// `sin(πy)·[8π·cos(4πx²) − (64π²x² + π²)·sin(4πx²)]`.
pub fn poisson_source(x: f64, y: f64) -> f64 {
    let a = 4.0 * PI * x * x;
    (PI * y).sin() * (8.0 * PI * a.cos() - (64.0 * PI * PI * x * x + PI * PI) * a.sin())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PdeKind {
    /// `q_xx + q_yy − f_s`
    Poisson,
    /// `q_t + q·q_x − ν·q_xx` over inputs (x, t)
    Burgers { nu: f64 },
}

impl PdeKind {
    /// Sign of the pseudo-time term added to the base interior row: the
    /// wrapped row is `base + s·(q − q0)/Δτ`. Poisson rows are `f_pde`
    /// itself, Burgers rows are `q_t − f_pde`.
    fn pseudo_time_sign(self) -> f64 {
        match self {
            PdeKind::Poisson => -1.0,
            PdeKind::Burgers { .. } => 1.0,
        }
    }
}

/// Pseudo-time anchoring of the interior rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TsonnConfig {
    /// Reference state at the interior points.
    pub q0: Vec<f64>,
    pub delta_tau: f64,
}

#[derive(Debug, Clone)]
pub struct PdeProblem {
    arch: MlpArchitecture,
    kind: PdeKind,
    interior: DenseMatrix,
    source: Vec<f64>,
    boundary: DenseMatrix,
    boundary_values: Vec<f64>,
    initial: DenseMatrix,
    initial_values: Vec<f64>,
    left: DenseMatrix,
    right: DenseMatrix,
    weights: GroupWeights,
    tsonn: Option<TsonnConfig>,
}

fn check_arch(arch: &MlpArchitecture) -> Result<()> {
    check_len("PDE input width", 2, arch.input_dim)?;
    check_len("PDE output width", 1, arch.output_dim)?;
    if !arch.activation.twice_differentiable() {
        return Err(NetError::UnsupportedActivation(arch.activation).into());
    }
    Ok(())
}

fn eval_rows(m: &DenseMatrix, g: &dyn Fn(f64, f64) -> f64) -> Vec<f64> {
    (0..m.rows()).map(|i| g(m.get(i, 0), m.get(i, 1))).collect()
}

pub fn poisson_residual(
    arch: &MlpArchitecture,
    coll: &CollocationSet,
    source: &dyn Fn(f64, f64) -> f64,
    bc: &dyn Fn(f64, f64) -> f64,
) -> Result<PdeProblem> {
    check_arch(arch)?;
    coll.weights.validate()?;
    if coll.periodic_partner.rows() != 0 || coll.initial.rows() != 0 {
        return Err(ResidualError::Invalid(
            "Poisson takes Dirichlet boundary points only".into(),
        ));
    }
    Ok(PdeProblem {
        arch: arch.clone(),
        kind: PdeKind::Poisson,
        source: eval_rows(&coll.interior, source),
        interior: coll.interior.clone(),
        boundary_values: eval_rows(&coll.boundary, bc),
        boundary: coll.boundary.clone(),
        initial: DenseMatrix::zeros(0, 2),
        initial_values: Vec::new(),
        left: DenseMatrix::zeros(0, 2),
        right: DenseMatrix::zeros(0, 2),
        weights: coll.weights,
        tsonn: None,
    })
}

/// Burgers on (x, t) with initial data sin(πx) and value periodicity in x.
pub fn burgers_residual(arch: &MlpArchitecture, coll: &CollocationSet, nu: f64) -> Result<PdeProblem> {
    check_arch(arch)?;
    coll.weights.validate()?;
    check_len(
        "periodic partner count",
        coll.boundary.rows(),
        coll.periodic_partner.rows(),
    )?;
    if !(nu >= 0.0 && nu.is_finite()) {
        return Err(ResidualError::Invalid(format!(
            "viscosity must be non-negative, got {nu}"
        )));
    }
    Ok(PdeProblem {
        arch: arch.clone(),
        kind: PdeKind::Burgers { nu },
        source: vec![0.0; coll.interior.rows()],
        interior: coll.interior.clone(),
        boundary: DenseMatrix::zeros(0, 2),
        boundary_values: Vec::new(),
        initial_values: eval_rows(&coll.initial, &|x, _| (PI * x).sin()),
        initial: coll.initial.clone(),
        left: coll.boundary.clone(),
        right: coll.periodic_partner.clone(),
        weights: coll.weights,
        tsonn: None,
    })
}

/// Replaces the interior rows by their pseudo-time form anchored at `cfg.q0`.
/// Wrapping an already wrapped problem replaces the anchor.
pub fn tsonn_wrap(base: &PdeProblem, cfg: TsonnConfig) -> Result<PdeProblem> {
    check_len("pseudo-time reference length", base.interior.rows(), cfg.q0.len())?;
    if !(cfg.delta_tau > 0.0 && cfg.delta_tau.is_finite()) {
        return Err(ResidualError::Invalid(format!(
            "delta_tau must be positive, got {}",
            cfg.delta_tau
        )));
    }
    let mut p = base.clone();
    p.tsonn = Some(cfg);
    Ok(p)
}

impl PdeProblem {
    pub fn kind(&self) -> PdeKind {
        self.kind
    }

    pub fn architecture(&self) -> &MlpArchitecture {
        &self.arch
    }

    pub fn interior_points(&self) -> &DenseMatrix {
        &self.interior
    }

    pub fn interior_count(&self) -> usize {
        self.interior.rows()
    }

    pub fn tsonn(&self) -> Option<&TsonnConfig> {
        self.tsonn.as_ref()
    }

    /// The same problem without pseudo-time anchoring.
    pub fn base(&self) -> PdeProblem {
        let mut p = self.clone();
        p.tsonn = None;
        p
    }

    fn periodic_rows(&self) -> usize {
        self.left.rows()
    }
}

struct PdeLin<'a> {
    p: &'a PdeProblem,
    theta: &'a [f64],
    jets: ForwardPass<'a>,
    interior_plain: OnceLock<ForwardPass<'a>>,
    /// Per jet block, per interior point: ∂row/∂component, including √w.
    coef: Vec<Vec<f64>>,
    boundary: ForwardPass<'a>,
    initial: ForwardPass<'a>,
    left: ForwardPass<'a>,
    right: ForwardPass<'a>,
    scales: [f64; 3],
    f: Vec<f64>,
    q: Vec<f64>,
}

impl<'a> PdeLin<'a> {
    fn new(p: &'a PdeProblem, theta: &'a [f64]) -> Result<Self> {
        let arch = &p.arch;
        let jets = ForwardPass::with_jets(arch, theta, &p.interior)?;
        let boundary = ForwardPass::plain(arch, theta, &p.boundary)?;
        let initial = ForwardPass::plain(arch, theta, &p.initial)?;
        let left = ForwardPass::plain(arch, theta, &p.left)?;
        let right = ForwardPass::plain(arch, theta, &p.right)?;
        let w = &p.weights;
        let scales = [w.interior.sqrt(), w.boundary.sqrt(), w.initial.sqrt()];
        let [s_int, s_bd, s_init] = scales;

        let jet = jets.jets();
        let n = p.interior.rows();
        let (q, qx, qy, qxx, qyy) = (
            jet.value(),
            jet.grad(0),
            jet.grad(1),
            jet.hess_diag(0),
            jet.hess_diag(1),
        );
        let mut coef = vec![vec![0.0; n]; 5];
        let mut rows = vec![0.0; n];
        for i in 0..n {
            let (row, c) = match p.kind {
                PdeKind::Poisson => (qxx[i] + qyy[i] - p.source[i], [0.0, 0.0, 0.0, 1.0, 1.0]),
                PdeKind::Burgers { nu } => (qy[i] + q[i] * qx[i] - nu * qxx[i], [qx[i], q[i], 1.0, -nu, 0.0]),
            };
            rows[i] = row;
            for b in 0..5 {
                coef[b][i] = c[b];
            }
        }
        if let Some(cfg) = &p.tsonn {
            let s = p.kind.pseudo_time_sign() / cfg.delta_tau;
            for i in 0..n {
                rows[i] += s * (q[i] - cfg.q0[i]);
                coef[0][i] += s;
            }
        }
        for c in coef.iter_mut() {
            c.iter_mut().for_each(|v| *v *= s_int);
        }

        let qb = boundary.outputs().into_vec();
        let qi = initial.outputs().into_vec();
        let ql = left.outputs().into_vec();
        let qr = right.outputs().into_vec();
        let mut f = Vec::with_capacity(p.residual_dim());
        f.extend(rows.iter().map(|r| s_int * r));
        f.extend(qb.iter().zip(&p.boundary_values).map(|(a, g)| s_bd * (a - g)));
        f.extend(qi.iter().zip(&p.initial_values).map(|(a, g)| s_init * (a - g)));
        f.extend(ql.iter().zip(&qr).map(|(a, b)| s_bd * (a - b)));

        let mut outputs = q.to_vec();
        outputs.extend(qb);
        outputs.extend(qi);
        outputs.extend(ql);
        outputs.extend(qr);

        Ok(Self {
            p,
            theta,
            jets,
            interior_plain: OnceLock::new(),
            coef,
            boundary,
            initial,
            left,
            right,
            scales,
            f,
            q: outputs,
        })
    }

    fn interior_plain(&self) -> Result<&ForwardPass<'a>> {
        if let Some(pass) = self.interior_plain.get() {
            return Ok(pass);
        }
        let pass = ForwardPass::plain(&self.p.arch, self.theta, &self.p.interior)?;
        Ok(self.interior_plain.get_or_init(|| pass))
    }
}

fn column(values: &[f64]) -> Result<DenseMatrix> {
    Ok(DenseMatrix::from_vec(values.len(), 1, values.to_vec())?)
}

fn scaled(s: f64, values: &[f64]) -> Vec<f64> {
    values.iter().map(|v| s * v).collect()
}

impl Linearization for PdeLin<'_> {
    fn residual(&self) -> &[f64] {
        &self.f
    }

    fn outputs(&self) -> &[f64] {
        &self.q
    }

    fn j_action(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.q.len());
        out.extend_from_slice(self.interior_plain()?.tangent(v)?.value());
        for pass in [&self.boundary, &self.initial, &self.left, &self.right] {
            out.extend_from_slice(pass.tangent(v)?.value());
        }
        Ok(out)
    }

    fn jt_action(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len("output cotangent length", self.q.len(), u.len())?;
        let mut g = vec![0.0; self.p.arch.param_count()];
        let mut start = 0;
        let interior = self.interior_plain()?;
        for pass in [interior, &self.boundary, &self.initial, &self.left, &self.right] {
            let n = pass.len();
            axpy(1.0, &pass.pullback_values(&column(&u[start..start + n])?)?, &mut g);
            start += n;
        }
        Ok(g)
    }

    fn aj_action(&self, v: &[f64]) -> Result<Vec<f64>> {
        let [_, s_bd, s_init] = self.scales;
        let n = self.p.interior.rows();
        let t = self.jets.tangent(v)?;
        let t = t.as_slice();
        let mut out = Vec::with_capacity(self.f.len());
        for i in 0..n {
            out.push((0..5).map(|b| self.coef[b][i] * t[b * n + i]).sum());
        }
        out.extend(scaled(s_bd, self.boundary.tangent(v)?.value()));
        out.extend(scaled(s_init, self.initial.tangent(v)?.value()));
        let tl = self.left.tangent(v)?;
        let tr = self.right.tangent(v)?;
        out.extend(tl.value().iter().zip(tr.value()).map(|(a, b)| s_bd * (a - b)));
        Ok(out)
    }

    fn gt_action(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_len("residual cotangent length", self.f.len(), w.len())?;
        let [_, s_bd, s_init] = self.scales;
        let n = self.p.interior.rows();
        let nb = self.p.boundary.rows();
        let ni = self.p.initial.rows();
        let np = self.p.periodic_rows();

        let mut cot = JetBatch::zeros(n, 1, 2);
        let data = cot.as_mut_slice();
        for b in 0..5 {
            for i in 0..n {
                data[b * n + i] = self.coef[b][i] * w[i];
            }
        }
        let mut g = self.jets.pullback(&cot)?;
        let wb = &w[n..n + nb];
        let wi = &w[n + nb..n + nb + ni];
        let wp = &w[n + nb + ni..n + nb + ni + np];
        axpy(
            1.0,
            &self.boundary.pullback_values(&column(&scaled(s_bd, wb))?)?,
            &mut g,
        );
        axpy(
            1.0,
            &self.initial.pullback_values(&column(&scaled(s_init, wi))?)?,
            &mut g,
        );
        axpy(1.0, &self.left.pullback_values(&column(&scaled(s_bd, wp))?)?, &mut g);
        axpy(-1.0, &self.right.pullback_values(&column(&scaled(s_bd, wp))?)?, &mut g);
        Ok(g)
    }
}

impl ResidualProblem for PdeProblem {
    fn param_dim(&self) -> usize {
        self.arch.param_count()
    }

    fn residual_dim(&self) -> usize {
        self.interior.rows() + self.boundary.rows() + self.initial.rows() + self.periodic_rows()
    }

    fn output_dim(&self) -> usize {
        self.interior.rows() + self.boundary.rows() + self.initial.rows() + 2 * self.periodic_rows()
    }

    fn linearize<'a>(&'a self, theta: &'a [f64]) -> Result<Box<dyn Linearization + 'a>> {
        Ok(Box::new(PdeLin::new(self, theta)?))
    }
}
