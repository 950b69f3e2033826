//! Dense feed-forward networks with exact derivative propagation.
//!
//! A network maps `input_dim` inputs through `hidden` activated layers to a
//! linear output layer. Parameters live in one flat vector, layer by layer,
//! each layer stored as its weights (row-major, `fan_out × fan_in`) followed
//! by its biases.
//!
//! All derivatives are propagated analytically by [`ForwardPass`]: tangents
//! in parameter space (JVP), cotangents back to parameters (VJP), and jets of
//! first and pure second derivatives with respect to each input axis, which
//! is what the PDE residuals are built from.

mod activation;
mod checkpoint;
mod params;
mod pass;

pub use activation::Activation;
pub use checkpoint::{decode_checkpoint, encode_checkpoint, CHECKPOINT_MAGIC};
pub use params::{flatten, init_params, unflatten, LayerParams};
pub use pass::{ForwardPass, JetBatch};

use thiserror::Error;

use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("activation {0:?} has no second derivative; input jets need tanh or tanh_sin")]
    UnsupportedActivation(Activation),
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
}

pub type Result<T> = std::result::Result<T, NetError>;

/// Shape of one dense layer and where its parameters start in θ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    pub offset: usize,
}

impl LayerShape {
    pub fn weight_len(&self) -> usize {
        self.fan_in * self.fan_out
    }

    pub fn bias_offset(&self) -> usize {
        self.offset + self.weight_len()
    }

    pub fn param_len(&self) -> usize {
        self.weight_len() + self.fan_out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpArchitecture {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl MlpArchitecture {
    pub fn new(input_dim: usize, output_dim: usize, hidden: Vec<usize>, activation: Activation) -> Result<Self> {
        let arch = Self {
            input_dim,
            output_dim,
            hidden,
            activation,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.contains(&0) {
            return Err(NetError::InvalidArchitecture(format!(
                "all widths must be >= 1 (input {}, output {}, hidden {:?})",
                self.input_dim, self.output_dim, self.hidden
            )));
        }
        Ok(())
    }

    /// Layer shapes in evaluation order; the last one is the linear head.
    pub fn layers(&self) -> Vec<LayerShape> {
        let mut widths = Vec::with_capacity(self.hidden.len() + 2);
        widths.push(self.input_dim);
        widths.extend_from_slice(&self.hidden);
        widths.push(self.output_dim);
        let mut offset = 0;
        widths
            .windows(2)
            .map(|w| {
                let shape = LayerShape {
                    fan_in: w[0],
                    fan_out: w[1],
                    offset,
                };
                offset += shape.param_len();
                shape
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(LayerShape::param_len).sum()
    }

    pub(crate) fn check_params(&self, theta: &[f64]) -> Result<()> {
        let m = self.param_count();
        if theta.len() != m {
            return Err(NetError::DimensionMismatch {
                what: "parameter vector length",
                expected: m,
                got: theta.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_inputs(&self, x: &DenseMatrix) -> Result<()> {
        if x.cols() != self.input_dim {
            return Err(NetError::DimensionMismatch {
                what: "input width",
                expected: self.input_dim,
                got: x.cols(),
            });
        }
        Ok(())
    }
}

/// Network outputs q(x; θ), one row per input point.
pub fn forward(arch: &MlpArchitecture, theta: &[f64], x: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(ForwardPass::plain(arch, theta, x)?.outputs())
}

/// `J(x)·v`, the output tangent for a parameter tangent `v`.
pub fn jvp(arch: &MlpArchitecture, theta: &[f64], x: &DenseMatrix, v: &[f64]) -> Result<DenseMatrix> {
    Ok(ForwardPass::plain(arch, theta, x)?.tangent(v)?.value_matrix())
}

/// `J(x)ᵀ·u` for output cotangents `u` (one row per point).
pub fn vjp(arch: &MlpArchitecture, theta: &[f64], x: &DenseMatrix, u: &DenseMatrix) -> Result<Vec<f64>> {
    ForwardPass::plain(arch, theta, x)?.pullback_values(u)
}

/// Value, per-axis gradient, and per-axis pure second derivative of q.
pub fn input_jet(arch: &MlpArchitecture, theta: &[f64], x: &DenseMatrix) -> Result<JetBatch> {
    Ok(ForwardPass::with_jets(arch, theta, x)?.jets())
}

/// Derivative of [`input_jet`] along the parameter direction `v`.
pub fn jet_param_tangent(arch: &MlpArchitecture, theta: &[f64], x: &DenseMatrix, v: &[f64]) -> Result<JetBatch> {
    ForwardPass::with_jets(arch, theta, x)?.tangent(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_formula() {
        let arch = MlpArchitecture::new(2, 1, vec![64; 4], Activation::Tanh).unwrap();
        assert_eq!(arch.param_count(), 2 * 64 + 64 + 3 * (64 * 64 + 64) + 64 + 1);
        let layers = arch.layers();
        assert_eq!(layers.len(), 5);
        assert_eq!(layers[1].offset, 192);
    }

    #[test]
    fn zero_width_rejected() {
        assert!(MlpArchitecture::new(2, 1, vec![8, 0], Activation::Tanh).is_err());
        assert!(MlpArchitecture::new(0, 1, vec![], Activation::Tanh).is_err());
    }
}
