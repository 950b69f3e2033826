use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{MlpArchitecture, Result};
use crate::linalg::DenseMatrix;

/// One layer's parameters in matrix form.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// fan_out × fan_in
    pub weights: DenseMatrix,
    pub bias: Vec<f64>,
}

pub fn unflatten(arch: &MlpArchitecture, theta: &[f64]) -> Result<Vec<LayerParams>> {
    arch.check_params(theta)?;
    Ok(arch
        .layers()
        .iter()
        .map(|l| LayerParams {
            weights: DenseMatrix::from_vec(l.fan_out, l.fan_in, theta[l.offset..l.bias_offset()].to_vec())
                .expect("layer slice has fan_out·fan_in entries"),
            bias: theta[l.bias_offset()..l.offset + l.param_len()].to_vec(),
        })
        .collect())
}

pub fn flatten(layers: &[LayerParams]) -> Vec<f64> {
    let mut theta = Vec::new();
    for l in layers {
        theta.extend_from_slice(l.weights.as_slice());
        theta.extend_from_slice(&l.bias);
    }
    theta
}

/// Glorot-uniform weights, zero biases.
pub fn init_params(arch: &MlpArchitecture, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = vec![0.0; arch.param_count()];
    for l in arch.layers() {
        let limit = (6.0 / (l.fan_in + l.fan_out) as f64).sqrt();
        for w in &mut theta[l.offset..l.bias_offset()] {
            *w = rng.random_range(-limit..limit);
        }
    }
    theta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Activation;

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let arch = MlpArchitecture::new(2, 3, vec![5, 4], Activation::Tanh).unwrap();
        let a = init_params(&arch, 17);
        assert_eq!(a, init_params(&arch, 17));
        assert_ne!(a, init_params(&arch, 18));
        for l in arch.layers() {
            assert!(a[l.bias_offset()..l.offset + l.param_len()].iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn glorot_variance() {
        let arch = MlpArchitecture::new(128, 1, vec![128, 128], Activation::Tanh).unwrap();
        let theta = init_params(&arch, 3);
        let l = arch.layers()[1];
        assert_eq!((l.fan_in, l.fan_out), (128, 128));
        let w = &theta[l.offset..l.bias_offset()];
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let target = 2.0 / 256.0;
        assert!((var - target).abs() <= 0.2 * target, "var {var} target {target}");
    }

    #[test]
    fn flatten_round_trip_is_bit_exact() {
        let arch = MlpArchitecture::new(3, 2, vec![4, 5], Activation::TanhSin).unwrap();
        let theta = init_params(&arch, 9);
        let layers = unflatten(&arch, &theta).unwrap();
        assert_eq!(layers[0].weights.shape(), (4, 3));
        let back = flatten(&layers);
        assert_eq!(
            back.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            theta.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        assert!(unflatten(&arch, &theta[1..]).is_err());
    }
}
