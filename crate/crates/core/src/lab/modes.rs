use super::{LabError, Result};
use crate::linalg::DenseMatrix;
use crate::lsr::SubspaceBasis;
use crate::net::{ForwardPass, MlpArchitecture};

/// Linear responses `J(x)·vᵢ` of single basis directions on a grid, each
/// scaled to unit max-absolute value (an identically zero mode stays zero).
pub fn subspace_modes(
    arch: &MlpArchitecture,
    theta: &[f64],
    basis: &SubspaceBasis,
    x: &DenseMatrix,
    indices: &[usize],
) -> Result<Vec<Vec<f64>>> {
    if let Some(&bad) = indices.iter().find(|&&i| i >= basis.rank()) {
        return Err(LabError::Invalid(format!(
            "mode index {bad} out of range for rank {}",
            basis.rank()
        )));
    }
    let pass = ForwardPass::plain(arch, theta, x)?;
    indices
        .iter()
        .map(|&i| {
            let mut mode = pass.tangent(&basis.v.column(i))?.value().to_vec();
            let peak = mode.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if peak > 0.0 {
                mode.iter_mut().for_each(|v| *v /= peak);
            }
            Ok(mode)
        })
        .collect()
}

/// Sign changes along a sampled curve; exact zeros are skipped.
pub fn zero_crossings(values: &[f64]) -> usize {
    let mut last = 0.0f64;
    let mut count = 0;
    for &v in values {
        if v == 0.0 {
            continue;
        }
        if last != 0.0 && (v > 0.0) != (last > 0.0) {
            count += 1;
        }
        last = v;
    }
    count
}
