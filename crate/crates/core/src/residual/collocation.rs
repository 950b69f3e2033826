use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ResidualError, Result};
use crate::linalg::DenseMatrix;

/// Multiplicative loss weights per row group; rows carry `√w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupWeights {
    pub interior: f64,
    pub boundary: f64,
    pub initial: f64,
}

impl Default for GroupWeights {
    fn default() -> Self {
        Self {
            interior: 1.0,
            boundary: 1.0,
            initial: 1.0,
        }
    }
}

impl GroupWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("interior", self.interior),
            ("boundary", self.boundary),
            ("initial", self.initial),
        ] {
            if !(w > 0.0 && w.is_finite()) {
                return Err(ResidualError::Invalid(format!(
                    "{name} weight must be positive, got {w}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// Axis-aligned rectangle with boundary points on all four faces.
    Rectangle { lo: [f64; 2], hi: [f64; 2] },
    /// Space-time strip periodic in x: boundary samples are pairs
    /// `(x_lo, t)`, `(x_hi, t)` and initial samples lie on `t = t_lo`.
    PeriodicStrip { x: [f64; 2], t: [f64; 2] },
}

impl Domain {
    fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        match *self {
            Domain::Rectangle { lo, hi } => (lo, hi),
            Domain::PeriodicStrip { x, t } => ([x[0], t[0]], [x[1], t[1]]),
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        let (lo, hi) = self.bounds();
        (0..2).all(|k| p[k] >= lo[k] && p[k] <= hi[k])
    }
}

/// Collocation points grouped by role.
///
/// For a periodic strip `boundary` holds the left ends of the periodic pairs
/// and `periodic_partner` the matching right ends; for a rectangle the
/// partner set is empty.
#[derive(Debug, Clone)]
pub struct CollocationSet {
    pub interior: DenseMatrix,
    pub boundary: DenseMatrix,
    pub periodic_partner: DenseMatrix,
    pub initial: DenseMatrix,
    pub weights: GroupWeights,
}

pub fn sample_collocation(
    domain: &Domain,
    n_interior: usize,
    n_boundary: usize,
    n_initial: usize,
    seed: u64,
) -> Result<CollocationSet> {
    let (lo, hi) = domain.bounds();
    if !(0..2).all(|k| lo[k] < hi[k]) {
        return Err(ResidualError::EmptyDomain(format!("{domain:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uniform = |k: usize, rng: &mut ChaCha8Rng| rng.random_range(lo[k]..=hi[k]);

    let mut interior = DenseMatrix::zeros(n_interior, 2);
    for i in 0..n_interior {
        let x = uniform(0, &mut rng);
        let y = uniform(1, &mut rng);
        interior.row_mut(i).copy_from_slice(&[x, y]);
    }

    let mut boundary = DenseMatrix::zeros(n_boundary, 2);
    let mut partner = DenseMatrix::zeros(0, 2);
    let mut initial = DenseMatrix::zeros(0, 2);
    match domain {
        Domain::Rectangle { .. } => {
            // Faces in turn: bottom, right, top, left.
            for i in 0..n_boundary {
                let p = match i % 4 {
                    0 => [uniform(0, &mut rng), lo[1]],
                    1 => [hi[0], uniform(1, &mut rng)],
                    2 => [uniform(0, &mut rng), hi[1]],
                    _ => [lo[0], uniform(1, &mut rng)],
                };
                boundary.row_mut(i).copy_from_slice(&p);
            }
            if n_initial > 0 {
                return Err(ResidualError::Invalid("a rectangle has no initial face".into()));
            }
        }
        Domain::PeriodicStrip { .. } => {
            partner = DenseMatrix::zeros(n_boundary, 2);
            for i in 0..n_boundary {
                let t = uniform(1, &mut rng);
                boundary.row_mut(i).copy_from_slice(&[lo[0], t]);
                partner.row_mut(i).copy_from_slice(&[hi[0], t]);
            }
            initial = DenseMatrix::zeros(n_initial, 2);
            for i in 0..n_initial {
                let x = uniform(0, &mut rng);
                initial.row_mut(i).copy_from_slice(&[x, lo[1]]);
            }
        }
    }

    Ok(CollocationSet {
        interior,
        boundary,
        periodic_partner: partner,
        initial,
        weights: GroupWeights::default(),
    })
}
