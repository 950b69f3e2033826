use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DenseMatrix;

/// Standard-normal draws by Box–Muller on top of a seeded ChaCha stream.
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - U keeps the log argument in (0, 1].
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

/// A rows×cols matrix of i.i.d. N(0, 1) entries, filled row by row.
/// Identical `(rows, cols, seed)` always yields an identical matrix.
pub fn gaussian_sketch(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut stream = GaussianStream::new(seed);
    let data = (0..rows * cols).map(|_| stream.next_normal()).collect();
    DenseMatrix::from_vec(rows, cols, data).expect("length matches by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = gaussian_sketch(4, 4, 7);
        let b = gaussian_sketch(4, 4, 7);
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn seed_sensitivity() {
        assert_ne!(gaussian_sketch(2, 3, 1).as_slice(), gaussian_sketch(2, 3, 2).as_slice());
    }

    #[test]
    fn sample_moments() {
        let s = gaussian_sketch(10_000, 1, 1);
        let n = s.as_slice().len() as f64;
        let mean = s.as_slice().iter().sum::<f64>() / n;
        let var = s.as_slice().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 0.05, "mean {mean}");
        assert!((0.9..=1.1).contains(&var), "var {var}");
    }
}
