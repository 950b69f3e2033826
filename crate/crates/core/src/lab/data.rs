use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{DenseMatrix, GaussianStream};

pub fn func2d_target(x: f64, y: f64) -> f64 {
    (PI * x).sin() * (PI * y).sin()
}

/// Points uniform on [−1, 1]² with targets `sin(πx)·sin(πy)`.
pub fn func2d_dataset(n: usize, seed: u64) -> (DenseMatrix, DenseMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DenseMatrix::zeros(n, 2);
    let mut y = DenseMatrix::zeros(n, 1);
    for i in 0..n {
        let a = rng.random_range(-1.0..1.0);
        let b = rng.random_range(-1.0..1.0);
        x.set(i, 0, a);
        x.set(i, 1, b);
        y.set(i, 0, func2d_target(a, b));
    }
    (x, y)
}

/// Isotropic Gaussian blobs in the plane with centres evenly spaced on a
/// circle of radius `radius`. Labels cycle through the classes, so class
/// sizes differ by at most one.
pub fn gaussian_blobs(n: usize, classes: usize, radius: f64, spread: f64, seed: u64) -> (DenseMatrix, Vec<usize>) {
    let mut g = GaussianStream::new(seed);
    let mut x = DenseMatrix::zeros(n, 2);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes.max(1);
        let angle = 2.0 * PI * c as f64 / classes.max(1) as f64 + PI / 4.0;
        x.set(i, 0, radius * angle.cos() + spread * g.next_normal());
        x.set(i, 1, radius * angle.sin() + spread * g.next_normal());
        labels.push(c);
    }
    (x, labels)
}

/// Splits row indices into a leading block of `first` rows and the rest.
pub fn split_rows(x: &DenseMatrix, first: usize) -> (DenseMatrix, DenseMatrix) {
    let first = first.min(x.rows());
    (x.row_range(0, first), x.row_range(first, x.rows()))
}
