//! Reference solutions for `q_t + q·q_x = ν·q_xx` on the periodic interval
//! [−1, 1) with `q(x, 0) = sin(πx)`.

use std::f64::consts::PI;

/// Crank–Nicolson in time, conservative central differences in space, with
/// Newton iterations on each implicit step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrankNicolson {
    /// Spatial cells on the periodic interval.
    pub nx: usize,
    /// Time steps over [0, t_end].
    pub nt: usize,
    pub t_end: f64,
    pub nu: f64,
}

/// Solution on the space-time lattice `x_j = −1 + 2j/nx`, `t_n = n·t_end/nt`.
#[derive(Debug, Clone)]
pub struct BurgersReference {
    nx: usize,
    nt: usize,
    t_end: f64,
    /// (nt + 1) × nx, time-major
    values: Vec<f64>,
}

impl CrankNicolson {
    pub fn solve(&self) -> BurgersReference {
        let (n, nt) = (self.nx, self.nt);
        assert!(n >= 3 && nt >= 1, "grid too small");
        let h = 2.0 / n as f64;
        let dt = self.t_end / nt as f64;
        let nu = self.nu;
        let mut values = Vec::with_capacity((nt + 1) * n);
        let mut u: Vec<f64> = (0..n).map(|j| (PI * (-1.0 + j as f64 * h)).sin()).collect();
        values.extend_from_slice(&u);

        let operator = |u: &[f64], out: &mut [f64]| {
            for j in 0..n {
                let (l, r) = (u[(j + n - 1) % n], u[(j + 1) % n]);
                out[j] = (r * r - l * l) / (4.0 * h) - nu * (r - 2.0 * u[j] + l) / (h * h);
            }
        };

        let mut n_old = vec![0.0; n];
        let mut n_new = vec![0.0; n];
        let (mut sub, mut diag, mut sup, mut rhs) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for _ in 0..nt {
            operator(&u, &mut n_old);
            let prev = u.clone();
            for _ in 0..30 {
                operator(&u, &mut n_new);
                for j in 0..n {
                    rhs[j] = -(u[j] - prev[j] + 0.5 * dt * (n_new[j] + n_old[j]));
                    let (l, r) = (u[(j + n - 1) % n], u[(j + 1) % n]);
                    sub[j] = 0.5 * dt * (-l / (2.0 * h) - nu / (h * h));
                    diag[j] = 1.0 + 0.5 * dt * (2.0 * nu / (h * h));
                    sup[j] = 0.5 * dt * (r / (2.0 * h) - nu / (h * h));
                }
                let delta = cyclic_tridiagonal(&sub, &diag, &sup, &rhs);
                let mut step = 0.0f64;
                for (uj, d) in u.iter_mut().zip(&delta) {
                    *uj += d;
                    step = step.max(d.abs());
                }
                if step <= 1e-13 {
                    break;
                }
            }
            values.extend_from_slice(&u);
        }
        BurgersReference {
            nx: n,
            nt,
            t_end: self.t_end,
            values,
        }
    }
}

/// Solves a periodic tridiagonal system: row j is
/// `sub[j]·x[j−1] + diag[j]·x[j] + sup[j]·x[j+1] = rhs[j]`, indices mod n.
fn cyclic_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let alpha = sub[0];
    let beta = sup[n - 1];
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= alpha * beta / gamma;
    let x = thomas(sub, &bb, sup, rhs);
    let mut e = vec![0.0; n];
    e[0] = gamma;
    e[n - 1] = beta;
    let z = thomas(sub, &bb, sup, &e);
    let fact = (x[0] + alpha * x[n - 1] / gamma) / (1.0 + z[0] + alpha * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(a, b)| a - fact * b).collect()
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / m;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

impl BurgersReference {
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn node(&self, time_index: usize, space_index: usize) -> f64 {
        self.values[time_index * self.nx + space_index]
    }

    /// Bilinear interpolation, periodic in x; exact at lattice nodes.
    pub fn value(&self, x: f64, t: f64) -> f64 {
        let n = self.nx;
        let s = ((x + 1.0) / 2.0).rem_euclid(1.0) * n as f64;
        let j0 = (s.floor() as usize).min(n - 1);
        let fx = s - j0 as f64;
        let j1 = (j0 + 1) % n;
        let tau = (t / self.t_end).clamp(0.0, 1.0) * self.nt as f64;
        let k0 = (tau.floor() as usize).min(self.nt);
        let k1 = (k0 + 1).min(self.nt);
        let ft = tau - k0 as f64;
        let at = |k: usize| (1.0 - fx) * self.node(k, j0) + fx * self.node(k, j1);
        (1.0 - ft) * at(k0) + ft * at(k1)
    }
}

/// Closed-form solution via the Cole–Hopf transform, evaluated by trapezoidal
/// quadrature in the heat-kernel variable.
///
/// The data sin(πx) is the classic −sin(πx) shifted by one period half, so
/// the classic kernel representation is evaluated at `x − 1`.
pub fn cole_hopf_solution(x: f64, t: f64, nu: f64) -> f64 {
    if t <= 0.0 {
        return (PI * x).sin();
    }
    let xc = x - 1.0;
    let width = 2.0 * (nu * t).sqrt();
    let (s_max, nodes) = (16.0, 16001);
    let ds = 2.0 * s_max / (nodes - 1) as f64;
    let log_weight = |s: f64| {
        let y = xc - width * s;
        (-(PI * y).cos() / (2.0 * PI * nu) - s * s, y)
    };
    let peak = (0..nodes)
        .map(|i| log_weight(-s_max + i as f64 * ds).0)
        .fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..nodes {
        let (lw, y) = log_weight(-s_max + i as f64 * ds);
        let w = (lw - peak).exp() * if i == 0 || i == nodes - 1 { 0.5 } else { 1.0 };
        num += (PI * y).sin() * w;
        den += w;
    }
    -num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::residual::BURGERS_NU;

    #[test]
    fn cyclic_solver_matches_dense_product() {
        let n = 7;
        let sub: Vec<f64> = (0..n).map(|i| 0.3 + 0.1 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 3.0 + 0.2 * i as f64).collect();
        let sup: Vec<f64> = (0..n).map(|i| -0.4 + 0.05 * i as f64).collect();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let x = cyclic_tridiagonal(&sub, &diag, &sup, &rhs);
        for j in 0..n {
            let r = sub[j] * x[(j + n - 1) % n] + diag[j] * x[j] + sup[j] * x[(j + 1) % n];
            assert!((r - rhs[j]).abs() < 1e-13);
        }
    }

    #[test]
    fn cole_hopf_initial_data_and_symmetry() {
        assert!((cole_hopf_solution(0.37, 1e-8, BURGERS_NU) - (PI * 0.37).sin()).abs() < 1e-3);
        // q(−x, t) = −q(x, t)
        for &(x, t) in &[(0.2, 0.3), (0.8, 0.9), (0.55, 0.5)] {
            let a = cole_hopf_solution(x, t, BURGERS_NU);
            let b = cole_hopf_solution(-x, t, BURGERS_NU);
            assert!((a + b).abs() < 1e-12, "{a} {b}");
        }
    }

    #[test]
    fn crank_nicolson_matches_cole_hopf() {
        let reference = CrankNicolson {
            nx: 4096,
            nt: 1000,
            t_end: 1.0,
            nu: BURGERS_NU,
        }
        .solve();
        let (mut num, mut den) = (0.0, 0.0);
        for k in [250, 500, 1000] {
            let t = k as f64 / 1000.0;
            for j in (0..4096).step_by(64) {
                let x = -1.0 + 2.0 * j as f64 / 4096.0;
                let exact = cole_hopf_solution(x, t, BURGERS_NU);
                num += (reference.node(k, j) - exact).powi(2);
                den += exact * exact;
            }
        }
        let err = (num / den).sqrt();
        assert!(err <= 1e-4, "relative error {err:e}");
    }

    #[test]
    fn interpolation_is_exact_at_nodes() {
        let r = CrankNicolson {
            nx: 64,
            nt: 20,
            t_end: 1.0,
            nu: BURGERS_NU,
        }
        .solve();
        assert_eq!(r.value(-1.0 + 2.0 * 5.0 / 64.0, 0.5), r.node(10, 5));
        assert_eq!(r.value(1.0, 0.0), r.node(0, 0));
    }
}
