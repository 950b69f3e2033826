use proptest::prelude::*;

use lsrkit_core::linalg::{dot, gaussian_sketch};
use lsrkit_core::net::{init_params, Activation, MlpArchitecture};
use lsrkit_core::residual::{
    classification_residual, poisson_exact, poisson_residual, poisson_source, sample_collocation, supervised_residual,
    Domain, ResidualProblem,
};

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    d / b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300)
}

fn problem(kind: u8, width: usize, seed: u64) -> (Box<dyn ResidualProblem>, MlpArchitecture) {
    let act = if kind == 0 {
        Activation::TanhSin
    } else {
        Activation::Tanh
    };
    match kind {
        0 => {
            let arch = MlpArchitecture::new(2, 2, vec![width, width], act).unwrap();
            let x = gaussian_sketch(8, 2, seed);
            let p = supervised_residual(&arch, &x, &gaussian_sketch(8, 2, seed ^ 1)).unwrap();
            (Box::new(p), arch)
        }
        1 => {
            let arch = MlpArchitecture::new(2, 3, vec![width], act).unwrap();
            let labels: Vec<usize> = (0..8).map(|i| (i + seed as usize) % 3).collect();
            let p = classification_residual(&arch, &gaussian_sketch(8, 2, seed), &labels, 3).unwrap();
            (Box::new(p), arch)
        }
        _ => {
            let arch = MlpArchitecture::new(2, 1, vec![width, width], act).unwrap();
            let dom = Domain::Rectangle {
                lo: [0.0, 0.0],
                hi: [1.0, 1.0],
            };
            let coll = sample_collocation(&dom, 10, 8, 0, seed).unwrap();
            let p = poisson_residual(&arch, &coll, &poisson_source, &|_, _| 0.0).unwrap();
            (Box::new(p), arch)
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn aj_action_matches_central_differences(kind in 0u8..3, width in 2usize..7, seed in any::<u64>()) {
        let (p, arch) = problem(kind, width, seed);
        let m = p.param_dim();
        let theta = init_params(&arch, seed ^ 5);
        let v = gaussian_sketch(m, 1, seed ^ 2).into_vec();
        let h = 1e-5;
        let tp: Vec<f64> = theta.iter().zip(&v).map(|(t, d)| t + h * d).collect();
        let tm: Vec<f64> = theta.iter().zip(&v).map(|(t, d)| t - h * d).collect();
        let (fp, fm) = (p.residual_at(&tp).unwrap(), p.residual_at(&tm).unwrap());
        let fd: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let an = p.aj_action(&theta, &v).unwrap();
        prop_assert!(rel(&an, &fd) <= 1e-5, "{}", rel(&an, &fd));
    }

    #[test]
    fn jt_is_the_adjoint_of_j(kind in 0u8..2, width in 2usize..7, seed in any::<u64>()) {
        let (p, arch) = problem(kind, width, seed);
        let theta = init_params(&arch, seed ^ 5);
        let v = gaussian_sketch(p.param_dim(), 1, seed ^ 2).into_vec();
        let u = gaussian_sketch(p.output_dim(), 1, seed ^ 3).into_vec();
        let lhs = dot(&u, &p.j_action(&theta, &v).unwrap());
        let rhs = dot(&p.jt_action(&theta, &u).unwrap(), &v);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()));
    }

    #[test]
    fn gradient_matches_loss_differences(kind in 0u8..3, width in 2usize..7, seed in any::<u64>()) {
        let (p, arch) = problem(kind, width, seed);
        let theta = init_params(&arch, seed ^ 5);
        let v = gaussian_sketch(p.param_dim(), 1, seed ^ 2).into_vec();
        let (_, g) = p.loss_and_gradient(&theta).unwrap();
        // 4th-order stencil: tanh_sin curvature makes the 2nd-order error ~1e-6
        let h = 1e-4;
        let at = |s: f64| {
            let t: Vec<f64> = theta.iter().zip(&v).map(|(t, d)| t + s * h * d).collect();
            p.loss(&t).unwrap()
        };
        let fd = (-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * h);
        let an = dot(&g, &v);
        prop_assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-6), "{} vs {}", fd, an);
    }
}

#[test]
fn manufactured_poisson_solution_has_zero_interior_residual() {
    // the exact field satisfies Δq = f_s; check through a 4th-order stencil
    let h = 1e-3;
    for &(x, y) in &[(0.2, 0.3), (0.5, 0.5), (0.71, 0.9), (0.05, 0.6)] {
        let q = |dx: f64, dy: f64| poisson_exact(x + dx, y + dy);
        let d2 = |f: &dyn Fn(f64) -> f64| {
            (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h) - f(-2.0 * h)) / (12.0 * h * h)
        };
        let lap = d2(&|s| q(s, 0.0)) + d2(&|s| q(0.0, s));
        let src = poisson_source(x, y);
        assert!((lap - src).abs() <= 1e-5 * src.abs().max(1.0), "{lap} vs {src}");
    }
}
