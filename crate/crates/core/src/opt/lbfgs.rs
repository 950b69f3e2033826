use std::collections::VecDeque;
use std::time::Instant;

use super::{norm, Objective, OptError, OptTrace, Result, TraceRecord};
use crate::linalg::{axpy, dot};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig {
    pub history: usize,
    /// Accepted iterations (parameter updates), not objective evaluations.
    pub max_steps: usize,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub grad_tol: f64,
    /// Objective evaluations allowed per line search.
    pub max_line_evals: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            history: 20,
            max_steps: 500,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            grad_tol: 1e-12,
            max_line_evals: 25,
        }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.history >= 1 && 0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0 {
            Ok(())
        } else {
            Err(OptError::InvalidConfig(format!("{self:?}")))
        }
    }
}

struct Point {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
    slope: f64,
}

struct LineSearch<'a> {
    obj: &'a dyn Objective,
    x: &'a [f64],
    d: &'a [f64],
    f0: f64,
    slope0: f64,
    c1: f64,
    c2: f64,
    evals: usize,
    max_evals: usize,
    step: usize,
}

impl LineSearch<'_> {
    fn eval(&mut self, alpha: f64) -> Result<Point> {
        self.evals += 1;
        let mut xt = self.x.to_vec();
        axpy(alpha, self.d, &mut xt);
        let (f, g) = self.obj.loss_and_gradient(&xt)?;
        if f.is_nan() {
            return Err(OptError::NonFinite { step: self.step });
        }
        let slope = if f.is_finite() { dot(&g, self.d) } else { f64::NAN };
        Ok(Point { alpha, f, g, slope })
    }

    fn armijo(&self, p: &Point) -> bool {
        p.f.is_finite() && p.f <= self.f0 + self.c1 * p.alpha * self.slope0
    }

    fn curvature(&self, p: &Point) -> bool {
        p.slope.abs() <= -self.c2 * self.slope0
    }

    /// Strong-Wolfe search by bracketing and cubic-interpolation zoom.
    fn run(&mut self, alpha0: f64) -> Result<Option<Point>> {
        let mut prev = Point {
            alpha: 0.0,
            f: self.f0,
            g: Vec::new(),
            slope: self.slope0,
        };
        let mut alpha = alpha0;
        let mut first = true;
        while self.evals < self.max_evals {
            let p = self.eval(alpha)?;
            if !self.armijo(&p) || (!first && p.f >= prev.f) {
                return self.zoom(prev, p);
            }
            if self.curvature(&p) {
                return Ok(Some(p));
            }
            if p.slope >= 0.0 {
                return self.zoom(p, prev);
            }
            alpha = p.alpha * 2.0;
            prev = p;
            first = false;
        }
        Ok((prev.alpha > 0.0).then_some(prev))
    }

    fn zoom(&mut self, mut lo: Point, mut hi: Point) -> Result<Option<Point>> {
        while self.evals < self.max_evals {
            let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
            let width = b - a;
            if width <= 1e-16 * b.max(1e-300) {
                break;
            }
            let mut alpha = cubic_min(&lo, &hi).unwrap_or(0.5 * (a + b));
            if !(alpha > a + 0.1 * width && alpha < b - 0.1 * width) {
                alpha = 0.5 * (a + b);
            }
            let p = self.eval(alpha)?;
            if !self.armijo(&p) || p.f >= lo.f {
                hi = p;
            } else {
                if self.curvature(&p) {
                    return Ok(Some(p));
                }
                if p.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = p;
            }
        }
        // Sufficient decrease without the curvature condition.
        Ok((lo.alpha > 0.0 && lo.f < self.f0).then_some(lo))
    }
}

/// Minimizer of the cubic interpolating values and slopes at two points.
fn cubic_min(p: &Point, q: &Point) -> Option<f64> {
    if !(p.f.is_finite() && q.f.is_finite() && p.slope.is_finite() && q.slope.is_finite()) {
        return None;
    }
    let d1 = p.slope + q.slope - 3.0 * (p.f - q.f) / (p.alpha - q.alpha);
    let disc = d1 * d1 - p.slope * q.slope;
    if disc < 0.0 {
        return None;
    }
    let d2 = (q.alpha - p.alpha).signum() * disc.sqrt();
    let denom = q.slope - p.slope + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let t = q.alpha - (q.alpha - p.alpha) * (q.slope + d2 - d1) / denom;
    t.is_finite().then_some(t)
}

/// Limited-memory BFGS with a strong-Wolfe line search. When the line search
/// fails the step falls back to backtracking steepest descent and the
/// curvature history is cleared; the run ends when that also fails to
/// decrease the loss.
pub fn lbfgs_minimize(obj: &dyn Objective, theta_init: &[f64], cfg: &LbfgsConfig) -> Result<(Vec<f64>, OptTrace)> {
    cfg.validate()?;
    let dim = obj.dim();
    if theta_init.len() != dim {
        return Err(OptError::Dimension {
            what: "initial point",
            expected: dim,
            got: theta_init.len(),
        });
    }
    let start = Instant::now();
    let mut x = theta_init.to_vec();
    let (mut f, mut g) = obj.loss_and_gradient(&x)?;
    if !f.is_finite() {
        return Err(OptError::NonFinite { step: 0 });
    }
    let mut trace = OptTrace::default();
    let mut gnorm = norm(&g);
    trace.push(TraceRecord {
        step: 0,
        loss: f,
        grad_norm: gnorm,
        lr: 0.0,
        seconds: 0.0,
    });
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.history);

    for step in 1..=cfg.max_steps {
        if gnorm <= cfg.grad_tol {
            break;
        }
        let mut d = two_loop(&g, &hist);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) || !slope.is_finite() {
            hist.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let alpha0 = if hist.is_empty() {
            (1.0 / g.iter().map(|v| v.abs()).sum::<f64>()).min(1.0)
        } else {
            1.0
        };
        let mut ls = LineSearch {
            obj,
            x: &x,
            d: &d,
            f0: f,
            slope0: slope,
            c1: cfg.wolfe_c1,
            c2: cfg.wolfe_c2,
            evals: 0,
            max_evals: cfg.max_line_evals,
            step,
        };
        let accepted = match ls.run(alpha0)? {
            Some(p) => Some((p, d)),
            None => {
                hist.clear();
                backtrack(obj, &x, f, &g, step)?
            }
        };
        let Some((p, d)) = accepted else {
            break;
        };
        let s: Vec<f64> = d.iter().map(|v| p.alpha * v).collect();
        let y: Vec<f64> = p.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 && sy.is_finite() {
            if hist.len() == cfg.history {
                hist.pop_front();
            }
            hist.push_back((s.clone(), y, 1.0 / sy));
        }
        axpy(1.0, &s, &mut x);
        f = p.f;
        g = p.g;
        gnorm = norm(&g);
        trace.push(TraceRecord {
            step,
            loss: f,
            grad_norm: gnorm,
            lr: p.alpha,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok((x, trace))
}

fn two_loop(g: &[f64], hist: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = vec![0.0; hist.len()];
    for (i, (s, y, rho)) in hist.iter().enumerate().rev() {
        let a = rho * dot(s, &q);
        alphas[i] = a;
        axpy(-a, y, &mut q);
    }
    if let Some((s, y, _)) = hist.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for (i, (s, y, rho)) in hist.iter().enumerate() {
        let b = rho * dot(y, &q);
        axpy(alphas[i] - b, s, &mut q);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn backtrack(obj: &dyn Objective, x: &[f64], f: f64, g: &[f64], step: usize) -> Result<Option<(Point, Vec<f64>)>> {
    let d: Vec<f64> = g.iter().map(|v| -v).collect();
    let gg = dot(g, g);
    let mut alpha = 1.0 / gg.sqrt().max(1e-300);
    for _ in 0..60 {
        let mut xt = x.to_vec();
        axpy(alpha, &d, &mut xt);
        let (ft, gt) = obj.loss_and_gradient(&xt)?;
        if ft.is_nan() {
            return Err(OptError::NonFinite { step });
        }
        if ft.is_finite() && ft <= f - 1e-4 * alpha * gg && ft < f {
            let slope = dot(&gt, &d);
            return Ok(Some((
                Point {
                    alpha,
                    f: ft,
                    g: gt,
                    slope,
                },
                d,
            )));
        }
        alpha *= 0.5;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quad2;

    impl Objective for Quad2 {
        fn dim(&self) -> usize {
            2
        }

        fn loss_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
            let (a, b) = (x[0] - 1.0, x[1] + 2.0);
            Ok((0.5 * (a * a + 100.0 * b * b), vec![a, 100.0 * b]))
        }
    }

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn dim(&self) -> usize {
            2
        }

        fn loss_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Ok((f, g))
        }
    }

    #[test]
    fn quadratic_with_distinct_curvatures() {
        let cfg = LbfgsConfig {
            max_steps: 50,
            grad_tol: 1e-10,
            ..Default::default()
        };
        let (x, trace) = lbfgs_minimize(&Quad2, &[5.0, 5.0], &cfg).unwrap();
        assert!(trace.records.last().unwrap().grad_norm <= 1e-10);
        assert!(trace.records.len() <= 51);
        assert!((x[0] - 1.0).abs() < 1e-9 && (x[1] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn stationary_start_takes_no_steps() {
        let (x, trace) = lbfgs_minimize(&Quad2, &[1.0, -2.0], &LbfgsConfig::default()).unwrap();
        assert_eq!(x, vec![1.0, -2.0]);
        assert_eq!(trace.records.len(), 1);
    }

    #[test]
    fn rosenbrock_converges() {
        let cfg = LbfgsConfig {
            max_steps: 200,
            history: 5,
            ..Default::default()
        };
        let (x, trace) = lbfgs_minimize(&Rosenbrock, &[-1.2, 1.0], &cfg).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6, "{x:?}");
        let losses: Vec<f64> = trace.records.iter().map(|r| r.loss).collect();
        assert!(losses.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rejects_bad_wolfe_constants() {
        let cfg = LbfgsConfig {
            wolfe_c1: 0.9,
            wolfe_c2: 0.1,
            ..Default::default()
        };
        assert!(lbfgs_minimize(&Quad2, &[0.0, 0.0], &cfg).is_err());
    }
}
