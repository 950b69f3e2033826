use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{norm, Objective, OptError, OptTrace, Result, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Parameter updates.
    pub max_steps: usize,
    pub plateau_factor: f64,
    /// Monitored evaluations without relative improvement before the
    /// learning rate is reduced.
    pub plateau_patience: usize,
    /// Relative improvement that resets the plateau counter.
    pub plateau_threshold: f64,
    pub min_lr: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_steps: 1000,
            plateau_factor: 0.5,
            plateau_patience: 20,
            plateau_threshold: 1e-4,
            min_lr: 0.0,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.eps > 0.0
            && self.plateau_factor > 0.0
            && self.plateau_factor <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(OptError::InvalidConfig(format!("{self:?}")))
        }
    }
}

/// How gradients are sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Batching {
    /// Every step uses the full objective; the scheduler monitors each step.
    Full,
    /// Shuffled mini-batches, reshuffled every epoch from `seed`; the
    /// scheduler monitors the full loss once per epoch.
    MiniBatch { size: usize, seed: u64 },
}

struct Plateau {
    best: f64,
    bad: usize,
}

impl Plateau {
    fn observe(&mut self, loss: f64, lr: &mut f64, cfg: &AdamConfig) {
        if loss < self.best * (1.0 - cfg.plateau_threshold) {
            self.best = loss;
            self.bad = 0;
        } else {
            self.bad += 1;
            if self.bad > cfg.plateau_patience {
                *lr = (*lr * cfg.plateau_factor).max(cfg.min_lr);
                self.bad = 0;
            }
        }
    }
}

pub fn adam_minimize(
    obj: &dyn Objective,
    theta_init: &[f64],
    cfg: &AdamConfig,
    batching: Batching,
) -> Result<(Vec<f64>, OptTrace)> {
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
    let mut theta = theta_init.to_vec();
    let mut m = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let mut lr = cfg.lr;
    let mut plateau = Plateau {
        best: f64::INFINITY,
        bad: 0,
    };
    let mut trace = OptTrace::default();
    let (mut b1t, mut b2t) = (1.0, 1.0);

    let mut update = |theta: &mut [f64], g: &[f64], lr: f64| {
        b1t *= cfg.beta1;
        b2t *= cfg.beta2;
        for i in 0..theta.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let mh = m[i] / (1.0 - b1t);
            let vh = v[i] / (1.0 - b2t);
            theta[i] -= lr * mh / (vh.sqrt() + cfg.eps);
        }
    };

    match batching {
        Batching::Full => {
            for step in 0..cfg.max_steps {
                let (loss, g) = obj.loss_and_gradient(&theta)?;
                if !loss.is_finite() || g.iter().any(|x| !x.is_finite()) {
                    return Err(OptError::NonFinite { step });
                }
                trace.push(TraceRecord {
                    step,
                    loss,
                    grad_norm: norm(&g),
                    lr,
                    seconds: start.elapsed().as_secs_f64(),
                });
                plateau.observe(loss, &mut lr, cfg);
                update(&mut theta, &g, lr);
            }
            let (loss, g) = obj.loss_and_gradient(&theta)?;
            if !loss.is_finite() {
                return Err(OptError::NonFinite { step: cfg.max_steps });
            }
            trace.push(TraceRecord {
                step: cfg.max_steps,
                loss,
                grad_norm: norm(&g),
                lr,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
        Batching::MiniBatch { size, seed } => {
            let n = obj.sample_count();
            if n == 0 || size == 0 {
                return Err(OptError::InvalidConfig(
                    "mini-batching needs a sampled objective and size >= 1".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut order: Vec<usize> = (0..n).collect();
            let mut step = 0;
            let mut epoch = 0;
            while step < cfg.max_steps {
                order.shuffle(&mut rng);
                for batch in order.chunks(size) {
                    if step == cfg.max_steps {
                        break;
                    }
                    let (loss, g) = obj.batch_loss_and_gradient(&theta, batch)?;
                    if !loss.is_finite() || g.iter().any(|x| !x.is_finite()) {
                        return Err(OptError::NonFinite { step });
                    }
                    update(&mut theta, &g, lr);
                    step += 1;
                }
                epoch += 1;
                let (loss, g) = obj.loss_and_gradient(&theta)?;
                if !loss.is_finite() {
                    return Err(OptError::NonFinite { step });
                }
                trace.push(TraceRecord {
                    step: epoch,
                    loss,
                    grad_norm: norm(&g),
                    lr,
                    seconds: start.elapsed().as_secs_f64(),
                });
                plateau.observe(loss, &mut lr, cfg);
            }
        }
    }
    Ok((theta, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        center: Vec<f64>,
        scale: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn dim(&self) -> usize {
            self.center.len()
        }

        fn loss_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
            let g: Vec<f64> = x
                .iter()
                .zip(&self.center)
                .zip(&self.scale)
                .map(|((a, c), s)| s * (a - c))
                .collect();
            let l = x
                .iter()
                .zip(&self.center)
                .zip(&self.scale)
                .map(|((a, c), s)| 0.5 * s * (a - c).powi(2))
                .sum();
            Ok((l, g))
        }

        fn sample_count(&self) -> usize {
            self.center.len()
        }

        fn batch_loss_and_gradient(&self, x: &[f64], idx: &[usize]) -> Result<(f64, Vec<f64>)> {
            let (_, full) = self.loss_and_gradient(x)?;
            let mut g = vec![0.0; x.len()];
            let mut l = 0.0;
            for &i in idx {
                g[i] = full[i];
                l += 0.5 * self.scale[i] * (x[i] - self.center[i]).powi(2);
            }
            Ok((l, g))
        }
    }

    struct Flat;

    impl Objective for Flat {
        fn dim(&self) -> usize {
            3
        }

        fn loss_and_gradient(&self, _x: &[f64]) -> Result<(f64, Vec<f64>)> {
            Ok((1.0, vec![0.0; 3]))
        }
    }

    #[test]
    fn zero_gradient_leaves_theta() {
        let cfg = AdamConfig {
            max_steps: 50,
            ..Default::default()
        };
        let (theta, _) = adam_minimize(&Flat, &[1.0, 2.0, 3.0], &cfg, Batching::Full).unwrap();
        assert_eq!(theta, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn one_dimensional_quadratic() {
        let q = Quadratic {
            center: vec![3.0],
            scale: vec![1.0],
        };
        // constant learning rate
        let cfg = AdamConfig {
            lr: 0.1,
            max_steps: 2000,
            plateau_factor: 1.0,
            ..Default::default()
        };
        let (theta, trace) = adam_minimize(&q, &[0.0], &cfg, Batching::Full).unwrap();
        assert!((theta[0] - 3.0).abs() <= 1e-3, "{}", theta[0]);
        assert!(trace.last_loss().unwrap() <= trace.records[0].loss);
    }

    #[test]
    fn minibatch_is_deterministic_and_converges() {
        let q = Quadratic {
            center: vec![1.0, -2.0, 0.5, 4.0],
            scale: vec![1.0, 2.0, 0.5, 1.0],
        };
        let cfg = AdamConfig {
            lr: 0.05,
            max_steps: 4000,
            ..Default::default()
        };
        let b = Batching::MiniBatch { size: 2, seed: 7 };
        let (a, ta) = adam_minimize(&q, &[0.0; 4], &cfg, b).unwrap();
        let (c, _) = adam_minimize(&q, &[0.0; 4], &cfg, b).unwrap();
        assert_eq!(a, c);
        assert_eq!(ta.records.len(), 2000);
        assert!(ta.last_loss().unwrap() < 1e-6);
    }

    #[test]
    fn plateau_reduces_learning_rate() {
        let cfg = AdamConfig {
            max_steps: 30,
            plateau_patience: 5,
            ..Default::default()
        };
        let (_, trace) = adam_minimize(&Flat, &[0.0; 3], &cfg, Batching::Full).unwrap();
        let last = trace.records.last().unwrap().lr;
        assert!(last < 1e-3 && last > 0.0);
    }

    #[test]
    fn non_finite_loss_reports_step() {
        struct Blowup;
        impl Objective for Blowup {
            fn dim(&self) -> usize {
                1
            }
            fn loss_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
                let l = if x[0] > 0.0045 { f64::NAN } else { -x[0] };
                Ok((l, vec![-1.0]))
            }
        }
        let cfg = AdamConfig {
            max_steps: 100,
            ..Default::default()
        };
        let err = adam_minimize(&Blowup, &[0.0], &cfg, Batching::Full).unwrap_err();
        assert_eq!(err, OptError::NonFinite { step: 5 });
    }
}
