use crate::error::{Error, Result};
use crate::params::{Gradients, ParamSet};

#[derive(Debug, Clone)]
enum Kind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

/// Optimizer with its per-parameter state. Updates are in-place and
/// deterministic given the state and gradients.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: Kind,
    lr: f64,
    step: u64,
    m1: Vec<Vec<f64>>,
    m2: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn sgd(lr: f64) -> Self {
        OptimizerState {
            kind: Kind::Sgd,
            lr,
            step: 0,
            m1: Vec::new(),
            m2: Vec::new(),
        }
    }

    /// Adaptive-moment optimizer with the usual defaults.
    pub fn adam(lr: f64) -> Self {
        OptimizerState {
            kind: Kind::Adam {
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
            lr,
            step: 0,
            m1: Vec::new(),
            m2: Vec::new(),
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Apply one update. Rejects non-finite gradients, naming the parameter.
    pub fn step(&mut self, params: &mut ParamSet, grads: &Gradients) -> Result<()> {
        for id in params.ids() {
            if grads.get(id).iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    param: params.name(id).to_string(),
                });
            }
        }
        if matches!(self.kind, Kind::Adam { .. }) && self.m1.is_empty() {
            self.m1 = params.ids().map(|id| vec![0.0; params.get(id).len()]).collect();
            self.m2 = self.m1.clone();
        }
        self.step += 1;
        match self.kind {
            Kind::Sgd => {
                for id in params.ids() {
                    let g = grads.get(id);
                    let t = params.get_mut(id);
                    for (p, gv) in t.values_mut().iter_mut().zip(g) {
                        *p -= self.lr * gv;
                    }
                }
            }
            Kind::Adam { beta1, beta2, eps } => {
                let bc1 = 1.0 - beta1.powi(self.step as i32);
                let bc2 = 1.0 - beta2.powi(self.step as i32);
                for id in params.ids() {
                    let g = grads.get(id);
                    let idx = id_index(&id);
                    let (m1, m2) = (&mut self.m1[idx], &mut self.m2[idx]);
                    let t = params.get_mut(id);
                    for (k, (p, gv)) in t.values_mut().iter_mut().zip(g).enumerate() {
                        m1[k] = beta1 * m1[k] + (1.0 - beta1) * gv;
                        m2[k] = beta2 * m2[k] + (1.0 - beta2) * gv * gv;
                        let mhat = m1[k] / bc1;
                        let vhat = m2[k] / bc2;
                        *p -= self.lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

fn id_index(id: &crate::params::ParamId) -> usize {
    id.0
}
