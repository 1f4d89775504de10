use serde::{Deserialize, Serialize};

use super::network::NNWeights;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Mutable optimizer state; owned by a single training loop.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    kind: Optimizer,
    learning_rate: f64,
    t: u64,
    first: NNWeights,
    second: NNWeights,
}

impl OptimizerState {
    pub fn new(kind: Optimizer, learning_rate: f64, like: &NNWeights) -> Self {
        OptimizerState {
            kind,
            learning_rate,
            t: 0,
            first: like.zeros_like(),
            second: like.zeros_like(),
        }
    }

    pub fn step(&mut self, w: &mut NNWeights, grad: &NNWeights) {
        self.t += 1;
        let lr = self.learning_rate;
        match self.kind {
            Optimizer::Sgd => {
                for (p, g) in w.blocks_mut().into_iter().zip(grad.blocks()) {
                    for (x, d) in p.iter_mut().zip(g) {
                        *x -= lr * d;
                    }
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(self.t as i32);
                let c2 = 1.0 - beta2.powi(self.t as i32);
                let params = w.blocks_mut();
                let firsts = self.first.blocks_mut();
                let seconds = self.second.blocks_mut();
                for (((p, g), m), v) in params.into_iter().zip(grad.blocks()).zip(firsts).zip(seconds) {
                    for i in 0..p.len() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
    }
}
