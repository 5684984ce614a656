use serde::{Deserialize, Serialize};

/// Adam moments with decoupled weight decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamW {
    pub fn new(n: usize) -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n], v: vec![0.0; n], step: 0 }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// `θ ← θ(1 − η·wd) − η·m̂/(√v̂ + ε)` with bias-corrected moments.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64, weight_decay: f64) {
        assert_eq!(params.len(), grads.len(), "gradient length");
        assert_eq!(params.len(), self.m.len(), "optimizer size");
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            params[i] -= lr * weight_decay * params[i];
            params[i] -= lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}
