//! Adam with a per-epoch multiplicative learning-rate decay.

use super::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr0: f64,
    pub decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Number of steps taken.
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &[&Tensor], lr0: f64, decay: f64) -> Self {
        Self {
            lr0,
            decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        self.lr0 * self.decay.powi(epoch as i32)
    }

    /// One bias-corrected update at the learning rate of `epoch`.
    ///
    /// Entries whose gradient is exactly zero are left untouched, moments
    /// included, so a zero gradient never moves a parameter.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor], epoch: usize) {
        assert_eq!(params.len(), grads.len(), "adam: parameter/gradient count");
        assert_eq!(params.len(), self.m.len(), "adam: parameter count changed");
        self.t += 1;
        let lr = self.lr(epoch);
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            assert_eq!(p.len(), g.len(), "adam: gradient shape");
            for (((w, &gi), mi), vi) in p.data.iter_mut().zip(&g.data).zip(m.iter_mut()).zip(v.iter_mut()) {
                if gi == 0.0 {
                    continue;
                }
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let mhat = *mi / c1;
                let vhat = *vi / c2;
                *w -= lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}
