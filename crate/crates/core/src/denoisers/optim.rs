//! AdamW, the warmup + cosine learning-rate schedule and weight EMA.

use serde::{Deserialize, Serialize};

/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamW {
    pub fn new(n_params: usize, weight_decay: f64) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * self.weight_decay * params[i];
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Linear warmup to `base_lr`, then cosine decay over the remaining steps.
/// `cycles = 0.5` is a half cosine ending at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub warmup_steps: usize,
    pub total_steps: usize,
    pub cycles: f64,
}

impl LrSchedule {
    pub fn at(&self, step: usize) -> f64 {
        if step < self.warmup_steps {
            return self.base_lr * (step + 1) as f64 / self.warmup_steps as f64;
        }
        let span = self.total_steps.saturating_sub(self.warmup_steps).max(1);
        let progress = ((step - self.warmup_steps) as f64 / span as f64).min(1.0);
        let factor = 0.5 * (1.0 + (2.0 * std::f64::consts::PI * self.cycles * progress).cos());
        self.base_lr * factor.max(0.0)
    }
}

/// Exponential moving average of the weights, refreshed every `every` steps.
#[derive(Debug, Clone)]
pub struct Ema {
    pub decay: f64,
    pub every: usize,
    weights: Vec<f64>,
    updates: usize,
}

impl Ema {
    pub fn new(params: &[f64], decay: f64, every: usize) -> Self {
        Self {
            decay,
            every: every.max(1),
            weights: params.to_vec(),
            updates: 0,
        }
    }

    /// Call after optimizer step `step` (0-based).
    pub fn observe(&mut self, step: usize, params: &[f64]) {
        if (step + 1) % self.every == 0 {
            self.update(params);
        }
    }

    pub fn update(&mut self, params: &[f64]) {
        let k = 1.0 - self.decay;
        for (e, p) in self.weights.iter_mut().zip(params) {
            *e += k * (p - *e);
        }
        self.updates += 1;
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn updates(&self) -> usize {
        self.updates
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_shape() {
        let s = LrSchedule {
            base_lr: 1e-4,
            warmup_steps: 4,
            total_steps: 104,
            cycles: 0.5,
        };
        assert!((s.at(0) - 0.25e-4).abs() < 1e-18);
        assert!((s.at(3) - 1e-4).abs() < 1e-18);
        assert!((s.at(4) - 1e-4).abs() < 1e-18);
        assert!((s.at(54) - 0.5e-4).abs() < 1e-12);
        assert!(s.at(104).abs() < 1e-18);
        assert!((4..104).all(|i| s.at(i + 1) <= s.at(i)));
    }

    #[test]
    fn ema_of_constant_weights_is_exact() {
        let p = vec![0.1, -3.7, 1e-9, 12345.678];
        let mut ema = Ema::new(&p, 0.99, 100);
        for step in 0..1000 {
            ema.observe(step, &p);
        }
        assert_eq!(ema.updates(), 10);
        assert_eq!(ema.weights(), p.as_slice());
    }

    #[test]
    fn ema_moves_toward_weights() {
        let mut ema = Ema::new(&[0.0], 0.99, 1);
        ema.update(&[1.0]);
        assert!((ema.weights()[0] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn adamw_minimises_a_quadratic() {
        let mut p = vec![3.0, -2.0];
        let mut opt = AdamW::new(2, 0.0);
        for _ in 0..2000 {
            let g: Vec<f64> = p.iter().map(|x| 2.0 * x).collect();
            opt.step(&mut p, &g, 1e-2);
        }
        assert!(p.iter().all(|x| x.abs() < 1e-2));
    }

    #[test]
    fn decoupled_decay_shrinks_without_gradient() {
        let mut p = vec![1.0];
        let mut opt = AdamW::new(1, 0.5);
        opt.step(&mut p, &[0.0], 0.1);
        assert!((p[0] - 0.95).abs() < 1e-12);
    }
}
