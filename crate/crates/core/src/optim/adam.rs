use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 5e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// ADAM with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig, dim: usize) -> Self {
        Self {
            cfg,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// Applies one update and returns the Euclidean norm of the parameter
    /// change, or `None` (state untouched) when `grad` is not finite.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Option<f64> {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        if grad.iter().any(|g| !g.is_finite()) {
            return None;
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.cfg;
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - libm::pow(beta1, f64::from(t));
        let c2 = 1.0 - libm::pow(beta2, f64::from(t));
        let mut step_sq = 0.0;
        for i in 0..params.len() {
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grad[i];
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            let d = lr * m_hat / (sqrt(v_hat) + eps);
            params[i] -= d;
            step_sq += d * d;
        }
        Some(sqrt(step_sq))
    }
}
