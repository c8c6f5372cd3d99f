//! Adam with bias correction.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, config: &AdamConfig) {
    assert_eq!(params.len(), grads.len(), "parameter and gradient lengths differ");
    assert_eq!(params.len(), state.m.len(), "optimizer state does not match parameters");
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - config.beta1.powi(t);
    let c2 = 1.0 - config.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![0.3, -1.2, 4.0];
        let before = p.clone();
        let mut s = AdamState::new(3);
        for _ in 0..5 {
            adam_step(&mut p, &[0.0; 3], &mut s, &AdamConfig::default());
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = AdamConfig {
            learning_rate: 1e-3,
            ..AdamConfig::default()
        };
        let mut p = vec![1.0, 1.0];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[0.25, -3.0], &mut s, &cfg);
        // m̂ = g, v̂ = g², step = lr·g/(|g| + ε)
        let expect = |g: f64| 1.0 - 1e-3 * g / (g.abs() + 1e-8);
        assert!((p[0] - expect(0.25)).abs() < 1e-15);
        assert!((p[1] - expect(-3.0)).abs() < 1e-15);
        assert!(p[0] < 1.0 && p[1] > 1.0);
        assert!(((1.0 - p[0]) - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn runs_are_reproducible() {
        let run = || {
            let mut p = vec![0.5; 4];
            let mut s = AdamState::new(4);
            for k in 0..20 {
                let g: Vec<f64> = (0..4).map(|i| ((k * 4 + i) as f64).sin()).collect();
                adam_step(&mut p, &g, &mut s, &AdamConfig::default());
            }
            p
        };
        assert_eq!(run(), run());
    }
}
