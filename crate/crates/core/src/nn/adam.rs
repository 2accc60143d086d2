use serde::{Deserialize, Serialize};

use super::Parameters;
use crate::error::{Error, Result};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    /// Gradient-penalty GAN settings: lr 1e-3, betas (0.5, 0.9).
    pub fn gan_default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.5,
            beta2: 0.9,
            epsilon: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr.is_finite()
            && self.lr >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Adam settings {self:?}")))
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self::gan_default()
    }
}

/// First and second moment accumulators for one parameter set.
#[derive(Debug, Clone)]
pub struct AdamState {
    config: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<P: Parameters>(config: AdamConfig, params: &P) -> Self {
        let shapes: Vec<usize> = params.param_slices().iter().map(|s| s.len()).collect();
        Self {
            config,
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// One bias-corrected Adam update of `params` along `grads`.
    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let gs = grads.param_slices();
        let mut ps = params.param_slices_mut();
        let matches = ps.len() == self.m.len()
            && gs.len() == self.m.len()
            && ps
                .iter()
                .zip(&gs)
                .zip(&self.m)
                .all(|((p, g), m)| p.len() == m.len() && g.len() == m.len());
        if !matches {
            return Err(Error::Usage(
                "Adam state, parameters and gradients have different shapes".into(),
            ));
        }

        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);

        for (((p, g), m), v) in ps.iter_mut().zip(&gs).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A bare parameter vector for exercising the optimizer.
    #[derive(Clone)]
    struct Flat(Vec<f64>);

    impl Parameters for Flat {
        fn param_slices(&self) -> Vec<&[f64]> {
            vec![&self.0]
        }
        fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.0]
        }
    }

    fn cfg() -> AdamConfig {
        AdamConfig {
            lr: 0.001,
            beta1: 0.5,
            beta2: 0.9,
            epsilon: 1e-8,
        }
    }

    #[test]
    fn zero_gradient_leaves_params_bit_identical() {
        let mut p = Flat(vec![0.25, -3.5, 1e-300]);
        let before = p.0.clone();
        let mut state = AdamState::new(cfg(), &p);
        for _ in 0..3 {
            state.step(&mut p, &Flat(vec![0.0; 3])).unwrap();
        }
        assert_eq!(
            p.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            before.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(state.step_count(), 3);
    }

    #[test]
    fn single_step_hand_value() {
        // m = 0.5, v = 0.1; bias-corrected both are 1, so the step is lr / (1 + eps).
        let mut p = Flat(vec![0.0]);
        let mut state = AdamState::new(cfg(), &p);
        state.step(&mut p, &Flat(vec![1.0])).unwrap();
        let expected = -0.001 / (1.0 + 1e-8);
        assert!((p.0[0] - expected).abs() < 1e-18);
    }

    #[test]
    fn two_steps_constant_gradient() {
        // Hand recursion, g = 1 both steps:
        // t=1: m=0.5, v=0.1, m̂=1, v̂=1
        // t=2: m=0.75, v=0.19, m̂=0.75/0.75=1, v̂=0.19/0.19=1
        let mut p = Flat(vec![0.0]);
        let mut state = AdamState::new(cfg(), &p);
        state.step(&mut p, &Flat(vec![1.0])).unwrap();
        state.step(&mut p, &Flat(vec![1.0])).unwrap();
        let one = 0.001 / (1.0 + 1e-8);
        assert!((p.0[0] + 2.0 * one).abs() < 1e-15);
    }

    #[test]
    fn two_steps_varying_gradient() {
        // g1 = 2, g2 = -1
        // t=1: m=1, v=0.4, m̂=2, v̂=4 → Δ = lr·2/(2+eps)
        // t=2: m=0.5·1+0.5·(-1)=0, → Δ = 0
        let mut p = Flat(vec![1.0]);
        let mut state = AdamState::new(cfg(), &p);
        state.step(&mut p, &Flat(vec![2.0])).unwrap();
        let after_one = 1.0 - 0.001 * 2.0 / (2.0 + 1e-8);
        assert!((p.0[0] - after_one).abs() < 1e-15);
        state.step(&mut p, &Flat(vec![-1.0])).unwrap();
        assert!((p.0[0] - after_one).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_usage_error() {
        let mut p = Flat(vec![0.0, 1.0]);
        let mut state = AdamState::new(cfg(), &p);
        assert!(matches!(state.step(&mut p, &Flat(vec![1.0])), Err(Error::Usage(_))));
    }

    #[test]
    fn rejects_bad_betas() {
        let mut c = cfg();
        c.beta1 = 1.0;
        assert!(c.validate().is_err());
    }
}
