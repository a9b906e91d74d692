use serde::{Deserialize, Serialize};

use super::ParamTensors;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new<P: ParamTensors>(params: &P, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        AdamState {
            config,
            first_moment: zeros.clone(),
            second_moment: zeros,
            step_count: 0,
        }
    }
}

/// One bias-corrected Adam update. A non-finite gradient leaves parameters
/// and state untouched and returns an error.
pub fn adam_step<P: ParamTensors>(params: &mut P, grads: &P, state: &mut AdamState) -> Result<()> {
    let grads = grads.tensors();
    if grads.len() != state.first_moment.len() || grads.iter().zip(&state.first_moment).any(|(g, m)| g.len() != m.len())
    {
        return Err(Error::Invalid(
            "gradient shapes do not match the optimizer state".into(),
        ));
    }
    if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::Numeric("non-finite gradient".into()));
    }
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for (((p, g), m), v) in params
        .tensors_mut()
        .into_iter()
        .zip(grads)
        .zip(&mut state.first_moment)
        .zip(&mut state.second_moment)
    {
        for k in 0..p.len() {
            m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
            v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_on_scalar() {
        let mut theta = vec![0.0];
        let mut st = AdamState::new(&theta, AdamConfig::default());
        adam_step(&mut theta, &vec![1.0], &mut st).unwrap();
        // m_hat = 1, v_hat = 1
        assert_eq!(theta[0], -1e-3 / (1.0 + 1e-8));
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut theta = vec![0.3, -0.2];
        let mut st = AdamState::new(&theta, AdamConfig::default());
        adam_step(&mut theta, &vec![0.5, -1.0], &mut st).unwrap();
        let after_one = theta.clone();
        let m1 = st.first_moment[0].clone();
        // With nonzero moments, zero gradient still moves params; a fresh
        // state with zero gradient must not.
        let mut fresh = AdamState::new(&theta, AdamConfig::default());
        adam_step(&mut theta, &vec![0.0, 0.0], &mut fresh).unwrap();
        assert_eq!(theta, after_one);
        adam_step(&mut theta, &vec![0.0, 0.0], &mut st).unwrap();
        assert_eq!(st.first_moment[0][0], 0.9 * m1[0]);
        assert_eq!(st.step_count, 2);
    }

    #[test]
    fn deterministic_trajectories() {
        let run = || {
            let mut th = vec![1.0, 2.0, 3.0];
            let mut st = AdamState::new(&th, AdamConfig::default());
            for i in 0..50 {
                let g: Vec<f64> = th.iter().map(|x| 2.0 * x + (i as f64).sin()).collect();
                adam_step(&mut th, &g, &mut st).unwrap();
            }
            th
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut th = vec![1.0];
        let mut st = AdamState::new(&th, AdamConfig::default());
        assert!(adam_step(&mut th, &vec![f64::NAN], &mut st).is_err());
        assert_eq!(th, vec![1.0]);
        assert_eq!(st.step_count, 0);
    }
}
