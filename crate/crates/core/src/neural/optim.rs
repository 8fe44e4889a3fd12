use serde::{Deserialize, Serialize};

use super::Mlp;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(config: AdamConfig, num_params: usize) -> Self {
        Self {
            config,
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Apply one update. Non-finite gradients are rejected and leave both the
    /// network and the optimizer state untouched.
    pub fn step(&mut self, net: &mut Mlp, grads: &[f64]) -> Result<()> {
        if grads.len() != self.m.len() || net.num_params() != self.m.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} parameters, got {} gradients for a {}-parameter network",
                self.m.len(),
                grads.len(),
                net.num_params()
            )));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            log::warn!("skipping optimizer step: gradient {i} is {}", grads[i]);
            return Err(Error::NonFinite(format!("gradient {i} is {}", grads[i])));
        }
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        self.step += 1;
        let c1 = 1.0 - beta1.powf(self.step as f64);
        let c2 = 1.0 - beta2.powf(self.step as f64);
        for (((p, g), m), v) in net
            .params_mut()
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= learning_rate * (*m / c1) / ((*v / c2).sqrt() + epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut net = Mlp::new(&[3, 4, 2], 5).unwrap();
        let before = net.clone();
        let mut opt = Adam::new(AdamConfig::default(), net.num_params());
        let zeros = vec![0.0; net.num_params()];
        opt.step(&mut net, &zeros).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut net = Mlp::zeros(&[2, 2]).unwrap();
        let cfg = AdamConfig::default();
        let mut opt = Adam::new(cfg.clone(), net.num_params());
        let grads: Vec<f64> = (0..net.num_params()).map(|i| if i % 2 == 0 { 0.3 } else { -2.0 }).collect();
        opt.step(&mut net, &grads).unwrap();
        for (p, g) in net.params().iter().zip(&grads) {
            // m_hat = g, v_hat = g^2
            let expected = -cfg.learning_rate * g / (g.abs() + cfg.epsilon);
            assert!((p - expected).abs() < 1e-15);
            assert!((p.abs() - cfg.learning_rate).abs() < 1e-10);
        }
    }

    #[test]
    fn non_finite_gradient_is_skipped() {
        let mut net = Mlp::new(&[2, 2], 1).unwrap();
        let before = net.clone();
        let mut opt = Adam::new(AdamConfig::default(), net.num_params());
        let mut grads = vec![0.1; net.num_params()];
        grads[2] = f64::NAN;
        assert!(matches!(opt.step(&mut net, &grads), Err(Error::NonFinite(_))));
        assert_eq!(net, before);
        assert_eq!(opt.steps(), 0);
    }

    #[test]
    fn twin_optimizers_stay_in_lockstep() {
        let mut a = Mlp::new(&[3, 5, 2], 8).unwrap();
        let mut b = a.clone();
        let mut oa = Adam::new(AdamConfig::default(), a.num_params());
        let mut ob = oa.clone();
        for t in 0..20 {
            let g: Vec<f64> = (0..a.num_params()).map(|i| ((i * 7 + t) as f64).sin()).collect();
            oa.step(&mut a, &g).unwrap();
            ob.step(&mut b, &g).unwrap();
        }
        assert!(a.params().iter().zip(b.params()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
