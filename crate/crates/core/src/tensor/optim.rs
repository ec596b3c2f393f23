use serde::{Deserialize, Serialize};

use super::value::{shape_str, Element, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adaptive-moment optimizer with bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T: Element = f32> {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Tensor<T>>,
    second: Vec<Tensor<T>>,
}

impl<T: Element> Adam<T> {
    pub fn new(config: AdamConfig, params: &[Tensor<T>]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            config,
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }

    /// Restores optimizer state; moment shapes must match.
    pub fn from_state(
        config: AdamConfig,
        step: u64,
        first: Vec<Tensor<T>>,
        second: Vec<Tensor<T>>,
    ) -> Result<Self> {
        if first.len() != second.len()
            || first
                .iter()
                .zip(&second)
                .any(|(a, b)| a.shape() != b.shape())
        {
            return Err(Error::Shape("first and second moments disagree".into()));
        }
        Ok(Self {
            config,
            step,
            first,
            second,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[Tensor<T>], &[Tensor<T>]) {
        (&self.first, &self.second)
    }

    /// Applies one update. Non-finite gradients abort before anything changes.
    pub fn step(&mut self, params: &mut [Tensor<T>], grads: &[Tensor<T>]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} tensors, got {} params and {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.first[i].shape() {
                return Err(Error::Shape(format!(
                    "parameter {i}: {} vs gradient {}",
                    shape_str(p.shape()),
                    shape_str(g.shape())
                )));
            }
            if g.has_non_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite gradient for parameter {i}"
                )));
            }
        }

        self.step += 1;
        let c = &self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let lr = T::of(c.lr);
        let eps = T::of(c.eps);
        let correct1 = T::one() - T::of(c.beta1.powi(self.step as i32));
        let correct2 = T::one() - T::of(c.beta2.powi(self.step as i32));
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            for (((pv, &gv), mv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mv = b1 * *mv + (T::one() - b1) * gv;
                *vv = b2 * *vv + (T::one() - b2) * gv * gv;
                let m_hat = *mv / correct1;
                let v_hat = *vv / correct2;
                *pv = *pv - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(v: f32) -> Vec<Tensor<f32>> {
        vec![Tensor::scalar(v)]
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut params = one(1.25);
        let mut adam = Adam::new(AdamConfig::default(), &params);
        adam.step(&mut params, &one(0.0)).unwrap();
        assert_eq!(params[0].item(), 1.25);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn zero_lr_leaves_params() {
        let mut params = one(-0.5);
        let cfg = AdamConfig {
            lr: 0.0,
            ..AdamConfig::default()
        };
        let mut adam = Adam::new(cfg, &params);
        for _ in 0..10 {
            adam.step(&mut params, &one(3.0)).unwrap();
        }
        assert_eq!(params[0].item(), -0.5);
    }

    #[test]
    fn quadratic_converges() {
        // loss = (x - 3)^2
        let target = 3.0f32;
        let mut params = one(0.0);
        let cfg = AdamConfig {
            lr: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        };
        let mut adam = Adam::new(cfg, &params);
        for _ in 0..500 {
            let x = params[0].item();
            adam.step(&mut params, &one(2.0 * (x - target))).unwrap();
        }
        let err = (params[0].item() - target).abs();
        assert!(err < 1e-3, "|x - x*| = {err}");
    }

    #[test]
    fn nan_gradient_fails_fast() {
        let mut params = one(1.0);
        let mut adam = Adam::new(AdamConfig::default(), &params);
        assert!(matches!(
            adam.step(&mut params, &one(f32::NAN)),
            Err(Error::Diverged(_))
        ));
        assert_eq!(params[0].item(), 1.0);
        assert_eq!(adam.step_count(), 0);
    }
}
