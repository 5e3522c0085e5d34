use super::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Holds first and second moment buffers for a
/// fixed list of parameters; the learning rate is passed per step.
#[derive(Clone, Debug)]
pub struct Adam {
    config: AdamConfig,
    moments: Vec<(Vec<f32>, Vec<f32>)>,
    steps: u32,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            moments: Vec::new(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    /// Updates every parameter in place from its accumulated gradient.
    /// The parameter list must be the same (in order and size) on each call.
    pub fn step(&mut self, params: &mut [&mut Tensor], lr: f32) -> Result<()> {
        if let Some(index) = params.iter().position(|p| p.grad().is_none()) {
            return Err(Error::MissingGradient { index });
        }
        if self.moments.is_empty() {
            self.moments = params.iter().map(|p| (vec![0.0; p.len()], vec![0.0; p.len()])).collect();
        }
        assert_eq!(self.moments.len(), params.len(), "parameter list changed between steps");
        self.steps += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let t = self.steps as i32;
        let c1 = 1.0 - (beta1 as f64).powi(t);
        let c2 = 1.0 - (beta2 as f64).powi(t);
        let step = (lr as f64 * c2.sqrt() / c1) as f32;
        let eps_hat = (eps as f64 * c2.sqrt()) as f32;
        for (p, (m, v)) in params.iter_mut().zip(self.moments.iter_mut()) {
            let grad = p.grad().expect("checked above").to_vec();
            for (((x, g), m), v) in p.data_mut().iter_mut().zip(&grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *x -= step * *m / (v.sqrt() + eps_hat);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    fn param(values: &[f32]) -> Tensor {
        Tensor::new(Shape::new(1, 1, 1, values.len()), values.to_vec()).requires_grad()
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = param(&[0.3, -1.0, 2.0]);
        let mut adam = Adam::new(AdamConfig::default());
        for _ in 0..5 {
            p.zero_grad();
            p.accumulate_grad(&[0.0, 0.0, 0.0]);
            adam.step(&mut [&mut p], 1e-2).unwrap();
        }
        assert_eq!(p.data(), &[0.3, -1.0, 2.0]);
    }

    #[test]
    fn first_step_matches_hand_formula() {
        let g = [0.5f32, -2.0, 1e-3];
        let mut p = param(&[1.0, 1.0, 1.0]);
        p.accumulate_grad(&g);
        let lr = 0.1;
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut [&mut p], lr).unwrap();
        for (x, g) in p.data().iter().zip(g) {
            // m̂ = g, v̂ = g², so the update is lr · g / (|g| + eps)
            let expected = 1.0 - lr * g / (g.abs() + 1e-8);
            assert!((x - expected).abs() < 1e-6, "{x} vs {expected}");
        }
    }

    #[test]
    fn constant_gradient_update_tends_to_lr() {
        let lr = 1e-3f32;
        let mut p = param(&[0.0]);
        let mut adam = Adam::new(AdamConfig::default());
        let mut last = 0.0;
        for _ in 0..2000 {
            p.zero_grad();
            p.accumulate_grad(&[3.7]);
            let before = p.data()[0];
            adam.step(&mut [&mut p], lr).unwrap();
            last = before - p.data()[0];
        }
        assert!((last - lr).abs() < 1e-3 * lr, "{last}");
    }

    #[test]
    fn missing_gradient_is_an_error() {
        let mut a = param(&[1.0]);
        let mut b = param(&[1.0]);
        a.accumulate_grad(&[1.0]);
        let mut adam = Adam::new(AdamConfig::default());
        let err = adam.step(&mut [&mut a, &mut b], 0.1).unwrap_err();
        assert!(matches!(err, Error::MissingGradient { index: 1 }));
    }
}
