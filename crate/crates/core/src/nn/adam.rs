//! Adam over a flat parameter vector.

/// Optimizer hyperparameters (conventional defaults).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(dim: usize, config: AdamConfig) -> Self {
        Self { config, step: 0, m: vec![0.0; dim], v: vec![0.0; dim] }
    }

    /// One update in place. With a zero learning rate the parameters are
    /// left bit-for-bit unchanged (the moments still advance).
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let c = &self.config;
        let bias1 = 1.0 - c.beta1.powi(self.step as i32);
        let bias2 = 1.0 - c.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * grads[i];
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            params[i] -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_learning_rate_leaves_params_unchanged() {
        let mut adam = Adam::new(3, AdamConfig { learning_rate: 0.0, ..AdamConfig::default() });
        let original = [0.5, -1.25, 3.0];
        let mut params = original;
        for _ in 0..10 {
            adam.step(&mut params, &[1.0, -2.0, 0.5]);
        }
        assert_eq!(params, original);
    }

    #[test]
    fn descends_a_quadratic() {
        let mut adam = Adam::new(1, AdamConfig { learning_rate: 0.1, ..AdamConfig::default() });
        let mut params = [4.0];
        for _ in 0..500 {
            let grad = [2.0 * params[0]]; // d/dx of x^2
            adam.step(&mut params, &grad);
        }
        assert!(params[0].abs() < 1e-3, "did not converge: {}", params[0]);
    }
}
