//! Adam over a fixed list of flat parameter tensors.

/// First/second-moment state per parameter tensor, with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64, tensor_lens: &[usize]) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            m: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
            v: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update. `params` and `grads` must be parallel to the tensor
    /// list given at construction.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (t, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.m[t];
            let v = &mut self.v[t];
            assert_eq!(p.len(), m.len());
            assert_eq!(g.len(), m.len());
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut adam = Adam::new(1e-2, 0.9, 0.999, 1e-8, &[3]);
        let mut p = vec![1.0, -2.0, 0.5];
        let orig = p.clone();
        let g = vec![0.0; 3];
        for _ in 0..5 {
            adam.step(&mut [&mut p], &[&g]);
        }
        assert_eq!(p, orig);
    }

    #[test]
    fn descends_a_quadratic() {
        // f(x) = (x - 3)^2, gradient 2(x - 3).
        let mut adam = Adam::new(0.1, 0.9, 0.999, 1e-8, &[1]);
        let mut x = vec![0.0f64];
        for _ in 0..500 {
            let g = vec![2.0 * (x[0] - 3.0)];
            adam.step(&mut [&mut x], &[&g]);
        }
        assert!((x[0] - 3.0).abs() < 1e-2, "x = {}", x[0]);
    }

    #[test]
    fn first_step_size_is_learning_rate() {
        // With bias correction the first update is lr * sign(g).
        let mut adam = Adam::new(0.05, 0.9, 0.999, 1e-8, &[2]);
        let mut p = vec![0.0, 0.0];
        adam.step(&mut [&mut p], &[&[3.0, -7.0][..]]);
        assert!((p[0] + 0.05).abs() < 1e-9);
        assert!((p[1] - 0.05).abs() < 1e-9);
    }
}
