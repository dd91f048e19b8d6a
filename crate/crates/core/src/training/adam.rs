use crate::model::ModelParams;
use crate::tensor::Tensor;

/// Adam with coupled L2 weight decay (`g += wd * theta` before the moments).
#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &ModelParams, learning_rate: f64, weight_decay: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Adam {
            learning_rate,
            weight_decay,
            beta1,
            beta2,
            eps,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    /// One update; `grads` follows [`ModelParams::tensors`] order.
    pub fn step(&mut self, params: &mut ModelParams, grads: &[Tensor]) {
        self.step += 1;
        let step_size = self.learning_rate / (1.0 - self.beta1.powi(self.step));
        let inv_bias2 = 1.0 / (1.0 - self.beta2.powi(self.step));
        let (b1, b2, wd, eps) = (self.beta1, self.beta2, self.weight_decay, self.eps);
        for (((theta, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            let theta = theta.data_mut();
            let g = &g.data()[..theta.len()];
            let (m, v) = (&mut m[..theta.len()], &mut v[..theta.len()]);
            for i in 0..theta.len() {
                let gi = g[i] + wd * theta[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                theta[i] -= step_size * m[i] / ((v[i] * inv_bias2).sqrt() + eps);
            }
        }
    }
}
