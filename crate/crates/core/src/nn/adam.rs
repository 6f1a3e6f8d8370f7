use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, MlpGrads};

/// Adam moments for one network, stored flat in parameter order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        Self::with_betas(num_params, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(num_params: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
            beta1,
            beta2,
            eps,
        }
    }

    pub fn for_net(net: &Mlp) -> Self {
        Self::new(net.num_params())
    }

    /// Bias-corrected Adam step applied in place.
    pub fn step(&mut self, params: &mut Mlp, grads: &MlpGrads, lr: f64) {
        assert_eq!(self.m.len(), params.num_params(), "adam state shape mismatch");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powf(self.t as f64);
        let bc2 = 1.0 - self.beta2.powf(self.t as f64);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let mut idx = 0;
        for (layer, g) in params.layers_mut().iter_mut().zip(&grads.layers) {
            assert_eq!(layer.weight.dim(), g.weight.dim(), "gradient shape mismatch");
            let pairs = layer
                .weight
                .iter_mut()
                .zip(g.weight.iter())
                .chain(layer.bias.iter_mut().zip(g.bias.iter()));
            for (p, &gi) in pairs {
                let m = &mut self.m[idx];
                let v = &mut self.v[idx];
                *m = b1 * *m + (1.0 - b1) * gi;
                *v = b2 * *v + (1.0 - b2) * gi * gi;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
                idx += 1;
            }
        }
    }
}
