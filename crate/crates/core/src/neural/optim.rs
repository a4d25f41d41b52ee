//! Gradient descent with momentum and global-norm gradient clipping.

use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub clip_norm: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            clip_norm: 5.0,
        }
    }
}

pub struct OptimizerState {
    pub cfg: SgdConfig,
    velocity: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(cfg: SgdConfig) -> Self {
        OptimizerState {
            cfg,
            velocity: Vec::new(),
        }
    }

    /// Clip the concatenated gradient to `clip_norm`, integrate momentum,
    /// and descend. Parameters without gradients are left untouched.
    pub fn step(&mut self, mut params: Vec<&mut Tensor>) {
        if self.velocity.is_empty() {
            self.velocity = params.iter().map(|p| vec![0.0; p.len()]).collect();
        }
        assert_eq!(
            self.velocity.len(),
            params.len(),
            "optimizer state does not match parameter list"
        );
        let mut norm_sq = 0.0;
        for p in &params {
            if let Some(g) = &p.grad {
                norm_sq += g.iter().map(|v| v * v).sum::<f64>();
            }
        }
        let norm = norm_sq.sqrt();
        let scale = if norm > self.cfg.clip_norm {
            self.cfg.clip_norm / norm
        } else {
            1.0
        };
        for (p, v) in params.iter_mut().zip(self.velocity.iter_mut()) {
            assert_eq!(v.len(), p.len(), "velocity shaped unlike its parameter");
            let Some(g) = &p.grad else { continue };
            for i in 0..v.len() {
                v[i] = self.cfg.momentum * v[i] + scale * g[i];
                p.values[i] -= self.cfg.learning_rate * v[i];
            }
        }
    }
}

/// Clipped global gradient norm after scaling; exposed for tests.
pub fn clipped_norm(params: &[&Tensor], clip: f64) -> f64 {
    let norm = params
        .iter()
        .filter_map(|p| p.grad.as_ref())
        .flat_map(|g| g.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    norm.min(clip)
}
