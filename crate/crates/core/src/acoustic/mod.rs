//! Acoustic models mapping linguistic features to acoustic features:
//! the RNN baseline, the shallow-autoregressive extension, a GAN postfilter,
//! and a simplified quantized-F0 classifier.

pub mod f0model;
pub mod gan;
pub mod sar;

use crate::neural::network::{gaussian_nll, LayerSpec};
use crate::neural::{Mat, Network, NeuralError, Tensor};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AcousticError {
    #[error("frame count mismatch: {0}")]
    FrameMismatch(String),
    #[error("feature layout: expected {expected} dims (MGC {mgc} + BAP {bap}), got {got}")]
    BadLayout {
        expected: usize,
        mgc: usize,
        bap: usize,
        got: usize,
    },
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

/// Architecture of the shared trunk plus the two Gaussian output heads.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AcousticArch {
    pub trunk: Vec<LayerSpec>,
    pub mgc_dim: usize,
    pub bap_dim: usize,
}

impl AcousticArch {
    /// Feedforward + bi-recurrent + uni-recurrent trunk.
    pub fn standard(
        input_dim: usize,
        ff: usize,
        bi_hidden: usize,
        uni_hidden: usize,
        mgc_dim: usize,
        bap_dim: usize,
    ) -> Self {
        AcousticArch {
            trunk: vec![
                LayerSpec::FfTanh { input: input_dim, output: ff },
                LayerSpec::BiRecurrent { input: ff, hidden: bi_hidden },
                LayerSpec::UniRecurrent { input: 2 * bi_hidden, hidden: uni_hidden },
            ],
            mgc_dim,
            bap_dim,
        }
    }

    pub fn trunk_out(&self) -> usize {
        self.trunk.last().map(|s| s.out_dim()).unwrap_or(0)
    }
}

/// Per-frame regression targets (or generated values) for the two streams.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticStreams {
    pub mgc: Mat,
    pub bap: Mat,
}

impl AcousticStreams {
    pub fn num_frames(&self) -> usize {
        self.mgc.rows
    }
}

/// Trunk network with Gaussian heads for MGC and BAP.
pub struct AcousticModel {
    pub arch: AcousticArch,
    pub trunk: Network,
    pub mgc_head: Network,
    pub bap_head: Network,
}

impl AcousticModel {
    pub fn new(arch: AcousticArch, rng: &mut impl rand::Rng) -> Self {
        let trunk = Network::new(&arch.trunk, rng);
        let h = arch.trunk_out();
        let mgc_head = Network::new(
            &[LayerSpec::GaussianHead { input: h, output: arch.mgc_dim }],
            rng,
        );
        let bap_head = Network::new(
            &[LayerSpec::GaussianHead { input: h, output: arch.bap_dim }],
            rng,
        );
        AcousticModel {
            arch,
            trunk,
            mgc_head,
            bap_head,
        }
    }

    /// Mean trajectories h_n for both streams (pure).
    pub fn infer(&self, linguistic: &Mat) -> Result<AcousticStreams, AcousticError> {
        let h = self.trunk.infer(linguistic)?;
        Ok(AcousticStreams {
            mgc: self.mgc_head.infer(&h)?,
            bap: self.bap_head.infer(&h)?,
        })
    }

    /// Training forward; layers keep their caches.
    pub fn forward(&mut self, linguistic: &Mat) -> Result<AcousticStreams, AcousticError> {
        let h = self.trunk.forward(linguistic)?;
        Ok(AcousticStreams {
            mgc: self.mgc_head.forward(&h)?,
            bap: self.bap_head.forward(&h)?,
        })
    }

    /// Backpropagate per-stream mean gradients down to the linguistic input.
    pub fn backward(&mut self, d_mgc: &Mat, d_bap: &Mat) -> Result<Mat, AcousticError> {
        let g_mgc = self.mgc_head.backward(d_mgc)?;
        let g_bap = self.bap_head.backward(d_bap)?;
        let mut g = g_mgc;
        for (a, b) in g.data.iter_mut().zip(g_bap.data.iter()) {
            *a += b;
        }
        Ok(self.trunk.backward(&g)?)
    }

    pub fn zero_grad(&mut self) {
        self.trunk.zero_grad();
        self.mgc_head.zero_grad();
        self.bap_head.zero_grad();
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut p = self.trunk.params();
        p.extend(self.mgc_head.params());
        p.extend(self.bap_head.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.trunk.params_mut();
        p.extend(self.mgc_head.params_mut());
        p.extend(self.bap_head.params_mut());
        p
    }

    fn check_aligned(&self, l: &Mat, t: &AcousticStreams) -> Result<(), AcousticError> {
        if l.rows != t.mgc.rows || t.mgc.rows != t.bap.rows {
            return Err(AcousticError::FrameMismatch(format!(
                "linguistic {} vs mgc {} vs bap {}",
                l.rows, t.mgc.rows, t.bap.rows
            )));
        }
        if t.mgc.cols != self.arch.mgc_dim || t.bap.cols != self.arch.bap_dim {
            return Err(AcousticError::FrameMismatch(format!(
                "stream dims {}x{} vs model {}x{}",
                t.mgc.cols, t.bap.cols, self.arch.mgc_dim, self.arch.bap_dim
            )));
        }
        Ok(())
    }
}

/// Identity-covariance Gaussian NLL of both streams under the mean-based RNN.
pub fn rnn_nll(
    model: &AcousticModel,
    linguistic: &Mat,
    targets: &AcousticStreams,
) -> Result<f64, AcousticError> {
    model.check_aligned(linguistic, targets)?;
    let out = model.infer(linguistic)?;
    let (l_mgc, _) = gaussian_nll(&out.mgc, &targets.mgc);
    let (l_bap, _) = gaussian_nll(&out.bap, &targets.bap);
    Ok(l_mgc + l_bap)
}

/// One gradient step of maximum-likelihood training; returns the loss at the
/// current parameters.
pub fn rnn_train_step(
    model: &mut AcousticModel,
    opt: &mut crate::neural::OptimizerState,
    linguistic: &Mat,
    targets: &AcousticStreams,
) -> Result<f64, AcousticError> {
    model.check_aligned(linguistic, targets)?;
    model.zero_grad();
    let out = model.forward(linguistic)?;
    let (l_mgc, d_mgc) = gaussian_nll(&out.mgc, &targets.mgc);
    let (l_bap, d_bap) = gaussian_nll(&out.bap, &targets.bap);
    model.backward(&d_mgc, &d_bap)?;
    opt.step(model.params_mut());
    Ok(l_mgc + l_bap)
}

/// Mean-based generation: the predicted means are the output.
pub fn rnn_generate(
    model: &AcousticModel,
    linguistic: &Mat,
) -> Result<AcousticStreams, AcousticError> {
    Ok(model.infer(linguistic)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_model(seed: u64) -> AcousticModel {
        let arch = AcousticArch::standard(4, 6, 3, 4, 2, 1);
        AcousticModel::new(arch, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn random_mat(rows: usize, cols: usize, seed: u64) -> Mat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Mat::zeros(rows, cols);
        for v in &mut m.data {
            *v = rng.gen_range(-1.0..1.0);
        }
        m
    }

    #[test]
    fn matched_targets_leave_only_the_normalizer() {
        let model = small_model(1);
        let l = random_mat(5, 4, 2);
        let out = model.infer(&l).unwrap();
        let loss = rnn_nll(&model, &l, &out).unwrap();
        let d = (2 + 1) as f64;
        let want = 5.0 * (d / 2.0) * (2.0 * std::f64::consts::PI).ln();
        assert!((loss - want).abs() < 1e-9, "{loss} vs {want}");
    }

    #[test]
    fn one_unit_residual_adds_exactly_half() {
        let model = small_model(3);
        let l = random_mat(1, 4, 4);
        let mut t = model.infer(&l).unwrap();
        let base = rnn_nll(&model, &l, &t).unwrap();
        t.mgc.data[0] += 1.0;
        let bumped = rnn_nll(&model, &l, &t).unwrap();
        assert!((bumped - base - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dim_mismatch_is_an_error() {
        let model = small_model(5);
        let l = random_mat(5, 4, 6);
        let t = AcousticStreams {
            mgc: random_mat(5, 3, 7), // model expects 2
            bap: random_mat(5, 1, 8),
        };
        assert!(matches!(
            rnn_nll(&model, &l, &t),
            Err(AcousticError::FrameMismatch(_))
        ));
    }

    #[test]
    fn generation_is_deterministic() {
        let model = small_model(9);
        let l = random_mat(6, 4, 10);
        let a = rnn_generate(&model, &l).unwrap();
        let b = rnn_generate(&model, &l).unwrap();
        assert_eq!(a.mgc.data, b.mgc.data);
        assert_eq!(a.bap.data, b.bap.data);
    }

    #[test]
    fn overfits_a_single_utterance() {
        let mut model = small_model(11);
        let l = random_mat(12, 4, 12);
        let targets = AcousticStreams {
            mgc: random_mat(12, 2, 13),
            bap: random_mat(12, 1, 14),
        };
        let mut opt = crate::neural::OptimizerState::new(crate::neural::SgdConfig {
            learning_rate: 0.02,
            momentum: 0.9,
            clip_norm: 5.0,
        });
        let first = rnn_nll(&model, &l, &targets).unwrap();
        for _ in 0..500 {
            rnn_train_step(&mut model, &mut opt, &l, &targets).unwrap();
        }
        let last = rnn_nll(&model, &l, &targets).unwrap();
        assert!(last < first, "loss should fall: {first} -> {last}");
        let gen = rnn_generate(&model, &l).unwrap();
        let rmse: f64 = (gen
            .mgc
            .data
            .iter()
            .zip(targets.mgc.data.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / gen.mgc.data.len() as f64)
            .sqrt();
        assert!(rmse < 0.1, "overfit RMSE {rmse}");
    }
}
