//! Shallow autoregressive extension: the Gaussian mean of frame n is shifted
//! by `sum_k beta_k * a_{n-k} + gamma`, merging the previous K frames.
//!
//! K = 0 has no AR terms at all (no gamma either), so a K = 0 stream is the
//! plain RNN stream; history before the first frame is zero-padded.

use super::{AcousticError, AcousticModel, AcousticStreams};
use crate::neural::network::gaussian_nll;
use crate::neural::{Mat, OptimizerState, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct SarParameters {
    /// One per-dimension weight vector per history frame, beta_1..beta_K.
    pub beta: Vec<Tensor>,
    /// Per-dimension bias; present only when K >= 1.
    pub gamma: Option<Tensor>,
    pub dim: usize,
}

impl SarParameters {
    pub fn new(dim: usize, order: usize) -> Self {
        SarParameters {
            beta: (0..order).map(|_| Tensor::zeros(&[dim])).collect(),
            gamma: if order > 0 {
                Some(Tensor::zeros(&[dim]))
            } else {
                None
            },
            dim,
        }
    }

    pub fn order(&self) -> usize {
        self.beta.len()
    }

    /// Constant beta/gamma, handy for closed-form fixtures.
    pub fn constant(dim: usize, order: usize, beta: f64, gamma: f64) -> Self {
        let mut p = SarParameters::new(dim, order);
        for b in &mut p.beta {
            b.values.iter_mut().for_each(|v| *v = beta);
        }
        if let Some(g) = &mut p.gamma {
            g.values.iter_mut().for_each(|v| *v = gamma);
        }
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p: Vec<&mut Tensor> = self.beta.iter_mut().collect();
        if let Some(g) = &mut self.gamma {
            p.push(g);
        }
        p
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut p: Vec<&Tensor> = self.beta.iter().collect();
        if let Some(g) = &self.gamma {
            p.push(g);
        }
        p
    }

    pub fn zero_grad(&mut self) {
        for b in &mut self.beta {
            b.zero_grad();
        }
        if let Some(g) = &mut self.gamma {
            g.zero_grad();
        }
    }
}

/// Teacher-forced AR means: h_n + sum_k beta_k * history_{n-k} + gamma.
pub fn sar_means(h: &Mat, sar: &SarParameters, history: &Mat) -> Mat {
    let mut mean = h.clone();
    for n in 0..h.rows {
        let row = mean.row_mut(n);
        for (k, beta) in sar.beta.iter().enumerate() {
            let lag = k + 1;
            if n >= lag {
                let prev = history.row(n - lag);
                for j in 0..sar.dim {
                    row[j] += beta.values[j] * prev[j];
                }
            }
        }
        if let Some(g) = &sar.gamma {
            for j in 0..sar.dim {
                row[j] += g.values[j];
            }
        }
    }
    mean
}

/// Free-run AR generation from trunk means `h`, feeding generated frames back.
pub fn sar_generate_from_means(h: &Mat, sar: &SarParameters) -> Mat {
    let mut out = Mat::zeros(h.rows, h.cols);
    for n in 0..h.rows {
        let mut row = h.row(n).to_vec();
        for (k, beta) in sar.beta.iter().enumerate() {
            let lag = k + 1;
            if n >= lag {
                let prev = out.row(n - lag);
                for j in 0..sar.dim {
                    row[j] += beta.values[j] * prev[j];
                }
            }
        }
        if let Some(g) = &sar.gamma {
            for j in 0..sar.dim {
                row[j] += g.values[j];
            }
        }
        out.row_mut(n).copy_from_slice(&row);
    }
    out
}

/// SAR negative log-likelihood over both streams (MGC with its AR order,
/// BAP with its own; the paper's setting is K=1 and K=0).
pub fn sar_nll(
    model: &AcousticModel,
    sar_mgc: &SarParameters,
    sar_bap: &SarParameters,
    linguistic: &Mat,
    targets: &AcousticStreams,
) -> Result<f64, AcousticError> {
    let out = model.infer(linguistic)?;
    check_streams(&out, targets)?;
    let mean_mgc = sar_means(&out.mgc, sar_mgc, &targets.mgc);
    let mean_bap = sar_means(&out.bap, sar_bap, &targets.bap);
    let (l_mgc, _) = gaussian_nll(&mean_mgc, &targets.mgc);
    let (l_bap, _) = gaussian_nll(&mean_bap, &targets.bap);
    Ok(l_mgc + l_bap)
}

fn check_streams(out: &AcousticStreams, targets: &AcousticStreams) -> Result<(), AcousticError> {
    if out.mgc.rows != targets.mgc.rows
        || out.mgc.cols != targets.mgc.cols
        || out.bap.cols != targets.bap.cols
    {
        return Err(AcousticError::FrameMismatch(format!(
            "model {}x{} vs targets {}x{}",
            out.mgc.rows, out.mgc.cols, targets.mgc.rows, targets.mgc.cols
        )));
    }
    Ok(())
}

/// One teacher-forced training step updating the trunk, heads, and AR
/// parameters together.
pub fn sar_train_step(
    model: &mut AcousticModel,
    sar_mgc: &mut SarParameters,
    sar_bap: &mut SarParameters,
    opt: &mut OptimizerState,
    linguistic: &Mat,
    targets: &AcousticStreams,
) -> Result<f64, AcousticError> {
    model.zero_grad();
    sar_mgc.zero_grad();
    sar_bap.zero_grad();
    let out = model.forward(linguistic)?;
    check_streams(&out, targets)?;
    let mean_mgc = sar_means(&out.mgc, sar_mgc, &targets.mgc);
    let mean_bap = sar_means(&out.bap, sar_bap, &targets.bap);
    let (l_mgc, d_mgc) = gaussian_nll(&mean_mgc, &targets.mgc);
    let (l_bap, d_bap) = gaussian_nll(&mean_bap, &targets.bap);
    accumulate_ar_grads(sar_mgc, &d_mgc, &targets.mgc);
    accumulate_ar_grads(sar_bap, &d_bap, &targets.bap);
    // d mean / d h is the identity, so the stream gradients pass straight to
    // the heads.
    model.backward(&d_mgc, &d_bap)?;
    let mut params = model.params_mut();
    params.extend(sar_mgc.params_mut());
    params.extend(sar_bap.params_mut());
    opt.step(params);
    Ok(l_mgc + l_bap)
}

fn accumulate_ar_grads(sar: &mut SarParameters, d_mean: &Mat, history: &Mat) {
    let dim = sar.dim;
    for (k, beta) in sar.beta.iter_mut().enumerate() {
        let lag = k + 1;
        let g = beta.grad_mut();
        for n in lag..d_mean.rows {
            let d = d_mean.row(n);
            let prev = history.row(n - lag);
            for j in 0..dim {
                g[j] += d[j] * prev[j];
            }
        }
    }
    if let Some(gamma) = &mut sar.gamma {
        let g = gamma.grad_mut();
        for n in 0..d_mean.rows {
            let d = d_mean.row(n);
            for j in 0..dim {
                g[j] += d[j];
            }
        }
    }
}

/// Free-run SAR generation for both streams.
pub fn sar_generate(
    model: &AcousticModel,
    sar_mgc: &SarParameters,
    sar_bap: &SarParameters,
    linguistic: &Mat,
) -> Result<AcousticStreams, AcousticError> {
    let out = model.infer(linguistic)?;
    Ok(AcousticStreams {
        mgc: sar_generate_from_means(&out.mgc, sar_mgc),
        bap: sar_generate_from_means(&out.bap, sar_bap),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustic::{rnn_generate, rnn_nll, AcousticArch, AcousticModel};
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
    fn zero_ar_parameters_reduce_to_rnn_exactly() {
        let model = small_model(20);
        let l = random_mat(8, 4, 21);
        let targets = AcousticStreams {
            mgc: random_mat(8, 2, 22),
            bap: random_mat(8, 1, 23),
        };
        let sar_mgc = SarParameters::new(2, 1);
        let sar_bap = SarParameters::new(1, 0);
        let sar = sar_nll(&model, &sar_mgc, &sar_bap, &l, &targets).unwrap();
        let rnn = rnn_nll(&model, &l, &targets).unwrap();
        assert_eq!(sar, rnn, "bit-equal reduction");
        let g_sar = sar_generate(&model, &sar_mgc, &sar_bap, &l).unwrap();
        let g_rnn = rnn_generate(&model, &l).unwrap();
        assert_eq!(g_sar.mgc.data, g_rnn.mgc.data);
        assert_eq!(g_sar.bap.data, g_rnn.bap.data);
    }

    #[test]
    fn order_zero_stream_is_the_rnn_stream() {
        // With K = 0 there is no AR structure at all, so means match the
        // trunk output exactly whatever the targets are.
        let h = random_mat(6, 3, 24);
        let sar = SarParameters::new(3, 0);
        let history = random_mat(6, 3, 25);
        assert_eq!(sar_means(&h, &sar, &history), h);
        assert_eq!(sar_generate_from_means(&h, &sar), h);
    }

    /// Two frames, one dim, hand-set values against an independent scalar
    /// computation.
    #[test]
    fn hand_computed_two_frame_loss() {
        let h = Mat::from_rows(&[vec![0.3], vec![-0.4]]);
        let sar = SarParameters::constant(1, 1, 0.5, 0.1);
        let targets = Mat::from_rows(&[vec![1.0], vec![0.5]]);
        let means = sar_means(&h, &sar, &targets);
        // n=0: 0.3 + 0.1 (history zero-padded); n=1: -0.4 + 0.5*1.0 + 0.1
        assert!((means.row(0)[0] - 0.4).abs() < 1e-15);
        assert!((means.row(1)[0] - 0.2).abs() < 1e-15);
        let (loss, _) = gaussian_nll(&means, &targets);
        let scalar = |m: f64, a: f64| 0.5 * (a - m) * (a - m) + 0.5 * (2.0 * std::f64::consts::PI).ln();
        let want = scalar(0.4, 1.0) + scalar(0.2, 0.5);
        assert!((loss - want).abs() < 1e-12);
    }

    /// beta = 0.5, gamma = 0, h = 1: a_n converges to 2 geometrically with
    /// the closed form a_n = 2 - 2^{1-n} (1-indexed).
    #[test]
    fn closed_form_geometric_recursion() {
        let n = 20;
        let h = Mat::from_rows(&(0..n).map(|_| vec![1.0]).collect::<Vec<_>>());
        let sar = SarParameters::constant(1, 1, 0.5, 0.0);
        let gen = sar_generate_from_means(&h, &sar);
        for i in 0..n {
            let n1 = (i + 1) as i32;
            let want = 2.0 - (2.0f64).powi(1 - n1);
            assert!(
                (gen.row(i)[0] - want).abs() < 1e-12,
                "frame {i}: {} vs {want}",
                gen.row(i)[0]
            );
        }
    }

    #[test]
    fn propagates_zeros_with_unit_beta_and_zero_means() {
        let h = Mat::zeros(10, 1);
        let sar = SarParameters::constant(1, 1, 1.0, 0.0);
        let gen = sar_generate_from_means(&h, &sar);
        assert!(gen.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn training_reduces_loss_and_learns_ar_weights() {
        let mut model = small_model(26);
        let l = random_mat(30, 4, 27);
        // Build targets with strong frame-to-frame correlation.
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let mut mgc = Mat::zeros(30, 2);
        for n in 0..30 {
            for j in 0..2 {
                let prev = if n > 0 { mgc.row(n - 1)[j] } else { 0.0 };
                mgc.row_mut(n)[j] = 0.9 * prev + rng.gen_range(-0.1..0.1);
            }
        }
        let targets = AcousticStreams {
            mgc,
            bap: random_mat(30, 1, 29),
        };
        let mut sar_mgc = SarParameters::new(2, 1);
        let mut sar_bap = SarParameters::new(1, 0);
        let mut opt = OptimizerState::new(crate::neural::SgdConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            clip_norm: 5.0,
        });
        let mut losses = Vec::new();
        for _ in 0..300 {
            losses.push(
                sar_train_step(&mut model, &mut sar_mgc, &mut sar_bap, &mut opt, &l, &targets)
                    .unwrap(),
            );
        }
        assert!(losses.last().unwrap() < &losses[10]);
        // The AR weight should move toward the data's autocorrelation.
        assert!(sar_mgc.beta[0].values.iter().all(|b| *b > 0.1));
    }
}
