//! GAN postfilter: a residual convolutional generator enhancing generated
//! MGC trajectories, judged by a frame-wise discriminator that sees
//! element-wise scaled features (BAP weighted to zero).

use super::{AcousticError, AcousticStreams};
use crate::neural::layers::{Conv1d, FfTanh, Layer};
use crate::neural::network::LayerSpec;
use crate::neural::{Mat, Network, OptimizerState, Tensor};
use rand::Rng;

pub const MGC_DIM: usize = 60;
pub const BAP_DIM: usize = 25;

/// The fixed discriminator input scaling: 0.001 for the first five MGC
/// dimensions, 0.01 for the next five, 1 for the remaining MGC, 0 for BAP.
pub fn gan_scale_weights() -> Vec<f64> {
    let mut w = Vec::with_capacity(MGC_DIM + BAP_DIM);
    w.extend(std::iter::repeat(0.001).take(5));
    w.extend(std::iter::repeat(0.01).take(5));
    w.extend(std::iter::repeat(1.0).take(MGC_DIM - 10));
    w.extend(std::iter::repeat(0.0).take(BAP_DIM));
    w
}

/// Scale a full MGC+BAP feature matrix for the discriminator.
pub fn gan_scale(features: &Mat) -> Result<Mat, AcousticError> {
    let expected = MGC_DIM + BAP_DIM;
    if features.cols != expected {
        return Err(AcousticError::BadLayout {
            expected,
            mgc: MGC_DIM,
            bap: BAP_DIM,
            got: features.cols,
        });
    }
    let w = gan_scale_weights();
    let mut out = features.clone();
    for t in 0..out.rows {
        let row = out.row_mut(t);
        for j in 0..expected {
            row[j] *= w[j];
        }
    }
    Ok(out)
}

/// One generator stage: x + FF(CNN(x)), with the FF output zero-initialized
/// so an untrained stage is the identity.
struct GeneratorBlock {
    conv: Conv1d,
    ff: FfTanh,
}

pub struct Generator {
    blocks: Vec<GeneratorBlock>,
    dim: usize,
}

impl Generator {
    pub fn new(dim: usize, channels: usize, kernel: usize, stages: usize, rng: &mut impl Rng) -> Self {
        let blocks = (0..stages)
            .map(|_| {
                let conv = Conv1d::new(dim, channels, kernel, rng);
                let mut ff = FfTanh::new(channels, dim, rng);
                ff.w.values.iter_mut().for_each(|v| *v = 0.0);
                GeneratorBlock { conv, ff }
            })
            .collect();
        Generator { blocks, dim }
    }

    pub fn forward(&mut self, x: &Mat) -> Result<Mat, AcousticError> {
        let mut cur = x.clone();
        for b in &mut self.blocks {
            let hidden = b.conv.forward(&cur)?;
            let delta = b.ff.forward(&hidden)?;
            for (c, d) in cur.data.iter_mut().zip(delta.data.iter()) {
                *c += d;
            }
        }
        Ok(cur)
    }

    pub fn infer(&self, x: &Mat) -> Result<Mat, AcousticError> {
        let mut cur = x.clone();
        for b in &self.blocks {
            let hidden = b.conv.infer(&cur)?;
            let delta = b.ff.infer(&hidden)?;
            for (c, d) in cur.data.iter_mut().zip(delta.data.iter()) {
                *c += d;
            }
        }
        Ok(cur)
    }

    pub fn backward(&mut self, grad_out: &Mat) -> Result<Mat, AcousticError> {
        let mut grad = grad_out.clone();
        for b in self.blocks.iter_mut().rev() {
            // d(cur + FF(CNN(cur))) = identity + conv/ff path.
            let d_hidden = b.ff.backward(&grad)?;
            let d_path = b.conv.backward(&d_hidden)?;
            for (g, d) in grad.data.iter_mut().zip(d_path.data.iter()) {
                *g += d;
            }
        }
        Ok(grad)
    }

    pub fn zero_grad(&mut self) {
        for b in &mut self.blocks {
            for p in b.conv.params_mut() {
                p.zero_grad();
            }
            for p in b.ff.params_mut() {
                p.zero_grad();
            }
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.blocks
            .iter()
            .flat_map(|b| {
                b.conv
                    .params()
                    .into_iter()
                    .chain(b.ff.params().into_iter())
            })
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for b in &mut self.blocks {
            out.extend(b.conv.params_mut());
            out.extend(b.ff.params_mut());
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

pub struct GanPostfilter {
    pub generator: Generator,
    pub discriminator: Network,
    /// Fixed input scaling for the discriminator, never trained.
    pub scale: Vec<f64>,
    /// L2 anchor weight tying the generator output to its input.
    pub anchor_weight: f64,
}

impl GanPostfilter {
    pub fn new(channels: usize, kernel: usize, stages: usize, rng: &mut impl Rng) -> Self {
        let generator = Generator::new(MGC_DIM, channels, kernel, stages, rng);
        let d_in = MGC_DIM + BAP_DIM;
        let mut discriminator = Network::new(
            &[
                LayerSpec::Conv1d { input: d_in, channels, kernel },
                LayerSpec::FfTanh { input: channels, output: channels },
                LayerSpec::Linear { input: channels, output: 1 },
            ],
            rng,
        );
        // An untrained judge is maximally uncertain: zero the final layer so
        // every frame scores logit 0.
        for p in discriminator.layer_mut(2).params_mut() {
            p.values.iter_mut().for_each(|v| *v = 0.0);
        }
        GanPostfilter {
            generator,
            discriminator,
            scale: gan_scale_weights(),
            anchor_weight: 10.0,
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut p = self.generator.params();
        p.extend(self.discriminator.params());
        p
    }
}

/// Per-frame binary cross-entropy with logits; returns the mean loss and the
/// gradient of the mean w.r.t. the logits.
fn bce_with_logits(logits: &Mat, target: f64) -> (f64, Mat) {
    let n = logits.rows as f64;
    let mut grad = Mat::zeros(logits.rows, logits.cols);
    let mut loss = 0.0;
    for t in 0..logits.rows {
        let z = logits.row(t)[0];
        // max(z,0) - z*y + ln(1 + exp(-|z|))
        loss += z.max(0.0) - z * target + (1.0 + (-z.abs()).exp()).ln();
        let sig = 1.0 / (1.0 + (-z).exp());
        grad.row_mut(t)[0] = (sig - target) / n;
    }
    (loss / n, grad)
}

/// One adversarial update: the discriminator sees scaled real vs. enhanced
/// features with a per-frame judgment; the generator trains against the
/// updated judge with a non-saturating loss plus an L2 anchor to its input.
pub fn gan_train_step(
    pf: &mut GanPostfilter,
    opt_g: &mut OptimizerState,
    opt_d: &mut OptimizerState,
    real: &AcousticStreams,
    generated: &AcousticStreams,
) -> Result<(f64, f64), AcousticError> {
    if real.mgc.rows != generated.mgc.rows {
        return Err(AcousticError::FrameMismatch(format!(
            "real {} vs generated {}",
            real.mgc.rows, generated.mgc.rows
        )));
    }
    // Generator forward (cached for its own update below).
    pf.generator.zero_grad();
    let enhanced = pf.generator.forward(&generated.mgc)?;

    let real_in = gan_scale(&Mat::hcat(&real.mgc, &real.bap))?;
    let fake_in = gan_scale(&Mat::hcat(&enhanced, &generated.bap))?;

    // Discriminator update.
    pf.discriminator.zero_grad();
    let out_real = pf.discriminator.forward(&real_in)?;
    let (loss_real, mut g_real) = bce_with_logits(&out_real, 1.0);
    g_real.data.iter_mut().for_each(|v| *v *= 0.5);
    pf.discriminator.backward(&g_real)?;
    let out_fake = pf.discriminator.forward(&fake_in)?;
    let (loss_fake, mut g_fake) = bce_with_logits(&out_fake, 0.0);
    g_fake.data.iter_mut().for_each(|v| *v *= 0.5);
    pf.discriminator.backward(&g_fake)?;
    let d_loss = 0.5 * (loss_real + loss_fake);
    opt_d.step(pf.discriminator.params_mut());

    // Generator update against the refreshed discriminator.
    pf.discriminator.zero_grad();
    let out_adv = pf.discriminator.forward(&fake_in)?;
    let (adv_loss, g_adv) = bce_with_logits(&out_adv, 1.0);
    let d_fake_in = pf.discriminator.backward(&g_adv)?;
    // Chain through the fixed scaling; only the MGC block reaches the
    // generator.
    let mut d_enhanced = Mat::zeros(enhanced.rows, MGC_DIM);
    for t in 0..enhanced.rows {
        for j in 0..MGC_DIM {
            d_enhanced.row_mut(t)[j] = d_fake_in.row(t)[j] * pf.scale[j];
        }
    }
    // L2 anchor to the generator input.
    let n = enhanced.rows as f64;
    let mut anchor_loss = 0.0;
    for t in 0..enhanced.rows {
        for j in 0..MGC_DIM {
            let r = enhanced.row(t)[j] - generated.mgc.row(t)[j];
            anchor_loss += r * r;
            d_enhanced.row_mut(t)[j] += 2.0 * pf.anchor_weight * r / n;
        }
    }
    anchor_loss *= pf.anchor_weight / n;
    pf.generator.backward(&d_enhanced)?;
    opt_g.step(pf.generator.params_mut());
    Ok((adv_loss + anchor_loss, d_loss))
}

/// Deterministic enhancement: MGC through the generator, BAP untouched.
pub fn gan_apply(
    pf: &GanPostfilter,
    features: &AcousticStreams,
) -> Result<AcousticStreams, AcousticError> {
    Ok(AcousticStreams {
        mgc: pf.generator.infer(&features.mgc)?,
        bap: features.bap.clone(),
    })
}
