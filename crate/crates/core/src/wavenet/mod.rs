//! Conditional Wavenet vocoder over mu-law classes: teacher-forced training,
//! and autoregressive generation with a voiced/unvoiced sampling policy.

use crate::features::AcousticFrameSequence;
use crate::neural::layers::{Layer, Linear};
use crate::neural::network::{cross_entropy, log_softmax_row, LayerSpec};
use crate::neural::{DilatedCausalBlock, Mat, NeuralError, OptimizerState, Tensor};
use crate::signal::mulaw::QuantizedWave;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WavenetError {
    #[error("misaligned: {0}")]
    Misaligned(String),
    #[error("conditioning upsample ratio {sample_rate}/{frame_rate} is not an integer")]
    FractionalRatio { sample_rate: u32, frame_rate: f64 },
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WavenetConfig {
    pub blocks: usize,
    /// Dilation of block k is 2^(k mod dilation_cycle).
    pub dilation_cycle: usize,
    pub residual_channels: usize,
    pub skip_channels: usize,
    /// Mu-law output classes.
    pub classes: usize,
    /// MGC dimensions in the conditioning vector.
    pub mgc_dim: usize,
    /// Quantized-F0 levels entering through a learned embedding.
    pub f0_classes: usize,
    pub f0_embed_dim: usize,
}

impl WavenetConfig {
    /// The full-scale configuration: 40 blocks cycling dilations 1..512,
    /// 10-bit mu-law output.
    pub fn full(mgc_dim: usize) -> Self {
        WavenetConfig {
            blocks: 40,
            dilation_cycle: 10,
            residual_channels: 64,
            skip_channels: 128,
            classes: 1024,
            mgc_dim,
            f0_classes: 256,
            f0_embed_dim: 64,
        }
    }

    /// Something a laptop can train: two dilation cycles, 8-bit mu-law.
    pub fn desk(mgc_dim: usize) -> Self {
        WavenetConfig {
            blocks: 20,
            dilation_cycle: 10,
            residual_channels: 32,
            skip_channels: 32,
            classes: 256,
            mgc_dim,
            f0_classes: 256,
            f0_embed_dim: 16,
        }
    }

    pub fn dilations(&self) -> Vec<usize> {
        (0..self.blocks).map(|k| 1usize << (k % self.dilation_cycle)).collect()
    }

    pub fn cond_dim(&self) -> usize {
        self.mgc_dim + self.f0_embed_dim
    }
}

/// Past samples influencing one prediction: 1 + the total dilated span of
/// the kernel-2 convolution stack.
pub fn receptive_field(cfg: &WavenetConfig) -> usize {
    1 + cfg.dilations().iter().sum::<usize>()
}

/// Per-sample conditioning: repeated acoustic frames plus a voiced flag.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningTrack {
    pub mgc: Mat,
    pub f0_level: Vec<u16>,
    pub voiced: Vec<bool>,
    pub sample_rate: u32,
}

impl ConditioningTrack {
    pub fn len(&self) -> usize {
        self.f0_level.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0_level.is_empty()
    }
}

/// Frame-repeat upsampling from the feature frame rate to the sample rate.
/// The voiced flag follows the quantized F0 level of the repeated frame.
pub fn upsample_conditioning(
    features: &AcousticFrameSequence,
    sample_rate: u32,
) -> Result<ConditioningTrack, WavenetError> {
    let frame_rate = features.f0.frame_rate;
    let ratio_f = sample_rate as f64 / frame_rate;
    if ratio_f.fract() != 0.0 || ratio_f < 1.0 {
        return Err(WavenetError::FractionalRatio {
            sample_rate,
            frame_rate,
        });
    }
    let ratio = ratio_f as usize;
    let n = features.num_frames();
    let mgc_dim = features.mgc.order;
    let mut mgc = Mat::zeros(n * ratio, mgc_dim);
    let mut f0_level = Vec::with_capacity(n * ratio);
    let mut voiced = Vec::with_capacity(n * ratio);
    for (frame, mgc_row) in features.mgc.frames.iter().enumerate() {
        let level = features.qf0.levels[frame];
        for r in 0..ratio {
            mgc.row_mut(frame * ratio + r).copy_from_slice(mgc_row);
            f0_level.push(level);
            voiced.push(level != 0);
        }
    }
    Ok(ConditioningTrack {
        mgc,
        f0_level,
        voiced,
        sample_rate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoicedMode {
    Greedy,
    Random,
}

/// Sampling policy: voiced samples follow `voiced_mode`, unvoiced samples are
/// always drawn at random.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GenerationPolicy {
    pub voiced_mode: VoicedMode,
    pub seed: u64,
}

pub struct Wavenet {
    pub cfg: WavenetConfig,
    /// Linear projection of the one-hot previous sample, i.e. a per-class
    /// embedding of size residual_channels.
    pub embed: Tensor,
    pub f0_embed: Tensor,
    pub blocks: Vec<DilatedCausalBlock>,
    pub post1: Linear,
    pub post2: Linear,
    post_cache: Option<(Mat, Mat)>, // (skip_sum, relu(post1))
}

impl Wavenet {
    pub fn new(cfg: WavenetConfig, rng: &mut impl Rng) -> Self {
        let embed = Tensor::uniform(&[cfg.classes, cfg.residual_channels], cfg.classes, rng);
        let f0_embed = Tensor::uniform(&[cfg.f0_classes, cfg.f0_embed_dim], cfg.f0_classes, rng);
        let blocks = cfg
            .dilations()
            .iter()
            .map(|&d| {
                DilatedCausalBlock::new(
                    cfg.residual_channels,
                    cfg.skip_channels,
                    cfg.cond_dim(),
                    d,
                    rng,
                )
            })
            .collect();
        let post1 = Linear::new(
            LayerSpec::Linear { input: cfg.skip_channels, output: cfg.skip_channels },
            cfg.skip_channels,
            cfg.skip_channels,
            rng,
        );
        // Zero-initialized head: an untrained vocoder is exactly uniform.
        let post2 = Linear::new(
            LayerSpec::SoftmaxHead { input: cfg.skip_channels, classes: cfg.classes },
            cfg.skip_channels,
            cfg.classes,
            rng,
        )
        .zeroed();
        Wavenet {
            cfg,
            embed,
            f0_embed,
            blocks,
            post1,
            post2,
            post_cache: None,
        }
    }

    /// History level before the clip starts: the mu-law code of silence.
    fn initial_level(&self) -> usize {
        self.cfg.classes / 2
    }

    /// Embedded input sequence: frame t carries the embedding of o_{t-1}.
    fn embed_inputs(&self, levels: &[u16]) -> Mat {
        let r = self.cfg.residual_channels;
        let mut x = Mat::zeros(levels.len(), r);
        for t in 0..levels.len() {
            let prev = if t == 0 {
                self.initial_level()
            } else {
                levels[t - 1] as usize
            };
            x.row_mut(t)
                .copy_from_slice(&self.embed.values[prev * r..(prev + 1) * r]);
        }
        x
    }

    fn cond_matrix(&self, cond: &ConditioningTrack) -> Mat {
        let e = self.cfg.f0_embed_dim;
        let mut m = Mat::zeros(cond.len(), self.cfg.cond_dim());
        for t in 0..cond.len() {
            let row = m.row_mut(t);
            row[..self.cfg.mgc_dim].copy_from_slice(cond.mgc.row(t));
            let level = (cond.f0_level[t] as usize).min(self.cfg.f0_classes - 1);
            row[self.cfg.mgc_dim..].copy_from_slice(&self.f0_embed.values[level * e..(level + 1) * e]);
        }
        m
    }

    fn check_alignment(
        &self,
        q: &QuantizedWave,
        cond: &ConditioningTrack,
    ) -> Result<(), WavenetError> {
        if q.len() != cond.len() {
            return Err(WavenetError::Misaligned(format!(
                "{} samples vs {} conditioning vectors",
                q.len(),
                cond.len()
            )));
        }
        if q.level_count as usize != self.cfg.classes {
            return Err(WavenetError::Misaligned(format!(
                "quantized wave has {} levels, model expects {}",
                q.level_count, self.cfg.classes
            )));
        }
        Ok(())
    }

    /// Teacher-forced logits for every sample position.
    fn logits(&self, levels: &[u16], cond: &ConditioningTrack) -> Result<Mat, NeuralError> {
        let x0 = self.embed_inputs(levels);
        let c = self.cond_matrix(cond);
        let mut x = x0;
        let mut skip_sum = Mat::zeros(levels.len(), self.cfg.skip_channels);
        for block in &self.blocks {
            let (res, skip) = block.infer(&x, &c)?;
            for (a, b) in skip_sum.data.iter_mut().zip(skip.data.iter()) {
                *a += b;
            }
            x = res;
        }
        let relu_skip = skip_sum.map(|v| v.max(0.0));
        let h = self.post1.infer(&relu_skip)?;
        let relu_h = h.map(|v| v.max(0.0));
        self.post2.infer(&relu_h)
    }

    /// Training forward: identical math to `logits`, but every block and the
    /// post layers keep their caches.
    fn forward_train(
        &mut self,
        levels: &[u16],
        cond: &ConditioningTrack,
    ) -> Result<Mat, NeuralError> {
        let x0 = self.embed_inputs(levels);
        let c = self.cond_matrix(cond);
        let mut x = x0;
        let mut skip_sum = Mat::zeros(levels.len(), self.cfg.skip_channels);
        for block in &mut self.blocks {
            let (res, skip) = block.forward(&x, &c)?;
            for (a, b) in skip_sum.data.iter_mut().zip(skip.data.iter()) {
                *a += b;
            }
            x = res;
        }
        let relu_skip = skip_sum.map(|v| v.max(0.0));
        let h = self.post1.forward(&relu_skip)?;
        let relu_h = h.map(|v| v.max(0.0));
        let logits = self.post2.forward(&relu_h)?;
        self.post_cache = Some((skip_sum, h));
        Ok(logits)
    }

    fn backward(
        &mut self,
        d_logits: &Mat,
        levels: &[u16],
        f0_levels: &[u16],
    ) -> Result<(), NeuralError> {
        let (skip_sum, h) = self.post_cache.take().ok_or(NeuralError::NoForwardCache)?;
        let d_relu_h = self.post2.backward(d_logits)?;
        let mut d_h = d_relu_h;
        for (g, v) in d_h.data.iter_mut().zip(h.data.iter()) {
            if *v <= 0.0 {
                *g = 0.0;
            }
        }
        let d_relu_skip = self.post1.backward(&d_h)?;
        let mut d_skip = d_relu_skip;
        for (g, v) in d_skip.data.iter_mut().zip(skip_sum.data.iter()) {
            if *v <= 0.0 {
                *g = 0.0;
            }
        }
        // Walk the blocks back; every block sees the same skip gradient.
        let mut d_x = Mat::zeros(d_skip.rows, self.cfg.residual_channels);
        let mut d_cond_total = Mat::zeros(d_skip.rows, self.cfg.cond_dim());
        for block in self.blocks.iter_mut().rev() {
            let (d_in, d_cond) = block.backward(&d_x, &d_skip)?;
            d_x = d_in;
            for (a, b) in d_cond_total.data.iter_mut().zip(d_cond.data.iter()) {
                *a += b;
            }
        }
        // Embedding gradients.
        let r = self.cfg.residual_channels;
        {
            let g = self.embed.grad_mut();
            for t in 0..d_x.rows {
                let prev = if t == 0 {
                    self.cfg.classes / 2
                } else {
                    levels[t - 1] as usize
                };
                let dst = &mut g[prev * r..(prev + 1) * r];
                for (d, s) in dst.iter_mut().zip(d_x.row(t).iter()) {
                    *d += s;
                }
            }
        }
        // F0 embedding gradients come from the conditioning tail.
        let e = self.cfg.f0_embed_dim;
        let mgc_dim = self.cfg.mgc_dim;
        {
            let g = self.f0_embed.grad_mut();
            for t in 0..d_cond_total.rows {
                let level = (f0_levels[t] as usize).min(self.cfg.f0_classes - 1);
                let src = &d_cond_total.row(t)[mgc_dim..mgc_dim + e];
                let dst = &mut g[level * e..(level + 1) * e];
                for (d, s) in dst.iter_mut().zip(src.iter()) {
                    *d += s;
                }
            }
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.embed.zero_grad();
        self.f0_embed.zero_grad();
        for b in &mut self.blocks {
            for p in b.params_mut() {
                p.zero_grad();
            }
        }
        for p in self.post1.params_mut() {
            p.zero_grad();
        }
        for p in self.post2.params_mut() {
            p.zero_grad();
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut p = vec![&self.embed, &self.f0_embed];
        for b in &self.blocks {
            p.extend(b.params());
        }
        p.extend(self.post1.params());
        p.extend(self.post2.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = vec![&mut self.embed, &mut self.f0_embed];
        for b in &mut self.blocks {
            p.extend(b.params_mut());
        }
        p.extend(self.post1.params_mut());
        p.extend(self.post2.params_mut());
        p
    }
}

/// Teacher-forced mean cross-entropy of the true classes.
pub fn wavenet_nll(
    model: &Wavenet,
    q: &QuantizedWave,
    cond: &ConditioningTrack,
) -> Result<f64, WavenetError> {
    model.check_alignment(q, cond)?;
    let logits = model.logits(&q.levels, cond)?;
    let targets: Vec<usize> = q.levels.iter().map(|l| *l as usize).collect();
    Ok(cross_entropy(&logits, &targets).0)
}

/// One teacher-forced training step; returns the loss before the update.
pub fn wavenet_train_step(
    model: &mut Wavenet,
    opt: &mut OptimizerState,
    q: &QuantizedWave,
    cond: &ConditioningTrack,
) -> Result<f64, WavenetError> {
    model.check_alignment(q, cond)?;
    model.zero_grad();
    let logits = model.forward_train(&q.levels, cond)?;
    let targets: Vec<usize> = q.levels.iter().map(|l| *l as usize).collect();
    let (loss, d_logits) = cross_entropy(&logits, &targets);
    model.backward(&d_logits, &q.levels, &cond.f0_level)?;
    opt.step(model.params_mut());
    Ok(loss)
}

/// Teacher-forced argmax accuracy.
pub fn wavenet_accuracy(
    model: &Wavenet,
    q: &QuantizedWave,
    cond: &ConditioningTrack,
) -> Result<f64, WavenetError> {
    model.check_alignment(q, cond)?;
    let logits = model.logits(&q.levels, cond)?;
    let mut hits = 0usize;
    for (t, level) in q.levels.iter().enumerate() {
        if argmax(logits.row(t)) == *level as usize {
            hits += 1;
        }
    }
    Ok(hits as f64 / q.len().max(1) as f64)
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Sequential generation. Voiced samples follow the policy (argmax ties break
/// toward the lower class); unvoiced samples are always drawn at random.
pub fn wavenet_generate(
    model: &Wavenet,
    cond: &ConditioningTrack,
    policy: &GenerationPolicy,
) -> Result<QuantizedWave, WavenetError> {
    let t_len = cond.len();
    let r = model.cfg.residual_channels;
    let c_mat = model.cond_matrix(cond);
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    // Ring buffers of each block's input, one slot per dilation step.
    let mut rings: Vec<Vec<Vec<f64>>> = model
        .blocks
        .iter()
        .map(|b| vec![vec![0.0; r]; b.dilation])
        .collect();
    let mut levels: Vec<u16> = Vec::with_capacity(t_len);
    let mut prev = model.initial_level();
    for t in 0..t_len {
        let mut x = model.embed.values[prev * r..(prev + 1) * r].to_vec();
        let mut skip_sum = vec![0.0; model.cfg.skip_channels];
        for (bi, block) in model.blocks.iter().enumerate() {
            let slot = t % block.dilation;
            let x_past = std::mem::replace(&mut rings[bi][slot], x.clone());
            let x_past = if t >= block.dilation {
                x_past
            } else {
                vec![0.0; r]
            };
            let (res, skip) = block.step(&x, &x_past, c_mat.row(t));
            for (a, b) in skip_sum.iter_mut().zip(skip.iter()) {
                *a += b;
            }
            x = res;
        }
        let relu_skip: Vec<f64> = skip_sum.iter().map(|v| v.max(0.0)).collect();
        let h = model
            .post1
            .infer(&Mat::from_rows(&[relu_skip]))
            .map_err(WavenetError::Neural)?;
        let relu_h = h.map(|v| v.max(0.0));
        let logits = model.post2.infer(&relu_h).map_err(WavenetError::Neural)?;
        let log_probs = log_softmax_row(logits.row(0));
        let chosen = if cond.voiced[t] && policy.voiced_mode == VoicedMode::Greedy {
            argmax(&log_probs)
        } else {
            sample_categorical(&log_probs, &mut rng)
        };
        levels.push(chosen as u16);
        prev = chosen;
    }
    Ok(QuantizedWave {
        levels,
        level_count: model.cfg.classes as u32,
        mu: (model.cfg.classes - 1) as f64,
        sample_rate: cond.sample_rate,
    })
}

fn sample_categorical(log_probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen::<f64>();
    let mut acc = 0.0;
    for (i, lp) in log_probs.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return i;
        }
    }
    log_probs.len() - 1
}
