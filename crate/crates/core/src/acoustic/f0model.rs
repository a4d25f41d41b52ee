//! Simplified autoregressive quantized-F0 classifier: a feedforward trunk
//! over the linguistic features plus an embedding of the previously
//! generated level, with a 256-way softmax (255 voiced levels + unvoiced).

use super::AcousticError;
use crate::neural::network::{cross_entropy, log_softmax_row, LayerSpec};
use crate::neural::{Mat, Network, OptimizerState, Tensor};
use rand::Rng;

pub const F0_CLASSES: usize = 256;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct F0ModelArch {
    pub input_dim: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub classes: usize,
}

pub struct F0Model {
    pub arch: F0ModelArch,
    pub embed: Tensor, // [classes, embed_dim]
    pub net: Network,
}

impl F0Model {
    pub fn new(arch: F0ModelArch, rng: &mut impl Rng) -> Self {
        let embed = Tensor::uniform(&[arch.classes, arch.embed_dim], arch.embed_dim, rng);
        let net = Network::new(
            &[
                LayerSpec::FfTanh {
                    input: arch.input_dim + arch.embed_dim,
                    output: arch.hidden,
                },
                LayerSpec::FfTanh { input: arch.hidden, output: arch.hidden },
                LayerSpec::SoftmaxHead { input: arch.hidden, classes: arch.classes },
            ],
            rng,
        );
        F0Model { arch, embed, net }
    }

    fn input_row(&self, linguistic: &[f64], prev_level: u16) -> Vec<f64> {
        let e = self.arch.embed_dim;
        let mut row = Vec::with_capacity(linguistic.len() + e);
        row.extend_from_slice(linguistic);
        let base = prev_level as usize * e;
        row.extend_from_slice(&self.embed.values[base..base + e]);
        row
    }

    /// Teacher-forced input matrix: frame n sees the true level of n-1
    /// (unvoiced before the first frame).
    fn teacher_inputs(&self, linguistic: &Mat, levels: &[u16]) -> Mat {
        let rows: Vec<Vec<f64>> = (0..linguistic.rows)
            .map(|n| {
                let prev = if n == 0 { 0 } else { levels[n - 1] };
                self.input_row(linguistic.row(n), prev)
            })
            .collect();
        Mat::from_rows(&rows)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = vec![&mut self.embed];
        p.extend(self.net.params_mut());
        p
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut p = vec![&self.embed];
        p.extend(self.net.params());
        p
    }
}

/// One cross-entropy training step; returns the mean loss before the update.
pub fn f0_model_train_step(
    model: &mut F0Model,
    opt: &mut OptimizerState,
    linguistic: &Mat,
    levels: &[u16],
) -> Result<f64, AcousticError> {
    if linguistic.rows != levels.len() {
        return Err(AcousticError::FrameMismatch(format!(
            "linguistic {} vs qf0 {}",
            linguistic.rows,
            levels.len()
        )));
    }
    model.embed.zero_grad();
    model.net.zero_grad();
    let inputs = model.teacher_inputs(linguistic, levels);
    let logits = model.net.forward(&inputs)?;
    let targets: Vec<usize> = levels.iter().map(|l| *l as usize).collect();
    let (loss, d_logits) = cross_entropy(&logits, &targets);
    let d_in = model.net.backward(&d_logits)?;
    // Embedding rows receive the tail of the input gradient.
    let (d_dim, e_dim) = (model.arch.input_dim, model.arch.embed_dim);
    {
        let g = model.embed.grad_mut();
        for n in 0..inputs.rows {
            let prev = if n == 0 { 0usize } else { levels[n - 1] as usize };
            let src = &d_in.row(n)[d_dim..d_dim + e_dim];
            let dst = &mut g[prev * e_dim..(prev + 1) * e_dim];
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d += s;
            }
        }
    }
    opt.step(model.params_mut());
    Ok(loss)
}

/// Teacher-forced mean cross-entropy without updating anything.
pub fn f0_model_nll(
    model: &F0Model,
    linguistic: &Mat,
    levels: &[u16],
) -> Result<f64, AcousticError> {
    let inputs = model.teacher_inputs(linguistic, levels);
    let logits = model.net.infer(&inputs)?;
    let targets: Vec<usize> = levels.iter().map(|l| *l as usize).collect();
    Ok(cross_entropy(&logits, &targets).0)
}

/// Teacher-forced per-frame argmax accuracy.
pub fn f0_model_accuracy(
    model: &F0Model,
    linguistic: &Mat,
    levels: &[u16],
) -> Result<f64, AcousticError> {
    let inputs = model.teacher_inputs(linguistic, levels);
    let logits = model.net.infer(&inputs)?;
    let mut hits = 0usize;
    for (n, level) in levels.iter().enumerate() {
        if argmax(logits.row(n)) == *level as usize {
            hits += 1;
        }
    }
    Ok(hits as f64 / levels.len().max(1) as f64)
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

/// Deterministic generation: per-frame argmax with the previous generated
/// level fed back.
pub fn f0_model_generate(model: &F0Model, linguistic: &Mat) -> Result<Vec<u16>, AcousticError> {
    let mut levels = Vec::with_capacity(linguistic.rows);
    let mut prev = 0u16;
    for n in 0..linguistic.rows {
        let row = model.input_row(linguistic.row(n), prev);
        let logits = model.net.infer(&Mat::from_rows(&[row]))?;
        let ls = log_softmax_row(logits.row(0));
        prev = argmax(&ls) as u16;
        levels.push(prev);
    }
    Ok(levels)
}
