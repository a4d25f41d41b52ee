//! Analytic-vs-finite-difference gradient verification for every layer kind.

use super::dilated::DilatedCausalBlock;
use super::mat::Mat;
use super::network::{cross_entropy, gaussian_nll, LayerSpec};
use super::NeuralError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_EPSILON: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub kind: String,
    /// Worst relative error per parameter tensor, labelled by index.
    pub per_param: Vec<(usize, f64)>,
    /// Worst relative error of the input gradient.
    pub input_error: f64,
    pub max_rel_error: f64,
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / (a.abs() + n.abs()).max(1e-3)
}

fn random_mat(rows: usize, cols: usize, rng: &mut impl Rng) -> Mat {
    let mut m = Mat::zeros(rows, cols);
    for v in &mut m.data {
        *v = rng.gen_range(-0.7..0.7);
    }
    m
}

/// Scalar objective paired with its gradient w.r.t. the layer output.
enum Objective {
    Projection(Mat),
    CrossEntropy(Vec<usize>),
    Gaussian(Mat),
}

impl Objective {
    fn eval(&self, out: &Mat) -> f64 {
        match self {
            Objective::Projection(p) => out.data.iter().zip(p.data.iter()).map(|(a, b)| a * b).sum(),
            Objective::CrossEntropy(t) => cross_entropy(out, t).0,
            Objective::Gaussian(t) => gaussian_nll(out, t).0,
        }
    }

    fn grad(&self, out: &Mat) -> Mat {
        match self {
            Objective::Projection(p) => p.clone(),
            Objective::CrossEntropy(t) => cross_entropy(out, t).1,
            Objective::Gaussian(t) => gaussian_nll(out, t).1,
        }
    }
}

/// Run `trials` random-input gradient checks against central differences for
/// one layer kind. Dilated blocks are checked through both of their outputs.
pub fn gradient_check(
    spec: &LayerSpec,
    trials: usize,
    seed: u64,
) -> Result<GradCheckReport, NeuralError> {
    let mut per_param: Vec<(usize, f64)> = Vec::new();
    let mut input_error = 0.0f64;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (trial as u64).wrapping_mul(0x9e37_79b9));
        let t_len = rng.gen_range(2..6);
        match spec {
            LayerSpec::DilatedCausalBlock { channels, skip, cond, dilation } => {
                let mut block =
                    DilatedCausalBlock::new(*channels, *skip, *cond, *dilation, &mut rng);
                let x = random_mat(t_len.max(*dilation + 1), *channels, &mut rng);
                let c = random_mat(x.rows, *cond, &mut rng);
                let proj_r = random_mat(x.rows, *channels, &mut rng);
                let proj_s = random_mat(x.rows, *skip, &mut rng);
                let loss_of = |b: &DilatedCausalBlock, x: &Mat, c: &Mat| {
                    let (r, s) = b.infer(x, c).unwrap();
                    let lr: f64 = r.data.iter().zip(proj_r.data.iter()).map(|(a, b)| a * b).sum();
                    let ls: f64 = s.data.iter().zip(proj_s.data.iter()).map(|(a, b)| a * b).sum();
                    lr + ls
                };
                for p in block.params_mut() {
                    p.zero_grad();
                    p.grad_mut();
                }
                block.forward(&x, &c)?;
                let (dx, _dcond) = block.backward(&proj_r, &proj_s)?;
                let analytic: Vec<Vec<f64>> =
                    block.params().iter().map(|p| p.grad.clone().unwrap()).collect();
                let n_params = analytic.len();
                if per_param.is_empty() {
                    per_param = (0..n_params).map(|i| (i, 0.0)).collect();
                }
                for pi in 0..n_params {
                    let len = block.params()[pi].len();
                    for vi in 0..len {
                        let orig = block.params()[pi].values[vi];
                        block.params_mut()[pi].values[vi] = orig + FD_EPSILON;
                        let up = loss_of(&block, &x, &c);
                        block.params_mut()[pi].values[vi] = orig - FD_EPSILON;
                        let down = loss_of(&block, &x, &c);
                        block.params_mut()[pi].values[vi] = orig;
                        let numeric = (up - down) / (2.0 * FD_EPSILON);
                        let e = rel_err(analytic[pi][vi], numeric);
                        if e > per_param[pi].1 {
                            per_param[pi].1 = e;
                        }
                    }
                }
                let mut xp = x.clone();
                for vi in 0..x.data.len() {
                    let orig = xp.data[vi];
                    xp.data[vi] = orig + FD_EPSILON;
                    let up = loss_of(&block, &xp, &c);
                    xp.data[vi] = orig - FD_EPSILON;
                    let down = loss_of(&block, &xp, &c);
                    xp.data[vi] = orig;
                    let numeric = (up - down) / (2.0 * FD_EPSILON);
                    input_error = input_error.max(rel_err(dx.data[vi], numeric));
                }
            }
            other => {
                let mut layer = other
                    .build(&mut rng)
                    .expect("stackable layer");
                let x = random_mat(t_len, layer.in_dim(), &mut rng);
                let objective = match other {
                    LayerSpec::SoftmaxHead { classes, .. } => Objective::CrossEntropy(
                        (0..t_len).map(|_| rng.gen_range(0..*classes)).collect(),
                    ),
                    LayerSpec::GaussianHead { output, .. } => {
                        Objective::Gaussian(random_mat(t_len, *output, &mut rng))
                    }
                    _ => Objective::Projection(random_mat(t_len, layer.out_dim(), &mut rng)),
                };
                for p in layer.params_mut() {
                    p.zero_grad();
                    p.grad_mut();
                }
                let out = layer.forward(&x)?;
                let grad_out = objective.grad(&out);
                let dx = layer.backward(&grad_out)?;
                let analytic: Vec<Vec<f64>> =
                    layer.params().iter().map(|p| p.grad.clone().unwrap()).collect();
                let n_params = analytic.len();
                if per_param.is_empty() {
                    per_param = (0..n_params).map(|i| (i, 0.0)).collect();
                }
                for pi in 0..n_params {
                    let len = layer.params()[pi].len();
                    for vi in 0..len {
                        let orig = layer.params()[pi].values[vi];
                        layer.params_mut()[pi].values[vi] = orig + FD_EPSILON;
                        let up = objective.eval(&layer.infer(&x)?);
                        layer.params_mut()[pi].values[vi] = orig - FD_EPSILON;
                        let down = objective.eval(&layer.infer(&x)?);
                        layer.params_mut()[pi].values[vi] = orig;
                        let numeric = (up - down) / (2.0 * FD_EPSILON);
                        let e = rel_err(analytic[pi][vi], numeric);
                        if e > per_param[pi].1 {
                            per_param[pi].1 = e;
                        }
                    }
                }
                let mut xp = x.clone();
                for vi in 0..x.data.len() {
                    let orig = xp.data[vi];
                    xp.data[vi] = orig + FD_EPSILON;
                    let up = objective.eval(&layer.infer(&xp)?);
                    xp.data[vi] = orig - FD_EPSILON;
                    let down = objective.eval(&layer.infer(&xp)?);
                    xp.data[vi] = orig;
                    let numeric = (up - down) / (2.0 * FD_EPSILON);
                    input_error = input_error.max(rel_err(dx.data[vi], numeric));
                }
            }
        }
    }
    let max_rel_error = per_param
        .iter()
        .map(|(_, e)| *e)
        .fold(input_error, f64::max);
    Ok(GradCheckReport {
        kind: spec.kind_name().to_string(),
        per_param,
        input_error,
        max_rel_error,
    })
}

/// Small-shape specs covering every layer kind, for test fixtures.
pub fn small_specs(rng: &mut impl Rng) -> Vec<LayerSpec> {
    let d = rng.gen_range(2..5);
    let h = rng.gen_range(2..5);
    vec![
        LayerSpec::Linear { input: d, output: h },
        LayerSpec::FfTanh { input: d, output: h },
        LayerSpec::UniRecurrent { input: d, hidden: h },
        LayerSpec::BiRecurrent { input: d, hidden: h },
        LayerSpec::Conv1d { input: d, channels: h, kernel: 3 },
        LayerSpec::DilatedCausalBlock {
            channels: d.max(2),
            skip: h,
            cond: 2,
            dilation: rng.gen_range(1..4),
        },
        LayerSpec::SoftmaxHead { input: d, classes: 4 + h },
        LayerSpec::GaussianHead { input: d, output: h },
    ]
}
