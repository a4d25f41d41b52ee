//! Layer specs, the sequential network container, and loss heads.

use super::layers::{BiLstm, Conv1d, FfTanh, Layer, Linear, Lstm};
use super::mat::Mat;
use super::tensor::Tensor;
use super::NeuralError;
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Linear { input: usize, output: usize },
    FfTanh { input: usize, output: usize },
    UniRecurrent { input: usize, hidden: usize },
    BiRecurrent { input: usize, hidden: usize },
    Conv1d { input: usize, channels: usize, kernel: usize },
    DilatedCausalBlock { channels: usize, skip: usize, cond: usize, dilation: usize },
    SoftmaxHead { input: usize, classes: usize },
    GaussianHead { input: usize, output: usize },
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Linear { .. } => "linear",
            LayerSpec::FfTanh { .. } => "ff_tanh",
            LayerSpec::UniRecurrent { .. } => "uni_recurrent",
            LayerSpec::BiRecurrent { .. } => "bi_recurrent",
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::DilatedCausalBlock { .. } => "dilated_causal_block",
            LayerSpec::SoftmaxHead { .. } => "softmax_head",
            LayerSpec::GaussianHead { .. } => "gaussian_head",
        }
    }

    pub fn out_dim(&self) -> usize {
        match *self {
            LayerSpec::Linear { output, .. } => output,
            LayerSpec::FfTanh { output, .. } => output,
            LayerSpec::UniRecurrent { hidden, .. } => hidden,
            LayerSpec::BiRecurrent { hidden, .. } => 2 * hidden,
            LayerSpec::Conv1d { channels, .. } => channels,
            LayerSpec::DilatedCausalBlock { channels, .. } => channels,
            LayerSpec::SoftmaxHead { classes, .. } => classes,
            LayerSpec::GaussianHead { output, .. } => output,
        }
    }

    /// Build a stackable layer. Dilated blocks take two inputs and are
    /// composed by the Wavenet model directly rather than through a stack.
    pub fn build(&self, rng: &mut impl Rng) -> Option<Box<dyn Layer>> {
        match *self {
            LayerSpec::Linear { input, output } => {
                Some(Box::new(Linear::new(self.clone(), input, output, rng)))
            }
            LayerSpec::SoftmaxHead { input, classes } => Some(Box::new(
                Linear::new(self.clone(), input, classes, rng).zeroed(),
            )),
            LayerSpec::GaussianHead { input, output } => {
                Some(Box::new(Linear::new(self.clone(), input, output, rng)))
            }
            LayerSpec::FfTanh { input, output } => Some(Box::new(FfTanh::new(input, output, rng))),
            LayerSpec::UniRecurrent { input, hidden } => {
                Some(Box::new(Lstm::new(input, hidden, rng)))
            }
            LayerSpec::BiRecurrent { input, hidden } => {
                Some(Box::new(BiLstm::new(input, hidden, rng)))
            }
            LayerSpec::Conv1d { input, channels, kernel } => {
                Some(Box::new(Conv1d::new(input, channels, kernel, rng)))
            }
            LayerSpec::DilatedCausalBlock { .. } => None,
        }
    }
}

/// A plain sequential stack.
pub struct Network {
    layers: Vec<Box<dyn Layer>>,
}

impl Network {
    pub fn new(specs: &[LayerSpec], rng: &mut impl Rng) -> Self {
        let layers = specs
            .iter()
            .map(|s| {
                s.build(rng)
                    .expect("dilated blocks are not stackable in a plain Network")
            })
            .collect();
        Network { layers }
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec()).collect()
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map(|l| l.in_dim()).unwrap_or(0)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim()).unwrap_or(0)
    }

    pub fn layer_mut(&mut self, idx: usize) -> &mut dyn Layer {
        self.layers[idx].as_mut()
    }

    /// Training forward pass; every layer keeps its cache.
    pub fn forward(&mut self, x: &Mat) -> Result<Mat, NeuralError> {
        let mut cur = x.clone();
        for layer in &mut self.layers {
            cur = layer.forward(&cur)?;
            if !cur.is_finite() {
                return Err(NeuralError::NonFinite { layer: layer.name() });
            }
        }
        Ok(cur)
    }

    /// Inference on an immutable snapshot.
    pub fn infer(&self, x: &Mat) -> Result<Mat, NeuralError> {
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer.infer(&cur)?;
            if !cur.is_finite() {
                return Err(NeuralError::NonFinite { layer: layer.name() });
            }
        }
        Ok(cur)
    }

    pub fn backward(&mut self, grad_out: &Mat) -> Result<Mat, NeuralError> {
        let mut grad = grad_out.clone();
        for layer in self.layers.iter_mut().rev() {
            grad = layer.backward(&grad)?;
        }
        Ok(grad)
    }

    pub fn zero_grad(&mut self) {
        for layer in &mut self.layers {
            for p in layer.params_mut() {
                p.zero_grad();
            }
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

/// Row-wise log-softmax, numerically stable.
pub fn log_softmax_row(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|v| v - lse).collect()
}

/// Mean cross-entropy of integer targets under row-wise softmax.
/// Returns the loss and its gradient w.r.t. the logits.
pub fn cross_entropy(logits: &Mat, targets: &[usize]) -> (f64, Mat) {
    assert_eq!(logits.rows, targets.len());
    let n = logits.rows as f64;
    let mut grad = Mat::zeros(logits.rows, logits.cols);
    let mut loss = 0.0;
    for t in 0..logits.rows {
        let ls = log_softmax_row(logits.row(t));
        loss -= ls[targets[t]];
        let gr = grad.row_mut(t);
        for (j, l) in ls.iter().enumerate() {
            gr[j] = (l.exp() - if j == targets[t] { 1.0 } else { 0.0 }) / n;
        }
    }
    (loss / n, grad)
}

/// Identity-covariance Gaussian negative log-likelihood, summed over frames:
/// sum_n [ 0.5 ||a_n - h_n||^2 + (d/2) ln 2 pi ].
/// Returns the loss and its gradient w.r.t. the mean.
pub fn gaussian_nll(mean: &Mat, target: &Mat) -> (f64, Mat) {
    assert_eq!(mean.rows, target.rows);
    assert_eq!(mean.cols, target.cols);
    let d = mean.cols as f64;
    let log_norm = 0.5 * d * (2.0 * std::f64::consts::PI).ln();
    let mut grad = Mat::zeros(mean.rows, mean.cols);
    let mut loss = 0.0;
    for t in 0..mean.rows {
        let m = mean.row(t);
        let a = target.row(t);
        let g = grad.row_mut(t);
        for j in 0..mean.cols {
            let r = m[j] - a[j];
            loss += 0.5 * r * r;
            g[j] = r;
        }
        loss += log_norm;
    }
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stack_composes_and_is_deterministic() {
        let specs = vec![
            LayerSpec::FfTanh { input: 3, output: 8 },
            LayerSpec::UniRecurrent { input: 8, hidden: 4 },
            LayerSpec::Linear { input: 4, output: 2 },
        ];
        let net_a = Network::new(&specs, &mut ChaCha8Rng::seed_from_u64(7));
        let net_b = Network::new(&specs, &mut ChaCha8Rng::seed_from_u64(7));
        let x = Mat::from_rows(&[vec![0.1, 0.2, 0.3], vec![0.4, 0.5, 0.6]]);
        let ya = net_a.infer(&x).unwrap();
        let yb = net_b.infer(&x).unwrap();
        assert_eq!(ya.data, yb.data);
        assert_eq!(ya.cols, 2);
    }

    #[test]
    fn softmax_head_starts_uniform() {
        let specs = vec![LayerSpec::SoftmaxHead { input: 5, classes: 16 }];
        let net = Network::new(&specs, &mut ChaCha8Rng::seed_from_u64(8));
        let x = Mat::from_rows(&[vec![0.3; 5]]);
        let logits = net.infer(&x).unwrap();
        let ls = log_softmax_row(logits.row(0));
        for l in ls {
            assert!((l - (1.0f64 / 16.0).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_of_uniform_is_log_classes() {
        let logits = Mat::zeros(4, 10);
        let (loss, _) = cross_entropy(&logits, &[0, 3, 5, 9]);
        assert!((loss - (10.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn softmax_probabilities_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let logits: Vec<f64> = (0..32).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let p: f64 = log_softmax_row(&logits).iter().map(|l| l.exp()).sum();
            assert!((p - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn gaussian_nll_matched_mean_is_pure_normalizer() {
        let m = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let (loss, grad) = gaussian_nll(&m, &m);
        let want = 2.0 * (2.0 / 2.0) * (2.0 * std::f64::consts::PI).ln();
        assert!((loss - want).abs() < 1e-12);
        assert!(grad.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gaussian_nll_unit_residual_adds_half() {
        let m = Mat::from_rows(&[vec![1.0]]);
        let a = Mat::from_rows(&[vec![0.0]]);
        let (loss, _) = gaussian_nll(&m, &a);
        let base = 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((loss - (base + 0.5)).abs() < 1e-12);
    }

    /// Direct per-frame Gaussian density product oracle.
    #[test]
    fn gaussian_nll_matches_density_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let rows = 3;
        let cols = 2;
        let mut m = Mat::zeros(rows, cols);
        let mut a = Mat::zeros(rows, cols);
        for v in &mut m.data {
            *v = rng.gen_range(-1.0..1.0);
        }
        for v in &mut a.data {
            *v = rng.gen_range(-1.0..1.0);
        }
        let (loss, _) = gaussian_nll(&m, &a);
        let mut log_density = 0.0;
        for t in 0..rows {
            for j in 0..cols {
                let r = a.row(t)[j] - m.row(t)[j];
                log_density += -0.5 * r * r - 0.5 * (2.0 * std::f64::consts::PI).ln();
            }
        }
        assert!((loss + log_density).abs() < 1e-8);
    }

    #[test]
    fn doubling_a_residual_quadruples_its_contribution() {
        let a = Mat::from_rows(&[vec![0.0]]);
        let m1 = Mat::from_rows(&[vec![1.0]]);
        let m2 = Mat::from_rows(&[vec![2.0]]);
        let base = 0.5 * (2.0 * std::f64::consts::PI).ln();
        let (l1, _) = gaussian_nll(&m1, &a);
        let (l2, _) = gaussian_nll(&m2, &a);
        assert!(((l2 - base) / (l1 - base) - 4.0).abs() < 1e-12);
    }
}
