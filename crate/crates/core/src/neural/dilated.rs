//! Gated dilated causal convolution block with residual and skip outputs.
//!
//! For each frame t (history zero-padded):
//!   u[t] = Wf_cur x[t] + Wf_past x[t-d] + Vf cond[t] + bf
//!   v[t] = Wg_cur x[t] + Wg_past x[t-d] + Vg cond[t] + bg
//!   z[t] = tanh(u[t]) * sigmoid(v[t])
//!   residual[t] = x[t] + Wr z[t] + br
//!   skip[t]     = Ws z[t] + bs

use super::mat::Mat;
use super::tensor::Tensor;
use super::NeuralError;
use rand::Rng;

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct BlockCache {
    x: Mat,
    cond: Mat,
    tu: Mat,
    sv: Mat,
    z: Mat,
}

pub struct DilatedCausalBlock {
    pub dilation: usize,
    channels: usize,
    skip_channels: usize,
    cond_dim: usize,
    // filter (tanh) path
    pub wf_cur: Tensor,
    pub wf_past: Tensor,
    pub vf: Tensor,
    pub bf: Tensor,
    // gate (sigmoid) path
    pub wg_cur: Tensor,
    pub wg_past: Tensor,
    pub vg: Tensor,
    pub bg: Tensor,
    // projections
    pub wr: Tensor,
    pub br: Tensor,
    pub ws: Tensor,
    pub bs: Tensor,
    cache: Option<BlockCache>,
}

impl DilatedCausalBlock {
    pub fn new(
        channels: usize,
        skip_channels: usize,
        cond_dim: usize,
        dilation: usize,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(dilation >= 1, "dilation must be at least 1");
        let c = channels;
        DilatedCausalBlock {
            dilation,
            channels: c,
            skip_channels,
            cond_dim,
            wf_cur: Tensor::uniform(&[c, c], 2 * c, rng),
            wf_past: Tensor::uniform(&[c, c], 2 * c, rng),
            vf: Tensor::uniform(&[c, cond_dim], cond_dim.max(1), rng),
            bf: Tensor::zeros(&[c]),
            wg_cur: Tensor::uniform(&[c, c], 2 * c, rng),
            wg_past: Tensor::uniform(&[c, c], 2 * c, rng),
            vg: Tensor::uniform(&[c, cond_dim], cond_dim.max(1), rng),
            bg: Tensor::zeros(&[c]),
            wr: Tensor::uniform(&[c, c], c, rng),
            br: Tensor::zeros(&[c]),
            ws: Tensor::uniform(&[skip_channels, c], c, rng),
            bs: Tensor::zeros(&[skip_channels]),
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn skip_channels(&self) -> usize {
        self.skip_channels
    }

    pub fn cond_dim(&self) -> usize {
        self.cond_dim
    }

    fn check(&self, x: &Mat, cond: &Mat) -> Result<(), NeuralError> {
        if x.cols != self.channels {
            return Err(NeuralError::ShapeMismatch {
                layer: format!("dilated_causal_block(d={})", self.dilation),
                expected: self.channels,
                got: x.cols,
            });
        }
        if cond.cols != self.cond_dim || cond.rows != x.rows {
            return Err(NeuralError::ShapeMismatch {
                layer: format!("dilated_causal_block(d={}) conditioning", self.dilation),
                expected: self.cond_dim,
                got: cond.cols,
            });
        }
        Ok(())
    }

    fn matvec(w: &Tensor, x: &[f64], out: &mut [f64]) {
        let cols = w.shape[1];
        for (o, acc) in out.iter_mut().enumerate() {
            let row = &w.values[o * cols..(o + 1) * cols];
            let mut s = 0.0;
            for i in 0..cols {
                s += row[i] * x[i];
            }
            *acc += s;
        }
    }

    fn matvec_t(w: &Tensor, g: &[f64], out: &mut [f64]) {
        let cols = w.shape[1];
        for (o, go) in g.iter().enumerate() {
            let row = &w.values[o * cols..(o + 1) * cols];
            for i in 0..cols {
                out[i] += go * row[i];
            }
        }
    }

    fn outer_acc(grad: &mut [f64], g: &[f64], x: &[f64]) {
        let cols = x.len();
        for (o, go) in g.iter().enumerate() {
            let row = &mut grad[o * cols..(o + 1) * cols];
            for i in 0..cols {
                row[i] += go * x[i];
            }
        }
    }

    fn run(&self, x: &Mat, cond: &Mat) -> BlockCache {
        let (t_len, c) = (x.rows, self.channels);
        let mut cache = BlockCache {
            x: x.clone(),
            cond: cond.clone(),
            tu: Mat::zeros(t_len, c),
            sv: Mat::zeros(t_len, c),
            z: Mat::zeros(t_len, c),
        };
        let zero = vec![0.0; c];
        for t in 0..t_len {
            let x_cur = x.row(t);
            let x_past = if t >= self.dilation {
                x.row(t - self.dilation)
            } else {
                &zero[..]
            };
            let mut u = self.bf.values.clone();
            Self::matvec(&self.wf_cur, x_cur, &mut u);
            Self::matvec(&self.wf_past, x_past, &mut u);
            Self::matvec(&self.vf, cond.row(t), &mut u);
            let mut v = self.bg.values.clone();
            Self::matvec(&self.wg_cur, x_cur, &mut v);
            Self::matvec(&self.wg_past, x_past, &mut v);
            Self::matvec(&self.vg, cond.row(t), &mut v);
            for j in 0..c {
                let tu = u[j].tanh();
                let sv = sigmoid(v[j]);
                cache.tu.row_mut(t)[j] = tu;
                cache.sv.row_mut(t)[j] = sv;
                cache.z.row_mut(t)[j] = tu * sv;
            }
        }
        cache
    }

    fn outputs(&self, cache: &BlockCache) -> (Mat, Mat) {
        let (t_len, c) = (cache.x.rows, self.channels);
        let mut residual = Mat::zeros(t_len, c);
        let mut skip = Mat::zeros(t_len, self.skip_channels);
        for t in 0..t_len {
            let z = cache.z.row(t);
            let mut r = self.br.values.clone();
            Self::matvec(&self.wr, z, &mut r);
            for j in 0..c {
                residual.row_mut(t)[j] = cache.x.row(t)[j] + r[j];
            }
            let mut s = self.bs.values.clone();
            Self::matvec(&self.ws, z, &mut s);
            skip.row_mut(t).copy_from_slice(&s);
        }
        (residual, skip)
    }

    pub fn forward(&mut self, x: &Mat, cond: &Mat) -> Result<(Mat, Mat), NeuralError> {
        self.check(x, cond)?;
        let cache = self.run(x, cond);
        let out = self.outputs(&cache);
        self.cache = Some(cache);
        Ok(out)
    }

    pub fn infer(&self, x: &Mat, cond: &Mat) -> Result<(Mat, Mat), NeuralError> {
        self.check(x, cond)?;
        let cache = self.run(x, cond);
        Ok(self.outputs(&cache))
    }

    /// Single-frame step for autoregressive generation. `x_past` is the
    /// block input `dilation` steps earlier (zeros before the start).
    pub fn step(&self, x_cur: &[f64], x_past: &[f64], cond: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let c = self.channels;
        let mut u = self.bf.values.clone();
        Self::matvec(&self.wf_cur, x_cur, &mut u);
        Self::matvec(&self.wf_past, x_past, &mut u);
        Self::matvec(&self.vf, cond, &mut u);
        let mut v = self.bg.values.clone();
        Self::matvec(&self.wg_cur, x_cur, &mut v);
        Self::matvec(&self.wg_past, x_past, &mut v);
        Self::matvec(&self.vg, cond, &mut v);
        let z: Vec<f64> = (0..c).map(|j| u[j].tanh() * sigmoid(v[j])).collect();
        let mut residual = self.br.values.clone();
        Self::matvec(&self.wr, &z, &mut residual);
        for j in 0..c {
            residual[j] += x_cur[j];
        }
        let mut skip = self.bs.values.clone();
        Self::matvec(&self.ws, &z, &mut skip);
        (residual, skip)
    }

    /// Backward from gradients on both outputs; returns (d_input, d_cond).
    pub fn backward(&mut self, d_res: &Mat, d_skip: &Mat) -> Result<(Mat, Mat), NeuralError> {
        let cache = self.cache.take().ok_or(NeuralError::NoForwardCache)?;
        let (t_len, c) = (cache.x.rows, self.channels);
        let mut dx = Mat::zeros(t_len, c);
        let mut dcond = Mat::zeros(t_len, self.cond_dim);
        let zero = vec![0.0; c];
        for t in (0..t_len).rev() {
            let z = cache.z.row(t);
            let g_res = d_res.row(t);
            let g_skip = d_skip.row(t);
            // Identity path.
            for j in 0..c {
                dx.row_mut(t)[j] += g_res[j];
            }
            // Projection gradients and dz.
            Self::outer_acc(self.wr.grad_mut(), g_res, z);
            for (j, g) in g_res.iter().enumerate() {
                self.br.grad_mut()[j] += g;
            }
            Self::outer_acc(self.ws.grad_mut(), g_skip, z);
            for (j, g) in g_skip.iter().enumerate() {
                self.bs.grad_mut()[j] += g;
            }
            let mut dz = vec![0.0; c];
            Self::matvec_t(&self.wr, g_res, &mut dz);
            Self::matvec_t(&self.ws, g_skip, &mut dz);
            // Gate split.
            let mut du = vec![0.0; c];
            let mut dv = vec![0.0; c];
            for j in 0..c {
                let tu = cache.tu.row(t)[j];
                let sv = cache.sv.row(t)[j];
                du[j] = dz[j] * sv * (1.0 - tu * tu);
                dv[j] = dz[j] * tu * sv * (1.0 - sv);
            }
            let x_cur = cache.x.row(t);
            let x_past = if t >= self.dilation {
                cache.x.row(t - self.dilation)
            } else {
                &zero[..]
            };
            let cond_t = cache.cond.row(t);
            Self::outer_acc(self.wf_cur.grad_mut(), &du, x_cur);
            Self::outer_acc(self.wf_past.grad_mut(), &du, x_past);
            Self::outer_acc(self.vf.grad_mut(), &du, cond_t);
            for (j, g) in du.iter().enumerate() {
                self.bf.grad_mut()[j] += g;
            }
            Self::outer_acc(self.wg_cur.grad_mut(), &dv, x_cur);
            Self::outer_acc(self.wg_past.grad_mut(), &dv, x_past);
            Self::outer_acc(self.vg.grad_mut(), &dv, cond_t);
            for (j, g) in dv.iter().enumerate() {
                self.bg.grad_mut()[j] += g;
            }
            // Input and conditioning gradients.
            Self::matvec_t(&self.wf_cur, &du, dx.row_mut(t));
            Self::matvec_t(&self.wg_cur, &dv, dx.row_mut(t));
            if t >= self.dilation {
                let past_t = t - self.dilation;
                Self::matvec_t(&self.wf_past, &du, dx.row_mut(past_t));
                Self::matvec_t(&self.wg_past, &dv, dx.row_mut(past_t));
            }
            Self::matvec_t(&self.vf, &du, dcond.row_mut(t));
            Self::matvec_t(&self.vg, &dv, dcond.row_mut(t));
        }
        Ok((dx, dcond))
    }

    pub fn params(&self) -> Vec<&Tensor> {
        vec![
            &self.wf_cur,
            &self.wf_past,
            &self.vf,
            &self.bf,
            &self.wg_cur,
            &self.wg_past,
            &self.vg,
            &self.bg,
            &self.wr,
            &self.br,
            &self.ws,
            &self.bs,
        ]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.wf_cur,
            &mut self.wf_past,
            &mut self.vf,
            &mut self.bf,
            &mut self.wg_cur,
            &mut self.wg_past,
            &mut self.vg,
            &mut self.bg,
            &mut self.wr,
            &mut self.br,
            &mut self.ws,
            &mut self.bs,
        ]
    }
}
