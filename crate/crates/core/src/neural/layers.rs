//! Sequence layers with hand-rolled backward passes.

use super::mat::Mat;
use super::network::LayerSpec;
use super::tensor::Tensor;
use super::NeuralError;
use rand::Rng;

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// A layer owns its parameters, caches the activations it needs for one
/// backward pass during `forward`, and accumulates parameter gradients in
/// `backward`.
pub trait Layer {
    fn spec(&self) -> LayerSpec;
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    /// Training forward: retains the cache `backward` consumes.
    fn forward(&mut self, x: &Mat) -> Result<Mat, NeuralError>;
    /// Pure forward without touching training state.
    fn infer(&self, x: &Mat) -> Result<Mat, NeuralError>;
    /// Consumes the cached forward pass; returns the gradient w.r.t. input.
    fn backward(&mut self, grad_out: &Mat) -> Result<Mat, NeuralError>;
    fn params(&self) -> Vec<&Tensor>;
    fn params_mut(&mut self) -> Vec<&mut Tensor>;

    fn name(&self) -> String {
        self.spec().kind_name().to_string()
    }

    fn check_input(&self, x: &Mat) -> Result<(), NeuralError> {
        if x.cols != self.in_dim() {
            return Err(NeuralError::ShapeMismatch {
                layer: self.name(),
                expected: self.in_dim(),
                got: x.cols,
            });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Linear (also used as the softmax / Gaussian head projection)

pub struct Linear {
    pub w: Tensor, // [out, in]
    pub b: Tensor, // [out]
    spec: LayerSpec,
    cache: Option<Mat>,
}

impl Linear {
    pub fn new(spec: LayerSpec, input: usize, output: usize, rng: &mut impl Rng) -> Self {
        Linear {
            w: Tensor::uniform(&[output, input], input, rng),
            b: Tensor::zeros(&[output]),
            spec,
            cache: None,
        }
    }

    /// Zero all weights, e.g. so a head starts with a uniform distribution
    /// or an identity residual.
    pub fn zeroed(mut self) -> Self {
        self.w.values.iter_mut().for_each(|v| *v = 0.0);
        self
    }

    fn apply(&self, x: &Mat) -> Mat {
        let (out_d, in_d) = (self.w.shape[0], self.w.shape[1]);
        let mut y = Mat::zeros(x.rows, out_d);
        for t in 0..x.rows {
            let xr = x.row(t);
            let yr = y.row_mut(t);
            for o in 0..out_d {
                let wrow = &self.w.values[o * in_d..(o + 1) * in_d];
                let mut acc = self.b.values[o];
                for i in 0..in_d {
                    acc += wrow[i] * xr[i];
                }
                yr[o] = acc;
            }
        }
        y
    }
}

impl Layer for Linear {
    fn spec(&self) -> LayerSpec {
        self.spec.clone()
    }

    fn in_dim(&self) -> usize {
        self.w.shape[1]
    }

    fn out_dim(&self) -> usize {
        self.w.shape[0]
    }

    fn forward(&mut self, x: &Mat) -> Result<Mat, NeuralError> {
        self.check_input(x)?;
        let y = self.apply(x);
        self.cache = Some(x.clone());
        Ok(y)
    }

    fn infer(&self, x: &Mat) -> Result<Mat, NeuralError> {
        self.check_input(x)?;
        Ok(self.apply(x))
    }

    fn backward(&mut self, grad_out: &Mat) -> Result<Mat, NeuralError> {
        let x = self.cache.take().ok_or(NeuralError::NoForwardCache)?;
        let (out_d, in_d) = (self.w.shape[0], self.w.shape[1]);
        let mut dx = Mat::zeros(x.rows, in_d);
        {
            let dw = self.w.grad_mut();
            for t in 0..x.rows {
                let g = grad_out.row(t);
                let xr = x.row(t);
                for o in 0..out_d {
                    let go = g[o];
                    let dwrow = &mut dw[o * in_d..(o + 1) * in_d];
                    for i in 0..in_d {
                        dwrow[i] += go * xr[i];
                    }
                }
            }
        }
        {
            let db = self.b.grad_mut();
            for t in 0..x.rows {
                let g = grad_out.row(t);
                for o in 0..out_d {
                    db[o] += g[o];
                }
            }
        }
        for t in 0..x.rows {
            let g = grad_out.row(t);
            let dxr = dx.row_mut(t);
            for o in 0..out_d {
                let go = g[o];
                let wrow = &self.w.values[o * in_d..(o + 1) * in_d];
                for i in 0..in_d {
                    dxr[i] += go * wrow[i];
                }
            }
        }
        Ok(dx)
    }

    fn params(&self) -> Vec<&Tensor> {
        vec![&self.w, &self.b]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w, &mut self.b]
    }
}

// ---------------------------------------------------------------------------
// Feedforward tanh

pub struct FfTanh {
    pub w: Tensor,
    pub b: Tensor,
    cache: Option<(Mat, Mat)>, // (input, tanh output)
}

impl FfTanh {
    pub fn new(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        FfTanh {
            w: Tensor::uniform(&[output, input], input, rng),
            b: Tensor::zeros(&[output]),
            cache: None,
        }
    }

    fn apply(&self, x: &Mat) -> Mat {
        let (out_d, in_d) = (self.w.shape[0], self.w.shape[1]);
        let mut y = Mat::zeros(x.rows, out_d);
        for t in 0..x.rows {
            let xr = x.row(t);
            let yr = y.row_mut(t);
            for o in 0..out_d {
                let wrow = &self.w.values[o * in_d..(o + 1) * in_d];
                let mut acc = self.b.values[o];
                for i in 0..in_d {
                    acc += wrow[i] * xr[i];
                }
                yr[o] = acc.tanh();
            }
        }
        y
    }
}

impl Layer for FfTanh {
    fn spec(&self) -> LayerSpec {
        LayerSpec::FfTanh {
            input: self.w.shape[1],
            output: self.w.shape[0],
        }
    }

    fn in_dim(&self) -> usize {
        self.w.shape[1]
    }

    fn out_dim(&self) -> usize {
        self.w.shape[0]
    }

    fn forward(&mut self, x: &Mat) -> Result<Mat, NeuralError> {
        self.check_input(x)?;
        let y = self.apply(x);
        self.cache = Some((x.clone(), y.clone()));
        Ok(y)
    }

    fn infer(&self, x: &Mat) -> Result<Mat, NeuralError> {
        self.check_input(x)?;
        Ok(self.apply(x))
    }

    fn backward(&mut self, grad_out: &Mat) -> Result<Mat, NeuralError> {
        let (x, y) = self.cache.take().ok_or(NeuralError::NoForwardCache)?;
        let (out_d, in_d) = (self.w.shape[0], self.w.shape[1]);
        let mut dx = Mat::zeros(x.rows, in_d);
        let mut dz = Mat::zeros(x.rows, out_d);
        for t in 0..x.rows {
            let g = grad_out.row(t);
            let yr = y.row(t);
            let dzr = dz.row_mut(t);
            for o in 0..out_d {
                dzr[o] = g[o] * (1.0 - yr[o] * yr[o]);
            }
        }
        {
            let dw = self.w.grad_mut();
            for t in 0..x.rows {
                let xr = x.row(t);
                let dzr = dz.row(t);
                for o in 0..out_d {
                    let go = dzr[o];
                    let dwrow = &mut dw[o * in_d..(o + 1) * in_d];
                    for i in 0..in_d {
                        dwrow[i] += go * xr[i];
                    }
                }
            }
        }
        {
            let db = self.b.grad_mut();
            for t in 0..x.rows {
                let dzr = dz.row(t);
                for o in 0..out_d {
                    db[o] += dzr[o];
                }
            }
        }
        for t in 0..x.rows {
            let dzr = dz.row(t);
            let dxr = dx.row_mut(t);
            for o in 0..out_d {
                let go = dzr[o];
                let wrow = &self.w.values[o * in_d..(o + 1) * in_d];
                for i in 0..in_d {
                    dxr[i] += go * wrow[i];
                }
            }
        }
        Ok(dx)
    }

    fn params(&self) -> Vec<&Tensor> {
        vec![&self.w, &self.b]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w, &mut self.b]
    }
}

// ---------------------------------------------------------------------------
// LSTM

/// Gate layout along the 4H axis: input, forget, cell, output.
struct LstmCache {
    x: Mat,
    i: Mat,
    f: Mat,
    g: Mat,
    o: Mat,
    c: Mat,
    tc: Mat,
    h: Mat,
}

pub struct Lstm {
    pub w_x: Tensor, // [4H, D]
    pub w_h: Tensor, // [4H, H]
    pub b: Tensor,   // [4H]
    hidden: usize,
    input: usize,
    cache: Option<LstmCache>,
}

impl Lstm {
    pub fn new(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut b = Tensor::zeros(&[4 * hidden]);
        // Forget-gate bias starts at 1.0.
        for v in &mut b.values[hidden..2 * hidden] {
            *v = 1.0;
        }
        Lstm {
            w_x: Tensor::uniform(&[4 * hidden, input], input, rng),
            w_h: Tensor::uniform(&[4 * hidden, hidden], hidden, rng),
            b,
            hidden,
            input,
            cache: None,
        }
    }

    fn run(&self, x: &Mat) -> LstmCache {
        let (t_len, h) = (x.rows, self.hidden);
        let mut cache = LstmCache {
            x: x.clone(),
            i: Mat::zeros(t_len, h),
            f: Mat::zeros(t_len, h),
            g: Mat::zeros(t_len, h),
            o: Mat::zeros(t_len, h),
            c: Mat::zeros(t_len, h),
            tc: Mat::zeros(t_len, h),
            h: Mat::zeros(t_len, h),
        };
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        let mut z = vec![0.0; 4 * h];
        for t in 0..t_len {
            let xr = x.row(t);
            for (j, zj) in z.iter_mut().enumerate() {
                let mut acc = self.b.values[j];
                let wx = &self.w_x.values[j * self.input..(j + 1) * self.input];
                for (i, xv) in xr.iter().enumerate() {
                    acc += wx[i] * xv;
                }
                let wh = &self.w_h.values[j * h..(j + 1) * h];
                for (i, hv) in h_prev.iter().enumerate() {
                    acc += wh[i] * hv;
                }
                *zj = acc;
            }
            for j in 0..h {
                let iv = sigmoid(z[j]);
                let fv = sigmoid(z[h + j]);
                let gv = z[2 * h + j].tanh();
                let ov = sigmoid(z[3 * h + j]);
                let cv = fv * c_prev[j] + iv * gv;
                let tcv = cv.tanh();
                let hv = ov * tcv;
                cache.i.row_mut(t)[j] = iv;
                cache.f.row_mut(t)[j] = fv;
                cache.g.row_mut(t)[j] = gv;
                cache.o.row_mut(t)[j] = ov;
                cache.c.row_mut(t)[j] = cv;
                cache.tc.row_mut(t)[j] = tcv;
                cache.h.row_mut(t)[j] = hv;
            }
            h_prev.copy_from_slice(cache.h.row(t));
            c_prev.copy_from_slice(cache.c.row(t));
        }
        cache
    }
}

impl Layer for Lstm {
    fn spec(&self) -> LayerSpec {
        LayerSpec::UniRecurrent {
            input: self.input,
            hidden: self.hidden,
        }
    }

    fn in_dim(&self) -> usize {
        self.input
    }

    fn out_dim(&self) -> usize {
        self.hidden
    }

    fn forward(&mut self, x: &Mat) -> Result<Mat, NeuralError> {
        self.check_input(x)?;
        let cache = self.run(x);
        let out = cache.h.clone();
        self.cache = Some(cache);
        Ok(out)
    }

    fn infer(&self, x: &Mat) -> Result<Mat, NeuralError> {
        self.check_input(x)?;
        Ok(self.run(x).h)
    }

    fn backward(&mut self, grad_out: &Mat) -> Result<Mat, NeuralError> {
        let cache = self.cache.take().ok_or(NeuralError::NoForwardCache)?;
        let (t_len, h, d) = (cache.x.rows, self.hidden, self.input);
        let mut dx = Mat::zeros(t_len, d);
        let mut dh_rec = vec![0.0; h];
        let mut dc_rec = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        let zero = vec![0.0; h];
        for t in (0..t_len).rev() {
            let c_prev = if t > 0 { cache.c.row(t - 1) } else { &zero[..] };
            let h_prev = if t > 0 { cache.h.row(t - 1) } else { &zero[..] };
            for j in 0..h {
                let dh = grad_out.row(t)[j] + dh_rec[j];
                let (iv, fv, gv, ov) = (
                    cache.i.row(t)[j],
                    cache.f.row(t)[j],
                    cache.g.row(t)[j],
                    cache.o.row(t)[j],
                );
                let tcv = cache.tc.row(t)[j];
                let dc = dh * ov * (1.0 - tcv * tcv) + dc_rec[j];
                dz[j] = dc * gv * iv * (1.0 - iv);
                dz[h + j] = dc * c_prev[j] * fv * (1.0 - fv);
                dz[2 * h + j] = dc * iv * (1.0 - gv * gv);
                dz[3 * h + j] = dh * tcv * ov * (1.0 - ov);
                dc_rec[j] = dc * fv;
            }
            {
                let dwx = self.w_x.grad_mut();
                let xr = cache.x.row(t);
                for (j, dzj) in dz.iter().enumerate() {
                    let row = &mut dwx[j * d..(j + 1) * d];
                    for (i, xv) in xr.iter().enumerate() {
                        row[i] += dzj * xv;
                    }
                }
            }
            {
                let dwh = self.w_h.grad_mut();
                for (j, dzj) in dz.iter().enumerate() {
                    let row = &mut dwh[j * h..(j + 1) * h];
                    for (i, hv) in h_prev.iter().enumerate() {
                        row[i] += dzj * hv;
                    }
                }
            }
            {
                let db = self.b.grad_mut();
                for (j, dzj) in dz.iter().enumerate() {
                    db[j] += dzj;
                }
            }
            {
                let dxr = dx.row_mut(t);
                for (j, dzj) in dz.iter().enumerate() {
                    let wx = &self.w_x.values[j * d..(j + 1) * d];
                    for i in 0..d {
                        dxr[i] += dzj * wx[i];
                    }
                }
            }
            for v in dh_rec.iter_mut() {
                *v = 0.0;
            }
            for (j, dzj) in dz.iter().enumerate() {
                let wh = &self.w_h.values[j * h..(j + 1) * h];
                for i in 0..h {
                    dh_rec[i] += dzj * wh[i];
                }
            }
        }
        Ok(dx)
    }

    fn params(&self) -> Vec<&Tensor> {
        vec![&self.w_x, &self.w_h, &self.b]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w_x, &mut self.w_h, &mut self.b]
    }
}

// ---------------------------------------------------------------------------
// Bidirectional LSTM: forward and reversed cells, concatenated outputs.

pub struct BiLstm {
    pub fwd: Lstm,
    pub bwd: Lstm,
}

impl BiLstm {
    pub fn new(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        BiLstm {
            fwd: Lstm::new(input, hidden, rng),
            bwd: Lstm::new(input, hidden, rng),
        }
    }

    /// Copy the forward cell's weights into the backward cell. Used by the
    /// time-reversal symmetry check.
    pub fn tie_directions(&mut self) {
        self.bwd.w_x.values = self.fwd.w_x.values.clone();
        self.bwd.w_h.values = self.fwd.w_h.values.clone();
        self.bwd.b.values = self.fwd.b.values.clone();
    }
}

impl Layer for BiLstm {
    fn spec(&self) -> LayerSpec {
        LayerSpec::BiRecurrent {
            input: self.fwd.input,
            hidden: self.fwd.hidden,
        }
    }

    fn in_dim(&self) -> usize {
        self.fwd.input
    }

    fn out_dim(&self) -> usize {
        2 * self.fwd.hidden
    }

    fn forward(&mut self, x: &Mat) -> Result<Mat, NeuralError> {
        self.check_input(x)?;
        let hf = self.fwd.forward(x)?;
        let hb = self.bwd.forward(&x.reversed_rows())?.reversed_rows();
        Ok(Mat::hcat(&hf, &hb))
    }

    fn infer(&self, x: &Mat) -> Result<Mat, NeuralError> {
        self.check_input(x)?;
        let hf = self.fwd.infer(x)?;
        let hb = self.bwd.infer(&x.reversed_rows())?.reversed_rows();
        Ok(Mat::hcat(&hf, &hb))
    }

    fn backward(&mut self, grad_out: &Mat) -> Result<Mat, NeuralError> {
        let h = self.fwd.hidden;
        let mut gf = Mat::zeros(grad_out.rows, h);
        let mut gb = Mat::zeros(grad_out.rows, h);
        for t in 0..grad_out.rows {
            gf.row_mut(t).copy_from_slice(&grad_out.row(t)[..h]);
            gb.row_mut(t).copy_from_slice(&grad_out.row(t)[h..]);
        }
        let dxf = self.fwd.backward(&gf)?;
        let dxb = self.bwd.backward(&gb.reversed_rows())?.reversed_rows();
        let mut dx = dxf;
        for (a, b) in dx.data.iter_mut().zip(dxb.data.iter()) {
            *a += b;
        }
        Ok(dx)
    }

    fn params(&self) -> Vec<&Tensor> {
        let mut p = self.fwd.params();
        p.extend(self.bwd.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.fwd.w_x,
            &mut self.fwd.w_h,
            &mut self.fwd.b,
            &mut self.bwd.w_x,
            &mut self.bwd.w_h,
            &mut self.bwd.b,
        ]
    }
}

// ---------------------------------------------------------------------------
// 1-D convolution over time, zero-padded to keep the length.

pub struct Conv1d {
    pub w: Tensor, // [channels, kernel * input]
    pub b: Tensor, // [channels]
    kernel: usize,
    input: usize,
    cache: Option<Mat>,
}

impl Conv1d {
    pub fn new(input: usize, channels: usize, kernel: usize, rng: &mut impl Rng) -> Self {
        Conv1d {
            w: Tensor::uniform(&[channels, kernel * input], kernel * input, rng),
            b: Tensor::zeros(&[channels]),
            kernel,
            input,
            cache: None,
        }
    }

    fn apply(&self, x: &Mat) -> Mat {
        let c_out = self.w.shape[0];
        let pad = self.kernel / 2;
        let mut y = Mat::zeros(x.rows, c_out);
        for t in 0..x.rows {
            let yr = y.row_mut(t);
            for c in 0..c_out {
                let wrow = &self.w.values[c * self.kernel * self.input..];
                let mut acc = self.b.values[c];
                for k in 0..self.kernel {
                    let src = t as isize + k as isize - pad as isize;
                    if src < 0 || src >= x.rows as isize {
                        continue;
                    }
                    let xr = x.row(src as usize);
                    let wk = &wrow[k * self.input..(k + 1) * self.input];
                    for i in 0..self.input {
                        acc += wk[i] * xr[i];
                    }
                }
                yr[c] = acc;
            }
        }
        y
    }
}

impl Layer for Conv1d {
    fn spec(&self) -> LayerSpec {
        LayerSpec::Conv1d {
            input: self.input,
            channels: self.w.shape[0],
            kernel: self.kernel,
        }
    }

    fn in_dim(&self) -> usize {
        self.input
    }

    fn out_dim(&self) -> usize {
        self.w.shape[0]
    }

    fn forward(&mut self, x: &Mat) -> Result<Mat, NeuralError> {
        self.check_input(x)?;
        let y = self.apply(x);
        self.cache = Some(x.clone());
        Ok(y)
    }

    fn infer(&self, x: &Mat) -> Result<Mat, NeuralError> {
        self.check_input(x)?;
        Ok(self.apply(x))
    }

    fn backward(&mut self, grad_out: &Mat) -> Result<Mat, NeuralError> {
        let x = self.cache.take().ok_or(NeuralError::NoForwardCache)?;
        let c_out = self.w.shape[0];
        let pad = self.kernel / 2;
        let mut dx = Mat::zeros(x.rows, self.input);
        {
            let dw = self.w.grad_mut();
            let db = self.b.grad_mut();
            for t in 0..x.rows {
                let g = grad_out.row(t);
                for c in 0..c_out {
                    let go = g[c];
                    db[c] += go;
                    let dwrow = &mut dw[c * self.kernel * self.input..(c + 1) * self.kernel * self.input];
                    for k in 0..self.kernel {
                        let src = t as isize + k as isize - pad as isize;
                        if src < 0 || src >= x.rows as isize {
                            continue;
                        }
                        let xr = x.row(src as usize);
                        let dwk = &mut dwrow[k * self.input..(k + 1) * self.input];
                        for i in 0..self.input {
                            dwk[i] += go * xr[i];
                        }
                    }
                }
            }
        }
        for t in 0..x.rows {
            let g = grad_out.row(t);
            for c in 0..c_out {
                let go = g[c];
                let wrow = &self.w.values[c * self.kernel * self.input..];
                for k in 0..self.kernel {
                    let src = t as isize + k as isize - pad as isize;
                    if src < 0 || src >= x.rows as isize {
                        continue;
                    }
                    let dxr = dx.row_mut(src as usize);
                    let wk = &wrow[k * self.input..(k + 1) * self.input];
                    for i in 0..self.input {
                        dxr[i] += go * wk[i];
                    }
                }
            }
        }
        Ok(dx)
    }

    fn params(&self) -> Vec<&Tensor> {
        vec![&self.w, &self.b]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w, &mut self.b]
    }
}
