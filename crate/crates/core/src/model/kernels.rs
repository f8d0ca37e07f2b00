//! Batched 1D layers with their backward passes.
//!
//! Activations are channel-major: element `(c, b, l)` of a
//! `channels × batch × len` tensor lives at `(c * batch + b) * len + l`, so
//! each channel is one contiguous row of `batch * len` values and a
//! convolution becomes a single matrix product.

use super::scalar::{gemm, MatRef, Scalar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Activations<T> {
    pub channels: usize,
    pub batch: usize,
    pub len: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Activations<T> {
    pub fn zeros(channels: usize, batch: usize, len: usize) -> Self {
        Self { channels, batch, len, data: vec![T::zero(); channels * batch * len] }
    }

    pub fn from_vec(channels: usize, batch: usize, len: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != channels * batch * len {
            return Err(Error::shape(format!(
                "{channels}×{batch}×{len} activations need {} values, got {}",
                channels * batch * len,
                data.len()
            )));
        }
        Ok(Self { channels, batch, len, data })
    }

    /// Single-channel batch from `batch` consecutive input vectors.
    pub fn from_samples(samples: &[T], len: usize) -> Result<Self> {
        if len == 0 || !samples.len().is_multiple_of(len) {
            return Err(Error::shape(format!("{} values do not split into vectors of {len}", samples.len())));
        }
        Self::from_vec(1, samples.len() / len, len, samples.to_vec())
    }

    #[inline]
    pub fn at(&self, c: usize, b: usize, l: usize) -> T {
        self.data[(c * self.batch + b) * self.len + l]
    }

    /// Contiguous `batch * len` row of channel `c`.
    #[inline]
    pub fn channel(&self, c: usize) -> &[T] {
        let n = self.batch * self.len;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.batch, self.len)
    }

    fn cols(&self) -> usize {
        self.batch * self.len
    }
}

/// Weight tensor of a `kernel`-wide convolution, row-major
/// `out_channels × in_channels × kernel`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel: usize,
}

impl ConvShape {
    pub fn weight_len(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel
    }

    fn padding(&self) -> usize {
        self.kernel / 2
    }
}

/// Unfolds the input into a `(in_channels*kernel) × (batch*len)` matrix
/// with zero padding of `kernel/2` at both ends of every sample.
fn im2col<T: Scalar>(input: &Activations<T>, kernel: usize) -> Vec<T> {
    let (cin, batch, len) = input.shape();
    let pad = kernel / 2;
    let n = batch * len;
    if kernel == 1 {
        return input.data.clone();
    }
    let mut cols = vec![T::zero(); cin * kernel * n];
    for c in 0..cin {
        let src = input.channel(c);
        for k in 0..kernel {
            let row = &mut cols[(c * kernel + k) * n..(c * kernel + k + 1) * n];
            // out position i reads input position i + k - pad
            for b in 0..batch {
                let s = &src[b * len..(b + 1) * len];
                let d = &mut row[b * len..(b + 1) * len];
                if k >= pad {
                    let shift = k - pad;
                    d[..len - shift].copy_from_slice(&s[shift..]);
                } else {
                    let shift = pad - k;
                    d[shift..].copy_from_slice(&s[..len - shift]);
                }
            }
        }
    }
    cols
}

/// Adjoint of `im2col`: folds a column-gradient matrix back onto the input.
fn col2im<T: Scalar>(dcols: &[T], cin: usize, batch: usize, len: usize, kernel: usize) -> Activations<T> {
    if kernel == 1 {
        return Activations { channels: cin, batch, len, data: dcols.to_vec() };
    }
    let pad = kernel / 2;
    let n = batch * len;
    let mut out = Activations::zeros(cin, batch, len);
    for c in 0..cin {
        let dst = &mut out.data[c * n..(c + 1) * n];
        for k in 0..kernel {
            let row = &dcols[(c * kernel + k) * n..(c * kernel + k + 1) * n];
            for b in 0..batch {
                let s = &row[b * len..(b + 1) * len];
                let d = &mut dst[b * len..(b + 1) * len];
                if k >= pad {
                    let shift = k - pad;
                    for (dv, sv) in d[shift..].iter_mut().zip(&s[..len - shift]) {
                        *dv += *sv;
                    }
                } else {
                    let shift = pad - k;
                    for (dv, sv) in d[..len - shift].iter_mut().zip(&s[shift..]) {
                        *dv += *sv;
                    }
                }
            }
        }
    }
    out
}

/// Stride-1 convolution with zero padding `kernel/2` (length preserving for
/// odd kernels): `out[c,i] = bias[c] + Σ w[c,cin,k]·in[cin, i+k-pad]`.
pub fn conv1d<T: Scalar>(input: &Activations<T>, weights: &[T], bias: Option<&[T]>, shape: ConvShape) -> Result<Activations<T>> {
    check_conv(input, weights, bias, shape)?;
    let cols = im2col(input, shape.kernel);
    let n = input.cols();
    let mut out = Activations::zeros(shape.out_channels, input.batch, input.len);
    gemm(
        MatRef::new(weights, shape.out_channels, shape.in_channels * shape.kernel),
        MatRef::new(&cols, shape.in_channels * shape.kernel, n),
        &mut out.data,
        false,
    );
    if let Some(bias) = bias {
        for (c, &bv) in bias.iter().enumerate() {
            out.data[c * n..(c + 1) * n].iter_mut().for_each(|v| *v += bv);
        }
    }
    Ok(out)
}

fn check_conv<T: Scalar>(input: &Activations<T>, weights: &[T], bias: Option<&[T]>, shape: ConvShape) -> Result<()> {
    if shape.kernel.is_multiple_of(2) {
        return Err(Error::shape(format!("kernel size {} must be odd", shape.kernel)));
    }
    if input.channels != shape.in_channels {
        return Err(Error::shape(format!("conv expects {} input channels, got {}", shape.in_channels, input.channels)));
    }
    if weights.len() != shape.weight_len() {
        return Err(Error::shape(format!("conv weights need {} values, got {}", shape.weight_len(), weights.len())));
    }
    if input.len < shape.padding() + 1 {
        return Err(Error::shape("input shorter than kernel padding"));
    }
    if let Some(b) = bias {
        if b.len() != shape.out_channels {
            return Err(Error::shape(format!("conv bias needs {} values, got {}", shape.out_channels, b.len())));
        }
    }
    Ok(())
}

pub struct ConvGrads<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub input: Activations<T>,
}

/// Gradients of `conv1d` given the forward input and the output gradient.
pub fn conv1d_backward<T: Scalar>(input: &Activations<T>, weights: &[T], shape: ConvShape, grad_out: &Activations<T>) -> ConvGrads<T> {
    let n = input.cols();
    let kk = shape.in_channels * shape.kernel;
    let cols = im2col(input, shape.kernel);
    let mut dw = vec![T::zero(); shape.weight_len()];
    gemm(
        MatRef::new(&grad_out.data, shape.out_channels, n),
        MatRef::new(&cols, kk, n).t(),
        &mut dw,
        false,
    );
    drop(cols);
    let bias = (0..shape.out_channels).map(|c| grad_out.channel(c).iter().copied().sum()).collect();
    let mut dcols = vec![T::zero(); kk * n];
    gemm(
        MatRef::new(weights, shape.out_channels, kk).t(),
        MatRef::new(&grad_out.data, shape.out_channels, n),
        &mut dcols,
        false,
    );
    let input = col2im(&dcols, shape.in_channels, input.batch, input.len, shape.kernel);
    ConvGrads { weights: dw, bias, input }
}

/// Window-2 stride-2 max pooling along the length axis. A trailing odd
/// element is dropped. The second return value records which element of
/// each pair won (0 or 1; ties go to the first).
pub fn maxpool1d<T: Scalar>(input: &Activations<T>) -> Result<(Activations<T>, Vec<u8>)> {
    if input.len < 2 {
        return Err(Error::shape("max pooling needs length ≥ 2"));
    }
    let half = input.len / 2;
    let mut out = Activations::zeros(input.channels, input.batch, half);
    let mut arg = vec![0u8; out.data.len()];
    for (row_in, (row_out, row_arg)) in input
        .data
        .chunks_exact(input.len)
        .zip(out.data.chunks_exact_mut(half).zip(arg.chunks_exact_mut(half)))
    {
        for i in 0..half {
            let (a, b) = (row_in[2 * i], row_in[2 * i + 1]);
            if b > a {
                row_out[i] = b;
                row_arg[i] = 1;
            } else {
                row_out[i] = a;
            }
        }
    }
    Ok((out, arg))
}

pub fn maxpool1d_backward<T: Scalar>(grad_out: &Activations<T>, arg: &[u8], in_len: usize) -> Activations<T> {
    let half = grad_out.len;
    let mut din = Activations::zeros(grad_out.channels, grad_out.batch, in_len);
    for ((g, a), d) in grad_out
        .data
        .chunks_exact(half)
        .zip(arg.chunks_exact(half))
        .zip(din.data.chunks_exact_mut(in_len))
    {
        for i in 0..half {
            d[2 * i + a[i] as usize] = g[i];
        }
    }
    din
}

pub fn relu_inplace<T: Scalar>(x: &mut [T]) {
    for v in x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Zeroes gradient entries whose forward ReLU output was not positive.
pub fn relu_backward_inplace<T: Scalar>(grad: &mut [T], relu_out: &[T]) {
    for (g, &y) in grad.iter_mut().zip(relu_out) {
        if y <= T::zero() {
            *g = T::zero();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    Train,
    Eval,
}

/// Per-channel batch-norm state.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
}

impl<T: Scalar> BatchNormParams<T> {
    pub fn identity(channels: usize) -> Self {
        Self {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }
}

/// What backward needs from a batch-norm forward, plus the batch statistics
/// used to update running estimates.
#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
    pub batch_mean: Vec<T>,
    /// Biased (population) variance of the batch.
    pub batch_var: Vec<T>,
    pub count: usize,
}

pub fn batchnorm1d<T: Scalar>(
    input: &Activations<T>,
    bn: &BatchNormParams<T>,
    mode: NormMode,
    eps: f64,
) -> Result<(Activations<T>, BatchNormCache<T>)> {
    let c = input.channels;
    if bn.channels() != c {
        return Err(Error::shape(format!("batch norm has {} channels, input has {c}", bn.channels())));
    }
    let n = input.cols();
    let mut mean = vec![T::zero(); c];
    let mut var = vec![T::zero(); c];
    match mode {
        NormMode::Train => {
            if n < 2 {
                return Err(Error::precondition("train-mode batch norm needs batch·len ≥ 2 per channel"));
            }
            for ch in 0..c {
                let row = input.channel(ch);
                let m = row.iter().map(|v| v.f64()).sum::<f64>() / n as f64;
                let v = row.iter().map(|x| (x.f64() - m).powi(2)).sum::<f64>() / n as f64;
                mean[ch] = T::of(m);
                var[ch] = T::of(v);
            }
        }
        NormMode::Eval => {
            if let Some(ch) = bn.running_var.iter().position(|v| !(*v > T::zero())) {
                return Err(Error::precondition(format!("running variance of channel {ch} is not positive")));
            }
            mean.copy_from_slice(&bn.running_mean);
            var.copy_from_slice(&bn.running_var);
        }
    }
    let mut out = Activations::zeros(c, input.batch, input.len);
    let mut xhat = vec![T::zero(); input.data.len()];
    let mut inv_std = vec![T::zero(); c];
    for ch in 0..c {
        let is = T::of(1.0 / (var[ch].f64() + eps).sqrt());
        inv_std[ch] = is;
        let (g, b, m) = (bn.gamma[ch], bn.beta[ch], mean[ch]);
        let src = input.channel(ch);
        let xh = &mut xhat[ch * n..(ch + 1) * n];
        let dst = &mut out.data[ch * n..(ch + 1) * n];
        for i in 0..n {
            let h = (src[i] - m) * is;
            xh[i] = h;
            dst[i] = g * h + b;
        }
    }
    Ok((out, BatchNormCache { xhat, inv_std, batch_mean: mean, batch_var: var, count: n }))
}

/// Moves running statistics towards the batch statistics. The running
/// variance tracks the unbiased batch variance.
pub fn update_running_stats<T: Scalar>(bn: &mut BatchNormParams<T>, cache: &BatchNormCache<T>, momentum: f64) {
    let n = cache.count as f64;
    let unbias = if n > 1.0 { n / (n - 1.0) } else { 1.0 };
    for ch in 0..bn.channels() {
        let rm = bn.running_mean[ch].f64();
        let rv = bn.running_var[ch].f64();
        bn.running_mean[ch] = T::of((1.0 - momentum) * rm + momentum * cache.batch_mean[ch].f64());
        bn.running_var[ch] = T::of((1.0 - momentum) * rv + momentum * cache.batch_var[ch].f64() * unbias);
    }
}

pub struct BatchNormGrads<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub input: Activations<T>,
}

/// Train-mode batch-norm backward (batch statistics depend on the input).
pub fn batchnorm1d_backward<T: Scalar>(grad_out: &Activations<T>, bn: &BatchNormParams<T>, cache: &BatchNormCache<T>) -> BatchNormGrads<T> {
    let c = grad_out.channels;
    let n = grad_out.batch * grad_out.len;
    let nf = n as f64;
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    let mut din = Activations::zeros(c, grad_out.batch, grad_out.len);
    for ch in 0..c {
        let dy = grad_out.channel(ch);
        let xh = &cache.xhat[ch * n..(ch + 1) * n];
        let sum_dy: f64 = dy.iter().map(|v| v.f64()).sum();
        let sum_dy_xh: f64 = dy.iter().zip(xh).map(|(a, b)| a.f64() * b.f64()).sum();
        dgamma[ch] = T::of(sum_dy_xh);
        dbeta[ch] = T::of(sum_dy);
        let scale = T::of(bn.gamma[ch].f64() * cache.inv_std[ch].f64() / nf);
        let (mdy, mdyx) = (T::of(sum_dy), T::of(sum_dy_xh));
        let nt = T::of(nf);
        let dst = &mut din.data[ch * n..(ch + 1) * n];
        for i in 0..n {
            dst[i] = scale * (nt * dy[i] - mdy - xh[i] * mdyx);
        }
    }
    BatchNormGrads { gamma: dgamma, beta: dbeta, input: din }
}

/// Row-major `x (batch × in)` times `w (out × in)` transposed, plus bias.
pub fn dense<T: Scalar>(x: &[T], batch: usize, w: &[T], bias: &[T], out_dim: usize) -> Vec<T> {
    let in_dim = w.len() / out_dim;
    let mut y = vec![T::zero(); batch * out_dim];
    for row in y.chunks_exact_mut(out_dim) {
        row.copy_from_slice(bias);
    }
    gemm(MatRef::new(x, batch, in_dim), MatRef::new(w, out_dim, in_dim).t(), &mut y, true);
    y
}

pub struct DenseGrads<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub input: Vec<T>,
}

pub fn dense_backward<T: Scalar>(x: &[T], batch: usize, w: &[T], out_dim: usize, grad_out: &[T]) -> DenseGrads<T> {
    let in_dim = w.len() / out_dim;
    let mut dw = vec![T::zero(); w.len()];
    gemm(MatRef::new(grad_out, batch, out_dim).t(), MatRef::new(x, batch, in_dim), &mut dw, false);
    let mut db = vec![T::zero(); out_dim];
    for row in grad_out.chunks_exact(out_dim) {
        for (d, &g) in db.iter_mut().zip(row) {
            *d += g;
        }
    }
    let mut dx = vec![T::zero(); x.len()];
    gemm(MatRef::new(grad_out, batch, out_dim), MatRef::new(w, out_dim, in_dim), &mut dx, false);
    DenseGrads { weights: dw, bias: db, input: dx }
}

/// Row-wise softmax. Entries are floored at the smallest positive normal
/// value so every probability stays strictly positive.
pub fn softmax_rows<T: Scalar>(logits: &[T], classes: usize) -> Vec<T> {
    let mut out = vec![T::zero(); logits.len()];
    for (src, dst) in logits.chunks_exact(classes).zip(out.chunks_exact_mut(classes)) {
        let max = src.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.f64()));
        let exps: Vec<f64> = src.iter().map(|v| (v.f64() - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        for (d, e) in dst.iter_mut().zip(exps) {
            *d = T::of(e / total).max(T::min_positive_value());
        }
    }
    out
}
