//! Forward and backward passes of the pixel classifier.
//!
//! Layer trace for a batch of `B` pixels:
//!
//! ```text
//! 1×224 ─conv(16,3)─ReLU─pool→ 16×112 ─conv(32,3)─ReLU─pool→ 32×56
//!       ─res(64)→ 64×56 ─res(128)→ 128×56 ─flatten→ 7168
//!       ─fc(512)─ReLU─dropout→ 512 ─fc(5)─softmax→ 5
//! ```
//!
//! A residual block computes
//! `ReLU(BN(conv(ReLU(BN(conv(x))))) + proj(x))` with a bias-free 1×1
//! projection on the skip path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kernels::{
    batchnorm1d, batchnorm1d_backward, conv1d, conv1d_backward, dense, dense_backward, maxpool1d, maxpool1d_backward,
    relu_backward_inplace, relu_inplace, softmax_rows, update_running_stats, Activations, BatchNormCache, NormMode,
};
use super::params::{Gradients, ModelParams, ResidualParams, FEATURE_LEN, FLAT_LEN, INPUT_LEN, OUTPUT_CLASSES};
use super::scalar::Scalar;
use crate::data::ClassLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in batch norm and a dropout mask drawn from the seed.
    Train { dropout_seed: u64 },
    /// Running statistics, no dropout.
    Eval,
}

impl Mode {
    fn norm(self) -> NormMode {
        match self {
            Mode::Train { .. } => NormMode::Train,
            Mode::Eval => NormMode::Eval,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResidualTrace<T> {
    input: Activations<T>,
    bn_a: BatchNormCache<T>,
    relu_a: Activations<T>,
    bn_b: BatchNormCache<T>,
    output: Activations<T>,
}

/// Cached intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    batch: usize,
    mode: Mode,
    input: Activations<T>,
    relu1: Activations<T>,
    pool1_arg: Vec<u8>,
    pooled1: Activations<T>,
    relu2: Activations<T>,
    pool2_arg: Vec<u8>,
    res1: ResidualTrace<T>,
    res2: ResidualTrace<T>,
    flat: Vec<T>,
    hidden: Vec<T>,
    dropout_mask: Option<Vec<T>>,
    dropped: Vec<T>,
    logits: Vec<T>,
    probabilities: Vec<T>,
}

impl<T: Scalar> ForwardTrace<T> {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Row-major `batch × 5` class probabilities.
    pub fn probabilities(&self) -> &[T] {
        &self.probabilities
    }

    pub fn logits(&self) -> &[T] {
        &self.logits
    }

    pub fn residual_outputs(&self) -> (&Activations<T>, &Activations<T>) {
        (&self.res1.output, &self.res2.output)
    }

    pub fn predictions(&self) -> Vec<ClassLabel> {
        argmax_rows(&self.probabilities)
    }
}

pub(crate) fn argmax_rows<T: Scalar>(probabilities: &[T]) -> Vec<ClassLabel> {
    probabilities
        .chunks_exact(OUTPUT_CLASSES)
        .map(|row| {
            let mut best = 0;
            for c in 1..OUTPUT_CLASSES {
                if row[c] > row[best] {
                    best = c;
                }
            }
            ClassLabel::ALL[best]
        })
        .collect()
}

fn residual_forward<T: Scalar>(p: &ResidualParams<T>, input: Activations<T>, mode: Mode, eps: f64) -> Result<ResidualTrace<T>> {
    let a = conv1d(&input, &p.conv_a.weight, None, p.conv_a.shape)?;
    let (mut relu_a, bn_a) = batchnorm1d(&a, &p.bn_a, mode.norm(), eps)?;
    drop(a);
    relu_inplace(&mut relu_a.data);
    let b = conv1d(&relu_a, &p.conv_b.weight, None, p.conv_b.shape)?;
    let (mut output, bn_b) = batchnorm1d(&b, &p.bn_b, mode.norm(), eps)?;
    drop(b);
    let skip = conv1d(&input, &p.projection.weight, None, p.projection.shape)?;
    for (o, s) in output.data.iter_mut().zip(&skip.data) {
        *o += *s;
    }
    relu_inplace(&mut output.data);
    Ok(ResidualTrace { input, bn_a, relu_a, bn_b, output })
}

fn residual_backward<T: Scalar>(
    p: &ResidualParams<T>,
    trace: &ResidualTrace<T>,
    mut grad: Activations<T>,
    out: &mut ResidualParams<T>,
) -> Activations<T> {
    relu_backward_inplace(&mut grad.data, &trace.output.data);
    let skip = conv1d_backward(&trace.input, &p.projection.weight, p.projection.shape, &grad);
    out.projection.weight = skip.weights;

    let bn_b = batchnorm1d_backward(&grad, &p.bn_b, &trace.bn_b);
    out.bn_b.gamma = bn_b.gamma;
    out.bn_b.beta = bn_b.beta;
    let conv_b = conv1d_backward(&trace.relu_a, &p.conv_b.weight, p.conv_b.shape, &bn_b.input);
    out.conv_b.weight = conv_b.weights;

    let mut g = conv_b.input;
    relu_backward_inplace(&mut g.data, &trace.relu_a.data);
    let bn_a = batchnorm1d_backward(&g, &p.bn_a, &trace.bn_a);
    out.bn_a.gamma = bn_a.gamma;
    out.bn_a.beta = bn_a.beta;
    let conv_a = conv1d_backward(&trace.input, &p.conv_a.weight, p.conv_a.shape, &bn_a.input);
    out.conv_a.weight = conv_a.weights;

    let mut dinput = conv_a.input;
    for (d, s) in dinput.data.iter_mut().zip(&skip.input.data) {
        *d += *s;
    }
    dinput
}

/// Runs the network on `pixels` (row-major `batch × 224`).
pub fn forward<T: Scalar>(params: &ModelParams<T>, pixels: &[T], mode: Mode) -> Result<ForwardTrace<T>> {
    if pixels.is_empty() || !pixels.len().is_multiple_of(INPUT_LEN) {
        return Err(Error::shape(format!("input of {} values is not a whole number of {INPUT_LEN}-band pixels", pixels.len())));
    }
    if let Some(i) = pixels.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let batch = pixels.len() / INPUT_LEN;
    let eps = params.arch.bn_eps;
    let input = Activations::from_samples(pixels, INPUT_LEN)?;

    let mut relu1 = conv1d(&input, &params.conv1.weight, params.conv1.bias.as_deref(), params.conv1.shape)?;
    relu_inplace(&mut relu1.data);
    let (pooled1, pool1_arg) = maxpool1d(&relu1)?;
    let mut relu2 = conv1d(&pooled1, &params.conv2.weight, params.conv2.bias.as_deref(), params.conv2.shape)?;
    relu_inplace(&mut relu2.data);
    let (pooled2, pool2_arg) = maxpool1d(&relu2)?;
    assert_eq!(pooled2.shape(), (params.conv2.shape.out_channels, batch, FEATURE_LEN));

    let res1 = residual_forward(&params.res1, pooled2, mode, eps)?;
    let res2 = residual_forward(&params.res2, res1.output.clone(), mode, eps)?;
    assert_eq!(res2.output.shape(), (params.res2.out_channels(), batch, FEATURE_LEN));

    let flat = flatten(&res2.output);
    let mut hidden = dense(&flat, batch, &params.fc1.weight, &params.fc1.bias, params.fc1.out_dim);
    relu_inplace(&mut hidden);

    let (dropout_mask, dropped) = match mode {
        Mode::Train { dropout_seed } if params.arch.dropout > 0.0 => {
            let rate = params.arch.dropout;
            let keep = T::of(1.0 / (1.0 - rate));
            let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
            let mask: Vec<T> = (0..hidden.len())
                .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep })
                .collect();
            let dropped = hidden.iter().zip(&mask).map(|(h, m)| *h * *m).collect();
            (Some(mask), dropped)
        }
        _ => (None, hidden.clone()),
    };

    let logits = dense(&dropped, batch, &params.fc2.weight, &params.fc2.bias, params.fc2.out_dim);
    let probabilities = softmax_rows(&logits, OUTPUT_CLASSES);
    Ok(ForwardTrace {
        batch,
        mode,
        input,
        relu1,
        pool1_arg,
        pooled1,
        relu2,
        pool2_arg,
        res1,
        res2,
        flat,
        hidden,
        dropout_mask,
        dropped,
        logits,
        probabilities,
    })
}

/// `channels × batch × len` to row-major `batch × (channels·len)`.
fn flatten<T: Scalar>(act: &Activations<T>) -> Vec<T> {
    let (c, b, l) = act.shape();
    let mut out = vec![T::zero(); c * b * l];
    for ch in 0..c {
        for s in 0..b {
            let src = &act.data[(ch * b + s) * l..(ch * b + s + 1) * l];
            out[s * c * l + ch * l..s * c * l + (ch + 1) * l].copy_from_slice(src);
        }
    }
    out
}

fn unflatten<T: Scalar>(flat: &[T], c: usize, b: usize, l: usize) -> Activations<T> {
    let mut out = Activations::zeros(c, b, l);
    for ch in 0..c {
        for s in 0..b {
            out.data[(ch * b + s) * l..(ch * b + s + 1) * l].copy_from_slice(&flat[s * c * l + ch * l..s * c * l + (ch + 1) * l]);
        }
    }
    out
}

/// Parameter gradients plus the gradient with respect to the input pixels.
pub struct BackwardResult<T> {
    pub grads: Gradients<T>,
    pub input: Vec<T>,
}

/// Back-propagates `grad_logits` (row-major `batch × 5`) through a
/// train-mode trace.
pub fn backward<T: Scalar>(params: &ModelParams<T>, trace: &ForwardTrace<T>, grad_logits: &[T]) -> Result<BackwardResult<T>> {
    if !matches!(trace.mode, Mode::Train { .. }) {
        return Err(Error::precondition("backward needs a train-mode trace"));
    }
    if grad_logits.len() != trace.batch * OUTPUT_CLASSES {
        return Err(Error::shape(format!(
            "logit gradient has {} values for a batch of {}",
            grad_logits.len(),
            trace.batch
        )));
    }
    if trace.flat.len() != trace.batch * params.fc1.in_dim || trace.hidden.len() != trace.batch * params.fc1.out_dim {
        return Err(Error::shape("trace does not match these parameters"));
    }
    let batch = trace.batch;
    let mut g = params.zeros_like();

    let fc2 = dense_backward(&trace.dropped, batch, &params.fc2.weight, params.fc2.out_dim, grad_logits);
    g.fc2.weight = fc2.weights;
    g.fc2.bias = fc2.bias;
    let mut dhidden = fc2.input;
    if let Some(mask) = &trace.dropout_mask {
        for (d, m) in dhidden.iter_mut().zip(mask) {
            *d *= *m;
        }
    }
    relu_backward_inplace(&mut dhidden, &trace.hidden);

    let fc1 = dense_backward(&trace.flat, batch, &params.fc1.weight, params.fc1.out_dim, &dhidden);
    g.fc1.weight = fc1.weights;
    g.fc1.bias = fc1.bias;
    debug_assert_eq!(fc1.input.len(), batch * FLAT_LEN);
    let (c2, _, l2) = trace.res2.output.shape();
    let dres2 = unflatten(&fc1.input, c2, batch, l2);

    let dres1 = residual_backward(&params.res2, &trace.res2, dres2, &mut g.res2);
    let dpooled2 = residual_backward(&params.res1, &trace.res1, dres1, &mut g.res1);

    let mut drelu2 = maxpool1d_backward(&dpooled2, &trace.pool2_arg, trace.relu2.len);
    relu_backward_inplace(&mut drelu2.data, &trace.relu2.data);
    let conv2 = conv1d_backward(&trace.pooled1, &params.conv2.weight, params.conv2.shape, &drelu2);
    g.conv2.weight = conv2.weights;
    g.conv2.bias = Some(conv2.bias);

    let mut drelu1 = maxpool1d_backward(&conv2.input, &trace.pool1_arg, trace.relu1.len);
    relu_backward_inplace(&mut drelu1.data, &trace.relu1.data);
    let conv1 = conv1d_backward(&trace.input, &params.conv1.weight, params.conv1.shape, &drelu1);
    g.conv1.weight = conv1.weights;
    g.conv1.bias = Some(conv1.bias);

    Ok(BackwardResult { grads: g, input: conv1.input.data })
}

/// Folds the batch statistics of a train-mode trace into the running
/// estimates used at inference.
pub fn apply_running_stats<T: Scalar>(params: &mut ModelParams<T>, trace: &ForwardTrace<T>) {
    let m = params.arch.bn_momentum;
    if matches!(trace.mode, Mode::Train { .. }) {
        update_running_stats(&mut params.res1.bn_a, &trace.res1.bn_a, m);
        update_running_stats(&mut params.res1.bn_b, &trace.res1.bn_b, m);
        update_running_stats(&mut params.res2.bn_a, &trace.res2.bn_a, m);
        update_running_stats(&mut params.res2.bn_b, &trace.res2.bn_b, m);
    }
}

/// Eval-mode class probabilities for row-major `batch × 224` pixels.
pub fn predict_proba<T: Scalar>(params: &ModelParams<T>, pixels: &[T]) -> Result<Vec<T>> {
    Ok(forward(params, pixels, Mode::Eval)?.probabilities)
}

/// Eval-mode arg-max class for every pixel.
pub fn predict<T: Scalar>(params: &ModelParams<T>, pixels: &[T]) -> Result<Vec<ClassLabel>> {
    Ok(argmax_rows(&predict_proba(params, pixels)?))
}
