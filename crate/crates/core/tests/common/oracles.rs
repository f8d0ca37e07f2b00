use p1ch::model::{ModelParams, ResidualParams};

pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Maximum relative deviation between two vectors, measured against the
/// largest magnitude in the reference.
pub fn max_rel_dev(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-30);
    got.iter().zip(want).map(|(g, w)| (g - w).abs() / scale).fold(0.0, f64::max)
}

/// `input[cin][len]`, `w[cout][cin][k]`, zero padding `k/2`.
pub fn conv1d(input: &[Vec<f64>], w: &[f64], bias: Option<&[f64]>, cout: usize, k: usize) -> Vec<Vec<f64>> {
    let cin = input.len();
    let len = input[0].len();
    let pad = (k / 2) as isize;
    let mut out = vec![vec![0.0; len]; cout];
    for c in 0..cout {
        for i in 0..len {
            let mut acc = bias.map_or(0.0, |b| b[c]);
            for ci in 0..cin {
                for kk in 0..k {
                    let j = i as isize + kk as isize - pad;
                    if j >= 0 && (j as usize) < len {
                        acc += w[(c * cin + ci) * k + kk] * input[ci][j as usize];
                    }
                }
            }
            out[c][i] = acc;
        }
    }
    out
}

pub fn maxpool(input: &[Vec<f64>]) -> Vec<Vec<f64>> {
    input
        .iter()
        .map(|row| (0..row.len() / 2).map(|i| row[2 * i].max(row[2 * i + 1])).collect())
        .collect()
}

pub fn relu(x: &mut [Vec<f64>]) {
    for row in x {
        for v in row {
            *v = v.max(0.0);
        }
    }
}

/// Two-pass per-channel statistics over every sample and position.
/// `batch[b][c][l]`; returns (mean, biased variance) per channel.
pub fn channel_stats(batch: &[Vec<Vec<f64>>]) -> (Vec<f64>, Vec<f64>) {
    let channels = batch[0].len();
    let mut mean = vec![0.0; channels];
    let mut var = vec![0.0; channels];
    for c in 0..channels {
        let mut n = 0.0;
        for s in batch {
            for v in &s[c] {
                mean[c] += v;
                n += 1.0;
            }
        }
        mean[c] /= n;
        for s in batch {
            for v in &s[c] {
                var[c] += (v - mean[c]).powi(2);
            }
        }
        var[c] /= n;
    }
    (mean, var)
}

pub fn batchnorm_with(x: &[Vec<f64>], gamma: &[f64], beta: &[f64], mean: &[f64], var: &[f64], eps: f64) -> Vec<Vec<f64>> {
    x.iter()
        .enumerate()
        .map(|(c, row)| row.iter().map(|v| gamma[c] * (v - mean[c]) / (var[c] + eps).sqrt() + beta[c]).collect())
        .collect()
}

fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

fn residual_eval(p: &ResidualParams<f32>, x: &[Vec<f64>], eps: f64) -> Vec<Vec<f64>> {
    let cout = p.conv_a.shape.out_channels;
    let bn = |h: &[Vec<f64>], b: &p1ch::model::kernels::BatchNormParams<f32>| {
        batchnorm_with(h, &to_f64(&b.gamma), &to_f64(&b.beta), &to_f64(&b.running_mean), &to_f64(&b.running_var), eps)
    };
    let mut a = bn(&conv1d(x, &to_f64(&p.conv_a.weight), None, cout, 3), &p.bn_a);
    relu(&mut a);
    let b = bn(&conv1d(&a, &to_f64(&p.conv_b.weight), None, cout, 3), &p.bn_b);
    let s = conv1d(x, &to_f64(&p.projection.weight), None, cout, 1);
    let mut out: Vec<Vec<f64>> = b.iter().zip(&s).map(|(u, v)| u.iter().zip(v).map(|(p, q)| p + q).collect()).collect();
    relu(&mut out);
    out
}

/// Eval-mode class probabilities of one pixel, computed with plain loops in
/// double precision.
pub fn forward_eval(params: &ModelParams<f32>, pixel: &[f64]) -> Vec<f64> {
    let eps = params.arch.bn_eps;
    let mut x = vec![pixel.to_vec()];
    x = conv1d(&x, &to_f64(&params.conv1.weight), params.conv1.bias.as_deref().map(to_f64).as_deref(), 16, 3);
    relu(&mut x);
    x = maxpool(&x);
    x = conv1d(&x, &to_f64(&params.conv2.weight), params.conv2.bias.as_deref().map(to_f64).as_deref(), 32, 3);
    relu(&mut x);
    x = maxpool(&x);
    x = residual_eval(&params.res1, &x, eps);
    x = residual_eval(&params.res2, &x, eps);
    let flat: Vec<f64> = x.into_iter().flatten().collect();
    let dense = |w: &[f32], b: &[f32], input: &[f64]| -> Vec<f64> {
        b.iter()
            .enumerate()
            .map(|(o, &bias)| bias as f64 + input.iter().enumerate().map(|(i, v)| w[o * input.len() + i] as f64 * v).sum::<f64>())
            .collect()
    };
    let hidden: Vec<f64> = dense(&params.fc1.weight, &params.fc1.bias, &flat).into_iter().map(|v| v.max(0.0)).collect();
    let logits = dense(&params.fc2.weight, &params.fc2.bias, &hidden);
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}
