use p1ch::data::ClassLabel;
use p1ch::model::{backward, forward, ArchConfig, Mode, ModelParams, INPUT_LEN};
use p1ch::training::cross_entropy_grad;
use rand::seq::index::sample;
use rand::Rng;

use super::rng;

/// Loss recomputed from probabilities with its own formula, not the
/// library's.
fn loss(params: &ModelParams<f64>, x: &[f64], y: &[ClassLabel], seed: u64) -> f64 {
    let t = forward(params, x, Mode::Train { dropout_seed: seed }).unwrap();
    let p = t.probabilities();
    y.iter().enumerate().map(|(i, l)| -p[i * 5 + l.index()].ln()).sum::<f64>() / y.len() as f64
}

pub struct TensorCheck {
    pub name: String,
    pub coords: usize,
    pub rel_error: f64,
}

/// Central differences with step `eps` on a sample of coordinates of every
/// trainable tensor: the `top` largest analytic entries plus `random` others.
pub fn check(seed: u64, batch: usize, eps: f64, top: usize, random: usize) -> Vec<TensorCheck> {
    let mut r = rng(seed);
    let params = ModelParams::<f32>::init(seed, ArchConfig::default()).cast::<f64>();
    let x: Vec<f64> = (0..batch * INPUT_LEN).map(|_| r.random_range(0.0..1.0)).collect();
    let y: Vec<ClassLabel> = (0..batch).map(|_| ClassLabel::ALL[r.random_range(0..5)]).collect();
    let dseed = seed.wrapping_mul(31) + 7;

    let trace = forward(&params, &x, Mode::Train { dropout_seed: dseed }).unwrap();
    let dl = cross_entropy_grad(trace.probabilities(), &y).unwrap();
    let grads = backward(&params, &trace, &dl).unwrap().grads;

    let mut out = Vec::new();
    let names: Vec<(String, Vec<f64>)> = grads.trainable().into_iter().map(|(n, g)| (n, g.to_vec())).collect();
    for (t, (name, g)) in names.iter().enumerate() {
        let mut coords: Vec<usize> = (0..g.len()).collect();
        coords.sort_by(|&a, &b| g[b].abs().total_cmp(&g[a].abs()));
        coords.truncate(top.min(g.len()));
        let extra = random.min(g.len());
        for i in sample(&mut r, g.len(), extra) {
            if !coords.contains(&i) {
                coords.push(i);
            }
        }
        let (mut num, mut an) = (Vec::new(), Vec::new());
        for &i in &coords {
            let mut p = params.clone();
            let base = p.trainable_mut()[t][i];
            p.trainable_mut()[t][i] = base + eps;
            let plus = loss(&p, &x, &y, dseed);
            p.trainable_mut()[t][i] = base - eps;
            let minus = loss(&p, &x, &y, dseed);
            num.push((plus - minus) / (2.0 * eps));
            an.push(g[i]);
        }
        let diff = num.iter().zip(&an).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = num.iter().map(|v| v * v).sum::<f64>().sqrt().max(an.iter().map(|v| v * v).sum::<f64>().sqrt());
        let rel_error = if scale == 0.0 { 0.0 } else { diff / scale };
        out.push(TensorCheck { name: name.clone(), coords: coords.len(), rel_error });
    }
    out
}
