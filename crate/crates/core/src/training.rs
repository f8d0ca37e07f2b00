//! Train/validation split, cross-entropy loss, Adam, the warmup plus cosine
//! learning-rate schedule and the epoch loop with best-validation selection.
//!
//! The loss is the batch mean of `-ln p[label]` rather than the sum, so the
//! learning rate does not scale with batch size.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ClassLabel, PixelDataset};
use crate::error::{Error, Result};
use crate::kv;
use crate::model::{self, argmax_rows, save_checkpoint, ArchConfig, Gradients, Mode, ModelParams, Scalar, INPUT_LEN, OUTPUT_CLASSES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub warmup: usize,
    pub lr_init: f64,
    pub lr_max: f64,
    pub lr_min: f64,
    pub batch_size: usize,
    pub val_fraction: f64,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            warmup: 10,
            lr_init: 1e-3,
            lr_max: 1e-3,
            lr_min: 1e-4,
            batch_size: 640,
            val_fraction: 0.10,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(0 < self.warmup && self.warmup < self.epochs) {
            return bad("need 0 < warmup < epochs");
        }
        if !(self.lr_min <= self.lr_max) || self.lr_min < 0.0 || !(self.lr_init > 0.0) {
            return bad("need 0 <= lr_min <= lr_max and lr_init > 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad("val_fraction must lie in (0, 1)");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps > 0.0) {
            return bad("adam betas must lie in [0, 1) and eps must be positive");
        }
        Ok(())
    }

    /// Reads a `key = value` file. Missing keys keep their defaults.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for e in kv::parse(text)? {
            match e.key.as_str() {
                "epochs" => c.epochs = e.parse()?,
                "warmup" => c.warmup = e.parse()?,
                "lr_init" => c.lr_init = e.parse()?,
                "lr_max" => c.lr_max = e.parse()?,
                "lr_min" => c.lr_min = e.parse()?,
                "batch_size" => c.batch_size = e.parse()?,
                "val_fraction" => c.val_fraction = e.parse()?,
                "seed" => c.seed = e.parse()?,
                "adam_beta1" => c.adam_beta1 = e.parse()?,
                "adam_beta2" => c.adam_beta2 = e.parse()?,
                "adam_eps" => c.adam_eps = e.parse()?,
                _ => return Err(e.unknown()),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn to_kv(&self) -> String {
        format!(
            "epochs = {}\nwarmup = {}\nlr_init = {:e}\nlr_max = {:e}\nlr_min = {:e}\nbatch_size = {}\nval_fraction = {}\nseed = {}\nadam_beta1 = {}\nadam_beta2 = {}\nadam_eps = {:e}\n",
            self.epochs,
            self.warmup,
            self.lr_init,
            self.lr_max,
            self.lr_min,
            self.batch_size,
            self.val_fraction,
            self.seed,
            self.adam_beta1,
            self.adam_beta2,
            self.adam_eps
        )
    }
}

/// Shuffles `ds` with `cfg.seed` and cuts it into `⌈(1-f)N⌉` training and
/// `⌊fN⌋` validation samples.
pub fn split_train_val(ds: &PixelDataset, cfg: &TrainConfig) -> Result<(PixelDataset, PixelDataset)> {
    let n = ds.len();
    if n < 10 {
        return Err(Error::precondition(format!("need at least 10 samples to split, got {n}")));
    }
    if !(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0) {
        return Err(Error::Config("val_fraction must lie in (0, 1)".into()));
    }
    let n_val = (cfg.val_fraction * n as f64 + 1e-9).floor() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let (train, val) = idx.split_at(n - n_val);
    Ok((ds.subset(train), ds.subset(val)))
}

/// Learning rate of epoch `t` (1-based): linear warmup to `lr_init` over
/// `warmup` epochs, then cosine decay from `lr_max` to `lr_min`.
pub fn lr_schedule(t: usize, cfg: &TrainConfig) -> Result<f64> {
    if t < 1 || t > cfg.epochs {
        return Err(Error::precondition(format!("epoch {t} outside 1..={}", cfg.epochs)));
    }
    if cfg.warmup == 0 || cfg.warmup >= cfg.epochs {
        return Err(Error::Config("need 0 < warmup < epochs".into()));
    }
    let (t, tw, tt) = (t as f64, cfg.warmup as f64, cfg.epochs as f64);
    Ok(if t <= tw {
        cfg.lr_init * t / tw
    } else {
        cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + ((t - tw) * std::f64::consts::PI / (tt - tw)).cos())
    })
}

fn check_probabilities<T: Scalar>(probabilities: &[T], labels: &[ClassLabel]) -> Result<()> {
    if probabilities.len() != labels.len() * OUTPUT_CLASSES || labels.is_empty() {
        return Err(Error::shape(format!("{} probabilities for {} labels", probabilities.len(), labels.len())));
    }
    for (i, row) in probabilities.chunks_exact(OUTPUT_CLASSES).enumerate() {
        let s: f64 = row.iter().map(|p| p.f64()).sum();
        if (s - 1.0).abs() > 1e-5 {
            return Err(Error::precondition(format!("probability row {i} sums to {s}")));
        }
    }
    Ok(())
}

/// Mean over the batch of `-ln max(p[label], 1e-12)`.
pub fn cross_entropy<T: Scalar>(probabilities: &[T], labels: &[ClassLabel]) -> Result<f64> {
    check_probabilities(probabilities, labels)?;
    let total: f64 = probabilities
        .chunks_exact(OUTPUT_CLASSES)
        .zip(labels)
        .map(|(row, l)| -row[l.index()].f64().max(1e-12).ln())
        .sum();
    Ok(total / labels.len() as f64)
}

/// Gradient of the mean cross-entropy with respect to the logits of a
/// softmax output: `(p - onehot) / B`.
pub fn cross_entropy_grad<T: Scalar>(probabilities: &[T], labels: &[ClassLabel]) -> Result<Vec<T>> {
    check_probabilities(probabilities, labels)?;
    let inv_b = T::of(1.0 / labels.len() as f64);
    let mut g = probabilities.to_vec();
    for (row, l) in g.chunks_exact_mut(OUTPUT_CLASSES).zip(labels) {
        row[l.index()] -= T::one();
        row.iter_mut().for_each(|v| *v *= inv_b);
    }
    Ok(g)
}

/// First and second moment estimates, one buffer per trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ModelParams<T>) -> Self {
        let m: Vec<Vec<T>> = params.trainable().iter().map(|(_, t)| vec![T::zero(); t.len()]).collect();
        Self { step: 0, v: m.clone(), m }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl From<&TrainConfig> for AdamHyper {
    fn from(c: &TrainConfig) -> Self {
        Self { beta1: c.adam_beta1, beta2: c.adam_beta2, eps: c.adam_eps }
    }
}

/// One bias-corrected Adam update of a single tensor; `step` is the new
/// (1-based) step count.
pub fn adam_update<T: Scalar>(param: &mut [T], grad: &[T], m: &mut [T], v: &mut [T], step: u64, lr: f64, h: AdamHyper) {
    let (b1, b2) = (T::of(h.beta1), T::of(h.beta2));
    let (c1, c2) = (T::one() - b1, T::one() - b2);
    let bc1 = 1.0 - h.beta1.powi(step as i32);
    let bc2 = 1.0 - h.beta2.powi(step as i32);
    let step_size = T::of(lr / bc1);
    let inv_sqrt_bc2 = T::of(1.0 / bc2.sqrt());
    let eps = T::of(h.eps);
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = b1 * m[i] + c1 * g;
        v[i] = b2 * v[i] + c2 * g * g;
        param[i] -= step_size * m[i] / (v[i].sqrt() * inv_sqrt_bc2 + eps);
    }
}

pub fn adam_step<T: Scalar>(params: &mut ModelParams<T>, grads: &Gradients<T>, state: &mut AdamState<T>, lr: f64, h: AdamHyper) -> Result<()> {
    let g = grads.trainable();
    let p = params.trainable_mut();
    if g.len() != p.len() || state.m.len() != p.len() || state.v.len() != p.len() {
        return Err(Error::shape("optimizer state does not match parameters"));
    }
    for (i, ((gp, pp), (m, v))) in g.iter().zip(&p).zip(state.m.iter().zip(&state.v)).enumerate() {
        if gp.1.len() != pp.len() || m.len() != pp.len() || v.len() != pp.len() {
            return Err(Error::shape(format!("tensor {i} ({}) has mismatched length", gp.0)));
        }
    }
    state.step += 1;
    for (((pp, (_, gp)), m), v) in p.into_iter().zip(g).zip(&mut state.m).zip(&mut state.v) {
        adam_update(pp, gp, m, v, state.step, lr, h);
    }
    Ok(())
}

/// Visiting order of `n` samples in `epoch`, reproducible from `(seed, epoch)`.
pub fn epoch_permutation(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn dropout_seed(seed: u64, epoch: usize, batch: usize) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ epoch as u64) ^ batch as u64)
}

fn init_seed(seed: u64) -> u64 {
    splitmix(seed ^ 0x5EED_1417)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub train_samples: usize,
    pub val_samples: usize,
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub checkpoint: Option<PathBuf>,
}

impl TrainReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })
    }
}

fn gather(ds: &PixelDataset, idx: &[usize]) -> (Vec<f32>, Vec<ClassLabel>) {
    let mut x = Vec::with_capacity(idx.len() * INPUT_LEN);
    let mut y = Vec::with_capacity(idx.len());
    for &i in idx {
        x.extend_from_slice(ds.feature(i));
        y.push(ds.labels()[i]);
    }
    (x, y)
}

/// Eval-mode accuracy of `params` on `ds`, processed in chunks of `chunk`.
pub fn accuracy_on(params: &ModelParams<f32>, ds: &PixelDataset, chunk: usize) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::precondition("accuracy of an empty dataset"));
    }
    let mut correct = 0usize;
    for start in (0..ds.len()).step_by(chunk.max(1)) {
        let end = (start + chunk.max(1)).min(ds.len());
        let x = &ds.features()[start * INPUT_LEN..end * INPUT_LEN];
        let pred = model::predict(params, x)?;
        correct += pred.iter().zip(&ds.labels()[start..end]).filter(|(p, l)| p == l).count();
    }
    Ok(correct as f64 / ds.len() as f64)
}

/// Optional hooks for [`train`].
#[derive(Default)]
pub struct TrainOptions<'a> {
    /// Written whenever validation accuracy improves.
    pub checkpoint: Option<&'a Path>,
    pub on_epoch: Option<&'a mut dyn FnMut(&EpochRecord)>,
    pub arch: ArchConfig,
}

/// Splits `ds` and trains a freshly initialized model.
pub fn train(ds: &PixelDataset, cfg: &TrainConfig, opts: TrainOptions<'_>) -> Result<(ModelParams<f32>, TrainReport)> {
    let (tr, val) = split_train_val(ds, cfg)?;
    train_split(&tr, &val, cfg, opts)
}

/// Runs `cfg.epochs` epochs on `tr` and returns the parameters of the epoch
/// with the highest accuracy on `val` (the earliest one on ties).
pub fn train_split(
    tr: &PixelDataset,
    val: &PixelDataset,
    cfg: &TrainConfig,
    mut opts: TrainOptions<'_>,
) -> Result<(ModelParams<f32>, TrainReport)> {
    cfg.validate()?;
    if tr.is_empty() || val.is_empty() {
        return Err(Error::precondition("training and validation sets must be non-empty"));
    }
    if tr.bands() != INPUT_LEN || val.bands() != INPUT_LEN {
        return Err(Error::shape(format!("model expects {INPUT_LEN} bands, dataset has {}", tr.bands())));
    }
    let mut params = ModelParams::<f32>::init(init_seed(cfg.seed), opts.arch);
    let mut state = AdamState::new(&params);
    let hyper = AdamHyper::from(cfg);
    let mut best: Option<(usize, f64, ModelParams<f32>)> = None;
    let mut records = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let lr = lr_schedule(epoch, cfg)?;
        let order = epoch_permutation(tr.len(), cfg.seed, epoch);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let (x, y) = gather(tr, idx);
            let trace = model::forward(&params, &x, Mode::Train { dropout_seed: dropout_seed(cfg.seed, epoch, b) })?;
            loss_sum += cross_entropy(trace.probabilities(), &y)? * y.len() as f64;
            correct += argmax_rows(trace.probabilities()).iter().zip(&y).filter(|(p, l)| p == l).count();
            let dlogits = cross_entropy_grad(trace.probabilities(), &y)?;
            let grads = model::backward(&params, &trace, &dlogits)?.grads;
            model::apply_running_stats(&mut params, &trace);
            adam_step(&mut params, &grads, &mut state, lr, hyper)?;
        }
        if !params.is_finite() {
            return Err(Error::Runtime(format!("parameters diverged in epoch {epoch}")));
        }
        let val_accuracy = accuracy_on(&params, val, cfg.batch_size)?;
        let record = EpochRecord {
            epoch,
            learning_rate: lr,
            train_loss: loss_sum / tr.len() as f64,
            train_accuracy: correct as f64 / tr.len() as f64,
            val_accuracy,
        };
        if best.as_ref().is_none_or(|(_, acc, _)| val_accuracy > *acc) {
            if let Some(path) = opts.checkpoint {
                save_checkpoint(&params, path)?;
            }
            best = Some((epoch, val_accuracy, params.clone()));
        }
        if let Some(f) = opts.on_epoch.as_mut() {
            f(&record);
        }
        records.push(record);
    }

    let (best_epoch, best_val_accuracy, best_params) = best.expect("at least one epoch ran");
    let report = TrainReport {
        config: cfg.clone(),
        train_samples: tr.len(),
        val_samples: val.len(),
        epochs: records,
        best_epoch,
        best_val_accuracy,
        checkpoint: opts.checkpoint.map(Path::to_path_buf),
    };
    Ok((best_params, report))
}
