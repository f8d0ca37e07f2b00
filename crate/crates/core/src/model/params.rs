//! Network parameters, initialization and the `P1CH` checkpoint format.
//!
//! Checkpoint layout (little-endian):
//!
//! ```text
//! "P1CH"            magic
//! u8                format version (1)
//! f64 ×3            dropout rate, batch-norm epsilon, batch-norm momentum
//! u32               tensor count
//! per tensor:
//!   u8 + bytes      name length and ASCII name
//!   u32             rank
//!   u32 × rank      dimensions
//!   f32 × Π dims    values, row-major
//! ```

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kernels::{BatchNormParams, ConvShape};
use super::scalar::Scalar;
use crate::data::read_u32;
use crate::error::{Error, Result};

pub const INPUT_LEN: usize = 224;
pub const OUTPUT_CLASSES: usize = 5;
pub const CONV1_FILTERS: usize = 16;
pub const CONV2_FILTERS: usize = 32;
pub const RES1_CHANNELS: usize = 64;
pub const RES2_CHANNELS: usize = 128;
/// Length after the two pooling stages.
pub const FEATURE_LEN: usize = INPUT_LEN / 4;
pub const FLAT_LEN: usize = RES2_CHANNELS * FEATURE_LEN;
pub const HIDDEN: usize = 512;

const MAGIC: &[u8; 4] = b"P1CH";
pub const CHECKPOINT_VERSION: u8 = 1;

/// Hyper-constants that are not learned but shape the forward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArchConfig {
    pub dropout: f64,
    pub bn_eps: f64,
    pub bn_momentum: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self { dropout: 0.5, bn_eps: 1e-5, bn_momentum: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv<T> {
    pub shape: ConvShape,
    pub weight: Vec<T>,
    pub bias: Option<Vec<T>>,
}

impl<T: Scalar> Conv<T> {
    fn zeros(out_channels: usize, in_channels: usize, kernel: usize, with_bias: bool) -> Self {
        let shape = ConvShape { out_channels, in_channels, kernel };
        Self {
            shape,
            weight: vec![T::zero(); shape.weight_len()],
            bias: with_bias.then(|| vec![T::zero(); out_channels]),
        }
    }
}

/// Two conv+BN layers plus a 1×1 projection on the skip path.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualParams<T> {
    pub conv_a: Conv<T>,
    pub bn_a: BatchNormParams<T>,
    pub conv_b: Conv<T>,
    pub bn_b: BatchNormParams<T>,
    pub projection: Conv<T>,
}

impl<T: Scalar> ResidualParams<T> {
    fn zeros(in_channels: usize, channels: usize) -> Self {
        Self {
            conv_a: Conv::zeros(channels, in_channels, 3, false),
            bn_a: BatchNormParams::identity(channels),
            conv_b: Conv::zeros(channels, channels, 3, false),
            bn_b: BatchNormParams::identity(channels),
            projection: Conv::zeros(channels, in_channels, 1, false),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.conv_a.shape.out_channels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub out_dim: usize,
    pub in_dim: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self { out_dim, in_dim, weight: vec![T::zero(); out_dim * in_dim], bias: vec![T::zero(); out_dim] }
    }
}

/// Every weight, bias and batch-norm statistic of the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub arch: ArchConfig,
    pub conv1: Conv<T>,
    pub conv2: Conv<T>,
    pub res1: ResidualParams<T>,
    pub res2: ResidualParams<T>,
    pub fc1: Dense<T>,
    pub fc2: Dense<T>,
}

/// Gradient container with the same layout as the parameters; its running
/// statistics are unused.
pub type Gradients<T> = ModelParams<T>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TensorKind {
    Trainable,
    RunningStat,
}

impl<T: Scalar> ModelParams<T> {
    /// All-zero parameters (identity batch norms) with the fixed architecture.
    pub fn zeros(arch: ArchConfig) -> Self {
        Self {
            arch,
            conv1: Conv::zeros(CONV1_FILTERS, 1, 3, true),
            conv2: Conv::zeros(CONV2_FILTERS, CONV1_FILTERS, 3, true),
            res1: ResidualParams::zeros(CONV2_FILTERS, RES1_CHANNELS),
            res2: ResidualParams::zeros(RES1_CHANNELS, RES2_CHANNELS),
            fc1: Dense::zeros(HIDDEN, FLAT_LEN),
            fc2: Dense::zeros(OUTPUT_CLASSES, HIDDEN),
        }
    }

    /// Fan-in scaled uniform initialization, `U(-1/√fan_in, 1/√fan_in)` for
    /// every weight and bias; batch norms start as identity.
    pub fn init(seed: u64, arch: ArchConfig) -> Self {
        let mut p = Self::zeros(arch);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fill = |v: &mut [T], fan_in: usize, rng: &mut ChaCha8Rng| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for x in v {
                *x = T::of(rng.random_range(-bound..bound));
            }
        };
        for conv in p.convs_mut() {
            let fan_in = conv.shape.in_channels * conv.shape.kernel;
            fill(&mut conv.weight, fan_in, &mut rng);
            if let Some(b) = conv.bias.as_mut() {
                fill(b, fan_in, &mut rng);
            }
        }
        for dense in [&mut p.fc1, &mut p.fc2] {
            fill(&mut dense.weight, dense.in_dim, &mut rng);
            fill(&mut dense.bias, dense.in_dim, &mut rng);
        }
        p
    }

    fn convs_mut(&mut self) -> [&mut Conv<T>; 8] {
        [
            &mut self.conv1,
            &mut self.conv2,
            &mut self.res1.conv_a,
            &mut self.res1.conv_b,
            &mut self.res1.projection,
            &mut self.res2.conv_a,
            &mut self.res2.conv_b,
            &mut self.res2.projection,
        ]
    }

    /// Every tensor with its name, dimensions and kind, in checkpoint order.
    fn tensors(&self) -> Vec<NamedTensor<'_, T>> {
        use TensorKind::*;
        let mut out = Vec::new();
        conv_tensors("conv1", &self.conv1, &mut out);
        conv_tensors("conv2", &self.conv2, &mut out);
        for (rname, r) in [("res1", &self.res1), ("res2", &self.res2)] {
            conv_tensors(&format!("{rname}.conv_a"), &r.conv_a, &mut out);
            bn_tensors(&format!("{rname}.bn_a"), &r.bn_a, &mut out);
            conv_tensors(&format!("{rname}.conv_b"), &r.conv_b, &mut out);
            bn_tensors(&format!("{rname}.bn_b"), &r.bn_b, &mut out);
            conv_tensors(&format!("{rname}.projection"), &r.projection, &mut out);
        }
        for (name, d) in [("fc1", &self.fc1), ("fc2", &self.fc2)] {
            out.push((format!("{name}.weight"), vec![d.out_dim, d.in_dim], Trainable, &d.weight));
            out.push((format!("{name}.bias"), vec![d.out_dim], Trainable, &d.bias));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<(TensorKind, &mut Vec<T>)> {
        use TensorKind::*;
        let mut out: Vec<(TensorKind, &mut Vec<T>)> = Vec::new();
        fn conv<'a, T>(c: &'a mut Conv<T>, out: &mut Vec<(TensorKind, &'a mut Vec<T>)>) {
            out.push((TensorKind::Trainable, &mut c.weight));
            if let Some(b) = c.bias.as_mut() {
                out.push((TensorKind::Trainable, b));
            }
        }
        fn bn<'a, T>(b: &'a mut BatchNormParams<T>, out: &mut Vec<(TensorKind, &'a mut Vec<T>)>) {
            out.push((TensorKind::Trainable, &mut b.gamma));
            out.push((TensorKind::Trainable, &mut b.beta));
            out.push((TensorKind::RunningStat, &mut b.running_mean));
            out.push((TensorKind::RunningStat, &mut b.running_var));
        }
        conv(&mut self.conv1, &mut out);
        conv(&mut self.conv2, &mut out);
        for r in [&mut self.res1, &mut self.res2] {
            conv(&mut r.conv_a, &mut out);
            bn(&mut r.bn_a, &mut out);
            conv(&mut r.conv_b, &mut out);
            bn(&mut r.bn_b, &mut out);
            conv(&mut r.projection, &mut out);
        }
        for d in [&mut self.fc1, &mut self.fc2] {
            out.push((Trainable, &mut d.weight));
            out.push((Trainable, &mut d.bias));
        }
        out
    }

    /// Learned tensors with their names, in a fixed order.
    pub fn trainable(&self) -> Vec<(String, &[T])> {
        self.tensors()
            .into_iter()
            .filter(|t| t.2 == TensorKind::Trainable)
            .map(|(name, _, _, v)| (name, v.as_slice()))
            .collect()
    }

    /// Learned tensors in the same order as [`trainable`](Self::trainable).
    pub fn trainable_mut(&mut self) -> Vec<&mut [T]> {
        self.tensors_mut()
            .into_iter()
            .filter(|t| t.0 == TensorKind::Trainable)
            .map(|(_, v)| v.as_mut_slice())
            .collect()
    }

    pub fn trainable_count(&self) -> usize {
        self.trainable().iter().map(|(_, v)| v.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.3.iter().all(|v| v.is_finite()))
    }

    /// Gradient buffer shaped like `self` with every learned tensor zero.
    pub fn zeros_like(&self) -> Gradients<T> {
        let mut g = Self::zeros(self.arch);
        for t in g.trainable_mut() {
            t.fill(T::zero());
        }
        g
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let mut out = ModelParams::<U>::zeros(self.arch);
        for ((_, src), (_, dst)) in self.tensors_mut_free().into_iter().zip(out.tensors_mut()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = U::of(s.f64());
            }
        }
        out
    }

    fn tensors_mut_free(&self) -> Vec<(TensorKind, &Vec<T>)> {
        self.tensors().into_iter().map(|(_, _, k, v)| (k, v)).collect()
    }
}

type NamedTensor<'a, T> = (String, Vec<usize>, TensorKind, &'a Vec<T>);

fn conv_tensors<'a, T>(name: &str, c: &'a Conv<T>, out: &mut Vec<NamedTensor<'a, T>>) {
    let s = c.shape;
    out.push((format!("{name}.weight"), vec![s.out_channels, s.in_channels, s.kernel], TensorKind::Trainable, &c.weight));
    if let Some(b) = &c.bias {
        out.push((format!("{name}.bias"), vec![s.out_channels], TensorKind::Trainable, b));
    }
}

fn bn_tensors<'a, T>(name: &str, b: &'a BatchNormParams<T>, out: &mut Vec<NamedTensor<'a, T>>) {
    let c = vec![b.gamma.len()];
    out.push((format!("{name}.gamma"), c.clone(), TensorKind::Trainable, &b.gamma));
    out.push((format!("{name}.beta"), c.clone(), TensorKind::Trainable, &b.beta));
    out.push((format!("{name}.running_mean"), c.clone(), TensorKind::RunningStat, &b.running_mean));
    out.push((format!("{name}.running_var"), c, TensorKind::RunningStat, &b.running_var));
}

impl ModelParams<f32> {
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let tensors = self.tensors();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(CHECKPOINT_VERSION);
        for v in [self.arch.dropout, self.arch.bn_eps, self.arch.bn_momentum] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (name, dims, _, values) in tensors {
            out.push(name.len() as u8);
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
            for d in dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::MalformedHeader("checkpoint lacks \"P1CH\" magic".into()));
        }
        let version = r.take(1)?[0];
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version { found: version, expected: CHECKPOINT_VERSION });
        }
        let arch = ArchConfig { dropout: r.f64()?, bn_eps: r.f64()?, bn_momentum: r.f64()? };
        if !(0.0..1.0).contains(&arch.dropout) || !(arch.bn_eps > 0.0) || !(0.0..=1.0).contains(&arch.bn_momentum) {
            return Err(Error::MalformedHeader(format!("implausible architecture constants {arch:?}")));
        }
        let mut params = Self::zeros(arch);
        let expected: Vec<(String, Vec<usize>)> = params.tensors().into_iter().map(|(n, d, _, _)| (n, d)).collect();
        let count = r.u32()? as usize;
        if count != expected.len() {
            return Err(Error::shape(format!("checkpoint holds {count} tensors, architecture has {}", expected.len())));
        }
        let mut loaded = Vec::with_capacity(count);
        for (name, dims) in &expected {
            let name_len = r.take(1)?[0] as usize;
            let got_name = String::from_utf8_lossy(r.take(name_len)?).into_owned();
            let rank = r.u32()? as usize;
            let got_dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            if &got_name != name || &got_dims != dims {
                return Err(Error::shape(format!("tensor {got_name} {got_dims:?} where {name} {dims:?} was expected")));
            }
            let n: usize = dims.iter().product();
            let raw = r.take(n * 4)?;
            loaded.push(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect::<Vec<f32>>());
        }
        if r.pos != bytes.len() {
            return Err(Error::TrailingData { expected: r.pos, found: bytes.len() });
        }
        for ((_, dst), src) in params.tensors_mut().into_iter().zip(loaded) {
            *dst = src;
        }
        if !params.is_finite() {
            return Err(Error::precondition("checkpoint contains non-finite values"));
        }
        Ok(params)
    }

    /// Architecture constants as `key = value` lines for audit.
    pub fn manifest_text(&self) -> String {
        let mut s = String::new();
        s.push_str("architecture = p1ch\n");
        s.push_str(&format!("input_len = {INPUT_LEN}\n"));
        s.push_str(&format!("conv1_filters = {CONV1_FILTERS}\n"));
        s.push_str(&format!("conv2_filters = {CONV2_FILTERS}\n"));
        s.push_str(&format!("res1_channels = {RES1_CHANNELS}\n"));
        s.push_str(&format!("res2_channels = {RES2_CHANNELS}\n"));
        s.push_str(&format!("flatten_width = {FLAT_LEN}\n"));
        s.push_str(&format!("hidden = {HIDDEN}\n"));
        s.push_str(&format!("classes = {OUTPUT_CLASSES}\n"));
        s.push_str(&format!("dropout = {}\n", self.arch.dropout));
        s.push_str(&format!("bn_eps = {}\n", self.arch.bn_eps));
        s.push_str(&format!("bn_momentum = {}\n", self.arch.bn_momentum));
        s.push_str(&format!("trainable_parameters = {}\n", self.trainable_count()));
        s
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Truncated { expected: end, found: self.bytes.len() });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let at = self.pos;
        self.take(4)?;
        Ok(read_u32(self.bytes, at))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn save_checkpoint(params: &ModelParams<f32>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, params.to_checkpoint_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams<f32>> {
    ModelParams::from_checkpoint_bytes(&fs::read(path)?)
}
