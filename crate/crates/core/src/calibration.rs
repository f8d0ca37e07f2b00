//! Dark-reference construction and conversion of raw counts to normalized
//! reflectance.
//!
//! Two schemes are provided. `normalize_white_black` divides by the per-band
//! white-minus-black span; `normalize_max` replaces that span with a single
//! dataset-wide maximum `M` so no white target is needed. Outputs are not
//! clamped: values above 1 or slightly below 0 are kept as computed.
//!
//! Reference sidecar files (`HSB1`) hold one per-band vector:
//!
//! ```text
//! offset  size      field
//! 0       4         magic "HSB1"
//! 4       4         bands (u32 LE)
//! 8       8*bands   values (f64 LE)
//! ```

use std::fs;
use std::path::Path;

use crate::data::{read_u32, HyperCube};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"HSB1";

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceFrame {
    black: Vec<f64>,
    white: Option<Vec<f64>>,
    dataset_max: Option<f64>,
}

impl ReferenceFrame {
    pub fn new(black: Vec<f64>) -> Result<Self> {
        if black.is_empty() || black.iter().any(|v| !v.is_finite()) {
            return Err(Error::precondition("black reference must be a non-empty finite vector"));
        }
        Ok(Self { black, white: None, dataset_max: None })
    }

    /// Attaches a white reference; every band must satisfy `white > black`.
    pub fn with_white(mut self, white: Vec<f64>) -> Result<Self> {
        if white.len() != self.black.len() {
            return Err(Error::shape(format!("white has {} bands, black has {}", white.len(), self.black.len())));
        }
        if let Some(band) = white.iter().zip(&self.black).position(|(w, b)| !(w > b) || !w.is_finite()) {
            return Err(Error::precondition(format!(
                "white reference {} does not exceed black {} at band {band}",
                white[band], self.black[band]
            )));
        }
        self.white = Some(white);
        Ok(self)
    }

    pub fn with_dataset_max(mut self, m: f64) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::precondition(format!("dataset maximum must be positive, got {m}")));
        }
        self.dataset_max = Some(m);
        Ok(self)
    }

    pub fn bands(&self) -> usize {
        self.black.len()
    }

    pub fn black(&self) -> &[f64] {
        &self.black
    }

    pub fn white(&self) -> Option<&[f64]> {
        self.white.as_deref()
    }

    pub fn dataset_max(&self) -> Option<f64> {
        self.dataset_max
    }

    fn check_cube(&self, cube: &HyperCube) -> Result<()> {
        if cube.bands() != self.bands() {
            return Err(Error::shape(format!("cube has {} bands, reference has {}", cube.bands(), self.bands())));
        }
        Ok(())
    }
}

/// Per-band mean of a stack of dark lines (shutter closed).
pub fn build_black_reference(dark: &HyperCube) -> Result<Vec<f64>> {
    let raw = dark.require_raw()?;
    let bands = dark.bands();
    let mut sums = vec![0u64; bands];
    for px in raw.chunks_exact(bands) {
        for (s, &v) in sums.iter_mut().zip(px) {
            *s += v as u64;
        }
    }
    let n = dark.pixel_count() as f64;
    Ok(sums.into_iter().map(|s| s as f64 / n).collect())
}

/// Largest raw value across all cubes.
pub fn dataset_max<'a>(cubes: impl IntoIterator<Item = &'a HyperCube>) -> Result<f64> {
    let mut max = None;
    for c in cubes {
        let m = c.require_raw()?.iter().copied().max().unwrap_or(0);
        max = Some(max.map_or(m, |x: u16| x.max(m)));
    }
    max.map(f64::from).ok_or_else(|| Error::precondition("dataset_max needs at least one cube"))
}

/// Per-band affine map `out = (raw - offset) * scale`, shared by both schemes.
#[derive(Debug, Clone)]
pub struct Normalizer {
    offset: Vec<f64>,
    divisor: Vec<f64>,
}

impl Normalizer {
    pub fn white_black(reference: &ReferenceFrame) -> Result<Self> {
        let white = reference
            .white()
            .ok_or_else(|| Error::MissingReference("white reference required for white/black normalization".into()))?;
        Ok(Self {
            offset: reference.black.clone(),
            divisor: white.iter().zip(&reference.black).map(|(w, b)| w - b).collect(),
        })
    }

    pub fn max_reference(reference: &ReferenceFrame) -> Result<Self> {
        let m = reference
            .dataset_max()
            .ok_or_else(|| Error::MissingReference("dataset maximum M required for max normalization".into()))?;
        Ok(Self { offset: reference.black.clone(), divisor: vec![m; reference.bands()] })
    }

    pub fn bands(&self) -> usize {
        self.offset.len()
    }

    /// Normalized value of one raw sample in band `b`, before rounding to f32.
    pub fn value(&self, b: usize, raw: u16) -> f64 {
        (raw as f64 - self.offset[b]) / self.divisor[b]
    }

    /// Normalizes any whole number of pixels (e.g. one line) into `out`.
    pub fn apply(&self, raw: &[u16], out: &mut [f32]) {
        debug_assert_eq!(raw.len(), out.len());
        let bands = self.bands();
        for (px, dst) in raw.chunks_exact(bands).zip(out.chunks_exact_mut(bands)) {
            for b in 0..bands {
                dst[b] = self.value(b, px[b]) as f32;
            }
        }
    }

    pub fn normalize(&self, cube: &HyperCube) -> Result<HyperCube> {
        let raw = cube.require_raw()?;
        if cube.bands() != self.bands() {
            return Err(Error::shape(format!("cube has {} bands, reference has {}", cube.bands(), self.bands())));
        }
        let mut out = vec![0f32; raw.len()];
        self.apply(raw, &mut out);
        HyperCube::new_normalized(cube.rows(), cube.cols(), cube.bands(), out)
    }
}

/// `(I - black) / (white - black)` per band.
pub fn normalize_white_black(cube: &HyperCube, reference: &ReferenceFrame) -> Result<HyperCube> {
    reference.check_cube(cube)?;
    Normalizer::white_black(reference)?.normalize(cube)
}

/// `(I - black) / M` per band, with `M` the dataset maximum.
pub fn normalize_max(cube: &HyperCube, reference: &ReferenceFrame) -> Result<HyperCube> {
    reference.check_cube(cube)?;
    Normalizer::max_reference(reference)?.normalize(cube)
}

pub fn write_reference(values: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::with_capacity(8 + values.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(values.len() as u32).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_reference(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() < 8 || &bytes[0..4] != MAGIC {
        return Err(Error::MalformedHeader("reference file lacks \"HSB1\" header".into()));
    }
    let bands = read_u32(&bytes, 4) as usize;
    let expected = 8 + bands * 8;
    if bytes.len() < expected {
        return Err(Error::Truncated { expected, found: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(Error::TrailingData { expected, found: bytes.len() });
    }
    Ok(bytes[8..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
