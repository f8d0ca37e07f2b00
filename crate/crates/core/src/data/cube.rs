//! Hyperspectral cubes and the `HSC1` file format.
//!
//! Layout on disk (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "HSC1"
//! 4       4     rows  (u32)
//! 8       4     cols  (u32)
//! 12      4     bands (u32)
//! 16      1     dtype (0 = Raw16 as u16, 1 = NormalizedF32 as f32)
//! 17      ...   payload, band-interleaved-by-pixel, rows outermost
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::read_u32;
use crate::error::{Error, Result};

/// Spatial width of one pushbroom line.
pub const COLS: usize = 640;
/// Spectral bands per pixel (900–1700 nm).
pub const BANDS: usize = 224;
/// Largest value the 12-bit ADC can produce.
pub const RAW_MAX: u16 = 4095;

const MAGIC: &[u8; 4] = b"HSC1";
const HEADER_LEN: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CubeState {
    Raw16,
    NormalizedF32,
}

impl CubeState {
    fn dtype(self) -> u8 {
        match self {
            CubeState::Raw16 => 0,
            CubeState::NormalizedF32 => 1,
        }
    }

    fn sample_bytes(self) -> usize {
        match self {
            CubeState::Raw16 => 2,
            CubeState::NormalizedF32 => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CubeData {
    Raw16(Vec<u16>),
    NormalizedF32(Vec<f32>),
}

/// A `rows × cols × bands` spectral image stored pixel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube {
    rows: usize,
    cols: usize,
    bands: usize,
    data: CubeData,
}

impl HyperCube {
    pub fn new_raw(rows: usize, cols: usize, bands: usize, data: Vec<u16>) -> Result<Self> {
        check_dims(rows, cols, bands, data.len())?;
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, &v)| v > RAW_MAX) {
            return Err(Error::RawOutOfRange { value, index });
        }
        Ok(Self { rows, cols, bands, data: CubeData::Raw16(data) })
    }

    pub fn new_normalized(rows: usize, cols: usize, bands: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(rows, cols, bands, data.len())?;
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(index));
        }
        Ok(Self { rows, cols, bands, data: CubeData::NormalizedF32(data) })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixel_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn state(&self) -> CubeState {
        match self.data {
            CubeData::Raw16(_) => CubeState::Raw16,
            CubeData::NormalizedF32(_) => CubeState::NormalizedF32,
        }
    }

    pub fn data(&self) -> &CubeData {
        &self.data
    }

    pub fn raw(&self) -> Option<&[u16]> {
        match &self.data {
            CubeData::Raw16(v) => Some(v),
            CubeData::NormalizedF32(_) => None,
        }
    }

    pub fn normalized(&self) -> Option<&[f32]> {
        match &self.data {
            CubeData::NormalizedF32(v) => Some(v),
            CubeData::Raw16(_) => None,
        }
    }

    /// Normalized samples, or a precondition error for raw cubes.
    pub fn require_normalized(&self) -> Result<&[f32]> {
        self.normalized()
            .ok_or_else(|| Error::precondition("cube must be normalized (NormalizedF32), found Raw16"))
    }

    pub fn require_raw(&self) -> Result<&[u16]> {
        self.raw()
            .ok_or_else(|| Error::precondition("cube must be raw (Raw16), found NormalizedF32"))
    }

    /// Samples of one spatial line (`cols × bands`) of a normalized cube.
    pub fn normalized_line(&self, row: usize) -> Option<&[f32]> {
        let n = self.cols * self.bands;
        self.normalized().map(|v| &v[row * n..(row + 1) * n])
    }

    pub fn raw_line(&self, row: usize) -> Option<&[u16]> {
        let n = self.cols * self.bands;
        self.raw().map(|v| &v[row * n..(row + 1) * n])
    }

    /// Copy of the spatial window `rows × cols`, all bands kept.
    pub fn crop(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Result<Self> {
        if rows.end > self.rows || cols.end > self.cols || rows.is_empty() || cols.is_empty() {
            return Err(Error::shape(format!(
                "crop {rows:?}×{cols:?} outside {}×{}",
                self.rows, self.cols
            )));
        }
        let (r, c, b) = (rows.len(), cols.len(), self.bands);
        fn gather<T: Copy>(src: &[T], full_cols: usize, b: usize, rows: &std::ops::Range<usize>, cols: &std::ops::Range<usize>) -> Vec<T> {
            let mut out = Vec::with_capacity(rows.len() * cols.len() * b);
            for y in rows.clone() {
                let start = (y * full_cols + cols.start) * b;
                out.extend_from_slice(&src[start..start + cols.len() * b]);
            }
            out
        }
        let data = match &self.data {
            CubeData::Raw16(v) => CubeData::Raw16(gather(v, self.cols, b, &rows, &cols)),
            CubeData::NormalizedF32(v) => CubeData::NormalizedF32(gather(v, self.cols, b, &rows, &cols)),
        };
        Ok(Self { rows: r, cols: c, bands: b, data })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let state = self.state();
        let mut out = Vec::with_capacity(HEADER_LEN + self.rows * self.cols * self.bands * state.sample_bytes());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        out.extend_from_slice(&(self.bands as u32).to_le_bytes());
        out.push(state.dtype());
        match &self.data {
            CubeData::Raw16(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            CubeData::NormalizedF32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::MalformedHeader(format!("{} bytes is shorter than the 17-byte header", bytes.len())));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::MalformedHeader(format!("bad magic {:?}, expected \"HSC1\"", String::from_utf8_lossy(&bytes[0..4]))));
        }
        let rows = read_u32(bytes, 4) as usize;
        let cols = read_u32(bytes, 8) as usize;
        let bands = read_u32(bytes, 12) as usize;
        let state = match bytes[16] {
            0 => CubeState::Raw16,
            1 => CubeState::NormalizedF32,
            d => return Err(Error::MalformedHeader(format!("unknown dtype {d}"))),
        };
        if rows == 0 || cols == 0 || bands == 0 {
            return Err(Error::MalformedHeader(format!("degenerate shape {rows}×{cols}×{bands}")));
        }
        let count = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(bands))
            .ok_or_else(|| Error::MalformedHeader("shape overflows".into()))?;
        let expected = HEADER_LEN + count * state.sample_bytes();
        let found = bytes.len();
        if found < expected {
            return Err(Error::Truncated { expected, found });
        }
        if found > expected {
            return Err(Error::TrailingData { expected, found });
        }
        let payload = &bytes[HEADER_LEN..];
        match state {
            CubeState::Raw16 => {
                let data = payload
                    .chunks_exact(2)
                    .map(|c| u16::from_le_bytes([c[0], c[1]]))
                    .collect();
                Self::new_raw(rows, cols, bands, data)
            }
            CubeState::NormalizedF32 => {
                let data = payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect();
                Self::new_normalized(rows, cols, bands, data)
            }
        }
    }
}

fn check_dims(rows: usize, cols: usize, bands: usize, len: usize) -> Result<()> {
    if rows == 0 || cols == 0 || bands == 0 {
        return Err(Error::shape(format!("degenerate cube shape {rows}×{cols}×{bands}")));
    }
    if rows * cols * bands != len {
        return Err(Error::shape(format!(
            "{rows}×{cols}×{bands} cube needs {} samples, got {len}",
            rows * cols * bands
        )));
    }
    Ok(())
}

pub fn read_cube(path: impl AsRef<Path>) -> Result<HyperCube> {
    HyperCube::from_bytes(&fs::read(path)?)
}

pub fn write_cube(cube: &HyperCube, path: impl AsRef<Path>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&cube.to_bytes())?;
    Ok(())
}
