//! Per-pixel label maps and the `HSM1` file format.
//!
//! ```text
//! offset  size         field
//! 0       4            magic "HSM1"
//! 4       4            rows (u32 LE)
//! 8       4            cols (u32 LE)
//! 12      rows*cols    label codes (u8, 0..=4), row-major
//! ```

use std::fs;
use std::path::Path;

use super::{read_u32, ClassLabel, HyperCube};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"HSM1";
const HEADER_LEN: usize = 12;

/// A `rows × cols` grid of class labels. Used both for ground truth and for
/// predicted classification maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    rows: usize,
    cols: usize,
    labels: Vec<ClassLabel>,
}

pub type GroundTruthMask = LabelMap;
pub type ClassMap = LabelMap;

impl LabelMap {
    pub fn new(rows: usize, cols: usize, labels: Vec<ClassLabel>) -> Result<Self> {
        if rows * cols != labels.len() {
            return Err(Error::shape(format!("{rows}×{cols} map needs {} labels, got {}", rows * cols, labels.len())));
        }
        Ok(Self { rows, cols, labels })
    }

    pub fn filled(rows: usize, cols: usize, label: ClassLabel) -> Self {
        Self { rows, cols, labels: vec![label; rows * cols] }
    }

    pub fn from_codes(rows: usize, cols: usize, codes: &[u8]) -> Result<Self> {
        let labels = codes.iter().map(|&c| ClassLabel::from_code(c)).collect::<Result<Vec<_>>>()?;
        Self::new(rows, cols, labels)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[ClassLabel] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [ClassLabel] {
        &mut self.labels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> ClassLabel {
        self.labels[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, label: ClassLabel) {
        self.labels[row * self.cols + col] = label;
    }

    pub fn row(&self, row: usize) -> &[ClassLabel] {
        &self.labels[row * self.cols..(row + 1) * self.cols]
    }

    pub fn codes(&self) -> Vec<u8> {
        self.labels.iter().map(|l| l.code()).collect()
    }

    pub fn same_shape(&self, other: &LabelMap) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn check_same_shape(&self, other: &LabelMap) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::shape(format!("{}×{} map vs {}×{} map", self.rows, self.cols, other.rows, other.cols)))
        }
    }

    pub fn check_matches_cube(&self, cube: &HyperCube) -> Result<()> {
        if self.rows == cube.rows() && self.cols == cube.cols() {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "{}×{} mask paired with {}×{} cube",
                self.rows,
                self.cols,
                cube.rows(),
                cube.cols()
            )))
        }
    }

    /// Pixel counts per class code.
    pub fn histogram(&self) -> [usize; super::NUM_CLASSES] {
        let mut h = [0; super::NUM_CLASSES];
        for l in &self.labels {
            h[l.index()] += 1;
        }
        h
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.labels.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        out.extend(self.labels.iter().map(|l| l.code()));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::MalformedHeader(format!("{} bytes is shorter than the 12-byte header", bytes.len())));
        }
        if &bytes[0..4] != MAGIC {
            return Err(Error::MalformedHeader(format!("bad magic {:?}, expected \"HSM1\"", String::from_utf8_lossy(&bytes[0..4]))));
        }
        let rows = read_u32(bytes, 4) as usize;
        let cols = read_u32(bytes, 8) as usize;
        let expected = HEADER_LEN + rows * cols;
        if bytes.len() < expected {
            return Err(Error::Truncated { expected, found: bytes.len() });
        }
        if bytes.len() > expected {
            return Err(Error::TrailingData { expected, found: bytes.len() });
        }
        Self::from_codes(rows, cols, &bytes[HEADER_LEN..])
    }
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<LabelMap> {
    LabelMap::from_bytes(&fs::read(path)?)
}

/// Reads a mask and checks it against the cube it annotates.
pub fn read_mask_for(path: impl AsRef<Path>, cube: &HyperCube) -> Result<LabelMap> {
    let mask = read_mask(path)?;
    mask.check_matches_cube(cube)?;
    Ok(mask)
}

pub fn write_mask(mask: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, mask.to_bytes())?;
    Ok(())
}
