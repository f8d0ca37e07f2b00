//! Assembly of streamed line predictions into a class map and its clean-up:
//! a label median filter followed by per-class opening and closing.
//!
//! Labels are unordered categories, so the median filter takes the median of
//! the sorted label codes in the window but keeps the centre pixel's label
//! whenever that label is at least as frequent in the window as the median
//! one. A strict majority therefore always wins, and ties favour the current
//! label. The window is extended past the map border by edge replication.
//!
//! Morphology works on the binary indicator of one class at a time, classes
//! in ascending code order (HDPE, PET, PP, PS). The structuring element is a
//! square. Pixels outside the map are ignored, i.e. the window is clipped to
//! the map; this keeps opening and closing exact duals of each other. Pixels
//! removed from a class by opening become Background; pixels added by closing
//! take the class.

use crate::data::{ClassLabel, ClassMap, NUM_CLASSES};
use crate::error::{Error, Result};

/// Collects per-line predictions until every row of the map has arrived.
#[derive(Debug, Clone)]
pub struct LineBuffer {
    rows: usize,
    cols: usize,
    lines: Vec<Option<Vec<ClassLabel>>>,
    received: usize,
}

impl LineBuffer {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, lines: vec![None; rows], received: 0 }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn received(&self) -> usize {
        self.received
    }

    pub fn is_complete(&self) -> bool {
        self.received == self.rows
    }

    pub fn accumulate(&mut self, row: usize, labels: Vec<ClassLabel>) -> Result<()> {
        if row >= self.rows {
            return Err(Error::precondition(format!("row {row} outside 0..{}", self.rows)));
        }
        if labels.len() != self.cols {
            return Err(Error::shape(format!("line has {} labels, expected {}", labels.len(), self.cols)));
        }
        if self.lines[row].is_some() {
            return Err(Error::precondition(format!("row {row} received twice")));
        }
        self.lines[row] = Some(labels);
        self.received += 1;
        Ok(())
    }

    /// The assembled map; fails while rows are missing.
    pub fn finish(self) -> Result<ClassMap> {
        if !self.is_complete() {
            let missing = self.lines.iter().filter(|l| l.is_none()).count();
            return Err(Error::precondition(format!("{missing} of {} rows missing", self.rows)));
        }
        let labels = self.lines.into_iter().flat_map(Option::unwrap).collect();
        ClassMap::new(self.rows, self.cols, labels)
    }
}

fn check_odd(size: usize, what: &str) -> Result<()> {
    if size.is_multiple_of(2) {
        return Err(Error::precondition(format!("{what} size must be odd, got {size}")));
    }
    Ok(())
}

/// `kernel × kernel` label median with centre-favouring ties.
pub fn median_filter(map: &ClassMap, kernel: usize) -> Result<ClassMap> {
    check_odd(kernel, "median kernel")?;
    let (rows, cols) = (map.rows(), map.cols());
    let r = (kernel / 2) as isize;
    let middle = (kernel * kernel).div_ceil(2);
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut out = map.clone();
    for y in 0..rows {
        for x in 0..cols {
            let mut counts = [0usize; NUM_CLASSES];
            for dy in -r..=r {
                let row = map.row(clamp(y as isize + dy, rows));
                for dx in -r..=r {
                    counts[row[clamp(x as isize + dx, cols)].index()] += 1;
                }
            }
            let mut seen = 0;
            let median = (0..NUM_CLASSES)
                .find(|&c| {
                    seen += counts[c];
                    seen >= middle
                })
                .expect("window is non-empty");
            let centre = map.get(y, x);
            if counts[centre.index()] < counts[median] {
                out.set(y, x, ClassLabel::ALL[median]);
            }
        }
    }
    Ok(out)
}

/// Binary image on the map grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<bool>,
}

impl BinaryImage {
    pub fn new(rows: usize, cols: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!("{} values for a {rows}×{cols} image", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn indicator(map: &ClassMap, class: ClassLabel) -> Self {
        Self { rows: map.rows(), cols: map.cols(), data: map.labels().iter().map(|&l| l == class).collect() }
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.data[y * self.cols + x]
    }

    pub fn complement(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| !v).collect() }
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.data.iter().zip(&other.data).all(|(a, b)| !a || *b)
    }

    /// Separable square filter: along rows, then along columns. `all` selects
    /// erosion (every pixel of the clipped window set) over dilation (any).
    fn square(&self, size: usize, all: bool) -> Self {
        let r = size / 2;
        let (rows, cols) = (self.rows, self.cols);
        let pass = |src: &[bool], at: &dyn Fn(usize, usize) -> usize, outer: usize, inner: usize| -> Vec<bool> {
            let mut dst = vec![false; src.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let (lo, hi) = (i.saturating_sub(r), (i + r).min(inner - 1));
                    let mut it = (lo..=hi).map(|j| src[at(o, j)]);
                    dst[at(o, i)] = if all { it.all(|v| v) } else { it.any(|v| v) };
                }
            }
            dst
        };
        let horizontal = pass(&self.data, &|y, x| y * cols + x, rows, cols);
        let data = pass(&horizontal, &|x, y| y * cols + x, cols, rows);
        Self { rows, cols, data }
    }

    pub fn erode(&self, size: usize) -> Self {
        self.square(size, true)
    }

    pub fn dilate(&self, size: usize) -> Self {
        self.square(size, false)
    }

    pub fn open(&self, size: usize) -> Self {
        self.erode(size).dilate(size)
    }

    pub fn close(&self, size: usize) -> Self {
        self.dilate(size).erode(size)
    }
}

/// Opening of the indicator of `class`; removed pixels become Background.
pub fn morph_open(map: &ClassMap, class: ClassLabel, size: usize) -> Result<ClassMap> {
    check_odd(size, "structuring element")?;
    let opened = BinaryImage::indicator(map, class).open(size);
    let mut out = map.clone();
    for (l, &keep) in out.labels_mut().iter_mut().zip(&opened.data) {
        if *l == class && !keep {
            *l = ClassLabel::Background;
        }
    }
    Ok(out)
}

/// Closing of the indicator of `class`; added pixels take `class`.
pub fn morph_close(map: &ClassMap, class: ClassLabel, size: usize) -> Result<ClassMap> {
    check_odd(size, "structuring element")?;
    let closed = BinaryImage::indicator(map, class).close(size);
    let mut out = map.clone();
    for (l, &set) in out.labels_mut().iter_mut().zip(&closed.data) {
        if set {
            *l = class;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PostprocessConfig {
    pub median_kernel: usize,
    pub structuring_element: usize,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        Self { median_kernel: 5, structuring_element: 3 }
    }
}

/// Median filter, then opening and closing for each plastic class.
pub fn postprocess_map(map: &ClassMap, cfg: PostprocessConfig) -> Result<ClassMap> {
    let mut out = median_filter(map, cfg.median_kernel)?;
    for class in ClassLabel::PLASTICS {
        out = morph_open(&out, class, cfg.structuring_element)?;
        out = morph_close(&out, class, cfg.structuring_element)?;
    }
    Ok(out)
}

pub fn postprocess_buffer(buffer: LineBuffer, cfg: PostprocessConfig) -> Result<ClassMap> {
    postprocess_map(&buffer.finish()?, cfg)
}
