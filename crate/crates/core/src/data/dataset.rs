use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ClassLabel, HyperCube, LabelMap, NUM_CLASSES};
use crate::error::{Error, Result};

/// Where a flattened sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Provenance {
    pub cube: u32,
    pub row: u32,
    pub col: u32,
}

/// Flattened spectra with one label per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelDataset {
    bands: usize,
    features: Vec<f32>,
    labels: Vec<ClassLabel>,
    provenance: Vec<Provenance>,
}

impl PixelDataset {
    pub fn new(bands: usize, features: Vec<f32>, labels: Vec<ClassLabel>, provenance: Vec<Provenance>) -> Result<Self> {
        if bands == 0 || features.len() != labels.len() * bands || provenance.len() != labels.len() {
            return Err(Error::shape(format!(
                "{} feature values, {} labels, {} provenance entries at {bands} bands",
                features.len(),
                labels.len(),
                provenance.len()
            )));
        }
        Ok(Self { bands, features, labels, provenance })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    #[inline]
    pub fn feature(&self, i: usize) -> &[f32] {
        &self.features[i * self.bands..(i + 1) * self.bands]
    }

    pub fn labels(&self) -> &[ClassLabel] {
        &self.labels
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }

    /// Samples at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> PixelDataset {
        let mut features = Vec::with_capacity(indices.len() * self.bands);
        for &i in indices {
            features.extend_from_slice(self.feature(i));
        }
        PixelDataset {
            bands: self.bands,
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            provenance: indices.iter().map(|&i| self.provenance[i]).collect(),
        }
    }
}

/// Flattens every `(cube, mask)` pair across the spatial dimensions, one
/// sample per pixel in cube order then row-major order.
pub fn flatten_to_pixels(pairs: &[(&HyperCube, &LabelMap)]) -> Result<PixelDataset> {
    let bands = common_bands(pairs.iter().map(|(c, _)| *c))?;
    let total: usize = pairs.iter().map(|(c, _)| c.pixel_count()).sum();
    let mut features = Vec::with_capacity(total * bands);
    let mut labels = Vec::with_capacity(total);
    let mut provenance = Vec::with_capacity(total);
    for (k, (cube, mask)) in pairs.iter().enumerate() {
        let data = cube.require_normalized()?;
        mask.check_matches_cube(cube)?;
        features.extend_from_slice(data);
        labels.extend_from_slice(mask.labels());
        for row in 0..cube.rows() {
            for col in 0..cube.cols() {
                provenance.push(Provenance { cube: k as u32, row: row as u32, col: col as u32 });
            }
        }
    }
    PixelDataset::new(bands, features, labels, provenance)
}

fn common_bands<'a>(mut cubes: impl Iterator<Item = &'a HyperCube>) -> Result<usize> {
    let first = cubes.next().ok_or_else(|| Error::precondition("no cubes to flatten"))?;
    let bands = first.bands();
    for c in cubes {
        if c.bands() != bands {
            return Err(Error::shape(format!("cubes disagree on band count: {bands} vs {}", c.bands())));
        }
    }
    Ok(bands)
}

/// Target background count and the sorted ranks (among background samples,
/// in dataset order) of the ones to keep. `None` when no subsampling is needed.
fn background_selection(counts: &[usize; NUM_CLASSES], seed: u64) -> Result<Option<Vec<usize>>> {
    let target = counts[1..].iter().copied().max().unwrap_or(0);
    if target == 0 {
        return Err(Error::precondition("dataset has no non-background samples"));
    }
    let bg = counts[0];
    if bg <= target {
        return Ok(None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = rand::seq::index::sample(&mut rng, bg, target).into_vec();
    keep.sort_unstable();
    Ok(Some(keep))
}

/// Randomly drops Background samples until their count equals the largest
/// plastic-class count. Non-background samples and relative order are kept.
pub fn rebalance_background(ds: &PixelDataset, seed: u64) -> Result<PixelDataset> {
    let Some(keep) = background_selection(&ds.class_counts(), seed)? else {
        return Ok(ds.clone());
    };
    let mut indices = Vec::with_capacity(ds.len());
    let mut bg_rank = 0;
    let mut next = keep.iter().peekable();
    for (i, l) in ds.labels.iter().enumerate() {
        if *l == ClassLabel::Background {
            if next.peek() == Some(&&bg_rank) {
                indices.push(i);
                next.next();
            }
            bg_rank += 1;
        } else {
            indices.push(i);
        }
    }
    Ok(ds.subset(&indices))
}

/// Same result as `rebalance_background(flatten_to_pixels(..), seed)` but
/// only materializes the kept samples. `load(k)` supplies the `k`-th cube on
/// demand so cubes can stream from disk one at a time.
pub fn flatten_rebalanced<F>(masks: &[LabelMap], seed: u64, mut load: F) -> Result<PixelDataset>
where
    F: FnMut(usize) -> Result<HyperCube>,
{
    let mut counts = [0; NUM_CLASSES];
    for m in masks {
        for (c, n) in counts.iter_mut().zip(m.histogram()) {
            *c += n;
        }
    }
    let keep = background_selection(&counts, seed)?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut provenance = Vec::new();
    let mut bands = None;
    let mut bg_rank = 0;
    let mut next = keep.as_ref().map(|k| k.iter().peekable());
    for (k, mask) in masks.iter().enumerate() {
        let cube = load(k)?;
        mask.check_matches_cube(&cube)?;
        let data = cube.require_normalized()?;
        let b = *bands.get_or_insert(cube.bands());
        if b != cube.bands() {
            return Err(Error::shape(format!("cubes disagree on band count: {b} vs {}", cube.bands())));
        }
        for (p, &label) in mask.labels().iter().enumerate() {
            let take = if label == ClassLabel::Background {
                let take = match next.as_mut() {
                    Some(it) => {
                        let hit = it.peek() == Some(&&bg_rank);
                        if hit {
                            it.next();
                        }
                        hit
                    }
                    None => true,
                };
                bg_rank += 1;
                take
            } else {
                true
            };
            if take {
                features.extend_from_slice(&data[p * b..(p + 1) * b]);
                labels.push(label);
                provenance.push(Provenance {
                    cube: k as u32,
                    row: (p / mask.cols()) as u32,
                    col: (p % mask.cols()) as u32,
                });
            }
        }
    }
    let bands = bands.ok_or_else(|| Error::precondition("no cubes to flatten"))?;
    PixelDataset::new(bands, features, labels, provenance)
}
