//! Line-by-line classification of a cube, the way a pushbroom camera
//! delivers it, and a line-agnostic batch path used to cross-check it.
//!
//! Workers pull line indices from a shared counter and send finished lines
//! to a single collector that owns the [`LineBuffer`]. Every line is
//! classified independently in eval mode, so the assembled map does not
//! depend on the worker count or on the order in which lines arrive.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::Instant;

use crate::calibration::Normalizer;
use crate::data::{ClassLabel, ClassMap, HyperCube};
use crate::error::{Error, Result};
use crate::model::{predict, ModelParams, INPUT_LEN};
use crate::postprocess::{postprocess_map, LineBuffer, PostprocessConfig};

/// Where a line's normalized spectra come from.
#[derive(Clone, Copy)]
pub enum LineSource<'a> {
    Normalized(&'a HyperCube),
    Raw(&'a HyperCube, &'a Normalizer),
}

impl LineSource<'_> {
    fn cube(&self) -> &HyperCube {
        match self {
            LineSource::Normalized(c) | LineSource::Raw(c, _) => c,
        }
    }

    fn check(&self) -> Result<()> {
        let cube = self.cube();
        if cube.bands() != INPUT_LEN {
            return Err(Error::shape(format!("model expects {INPUT_LEN} bands, cube has {}", cube.bands())));
        }
        match self {
            LineSource::Normalized(c) => c.require_normalized().map(|_| ()),
            LineSource::Raw(c, n) => {
                if n.bands() != c.bands() {
                    return Err(Error::shape(format!("reference has {} bands, cube has {}", n.bands(), c.bands())));
                }
                c.require_raw().map(|_| ())
            }
        }
    }

    /// Normalized spectra of one line; `scratch` is reused across calls.
    fn line<'s>(&'s self, row: usize, scratch: &'s mut Vec<f32>) -> &'s [f32] {
        match self {
            LineSource::Normalized(c) => c.normalized_line(row).expect("checked normalized"),
            LineSource::Raw(c, n) => {
                let raw = c.raw_line(row).expect("checked raw");
                scratch.resize(raw.len(), 0.0);
                n.apply(raw, scratch);
                scratch
            }
        }
    }
}

/// Classifies one line of normalized spectra (`cols × 224`).
pub fn classify_line(params: &ModelParams<f32>, line: &[f32]) -> Result<Vec<ClassLabel>> {
    predict(params, line)
}

/// Classifies `rows` (in the given order) with `workers` threads and feeds
/// the results into a fresh line buffer.
pub fn stream_lines(params: &ModelParams<f32>, source: LineSource<'_>, rows: &[usize], workers: usize) -> Result<LineBuffer> {
    source.check()?;
    let cube = source.cube();
    let mut buffer = LineBuffer::new(cube.rows(), cube.cols());
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<Result<(usize, Vec<ClassLabel>)>>();
    thread::scope(|s| {
        for _ in 0..workers.max(1) {
            let tx = tx.clone();
            let next = &next;
            s.spawn(move || {
                let mut scratch = Vec::new();
                loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(&row) = rows.get(i) else { break };
                    let out = if row < cube.rows() {
                        classify_line(params, source.line(row, &mut scratch)).map(|labels| (row, labels))
                    } else {
                        Err(Error::precondition(format!("row {row} outside 0..{}", cube.rows())))
                    };
                    let failed = out.is_err();
                    if tx.send(out).is_err() || failed {
                        break;
                    }
                }
            });
        }
        drop(tx);
        for msg in rx {
            let (row, labels) = msg?;
            buffer.accumulate(row, labels)?;
        }
        Ok::<(), Error>(())
    })?;
    Ok(buffer)
}

/// Streams every line in acquisition order and returns the raw argmax map.
pub fn classify_cube_streaming(params: &ModelParams<f32>, source: LineSource<'_>, workers: usize) -> Result<ClassMap> {
    let rows: Vec<usize> = (0..source.cube().rows()).collect();
    stream_lines(params, source, &rows, workers)?.finish()
}

/// Classifies all pixels of a normalized cube in fixed-size chunks that
/// ignore line boundaries.
pub fn classify_cube_batch(params: &ModelParams<f32>, cube: &HyperCube, chunk_pixels: usize) -> Result<ClassMap> {
    LineSource::Normalized(cube).check()?;
    let data = cube.require_normalized()?;
    let mut labels = Vec::with_capacity(cube.pixel_count());
    for chunk in data.chunks(chunk_pixels.max(1) * INPUT_LEN) {
        labels.extend(predict(params, chunk)?);
    }
    ClassMap::new(cube.rows(), cube.cols(), labels)
}

/// Timings of one benchmark repeat, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRun {
    pub classify: f64,
    pub postprocess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub lines: usize,
    pub workers: usize,
    pub runs: Vec<BenchRun>,
    /// Median over repeats of classification time alone.
    pub median_classify: f64,
    /// Median over repeats of classification plus post-processing.
    pub median_total: f64,
    /// Whether the streamed map equals the line-agnostic batch map.
    pub streaming_matches_batch: bool,
}

impl BenchReport {
    pub fn lines_per_second(&self) -> f64 {
        self.lines as f64 / self.median_classify
    }

    pub fn lines_per_second_with_postprocess(&self) -> f64 {
        self.lines as f64 / self.median_total
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Streams the whole cube `repeats` times, timing classification (including
/// per-line normalization of raw input) and post-processing separately.
pub fn benchmark(
    params: &ModelParams<f32>,
    source: LineSource<'_>,
    repeats: usize,
    workers: usize,
    post: PostprocessConfig,
) -> Result<BenchReport> {
    if repeats == 0 {
        return Err(Error::precondition("benchmark needs at least one repeat"));
    }
    let mut runs = Vec::with_capacity(repeats);
    let mut streamed = None;
    for _ in 0..repeats {
        let t0 = Instant::now();
        let map = classify_cube_streaming(params, source, workers)?;
        let t1 = Instant::now();
        let cleaned = postprocess_map(&map, post)?;
        let t2 = Instant::now();
        std::hint::black_box(&cleaned);
        runs.push(BenchRun { classify: (t1 - t0).as_secs_f64(), postprocess: (t2 - t1).as_secs_f64() });
        streamed = Some(map);
    }
    let batch = match source {
        LineSource::Normalized(c) => classify_cube_batch(params, c, 1024)?,
        LineSource::Raw(c, n) => classify_cube_batch(params, &n.normalize(c)?, 1024)?,
    };
    let classify: Vec<f64> = runs.iter().map(|r| r.classify).collect();
    let total: Vec<f64> = runs.iter().map(|r| r.classify + r.postprocess).collect();
    Ok(BenchReport {
        lines: source.cube().rows(),
        workers: workers.max(1),
        median_classify: median(&classify),
        median_total: median(&total),
        runs,
        streaming_matches_batch: streamed.as_ref() == Some(&batch),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ArchConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube(rows: usize, cols: usize) -> HyperCube {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        HyperCube::new_normalized(rows, cols, INPUT_LEN, (0..rows * cols * INPUT_LEN).map(|_| r.random()).collect()).unwrap()
    }

    #[test]
    fn streaming_matches_batch_for_any_worker_count() {
        let p = ModelParams::init(2, ArchConfig::default());
        let c = cube(5, 7);
        let batch = classify_cube_batch(&p, &c, 9).unwrap();
        for workers in [1, 3] {
            let rows = [4, 0, 2, 1, 3];
            let map = stream_lines(&p, LineSource::Normalized(&c), &rows, workers).unwrap().finish().unwrap();
            assert_eq!(map, batch);
        }
    }

    #[test]
    fn errors() {
        let p = ModelParams::init(2, ArchConfig::default());
        let c = cube(2, 3);
        assert!(stream_lines(&p, LineSource::Normalized(&c), &[0, 0], 1).is_err());
        assert!(stream_lines(&p, LineSource::Normalized(&c), &[5], 1).is_err());
        let raw = HyperCube::new_raw(1, 1, 3, vec![1, 2, 3]).unwrap();
        assert!(classify_cube_batch(&p, &raw, 4).is_err());
    }

    #[test]
    fn bench_reports_medians() {
        let p = ModelParams::init(2, ArchConfig::default());
        let c = cube(3, 4);
        let r = benchmark(&p, LineSource::Normalized(&c), 3, 1, PostprocessConfig::default()).unwrap();
        assert_eq!(r.runs.len(), 3);
        assert!(r.streaming_matches_batch);
        assert!(r.median_total >= r.median_classify);
        assert!(benchmark(&p, LineSource::Normalized(&c), 0, 1, PostprocessConfig::default()).is_err());
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0]), 2.5);
    }
}
