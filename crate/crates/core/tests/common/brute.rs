//! Direct two-dimensional oracles for label-map filters and metrics.

use p1ch::data::{ClassLabel, ClassMap, NUM_CLASSES};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_map(rng: &mut ChaCha8Rng, rows: usize, cols: usize, classes: usize) -> ClassMap {
    let codes: Vec<u8> = (0..rows * cols).map(|_| rng.random_range(0..classes as u8)).collect();
    ClassMap::from_codes(rows, cols, &codes).unwrap()
}

pub fn random_bits(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<bool> {
    (0..n).map(|_| rng.random_bool(p)).collect()
}

/// Sorts the edge-replicated window and takes its middle element; the centre
/// label survives when it is at least as frequent as that element.
pub fn median(map: &ClassMap, k: usize) -> ClassMap {
    let (rows, cols) = (map.rows() as isize, map.cols() as isize);
    let r = (k / 2) as isize;
    let mut out = map.clone();
    for y in 0..rows {
        for x in 0..cols {
            let mut window = Vec::with_capacity(k * k);
            for yy in y - r..=y + r {
                for xx in x - r..=x + r {
                    window.push(map.get(yy.clamp(0, rows - 1) as usize, xx.clamp(0, cols - 1) as usize).code());
                }
            }
            window.sort_unstable();
            let m = window[window.len() / 2];
            let centre = map.get(y as usize, x as usize).code();
            let count = |c: u8| window.iter().filter(|&&v| v == c).count();
            if count(centre) < count(m) {
                out.set(y as usize, x as usize, ClassLabel::from_code(m).unwrap());
            }
        }
    }
    out
}

fn window_test(bits: &[bool], rows: usize, cols: usize, size: usize, all: bool) -> Vec<bool> {
    let r = (size / 2) as isize;
    let mut out = vec![false; bits.len()];
    for y in 0..rows as isize {
        for x in 0..cols as isize {
            let mut acc = all;
            for yy in y - r..=y + r {
                for xx in x - r..=x + r {
                    if yy < 0 || xx < 0 || yy >= rows as isize || xx >= cols as isize {
                        continue;
                    }
                    let v = bits[yy as usize * cols + xx as usize];
                    acc = if all { acc && v } else { acc || v };
                }
            }
            out[y as usize * cols + x as usize] = acc;
        }
    }
    out
}

pub fn erode(bits: &[bool], rows: usize, cols: usize, size: usize) -> Vec<bool> {
    window_test(bits, rows, cols, size, true)
}

pub fn dilate(bits: &[bool], rows: usize, cols: usize, size: usize) -> Vec<bool> {
    window_test(bits, rows, cols, size, false)
}

pub fn open(bits: &[bool], rows: usize, cols: usize, size: usize) -> Vec<bool> {
    dilate(&erode(bits, rows, cols, size), rows, cols, size)
}

pub fn close(bits: &[bool], rows: usize, cols: usize, size: usize) -> Vec<bool> {
    erode(&dilate(bits, rows, cols, size), rows, cols, size)
}

pub fn morph_open(map: &ClassMap, class: ClassLabel, size: usize) -> ClassMap {
    let bits: Vec<bool> = map.labels().iter().map(|&l| l == class).collect();
    let keep = open(&bits, map.rows(), map.cols(), size);
    let labels = map
        .labels()
        .iter()
        .zip(keep)
        .map(|(&l, k)| if l == class && !k { ClassLabel::Background } else { l })
        .collect();
    ClassMap::new(map.rows(), map.cols(), labels).unwrap()
}

pub fn morph_close(map: &ClassMap, class: ClassLabel, size: usize) -> ClassMap {
    let bits: Vec<bool> = map.labels().iter().map(|&l| l == class).collect();
    let set = close(&bits, map.rows(), map.cols(), size);
    let labels = map.labels().iter().zip(set).map(|(&l, s)| if s { class } else { l }).collect();
    ClassMap::new(map.rows(), map.cols(), labels).unwrap()
}

pub struct Metrics {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
    pub accuracy: f64,
    pub recall: [Option<f64>; NUM_CLASSES],
    pub kappa: Option<f64>,
}

/// Every metric straight from the pixel lists, without a shared count table.
pub fn metrics(truth: &ClassMap, pred: &ClassMap) -> Metrics {
    let pairs: Vec<(usize, usize)> = truth.labels().iter().zip(pred.labels()).map(|(t, p)| (t.index(), p.index())).collect();
    let n = pairs.len() as f64;
    let mut counts = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for t in 0..NUM_CLASSES {
        for p in 0..NUM_CLASSES {
            counts[t][p] = pairs.iter().filter(|&&q| q == (t, p)).count() as u64;
        }
    }
    let agree = pairs.iter().filter(|(t, p)| t == p).count() as f64;
    let recall = std::array::from_fn(|c| {
        let support = pairs.iter().filter(|(t, _)| *t == c).count();
        let hit = pairs.iter().filter(|&&(t, p)| t == c && p == c).count();
        (support > 0).then(|| hit as f64 / support as f64)
    });
    let p_o = agree / n;
    let p_e: f64 = (0..NUM_CLASSES)
        .map(|c| {
            let t = pairs.iter().filter(|(t, _)| *t == c).count() as f64;
            let p = pairs.iter().filter(|(_, p)| *p == c).count() as f64;
            t * p / (n * n)
        })
        .sum();
    let kappa = (p_e < 1.0).then(|| (p_o - p_e) / (1.0 - p_e));
    Metrics { counts, accuracy: p_o, recall, kappa }
}
