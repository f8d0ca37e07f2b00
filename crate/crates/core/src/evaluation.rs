//! Pixel metrics of a predicted class map against ground truth.
//!
//! Class order in every matrix and vector is BG, HDPE, PET, PP, PS. Undefined
//! quantities (recall of a class absent from the truth, kappa when chance
//! agreement is 1, accuracy over an empty pixel set) are `None`, never 0.
//!
//! Border-excluded accuracy drops every pixel that has a differently labelled
//! ground-truth pixel within Chebyshev distance `band` (window clipped at the
//! map edge). A band of 0 therefore drops nothing; a band of 2 drops two
//! pixels on each side of every label transition.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{ClassMap, NUM_CLASSES};
use crate::error::{Error, Result};

pub type Counts = [[u64; NUM_CLASSES]; NUM_CLASSES];

pub const DEFAULT_BORDER_BAND: usize = 2;

/// Row and column names used in reports.
pub const CLASS_ORDER: [&str; NUM_CLASSES] = ["BG", "HDPE", "PET", "PP", "PS"];

/// `counts[t][p]` = pixels with truth `t` predicted as `p`.
pub fn confusion_counts(truth: &ClassMap, pred: &ClassMap) -> Result<Counts> {
    truth.check_same_shape(pred)?;
    let mut c = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for (t, p) in truth.labels().iter().zip(pred.labels()) {
        c[t.index()][p.index()] += 1;
    }
    Ok(c)
}

fn row_sum(c: &Counts, t: usize) -> u64 {
    c[t].iter().sum()
}

fn col_sum(c: &Counts, p: usize) -> u64 {
    c.iter().map(|r| r[p]).sum()
}

fn total(c: &Counts) -> u64 {
    c.iter().flatten().sum()
}

/// Row-normalized confusion; rows without support stay all-zero.
pub fn normalize_rows(c: &Counts) -> [[f64; NUM_CLASSES]; NUM_CLASSES] {
    let mut out = [[0.0; NUM_CLASSES]; NUM_CLASSES];
    for t in 0..NUM_CLASSES {
        let s = row_sum(c, t);
        if s > 0 {
            for p in 0..NUM_CLASSES {
                out[t][p] = c[t][p] as f64 / s as f64;
            }
        }
    }
    out
}

pub fn accuracy_from(c: &Counts) -> Option<f64> {
    let n = total(c);
    (n > 0).then(|| (0..NUM_CLASSES).map(|i| c[i][i]).sum::<u64>() as f64 / n as f64)
}

pub fn recall_from(c: &Counts) -> [Option<f64>; NUM_CLASSES] {
    std::array::from_fn(|t| {
        let s = row_sum(c, t);
        (s > 0).then(|| c[t][t] as f64 / s as f64)
    })
}

pub fn kappa_from(c: &Counts) -> Option<f64> {
    let n = total(c) as f64;
    let po = accuracy_from(c)?;
    let pe: f64 = (0..NUM_CLASSES).map(|k| (row_sum(c, k) as f64 / n) * (col_sum(c, k) as f64 / n)).sum();
    (pe < 1.0).then(|| (po - pe) / (1.0 - pe))
}

pub fn accuracy(truth: &ClassMap, pred: &ClassMap) -> Result<Option<f64>> {
    Ok(accuracy_from(&confusion_counts(truth, pred)?))
}

pub fn per_class_recall(truth: &ClassMap, pred: &ClassMap) -> Result<[Option<f64>; NUM_CLASSES]> {
    Ok(recall_from(&confusion_counts(truth, pred)?))
}

pub fn cohen_kappa(truth: &ClassMap, pred: &ClassMap) -> Result<Option<f64>> {
    Ok(kappa_from(&confusion_counts(truth, pred)?))
}

/// Accuracy over pixels whose true class is a plastic.
pub fn accuracy_excluding_background(truth: &ClassMap, pred: &ClassMap) -> Result<Option<f64>> {
    let c = confusion_counts(truth, pred)?;
    let n: u64 = (1..NUM_CLASSES).map(|t| row_sum(&c, t)).sum();
    Ok((n > 0).then(|| (1..NUM_CLASSES).map(|t| c[t][t]).sum::<u64>() as f64 / n as f64))
}

/// Sliding min or max of `codes` over a clipped square window of radius
/// `band`, done as two one-dimensional passes.
fn window_extreme(codes: &[u8], rows: usize, cols: usize, band: usize, max: bool) -> Vec<u8> {
    let pick = |a: u8, b: u8| if max { a.max(b) } else { a.min(b) };
    let mut h = vec![0u8; codes.len()];
    for y in 0..rows {
        for x in 0..cols {
            let (lo, hi) = (x.saturating_sub(band), (x + band).min(cols - 1));
            h[y * cols + x] = (lo..=hi).map(|i| codes[y * cols + i]).reduce(pick).unwrap();
        }
    }
    let mut v = vec![0u8; codes.len()];
    for x in 0..cols {
        for y in 0..rows {
            let (lo, hi) = (y.saturating_sub(band), (y + band).min(rows - 1));
            v[y * cols + x] = (lo..=hi).map(|i| h[i * cols + x]).reduce(pick).unwrap();
        }
    }
    v
}

/// Pixels within `band` of a ground-truth label transition.
pub fn border_mask(truth: &ClassMap, band: usize) -> Vec<bool> {
    if truth.is_empty() {
        return Vec::new();
    }
    let codes = truth.codes();
    let lo = window_extreme(&codes, truth.rows(), truth.cols(), band, false);
    let hi = window_extreme(&codes, truth.rows(), truth.cols(), band, true);
    lo.iter().zip(&hi).map(|(a, b)| a != b).collect()
}

/// Accuracy with border pixels removed, and the number removed.
pub fn border_excluded_accuracy(truth: &ClassMap, pred: &ClassMap, band: usize) -> Result<(Option<f64>, usize)> {
    truth.check_same_shape(pred)?;
    let mask = border_mask(truth, band);
    let (mut kept, mut correct) = (0usize, 0usize);
    for ((t, p), &ex) in truth.labels().iter().zip(pred.labels()).zip(&mask) {
        if !ex {
            kept += 1;
            correct += (t == p) as usize;
        }
    }
    let excluded = mask.len() - kept;
    Ok(((kept > 0).then(|| correct as f64 / kept as f64), excluded))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub class_order: Vec<String>,
    pub pixels: u64,
    pub raw_counts: Counts,
    pub confusion: [[f64; NUM_CLASSES]; NUM_CLASSES],
    /// Classes absent from the truth; their confusion rows are all zero.
    pub zero_support: Vec<String>,
    pub accuracy: f64,
    pub accuracy_excluding_background: Option<f64>,
    pub per_class_recall: [Option<f64>; NUM_CLASSES],
    pub kappa: Option<f64>,
    pub border_band: usize,
    pub border_excluded_accuracy: Option<f64>,
    pub excluded_pixel_count: usize,
}

pub fn evaluate(truth: &ClassMap, pred: &ClassMap, band: usize) -> Result<MetricsReport> {
    let c = confusion_counts(truth, pred)?;
    let accuracy = accuracy_from(&c).ok_or_else(|| Error::precondition("cannot evaluate an empty map"))?;
    let kappa = kappa_from(&c);
    if let Some(k) = kappa {
        debug_assert!(k <= accuracy + 1e-12, "kappa {k} exceeds accuracy {accuracy}");
    }
    let (border_excluded_accuracy, excluded_pixel_count) = border_excluded_accuracy(truth, pred, band)?;
    Ok(MetricsReport {
        class_order: CLASS_ORDER.iter().map(|n| n.to_string()).collect(),
        pixels: total(&c),
        raw_counts: c,
        confusion: normalize_rows(&c),
        zero_support: (0..NUM_CLASSES).filter(|&t| row_sum(&c, t) == 0).map(|t| CLASS_ORDER[t].to_string()).collect(),
        accuracy,
        accuracy_excluding_background: accuracy_excluding_background(truth, pred)?,
        per_class_recall: recall_from(&c),
        kappa,
        border_band: band,
        border_excluded_accuracy,
        excluded_pixel_count,
    })
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{:.2}%", 100.0 * v))
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })
    }

    /// Aligned terminal table: normalized confusion, recall and summary.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{:>6}", "t\\p");
        for name in &self.class_order {
            let _ = write!(s, "{name:>8}");
        }
        let _ = writeln!(s, "{:>9}", "recall");
        for (t, name) in self.class_order.iter().enumerate() {
            let _ = write!(s, "{name:>6}");
            for v in self.confusion[t] {
                let _ = write!(s, "{:>8.4}", v);
            }
            let _ = writeln!(s, "{:>9}", pct(self.per_class_recall[t]));
        }
        let _ = writeln!(s, "pixels                      {}", self.pixels);
        let _ = writeln!(s, "accuracy                    {}", pct(Some(self.accuracy)));
        let _ = writeln!(s, "accuracy (no background)    {}", pct(self.accuracy_excluding_background));
        let _ = writeln!(s, "kappa                       {}", self.kappa.map_or("n/a".into(), |k| format!("{k:.4}")));
        let _ = writeln!(
            s,
            "border-excluded accuracy    {} (band {}, {} px excluded)",
            pct(self.border_excluded_accuracy),
            self.border_band,
            self.excluded_pixel_count
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ClassLabel;
    use ClassLabel::*;

    fn map(rows: usize, cols: usize, f: impl Fn(usize, usize) -> ClassLabel) -> ClassMap {
        ClassMap::new(rows, cols, (0..rows * cols).map(|i| f(i / cols, i % cols)).collect()).unwrap()
    }

    #[test]
    fn identity_and_swap() {
        let t = map(4, 5, |y, x| ClassLabel::ALL[(y + x) % 5]);
        let r = evaluate(&t, &t, 2).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.kappa, Some(1.0));
        for i in 0..5 {
            assert_eq!(r.confusion[i][i], 1.0);
        }
        let a = map(3, 3, |_, _| Hdpe);
        let b = map(3, 3, |_, _| Pet);
        let c = normalize_rows(&confusion_counts(&a, &b).unwrap());
        assert_eq!(c[1], [0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(per_class_recall(&a, &b).unwrap(), [None, Some(0.0), None, None, None]);
        assert_eq!(cohen_kappa(&a, &a).unwrap(), None);
    }

    #[test]
    fn half_flipped_and_chance_kappa() {
        let t = map(2, 4, |y, _| if y == 0 { Pp } else { Ps });
        let mut p = t.clone();
        p.set(0, 0, Background);
        p.set(0, 1, Background);
        assert_eq!(per_class_recall(&t, &p).unwrap()[Pp.index()], Some(0.5));
        let constant = map(2, 4, |_, _| Pp);
        assert_eq!(cohen_kappa(&t, &constant).unwrap(), Some(0.0));
    }

    #[test]
    fn borders() {
        let t = map(10, 10, |_, x| if x < 5 { Background } else { Pet });
        let mut p = t.clone();
        for y in 0..10 {
            p.set(y, 4, Pet);
        }
        let (acc, excluded) = border_excluded_accuracy(&t, &p, 2).unwrap();
        assert_eq!((acc, excluded), (Some(1.0), 40));
        assert_eq!(border_excluded_accuracy(&t, &p, 0).unwrap().1, 0);
        let u = map(4, 4, |_, _| Ps);
        assert_eq!(border_excluded_accuracy(&u, &u, 2).unwrap(), (Some(1.0), 0));
        let tiny = map(2, 2, |y, x| if y == x { Pp } else { Ps });
        assert_eq!(border_excluded_accuracy(&tiny, &tiny, 1).unwrap(), (None, 4));
    }

    #[test]
    fn json_round_trip_and_table() {
        let t = map(4, 4, |y, _| if y < 2 { Background } else { Hdpe });
        let p = map(4, 4, |y, x| if y < 2 || x == 0 { Background } else { Hdpe });
        let r = evaluate(&t, &p, 1).unwrap();
        assert_eq!(MetricsReport::from_json(&r.to_json()).unwrap(), r);
        assert_eq!(r.zero_support, vec!["PET", "PP", "PS"]);
        assert!(r.table().contains("kappa"));
    }
}
