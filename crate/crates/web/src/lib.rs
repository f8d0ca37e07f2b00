//! WebAssembly bindings for the static demo page in `www/`: the learning
//! rate schedule, synthetic scene rendering with per-pixel spectra, and a
//! post-processing playground.
//!
//! Each binding wraps a plain function that returns `Result<_, String>` so
//! the logic is testable natively.

use p1ch::data::{ClassLabel, ClassMap, BANDS};
use p1ch::evaluation::evaluate;
use p1ch::postprocess::{postprocess_map, PostprocessConfig};
use p1ch::synth::{default_signatures, parse_scenes, render_scene};
use p1ch::training::{lr_schedule, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

/// Scene shown when the page loads.
pub const DEMO_SCENE: &str = "\
scene demo
role test
rows 64
cols 200
seed 11
rect HDPE 6 8 20 30
ellipse PET 18 70 11 16 20
rect PP 36 12 22 26
ellipse PS 44 75 12 14
rect PET 8 120 16 20
rect PP 14 134 16 20
ellipse HDPE 44 160 8 18 -30
fragments PS 6 2 3.5
fragments PET 4 2 3.5
";

fn js(e: String) -> JsError {
    JsError::new(&e)
}

pub fn lr_values(epochs: usize, warmup: usize, lr_init: f64, lr_max: f64, lr_min: f64) -> Result<Vec<f64>, String> {
    let cfg = TrainConfig { epochs, warmup, lr_init, lr_max, lr_min, ..TrainConfig::default() };
    cfg.validate().map_err(|e| e.to_string())?;
    (1..=epochs).map(|t| lr_schedule(t, &cfg).map_err(|e| e.to_string())).collect()
}

/// Learning rate for epochs `1..=epochs`.
#[wasm_bindgen]
pub fn lr_curve(epochs: usize, warmup: usize, lr_init: f64, lr_max: f64, lr_min: f64) -> Result<Vec<f64>, JsError> {
    lr_values(epochs, warmup, lr_init, lr_max, lr_min).map_err(js)
}

#[wasm_bindgen]
pub fn demo_scene() -> String {
    DEMO_SCENE.to_string()
}

/// One rendered scene: raw counts plus its exact class mask.
#[wasm_bindgen]
pub struct Scene {
    rows: usize,
    cols: usize,
    raw: Vec<u16>,
    mask: ClassMap,
}

impl Scene {
    /// Renders the first scene in `text` with noise stream `render`.
    pub fn from_text(text: &str, render: u64) -> Result<Scene, String> {
        let scenes = parse_scenes(text).map_err(|e| e.to_string())?;
        let spec = scenes.first().ok_or("no scene in text")?;
        if spec.rows * spec.cols > 256 * 640 {
            return Err("scene too large for the demo (at most 256×640 pixels)".into());
        }
        let out = render_scene(spec, &default_signatures(), 1.0, render).map_err(|e| e.to_string())?;
        let raw = out.cube.raw().ok_or("rendered cube is not raw")?.to_vec();
        Ok(Scene { rows: spec.rows, cols: spec.cols, raw, mask: out.mask })
    }

    fn pixel(&self, row: usize, col: usize) -> &[u16] {
        let i = (row * self.cols + col) * BANDS;
        &self.raw[i..i + BANDS]
    }
}

#[wasm_bindgen]
impl Scene {
    #[wasm_bindgen(constructor)]
    pub fn new(text: &str, render: u32) -> Result<Scene, JsError> {
        Scene::from_text(text, render as u64).map_err(js)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn mask_codes(&self) -> Vec<u8> {
        self.mask.codes()
    }

    /// One band as grayscale RGBA, stretched to that band's range.
    pub fn band_rgba(&self, band: usize) -> Vec<u8> {
        let b = band.min(BANDS - 1);
        let vals: Vec<u16> = self.raw.iter().skip(b).step_by(BANDS).copied().collect();
        let (lo, hi) = vals.iter().fold((u16::MAX, 0), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let span = (hi.saturating_sub(lo)).max(1) as f64;
        vals.iter()
            .flat_map(|&v| {
                let g = ((v - lo) as f64 / span * 255.0).round() as u8;
                [g, g, g, 255]
            })
            .collect()
    }

    /// Raw counts of every band at one pixel.
    pub fn spectrum(&self, row: usize, col: usize) -> Vec<f64> {
        if row >= self.rows || col >= self.cols {
            return Vec::new();
        }
        self.pixel(row, col).iter().map(|&v| v as f64).collect()
    }

    /// Class code of one pixel in the ground-truth mask.
    pub fn label(&self, row: usize, col: usize) -> u8 {
        self.mask.get(row.min(self.rows - 1), col.min(self.cols - 1)).code()
    }

    /// Mean raw spectrum over every pixel of class `code`; empty if absent.
    pub fn class_mean(&self, code: u8) -> Vec<f64> {
        let mut sum = vec![0.0; BANDS];
        let mut n = 0usize;
        for (i, l) in self.mask.labels().iter().enumerate() {
            if l.code() == code {
                n += 1;
                for (s, &v) in sum.iter_mut().zip(self.pixel(i / self.cols, i % self.cols)) {
                    *s += v as f64;
                }
            }
        }
        if n == 0 {
            return Vec::new();
        }
        sum.iter().map(|s| s / n as f64).collect()
    }
}

/// RGBA image of class codes in the fixed palette; invalid codes are black.
#[wasm_bindgen]
pub fn codes_rgba(codes: &[u8]) -> Vec<u8> {
    codes
        .iter()
        .flat_map(|&c| {
            let [r, g, b] = ClassLabel::from_code(c).map_or([0, 0, 0], |l| l.rgb());
            [r, g, b, 255]
        })
        .collect()
}

/// Replaces a `rate` fraction of pixels with a uniformly random class.
#[wasm_bindgen]
pub fn salt_and_pepper(codes: &[u8], rate: f64, seed: u32) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
    let rate = rate.clamp(0.0, 1.0);
    codes
        .iter()
        .map(|&c| if rng.random_bool(rate) { rng.random_range(0..5) } else { c })
        .collect()
}

pub fn postprocess(codes: &[u8], rows: usize, cols: usize, median_kernel: usize, structuring_element: usize) -> Result<Vec<u8>, String> {
    let map = ClassMap::from_codes(rows, cols, codes).map_err(|e| e.to_string())?;
    let cfg = PostprocessConfig { median_kernel, structuring_element };
    Ok(postprocess_map(&map, cfg).map_err(|e| e.to_string())?.codes())
}

/// Median filter then per-class opening and closing.
#[wasm_bindgen]
pub fn postprocess_codes(codes: &[u8], rows: usize, cols: usize, median_kernel: usize, structuring_element: usize) -> Result<Vec<u8>, JsError> {
    postprocess(codes, rows, cols, median_kernel, structuring_element).map_err(js)
}

pub fn score_json(truth: &[u8], pred: &[u8], rows: usize, cols: usize, band: usize) -> Result<String, String> {
    let t = ClassMap::from_codes(rows, cols, truth).map_err(|e| e.to_string())?;
    let p = ClassMap::from_codes(rows, cols, pred).map_err(|e| e.to_string())?;
    Ok(evaluate(&t, &p, band).map_err(|e| e.to_string())?.to_json())
}

/// Metrics report of `pred` against `truth` as JSON.
#[wasm_bindgen]
pub fn score(truth: &[u8], pred: &[u8], rows: usize, cols: usize, border_band: usize) -> Result<String, JsError> {
    score_json(truth, pred, rows, cols, border_band).map_err(js)
}
