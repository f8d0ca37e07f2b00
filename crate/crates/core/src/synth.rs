//! Synthetic conveyor scenes: parametric class spectra rendered into raw
//! 12-bit cubes with exact ground-truth masks.
//!
//! A pixel of an object with illumination `a` has, in band `b`,
//!
//! ```text
//! raw = round(a · s_class(b) · gain(b) + DARK_OFFSET + N(0, σ²))
//! ```
//!
//! clamped to `0..=4095`. Each object draws its own `a` from the scene's
//! light range; the conveyor belt uses `a = 1`. Black mode multiplies the
//! objects' `a` by 0.1 and leaves the belt and the noise floor untouched.
//! Objects are painted in file order, so later objects cover earlier ones.
//!
//! # Scene files
//!
//! One directive per line, `#` starts a comment. `scene` opens a new scene;
//! the other directives apply to the most recent one.
//!
//! ```text
//! scene     <name>
//! role      train | test
//! rows      <n>
//! cols      <n>                                      default 640
//! seed      <u64>
//! light     <lo> <hi>                                default 0.85 1.15
//! noise     <sigma>                                  default 20 (raw counts)
//! black     on | off                                 default off
//! relight   <factor>                                 default 0.92
//! rect      <class> <row> <col> <height> <width>
//! ellipse   <class> <row> <col> <radius_rows> <radius_cols> [angle_deg]
//! fragments <class> <count> <min_radius> <max_radius>
//! ```
//!
//! `fragments` scatters randomly placed, randomly rotated small ellipses.
//! Train scenes are rendered twice; the second render scales every
//! illumination by `relight` and uses fresh noise.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::calibration::{build_black_reference, write_reference};
use crate::data::{write_cube, write_mask, ClassLabel, HyperCube, LabelMap, BANDS, COLS, RAW_MAX};
use crate::error::{Error, Result};
use crate::manifest::{CubeEntry, Manifest};

pub const SIGNATURE_VERSION: &str = "synth-v1";
pub const DARK_OFFSET: f64 = 48.0;
pub const BLACK_FACTOR: f64 = 0.1;
/// Largest tolerated fraction of clipped samples in a rendered cube.
pub const MAX_CLIP_FRACTION: f64 = 0.001;

/// The scenes used by `generate` when no scene file is given.
pub const DEFAULT_SCENES: &str = include_str!("../assets/default.scenes");

/// Sensor responsivity in raw counts per unit reflectance.
pub fn gain(band: usize) -> f64 {
    let z = (band as f64 - 90.0) / 70.0;
    2600.0 * (0.7 + 0.3 * (-z * z).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub center: f64,
    pub width: f64,
    /// Negative for absorption dips.
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSignature {
    pub class: ClassLabel,
    pub baseline: f64,
    pub peaks: Vec<Peak>,
}

impl SpectralSignature {
    pub fn reflectance(&self, bands: usize) -> Vec<f64> {
        (0..bands)
            .map(|b| {
                self.baseline
                    + self
                        .peaks
                        .iter()
                        .map(|p| p.amplitude * (-0.5 * ((b as f64 - p.center) / p.width).powi(2)).exp())
                        .sum::<f64>()
            })
            .collect()
    }
}

fn sig(class: ClassLabel, baseline: f64, peaks: &[(f64, f64, f64)]) -> SpectralSignature {
    SpectralSignature {
        class,
        baseline,
        peaks: peaks.iter().map(|&(center, width, amplitude)| Peak { center, width, amplitude }).collect(),
    }
}

/// The versioned signature set, indexed by class code. The belt is dark and
/// nearly flat; each polymer has a bright baseline with several dips.
pub fn default_signatures() -> [SpectralSignature; 5] {
    use ClassLabel::*;
    [
        sig(Background, 0.08, &[(40.0, 30.0, 0.012), (150.0, 25.0, -0.010), (200.0, 20.0, 0.008)]),
        sig(Hdpe, 0.68, &[(78.0, 6.0, -0.22), (131.0, 8.0, -0.18), (205.0, 10.0, -0.30)]),
        sig(Pet, 0.58, &[(47.0, 7.0, -0.15), (136.0, 5.0, -0.20), (185.0, 9.0, -0.25), (210.0, 6.0, -0.12)]),
        sig(Pp, 0.63, &[(74.0, 5.0, -0.20), (110.0, 8.0, -0.10), (129.0, 6.0, -0.22), (200.0, 7.0, -0.28)]),
        sig(Ps, 0.52, &[(58.0, 6.0, -0.18), (95.0, 10.0, -0.08), (170.0, 7.0, -0.20), (214.0, 5.0, -0.22)]),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Rect { row: f64, col: f64, height: f64, width: f64 },
    Ellipse { row: f64, col: f64, radius_rows: f64, radius_cols: f64, angle_deg: f64 },
}

impl Shape {
    /// Whether the pixel centred at `(y, x)` is covered.
    pub fn contains(&self, y: f64, x: f64) -> bool {
        match *self {
            Shape::Rect { row, col, height, width } => y >= row && y < row + height && x >= col && x < col + width,
            Shape::Ellipse { row, col, radius_rows, radius_cols, angle_deg } => {
                let (s, c) = (angle_deg * PI / 180.0).sin_cos();
                let (dy, dx) = (y - row, x - col);
                let u = (dy * c + dx * s) / radius_rows;
                let v = (-dy * s + dx * c) / radius_cols;
                u * u + v * v <= 1.0
            }
        }
    }

    /// `(row_min, row_max, col_min, col_max)`, inclusive, conservative.
    fn bounds(&self) -> (f64, f64, f64, f64) {
        match *self {
            Shape::Rect { row, col, height, width } => (row, row + height - 1.0, col, col + width - 1.0),
            Shape::Ellipse { row, col, radius_rows, radius_cols, .. } => {
                let r = radius_rows.max(radius_cols);
                (row - r, row + r, col - r, col + r)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectSpec {
    Shape { class: ClassLabel, shape: Shape },
    Fragments { class: ClassLabel, count: usize, min_radius: f64, max_radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneRole {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub name: String,
    pub role: SceneRole,
    pub rows: usize,
    pub cols: usize,
    pub light: (f64, f64),
    pub noise: f64,
    pub seed: u64,
    pub black: bool,
    pub relight: f64,
    pub objects: Vec<ObjectSpec>,
}

impl SceneSpec {
    pub fn new(name: &str, role: SceneRole, rows: usize, seed: u64) -> Self {
        Self {
            name: name.to_string(),
            role,
            rows,
            cols: COLS,
            light: (0.85, 1.15),
            noise: 20.0,
            seed,
            black: false,
            relight: 0.92,
            objects: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("scene {:?}: {m}", self.name)));
        if self.rows == 0 || self.cols == 0 {
            return bad("rows and cols must be positive".into());
        }
        let (lo, hi) = self.light;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad(format!("light range [{lo}, {hi}] must satisfy 0 < lo <= hi"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) || !(self.relight > 0.0 && self.relight.is_finite()) {
            return bad("noise must be >= 0 and relight > 0".into());
        }
        for (i, o) in self.objects.iter().enumerate() {
            match o {
                ObjectSpec::Shape { shape, .. } => {
                    let (r0, r1, c0, c1) = shape.bounds();
                    if r0 < 0.0 || c0 < 0.0 || r1 > self.rows as f64 - 1.0 || c1 > self.cols as f64 - 1.0 {
                        return bad(format!("object {} lies outside the {}×{} frame", i + 1, self.rows, self.cols));
                    }
                }
                ObjectSpec::Fragments { min_radius, max_radius, .. } => {
                    if !(*min_radius > 0.0 && min_radius <= max_radius) {
                        return bad(format!("object {}: need 0 < min_radius <= max_radius", i + 1));
                    }
                    if 2.0 * max_radius.ceil() + 1.0 > self.rows.min(self.cols) as f64 {
                        return bad(format!("object {}: fragments do not fit in the frame", i + 1));
                    }
                }
            }
        }
        Ok(())
    }

    /// Concrete shapes with their illumination, fragments expanded.
    pub fn layout(&self) -> Vec<(ClassLabel, Shape, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (lo, hi) = self.light;
        let light = |rng: &mut ChaCha8Rng| if lo == hi { lo } else { rng.random_range(lo..=hi) };
        let mut out = Vec::new();
        for o in &self.objects {
            match *o {
                ObjectSpec::Shape { class, shape } => out.push((class, shape, light(&mut rng))),
                ObjectSpec::Fragments { class, count, min_radius, max_radius } => {
                    for _ in 0..count {
                        let mut radius =
                            || if min_radius == max_radius { min_radius } else { rng.random_range(min_radius..=max_radius) };
                        let (ry, rx) = (radius(), radius());
                        let r = ry.max(rx).ceil();
                        let row = rng.random_range(r..=self.rows as f64 - 1.0 - r);
                        let col = rng.random_range(r..=self.cols as f64 - 1.0 - r);
                        let angle_deg = rng.random_range(0.0..180.0);
                        let shape = Shape::Ellipse { row, col, radius_rows: ry, radius_cols: rx, angle_deg };
                        out.push((class, shape, light(&mut rng)));
                    }
                }
            }
        }
        out
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| parse_err(line, format!("invalid {what} {tok:?}")))
}

struct Pending {
    spec: SceneSpec,
    line: usize,
    role: bool,
    rows: bool,
    seed: bool,
}

impl Pending {
    fn finish(self) -> Result<SceneSpec> {
        for (have, key) in [(self.role, "role"), (self.rows, "rows"), (self.seed, "seed")] {
            if !have {
                return Err(parse_err(self.line, format!("scene {:?} lacks `{key}`", self.spec.name)));
            }
        }
        self.spec.validate().map_err(|e| parse_err(self.line, e.to_string()))?;
        Ok(self.spec)
    }
}

/// Parses a scene file; errors name the offending line.
pub fn parse_scenes(text: &str) -> Result<Vec<SceneSpec>> {
    let mut done = Vec::new();
    let mut cur: Option<Pending> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let toks: Vec<&str> = raw.split('#').next().unwrap_or("").split_whitespace().collect();
        let Some((&key, args)) = toks.split_first() else { continue };
        let arity = |lo: usize, hi: usize| {
            if (lo..=hi).contains(&args.len()) {
                Ok(())
            } else {
                let want = if lo == hi { lo.to_string() } else { format!("{lo}-{hi}") };
                Err(parse_err(line, format!("`{key}` takes {want} argument(s), got {}", args.len())))
            }
        };
        if key == "scene" {
            arity(1, 1)?;
            if let Some(p) = cur.take() {
                done.push(p.finish()?);
            }
            let spec = SceneSpec::new(args[0], SceneRole::Test, 0, 0);
            cur = Some(Pending { spec, line, role: false, rows: false, seed: false });
            continue;
        }
        let p = cur.as_mut().ok_or_else(|| parse_err(line, format!("`{key}` before any `scene`")))?;
        let s = &mut p.spec;
        let class = |tok: &str| ClassLabel::from_name(tok).ok_or_else(|| parse_err(line, format!("unknown class {tok:?}")));
        let floats = |toks: &[&str]| toks.iter().map(|t| num::<f64>(t, line, "number")).collect::<Result<Vec<f64>>>();
        match key {
            "role" => {
                arity(1, 1)?;
                s.role = match args[0] {
                    "train" => SceneRole::Train,
                    "test" => SceneRole::Test,
                    other => return Err(parse_err(line, format!("role must be train or test, got {other:?}"))),
                };
                p.role = true;
            }
            "rows" => {
                arity(1, 1)?;
                s.rows = num(args[0], line, "row count")?;
                p.rows = true;
            }
            "cols" => {
                arity(1, 1)?;
                s.cols = num(args[0], line, "column count")?;
            }
            "seed" => {
                arity(1, 1)?;
                s.seed = num(args[0], line, "seed")?;
                p.seed = true;
            }
            "light" => {
                arity(2, 2)?;
                let v = floats(args)?;
                s.light = (v[0], v[1]);
            }
            "noise" => {
                arity(1, 1)?;
                s.noise = num(args[0], line, "noise")?;
            }
            "relight" => {
                arity(1, 1)?;
                s.relight = num(args[0], line, "relight factor")?;
            }
            "black" => {
                arity(1, 1)?;
                s.black = match args[0] {
                    "on" => true,
                    "off" => false,
                    other => return Err(parse_err(line, format!("black must be on or off, got {other:?}"))),
                };
            }
            "rect" => {
                arity(5, 5)?;
                let v = floats(&args[1..])?;
                if v[2] <= 0.0 || v[3] <= 0.0 {
                    return Err(parse_err(line, "rect height and width must be positive"));
                }
                let shape = Shape::Rect { row: v[0], col: v[1], height: v[2], width: v[3] };
                s.objects.push(ObjectSpec::Shape { class: class(args[0])?, shape });
            }
            "ellipse" => {
                arity(5, 6)?;
                let v = floats(&args[1..])?;
                if v[2] <= 0.0 || v[3] <= 0.0 {
                    return Err(parse_err(line, "ellipse radii must be positive"));
                }
                let shape = Shape::Ellipse {
                    row: v[0],
                    col: v[1],
                    radius_rows: v[2],
                    radius_cols: v[3],
                    angle_deg: v.get(4).copied().unwrap_or(0.0),
                };
                s.objects.push(ObjectSpec::Shape { class: class(args[0])?, shape });
            }
            "fragments" => {
                arity(4, 4)?;
                s.objects.push(ObjectSpec::Fragments {
                    class: class(args[0])?,
                    count: num(args[1], line, "fragment count")?,
                    min_radius: num(args[2], line, "radius")?,
                    max_radius: num(args[3], line, "radius")?,
                });
            }
            other => return Err(parse_err(line, format!("unknown directive {other:?}"))),
        }
    }
    if let Some(p) = cur.take() {
        done.push(p.finish()?);
    }
    Ok(done)
}

/// Output of [`render_scene`].
#[derive(Debug, Clone)]
pub struct Rendered {
    pub cube: HyperCube,
    pub mask: LabelMap,
    /// Illumination of each object in layout order, black factor included.
    pub illumination: Vec<f64>,
    pub clipped: usize,
}

/// Renders `spec` with every illumination multiplied by `light_factor`.
/// `render` selects an independent noise stream.
pub fn render_scene(spec: &SceneSpec, signatures: &[SpectralSignature; 5], light_factor: f64, render: u64) -> Result<Rendered> {
    spec.validate()?;
    let (rows, cols) = (spec.rows, spec.cols);
    let layout = spec.layout();
    let mut owner = vec![0usize; rows * cols];
    for (k, (_, shape, _)) in layout.iter().enumerate() {
        let (r0, r1, c0, c1) = shape.bounds();
        let (r0, r1) = (r0.floor().max(0.0) as usize, (r1.ceil() as usize).min(rows - 1));
        let (c0, c1) = (c0.floor().max(0.0) as usize, (c1.ceil() as usize).min(cols - 1));
        for y in r0..=r1 {
            for x in c0..=c1 {
                if shape.contains(y as f64, x as f64) {
                    owner[y * cols + x] = k + 1;
                }
            }
        }
    }
    let object_gain = if spec.black { BLACK_FACTOR } else { 1.0 };
    let illumination: Vec<f64> = layout.iter().map(|(_, _, a)| a * light_factor * object_gain).collect();
    let reflect: Vec<Vec<f64>> = signatures.iter().map(|s| s.reflectance(BANDS)).collect();
    let mean_of = |class: ClassLabel, a: f64| -> Vec<f64> {
        (0..BANDS).map(|b| a * reflect[class.index()][b] * gain(b) + DARK_OFFSET).collect()
    };
    let mut means = vec![mean_of(ClassLabel::Background, light_factor)];
    means.extend(layout.iter().zip(&illumination).map(|((c, _, _), &a)| mean_of(*c, a)));

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(render + 1);
    let normal = Normal::new(0.0, spec.noise).map_err(|e| Error::Config(e.to_string()))?;
    let mut data = vec![0u16; rows * cols * BANDS];
    let mut clipped = 0usize;
    for (px, &o) in data.chunks_exact_mut(BANDS).zip(&owner) {
        for (v, &m) in px.iter_mut().zip(&means[o]) {
            let x = (m + normal.sample(&mut rng)).round();
            if x < 0.0 || x > RAW_MAX as f64 {
                clipped += 1;
            }
            *v = x.clamp(0.0, RAW_MAX as f64) as u16;
        }
    }
    if clipped as f64 > MAX_CLIP_FRACTION * data.len() as f64 {
        return Err(Error::Config(format!(
            "scene {:?}: {clipped} of {} samples clipped (limit {:.1}%)",
            spec.name,
            data.len(),
            100.0 * MAX_CLIP_FRACTION
        )));
    }
    let labels = owner.iter().map(|&o| if o == 0 { ClassLabel::Background } else { layout[o - 1].0 }).collect();
    Ok(Rendered {
        cube: HyperCube::new_raw(rows, cols, BANDS, data)?,
        mask: LabelMap::new(rows, cols, labels)?,
        illumination,
        clipped,
    })
}

/// Lines recorded with the shutter closed: dark offset plus noise.
pub fn render_dark(lines: usize, cols: usize, noise: f64, seed: u64) -> Result<HyperCube> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise).map_err(|e| Error::Config(e.to_string()))?;
    let data = (0..lines * cols * BANDS)
        .map(|_| (DARK_OFFSET + normal.sample(&mut rng)).round().clamp(0.0, RAW_MAX as f64) as u16)
        .collect();
    HyperCube::new_raw(lines, cols, BANDS, data)
}

/// Expected raw level of a perfect white tile (reflectance 1, `a = 1`).
pub fn white_reference() -> Vec<f64> {
    (0..BANDS).map(|b| gain(b) + DARK_OFFSET).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct GenerateOptions {
    pub with_white: bool,
    pub dark_lines: usize,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self { with_white: false, dark_lines: 32 }
    }
}

/// Renders every scene into `out_dir` and writes the manifest there.
/// Train scenes yield two cubes each (light factors 1 and `relight`).
pub fn generate_dataset(scenes: &[SceneSpec], out_dir: &Path, opts: GenerateOptions) -> Result<Manifest> {
    if !scenes.iter().any(|s| s.role == SceneRole::Train) || !scenes.iter().any(|s| s.role == SceneRole::Test) {
        return Err(Error::Config("need at least one train and one test scene".into()));
    }
    for s in scenes {
        s.validate()?;
    }
    fs::create_dir_all(out_dir)?;
    let signatures = default_signatures();
    let mut manifest = Manifest::new(out_dir);
    let mut dataset_max = 0u16;
    for s in scenes {
        let renders: &[f64] = match s.role {
            SceneRole::Train => &[1.0, s.relight],
            SceneRole::Test => &[1.0],
        };
        for (r, &factor) in renders.iter().enumerate() {
            let out = render_scene(s, &signatures, factor, r as u64)?;
            let stem = format!("{}_{}", s.name, r);
            let (cube, mask) = (PathBuf::from(format!("{stem}.hsc")), PathBuf::from(format!("{stem}.hsm")));
            write_cube(&out.cube, out_dir.join(&cube))?;
            write_mask(&out.mask, out_dir.join(&mask))?;
            let entry = CubeEntry { cube, mask, scene: s.name.clone(), seed: s.seed, light: factor, black: s.black, normalized: None };
            match s.role {
                SceneRole::Train => {
                    dataset_max = dataset_max.max(out.cube.raw().expect("rendered raw").iter().copied().max().unwrap_or(0));
                    manifest.train.push(entry);
                }
                SceneRole::Test => manifest.test.push(entry),
            }
        }
    }
    let dark_seed = scenes.iter().fold(0x0DA2_C0DE_u64, |h, s| h.rotate_left(7) ^ s.seed);
    let dark = render_dark(opts.dark_lines, scenes[0].cols, scenes[0].noise, dark_seed)?;
    write_cube(&dark, out_dir.join("dark.hsc"))?;
    write_reference(&build_black_reference(&dark)?, out_dir.join("black.hsb"))?;
    manifest.dark_cube = Some("dark.hsc".into());
    manifest.black_reference = Some("black.hsb".into());
    if opts.with_white {
        write_reference(&white_reference(), out_dir.join("white.hsb"))?;
        manifest.white_reference = Some("white.hsb".into());
    }
    manifest.dataset_max = Some(dataset_max as f64);
    manifest.save()?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signatures_are_valid_and_separated() {
        let sigs = default_signatures();
        for (i, s) in sigs.iter().enumerate() {
            assert_eq!(s.class.index(), i);
            let r = s.reflectance(BANDS);
            assert!(r.iter().all(|&v| v > 0.0 && v < 1.2), "{:?}", s.class);
            if s.class != ClassLabel::Background {
                assert!(s.peaks.len() >= 2);
            }
        }
        for a in 0..5 {
            for b in a + 1..5 {
                let (x, y) = (sigs[a].reflectance(BANDS), sigs[b].reflectance(BANDS));
                let d = x.iter().zip(&y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
                assert!(d > 0.05, "{a} vs {b}: {d}");
            }
        }
        assert_eq!(default_signatures(), sigs);
    }

    #[test]
    fn scene_grammar() {
        let text = "scene a\nrole train\nrows 20\ncols 30\nseed 4\nrect PET 1 1 5 6\nellipse pp 10 15 4 6 30\nfragments ps 3 1.5 2\n";
        let s = parse_scenes(text).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].rows, s[0].cols, s[0].role, s[0].objects.len()), (20, 30, SceneRole::Train, 3));
        assert_eq!(s[0].layout().len(), 5);
        for (bad, line) in [
            ("scene a\nrole train\nrows 10\nseed x\n", 4),
            ("rows 10\n", 1),
            ("scene a\nrole test\nrows 10\nseed 1\nrect XX 0 0 1 1\n", 5),
            ("scene a\nrole test\nrows 10\nseed 1\nrect PET 0 0 1\n", 5),
            ("scene a\nrows 10\nseed 1\n", 1),
            ("scene a\nrole test\nrows 10\ncols 10\nseed 1\nrect PET 8 8 5 5\n", 1),
        ] {
            match parse_scenes(bad) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{bad:?}"),
                other => panic!("{bad:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn default_scenes_parse() {
        let s = parse_scenes(DEFAULT_SCENES).unwrap();
        let train: Vec<_> = s.iter().filter(|s| s.role == SceneRole::Train).collect();
        assert_eq!(train.len(), 4);
        assert!(train.iter().all(|s| s.rows == 256));
        assert!(s.iter().any(|s| s.black));
    }

    #[test]
    fn empty_scene_is_background() {
        let s = SceneSpec { cols: 8, ..SceneSpec::new("e", SceneRole::Test, 3, 1) };
        let out = render_scene(&s, &default_signatures(), 1.0, 0).unwrap();
        assert!(out.mask.labels().iter().all(|&l| l == ClassLabel::Background));
    }

    #[test]
    fn noiseless_object_is_uniform() {
        let mut s = SceneSpec { cols: 12, noise: 0.0, light: (1.0, 1.0), ..SceneSpec::new("u", SceneRole::Test, 6, 3) };
        s.objects.push(ObjectSpec::Shape {
            class: ClassLabel::Pet,
            shape: Shape::Rect { row: 1.0, col: 2.0, height: 3.0, width: 4.0 },
        });
        let out = render_scene(&s, &default_signatures(), 1.0, 0).unwrap();
        let raw = out.cube.raw().unwrap();
        let px = |y: usize, x: usize| &raw[(y * 12 + x) * BANDS..(y * 12 + x + 1) * BANDS];
        assert_eq!(out.mask.histogram()[ClassLabel::Pet.index()], 12);
        for y in 1..4 {
            for x in 2..6 {
                assert_eq!(px(y, x), px(1, 2));
                assert_eq!(out.mask.get(y, x), ClassLabel::Pet);
            }
        }
        assert_eq!(out.mask.get(0, 2), ClassLabel::Background);
    }
}
