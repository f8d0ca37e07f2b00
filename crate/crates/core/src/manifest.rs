//! Dataset manifest: a `key = value` file listing the cubes, masks and
//! calibration inputs of a dataset, with paths relative to its directory.
//!
//! ```text
//! format = p1ch-manifest-1
//! signatures = synth-v1
//! dataset_max = 2391
//! black_reference = black.hsb
//! normalization = maxref
//! train.count = 8
//! train.0.cube = conveyor_a_0.hsc
//! train.0.mask = conveyor_a_0.hsm
//! train.0.normalized = conveyor_a_0.norm.hsc
//! ...
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::calibration::{read_reference, Normalizer, ReferenceFrame};
use crate::data::{flatten_rebalanced, read_cube, read_mask_for, write_cube, CubeState, HyperCube, LabelMap, PixelDataset};
use crate::error::{Error, Result};
use crate::kv;

pub const MANIFEST_FILE: &str = "manifest.txt";
const FORMAT: &str = "p1ch-manifest-1";

/// Which normalization a calibrated dataset went through.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `(I - black) / M` with the dataset maximum `M`.
    MaxRef,
    /// `(I - black) / (white - black)`.
    WhiteBlack,
}

impl Normalization {
    pub fn name(self) -> &'static str {
        match self {
            Normalization::MaxRef => "maxref",
            Normalization::WhiteBlack => "whiteblack",
        }
    }
}

impl std::str::FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "maxref" => Ok(Normalization::MaxRef),
            "whiteblack" => Ok(Normalization::WhiteBlack),
            other => Err(format!("unknown normalization {other:?} (expected maxref or whiteblack)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubeEntry {
    pub cube: PathBuf,
    pub mask: PathBuf,
    pub scene: String,
    pub seed: u64,
    /// Illumination factor of this render.
    pub light: f64,
    pub black: bool,
    pub normalized: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    /// Directory the relative paths are resolved against.
    pub dir: PathBuf,
    pub signatures: String,
    pub dataset_max: Option<f64>,
    pub dark_cube: Option<PathBuf>,
    pub black_reference: Option<PathBuf>,
    pub white_reference: Option<PathBuf>,
    pub normalization: Option<Normalization>,
    pub train: Vec<CubeEntry>,
    pub test: Vec<CubeEntry>,
}

impl Manifest {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            signatures: crate::synth::SIGNATURE_VERSION.to_string(),
            dataset_max: None,
            dark_cube: None,
            black_reference: None,
            white_reference: None,
            normalization: None,
            train: Vec::new(),
            test: Vec::new(),
        }
    }

    pub fn path(&self) -> PathBuf {
        self.dir.join(MANIFEST_FILE)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.dir.join(p)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "format = {FORMAT}");
        let _ = writeln!(s, "signatures = {}", self.signatures);
        if let Some(m) = self.dataset_max {
            let _ = writeln!(s, "dataset_max = {m}");
        }
        for (key, p) in [("dark_cube", &self.dark_cube), ("black_reference", &self.black_reference), ("white_reference", &self.white_reference)] {
            if let Some(p) = p {
                let _ = writeln!(s, "{key} = {}", p.display());
            }
        }
        if let Some(n) = self.normalization {
            let _ = writeln!(s, "normalization = {}", n.name());
        }
        for (role, list) in [("train", &self.train), ("test", &self.test)] {
            let _ = writeln!(s, "{role}.count = {}", list.len());
            for (i, e) in list.iter().enumerate() {
                let _ = writeln!(s, "{role}.{i}.cube = {}", e.cube.display());
                let _ = writeln!(s, "{role}.{i}.mask = {}", e.mask.display());
                let _ = writeln!(s, "{role}.{i}.scene = {}", e.scene);
                let _ = writeln!(s, "{role}.{i}.seed = {}", e.seed);
                let _ = writeln!(s, "{role}.{i}.light = {}", e.light);
                let _ = writeln!(s, "{role}.{i}.black = {}", e.black);
                if let Some(n) = &e.normalized {
                    let _ = writeln!(s, "{role}.{i}.normalized = {}", n.display());
                }
            }
        }
        s
    }

    pub fn from_text(text: &str, dir: &Path) -> Result<Self> {
        let entries = kv::parse(text)?;
        let get = |k: &str| entries.iter().find(|e| e.key == k);
        match get("format") {
            Some(e) if e.value == FORMAT => {}
            Some(e) => return Err(Error::Parse { line: e.line, message: format!("unsupported manifest format {:?}", e.value) }),
            None => return Err(Error::Parse { line: 1, message: "manifest lacks `format`".into() }),
        }
        let mut m = Manifest::new(dir);
        let mut lists: [(&str, Vec<CubeEntry>); 2] = [("train", Vec::new()), ("test", Vec::new())];
        for (role, list) in lists.iter_mut() {
            let count: usize = match get(&format!("{role}.count")) {
                Some(e) => e.parse()?,
                None => 0,
            };
            for i in 0..count {
                let field = |f: &str| {
                    get(&format!("{role}.{i}.{f}"))
                        .ok_or_else(|| Error::Parse { line: 0, message: format!("manifest lacks `{role}.{i}.{f}`") })
                };
                list.push(CubeEntry {
                    cube: field("cube")?.value.clone().into(),
                    mask: field("mask")?.value.clone().into(),
                    scene: field("scene")?.value.clone(),
                    seed: field("seed")?.parse()?,
                    light: field("light")?.parse()?,
                    black: field("black")?.parse()?,
                    normalized: get(&format!("{role}.{i}.normalized")).map(|e| e.value.clone().into()),
                });
            }
        }
        for e in &entries {
            let known_list = lists.iter().any(|(role, list)| {
                e.key == format!("{role}.count")
                    || (0..list.len()).any(|i| {
                        e.key.strip_prefix(&format!("{role}.{i}.")).is_some_and(|f| {
                            ["cube", "mask", "scene", "seed", "light", "black", "normalized"].contains(&f)
                        })
                    })
            });
            match e.key.as_str() {
                "format" => {}
                "signatures" => m.signatures = e.value.clone(),
                "dataset_max" => m.dataset_max = Some(e.parse()?),
                "dark_cube" => m.dark_cube = Some(e.value.clone().into()),
                "black_reference" => m.black_reference = Some(e.value.clone().into()),
                "white_reference" => m.white_reference = Some(e.value.clone().into()),
                "normalization" => m.normalization = Some(e.parse()?),
                _ if known_list => {}
                _ => return Err(e.unknown()),
            }
        }
        let [(_, train), (_, test)] = lists;
        m.train = train;
        m.test = test;
        Ok(m)
    }

    /// Loads `path`, which may name the manifest file or its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        let text = fs::read_to_string(&file)?;
        let dir = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_text(&text, &dir)
    }

    pub fn save(&self) -> Result<()> {
        fs::write(self.path(), self.to_text())?;
        Ok(())
    }

    /// Reference frame assembled from the files the manifest names.
    pub fn reference(&self) -> Result<ReferenceFrame> {
        let black = self
            .black_reference
            .as_ref()
            .ok_or_else(|| Error::MissingReference("manifest names no black_reference".into()))?;
        let mut r = ReferenceFrame::new(read_reference(self.resolve(black))?)?;
        if let Some(m) = self.dataset_max {
            r = r.with_dataset_max(m)?;
        }
        if let Some(w) = &self.white_reference {
            r = r.with_white(read_reference(self.resolve(w))?)?;
        }
        Ok(r)
    }

    pub fn normalizer(&self, mode: Normalization) -> Result<Normalizer> {
        let r = self.reference()?;
        match mode {
            Normalization::MaxRef => Normalizer::max_reference(&r),
            Normalization::WhiteBlack => Normalizer::white_black(&r).map_err(|_| {
                Error::MissingReference("whiteblack normalization needs a white reference (white_reference in the manifest)".into())
            }),
        }
    }

    /// The normalized cube of `entry`: read from disk after calibration,
    /// otherwise computed in memory with `fallback`.
    pub fn normalized_cube(&self, entry: &CubeEntry, fallback: Option<&Normalizer>) -> Result<HyperCube> {
        if let Some(p) = &entry.normalized {
            let cube = read_cube(self.resolve(p))?;
            cube.require_normalized()?;
            return Ok(cube);
        }
        let n = fallback.ok_or_else(|| {
            Error::precondition(format!("{} is not calibrated; run `p1ch calibrate` first", entry.cube.display()))
        })?;
        n.normalize(&read_cube(self.resolve(&entry.cube))?)
    }

    pub fn mask(&self, entry: &CubeEntry, cube: &HyperCube) -> Result<LabelMap> {
        read_mask_for(self.resolve(&entry.mask), cube)
    }

    /// Flattened, background-rebalanced training pixels, loading one cube
    /// at a time.
    pub fn training_set(&self, seed: u64, fallback: Option<&Normalizer>) -> Result<PixelDataset> {
        if self.train.is_empty() {
            return Err(Error::precondition("manifest lists no train cubes"));
        }
        let masks = self
            .train
            .iter()
            .map(|e| crate::data::read_mask(self.resolve(&e.mask)))
            .collect::<Result<Vec<_>>>()?;
        flatten_rebalanced(&masks, seed, |i| self.normalized_cube(&self.train[i], fallback))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CalibrationSummary {
    pub written: usize,
    pub skipped: usize,
}

/// Writes a normalized copy of every cube and records it in the manifest.
/// Cubes already normalized with the same mode are left alone.
pub fn calibrate_dataset(manifest: &mut Manifest, mode: Normalization) -> Result<CalibrationSummary> {
    let normalizer = manifest.normalizer(mode)?;
    let same_mode = manifest.normalization == Some(mode);
    let mut summary = CalibrationSummary::default();
    let dir = manifest.dir.clone();
    for entry in manifest.train.iter_mut().chain(manifest.test.iter_mut()) {
        if same_mode {
            if let Some(p) = &entry.normalized {
                if fs::metadata(dir.join(p)).is_ok() {
                    summary.skipped += 1;
                    continue;
                }
            }
        }
        let raw = read_cube(dir.join(&entry.cube))?;
        let out = match raw.state() {
            CubeState::Raw16 => normalizer.normalize(&raw)?,
            CubeState::NormalizedF32 => raw,
        };
        let stem = entry.cube.file_stem().and_then(|s| s.to_str()).unwrap_or("cube");
        let target = entry.cube.with_file_name(format!("{stem}.norm.hsc"));
        write_cube(&out, dir.join(&target))?;
        entry.normalized = Some(target);
        summary.written += 1;
    }
    manifest.normalization = Some(mode);
    manifest.save()?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Manifest {
        let mut m = Manifest::new(Path::new("/data"));
        m.dataset_max = Some(2391.0);
        m.black_reference = Some("black.hsb".into());
        m.normalization = Some(Normalization::MaxRef);
        let e = CubeEntry {
            cube: "a_0.hsc".into(),
            mask: "a_0.hsm".into(),
            scene: "a".into(),
            seed: 7,
            light: 0.92,
            black: false,
            normalized: Some("a_0.norm.hsc".into()),
        };
        m.train.push(e.clone());
        m.test.push(CubeEntry { black: true, normalized: None, ..e });
        m
    }

    #[test]
    fn text_round_trip() {
        let m = sample();
        assert_eq!(Manifest::from_text(&m.to_text(), Path::new("/data")).unwrap(), m);
    }

    #[test]
    fn rejects_unknown_and_missing_keys() {
        let text = sample().to_text();
        assert!(matches!(Manifest::from_text(&format!("{text}bogus = 1\n"), Path::new(".")), Err(Error::Parse { .. })));
        let cut = text.replace("train.0.mask = a_0.hsm\n", "");
        assert!(Manifest::from_text(&cut, Path::new(".")).is_err());
        assert!(Manifest::from_text("signatures = x\n", Path::new(".")).is_err());
    }
}
