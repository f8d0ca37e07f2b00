//! `p1ch`: generate synthetic data, calibrate, train, classify, score and
//! benchmark.
//!
//! Exit codes: 0 success, 1 usage error (bad flags, malformed scene or
//! config file), 2 data error (missing or inconsistent inputs, I/O), 3
//! runtime failure.

mod raster;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use p1ch::calibration::Normalizer;
use p1ch::data::{read_cube, read_mask, write_mask, CubeState, HyperCube};
use p1ch::evaluation::{evaluate, DEFAULT_BORDER_BAND};
use p1ch::inference::{benchmark, classify_cube_streaming, LineSource};
use p1ch::manifest::{calibrate_dataset, Manifest, Normalization};
use p1ch::model::{load_checkpoint, save_checkpoint, ModelParams};
use p1ch::postprocess::{postprocess_map, PostprocessConfig};
use p1ch::synth::{generate_dataset, parse_scenes, GenerateOptions, DEFAULT_SCENES};
use p1ch::training::{train, TrainConfig, TrainOptions};
use p1ch::Error;

#[derive(Parser)]
#[command(name = "p1ch", version, about = "Pixel-level plastic classification of hyperspectral line-scan cubes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic dataset (cubes, masks, dark reference, manifest).
    Generate {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Scene file; the built-in default scenes when omitted.
        #[arg(long)]
        scenes: Option<PathBuf>,
        /// Also write a white reference (white.hsb).
        #[arg(long)]
        with_white: bool,
        /// Number of dark lines averaged into the black reference.
        #[arg(long, default_value_t = 32)]
        dark_lines: usize,
    },
    /// Write normalized copies of every cube listed in a manifest.
    Calibrate {
        manifest: PathBuf,
        #[arg(long, default_value = "maxref")]
        mode: Normalization,
    },
    /// Train a classifier on the train cubes of a calibrated manifest.
    Train {
        manifest: PathBuf,
        /// `key = value` training configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for checkpoint.p1ch, train_report.json and train_config.txt; defaults to the manifest's directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Suppress per-epoch progress lines.
        #[arg(long)]
        quiet: bool,
    },
    /// Classify a cube line by line and write the class map.
    Infer {
        checkpoint: PathBuf,
        cube: PathBuf,
        /// Output mask (HSM1).
        #[arg(long)]
        out: PathBuf,
        /// Optional indexed PNG rendering of the map.
        #[arg(long)]
        png: Option<PathBuf>,
        /// Manifest whose references normalize a raw cube.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Normalization for raw cubes; defaults to the manifest's recorded mode.
        #[arg(long)]
        mode: Option<Normalization>,
        /// Keep the raw per-pixel argmax map.
        #[arg(long)]
        no_postprocess: bool,
        #[command(flatten)]
        post: PostArgs,
        #[arg(long, env = "P1CH_WORKERS", default_value_t = 1)]
        workers: usize,
    },
    /// Score a predicted mask against ground truth.
    Eval {
        pred: PathBuf,
        truth: PathBuf,
        /// Pixels this close (Chebyshev) to a truth label transition are left out of the border-excluded accuracy.
        #[arg(long, default_value_t = DEFAULT_BORDER_BAND)]
        border_band: usize,
        /// Write the metrics report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure line throughput with and without post-processing.
    Bench {
        checkpoint: PathBuf,
        cube: PathBuf,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
        repeat: u64,
        /// Only time the first N lines.
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        mode: Option<Normalization>,
        #[command(flatten)]
        post: PostArgs,
        #[arg(long, env = "P1CH_WORKERS", default_value_t = 1)]
        workers: usize,
    },
}

#[derive(Args)]
struct PostArgs {
    /// Median filter window (odd).
    #[arg(long, default_value_t = 5)]
    median_kernel: usize,
    /// Square structuring element size for opening/closing (odd).
    #[arg(long, default_value_t = 3)]
    structuring_element: usize,
}

impl PostArgs {
    fn config(&self) -> PostprocessConfig {
        PostprocessConfig { median_kernel: self.median_kernel, structuring_element: self.structuring_element }
    }
}

enum Failure {
    Usage(String),
    Data(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Runtime(_) => Failure::Runtime(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

/// Errors in files the user wrote by hand count as usage errors.
fn user_file(e: Error, path: &Path) -> Failure {
    match e {
        Error::Parse { .. } | Error::Config(_) => Failure::Usage(format!("{}: {e}", path.display())),
        other => other.into(),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(m) | Failure::Data(m) | Failure::Runtime(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Generate { out, scenes, with_white, dark_lines } => {
            let text = match &scenes {
                Some(p) => read_text(p)?,
                None => DEFAULT_SCENES.to_string(),
            };
            let specs = parse_scenes(&text).map_err(|e| user_file(e, scenes.as_deref().unwrap_or(Path::new("<default scenes>"))))?;
            let m = generate_dataset(&specs, &out, GenerateOptions { with_white, dark_lines }).map_err(|e| match e {
                Error::Config(m) => Failure::Usage(m),
                other => other.into(),
            })?;
            println!("{}", m.path().display());
        }
        Command::Calibrate { manifest, mode } => {
            let mut m = Manifest::load(&manifest)?;
            let s = calibrate_dataset(&mut m, mode)?;
            println!("{}: {} cubes normalized, {} already up to date", mode.name(), s.written, s.skipped);
        }
        Command::Train { manifest, config, out, seed, epochs, quiet } => {
            let m = Manifest::load(&manifest)?;
            let mut cfg = match &config {
                Some(p) => TrainConfig::from_kv(&read_text(p)?).map_err(|e| user_file(e, p))?,
                None => TrainConfig::default(),
            };
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.epochs = epochs.unwrap_or(cfg.epochs);
            cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let out = out.unwrap_or_else(|| m.dir.clone());
            fs::create_dir_all(&out).map_err(|e| Failure::Data(format!("{}: {e}", out.display())))?;
            let ds = m.training_set(cfg.seed, None)?;
            if !quiet {
                eprintln!("training on {} pixels (class counts {:?})", ds.len(), ds.class_counts());
            }
            let ckpt = out.join("checkpoint.p1ch");
            let mut progress = |r: &p1ch::training::EpochRecord| {
                if !quiet {
                    eprintln!(
                        "epoch {:>3}  lr {:.2e}  loss {:.4}  train {:.2}%  val {:.2}%",
                        r.epoch,
                        r.learning_rate,
                        r.train_loss,
                        100.0 * r.train_accuracy,
                        100.0 * r.val_accuracy
                    );
                }
            };
            let opts = TrainOptions { checkpoint: Some(&ckpt), on_epoch: Some(&mut progress), ..Default::default() };
            let (params, report) = train(&ds, &cfg, opts)?;
            save_checkpoint(&params, &ckpt)?;
            let report_path = out.join("train_report.json");
            fs::write(&report_path, report.to_json()).map_err(|e| Failure::Data(e.to_string()))?;
            fs::write(out.join("train_config.txt"), cfg.to_kv()).map_err(|e| Failure::Data(e.to_string()))?;
            println!("best epoch {} (val {:.2}%)", report.best_epoch, 100.0 * report.best_val_accuracy);
            println!("{}\n{}", ckpt.display(), report_path.display());
        }
        Command::Infer { checkpoint, cube, out, png, manifest, mode, no_postprocess, post, workers } => {
            let params = load_checkpoint(&checkpoint)?;
            let cube = read_cube(&cube)?;
            let normalizer = raw_normalizer(&cube, manifest.as_deref(), mode)?;
            let map = classify(&params, &cube, normalizer.as_ref(), workers)?;
            let map = if no_postprocess { map } else { postprocess_map(&map, post.config())? };
            write_mask(&map, &out)?;
            if let Some(p) = png {
                raster::write_png(&map, &p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
            }
            println!("{}", out.display());
        }
        Command::Eval { pred, truth, border_band, out } => {
            let report = evaluate(&read_mask(&truth)?, &read_mask(&pred)?, border_band)?;
            print!("{}", report.table());
            if let Some(p) = out {
                fs::write(&p, report.to_json()).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
            }
        }
        Command::Bench { checkpoint, cube, repeat, rows, manifest, mode, post, workers } => {
            let params = load_checkpoint(&checkpoint)?;
            let mut cube = read_cube(&cube)?;
            if let Some(r) = rows {
                cube = cube.crop(0..r.min(cube.rows()), 0..cube.cols())?;
            }
            let normalizer = raw_normalizer(&cube, manifest.as_deref(), mode)?;
            let source = match &normalizer {
                Some(n) => LineSource::Raw(&cube, n),
                None => LineSource::Normalized(&cube),
            };
            let r = benchmark(&params, source, repeat as usize, workers, post.config())?;
            for (i, run) in r.runs.iter().enumerate() {
                println!("run {}: classify {:.3} s, postprocess {:.3} s", i + 1, run.classify, run.postprocess);
            }
            println!("lines {} ({} px each), workers {}, repeats {}", r.lines, cube.cols(), r.workers, r.runs.len());
            println!(
                "median without postprocess: {:.1} lines/s, {:.3} s/image",
                r.lines_per_second(),
                r.median_classify
            );
            println!(
                "median with postprocess:    {:.1} lines/s, {:.3} s/image",
                r.lines_per_second_with_postprocess(),
                r.median_total
            );
            println!("streaming map identical to batch map: {}", if r.streaming_matches_batch { "yes" } else { "NO" });
            if !r.streaming_matches_batch {
                return Err(Failure::Runtime("streamed and batch maps differ".into()));
            }
        }
    }
    Ok(())
}

/// A normalizer when `cube` is raw; raw cubes need a manifest.
fn raw_normalizer(cube: &HyperCube, manifest: Option<&Path>, mode: Option<Normalization>) -> Result<Option<Normalizer>, Failure> {
    if cube.state() == CubeState::NormalizedF32 {
        return Ok(None);
    }
    let path = manifest.ok_or_else(|| Failure::Data("raw cube needs --manifest to locate its references".into()))?;
    let m = Manifest::load(path)?;
    let mode = mode.or(m.normalization).unwrap_or(Normalization::MaxRef);
    Ok(Some(m.normalizer(mode)?))
}

fn classify(
    params: &ModelParams<f32>,
    cube: &HyperCube,
    normalizer: Option<&Normalizer>,
    workers: usize,
) -> Result<p1ch::data::ClassMap, Failure> {
    let source = match normalizer {
        Some(n) => LineSource::Raw(cube, n),
        None => LineSource::Normalized(cube),
    };
    Ok(classify_cube_streaming(params, source, workers)?)
}
