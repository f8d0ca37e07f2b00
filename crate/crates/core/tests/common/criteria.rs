//! Acceptance checks that run in seconds. Each returns whether it held plus
//! a one-line summary; callers decide whether to assert or just report.

use p1ch::calibration::{normalize_max, normalize_white_black, Normalizer, ReferenceFrame};
use p1ch::data::{flatten_to_pixels, ClassLabel, HyperCube, PixelDataset};
use p1ch::evaluation::{accuracy_from, confusion_counts, kappa_from, recall_from};
use p1ch::inference::{classify_cube_batch, stream_lines, LineSource};
use p1ch::model::kernels::{self, Activations, BatchNormParams, ConvShape, NormMode};
use p1ch::model::{ArchConfig, ModelParams, INPUT_LEN};
use p1ch::postprocess::{median_filter, morph_close, morph_open, BinaryImage};
use p1ch::synth::{default_signatures, parse_scenes, render_scene};
use p1ch::training::{lr_schedule, train, TrainConfig, TrainOptions};
use rand::seq::SliceRandom;
use rand::Rng;

use super::{brute, gradcheck, oracles, rng, random_vec};

pub struct Outcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn outcome(name: &str, pass: bool, detail: String) -> Outcome {
    Outcome { name: name.to_string(), pass, detail }
}

pub const KERNEL_INSTANCES: usize = 100;

/// Random `[c][len]` activations flattened into the library layout.
fn random_activations(r: &mut rand_chacha::ChaCha8Rng, c: usize, b: usize, l: usize) -> (Activations<f64>, Vec<Vec<Vec<f64>>>) {
    let samples: Vec<Vec<Vec<f64>>> = (0..b).map(|_| (0..c).map(|_| random_vec(r, l, -2.0, 2.0)).collect()).collect();
    let mut flat = Vec::with_capacity(c * b * l);
    for ch in 0..c {
        for s in &samples {
            flat.extend_from_slice(&s[ch]);
        }
    }
    (Activations::from_vec(c, b, l, flat).unwrap(), samples)
}

fn max_dev(act: &Activations<f64>, want: &[Vec<Vec<f64>>]) -> f64 {
    let (c, b, l) = act.shape();
    let mut scale = 0.0f64;
    let mut dev = 0.0f64;
    for s in 0..b {
        for ch in 0..c {
            for i in 0..l {
                scale = scale.max(want[s][ch][i].abs());
                dev = dev.max((act.at(ch, s, i) - want[s][ch][i]).abs());
            }
        }
    }
    dev / scale.max(1e-30)
}

pub fn conv1d_oracle(seed: u64) -> Outcome {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..KERNEL_INSTANCES {
        let (cin, cout, b) = (r.random_range(1..5), r.random_range(1..6), r.random_range(1..4));
        let k = [1, 3, 5][r.random_range(0..3)];
        let l = r.random_range(k.max(2)..20);
        let (x, samples) = random_activations(&mut r, cin, b, l);
        let shape = ConvShape { out_channels: cout, in_channels: cin, kernel: k };
        let w = random_vec(&mut r, shape.weight_len(), -1.0, 1.0);
        let bias = r.random_bool(0.5).then(|| random_vec(&mut r, cout, -1.0, 1.0));
        let got = kernels::conv1d(&x, &w, bias.as_deref(), shape).unwrap();
        let want: Vec<_> = samples.iter().map(|s| oracles::conv1d(s, &w, bias.as_deref(), cout, k)).collect();
        worst = worst.max(max_dev(&got, &want));
    }
    outcome("kernel oracle: conv1d", worst <= 1e-6, format!("{KERNEL_INSTANCES} instances, max rel dev {worst:.2e} (tol 1e-6)"))
}

pub fn maxpool_oracle(seed: u64) -> Outcome {
    let mut r = rng(seed);
    let mut mismatches = 0;
    for _ in 0..KERNEL_INSTANCES {
        let (c, b, l) = (r.random_range(1..5), r.random_range(1..4), r.random_range(2..30));
        let (x, samples) = random_activations(&mut r, c, b, l);
        let (got, _) = kernels::maxpool1d(&x).unwrap();
        let want: Vec<_> = samples.iter().map(|s| oracles::maxpool(s)).collect();
        if max_dev(&got, &want) != 0.0 {
            mismatches += 1;
        }
    }
    outcome("kernel oracle: maxpool1d", mismatches == 0, format!("{KERNEL_INSTANCES} instances, {mismatches} inexact"))
}

pub fn batchnorm_oracle(seed: u64) -> Outcome {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for i in 0..KERNEL_INSTANCES {
        let (c, b, l) = (r.random_range(1..5), r.random_range(1..5), r.random_range(2..12));
        let (x, samples) = random_activations(&mut r, c, b, l);
        let mut bn = BatchNormParams::<f64>::identity(c);
        bn.gamma = random_vec(&mut r, c, -2.0, 2.0);
        bn.beta = random_vec(&mut r, c, -1.0, 1.0);
        bn.running_mean = random_vec(&mut r, c, -0.5, 0.5);
        bn.running_var = random_vec(&mut r, c, 0.1, 2.0);
        let train = i % 2 == 0;
        let mode = if train { NormMode::Train } else { NormMode::Eval };
        let (got, _) = kernels::batchnorm1d(&x, &bn, mode, 1e-5).unwrap();
        let (mean, var) = if train { oracles::channel_stats(&samples) } else { (bn.running_mean.clone(), bn.running_var.clone()) };
        let want: Vec<_> = samples.iter().map(|s| oracles::batchnorm_with(s, &bn.gamma, &bn.beta, &mean, &var, 1e-5)).collect();
        worst = worst.max(max_dev(&got, &want));
    }
    outcome(
        "kernel oracle: batchnorm1d",
        worst <= 1e-6,
        format!("{KERNEL_INSTANCES} instances (train and eval), max rel dev {worst:.2e} (tol 1e-6)"),
    )
}

pub fn median_oracle(seed: u64) -> Outcome {
    let mut r = rng(seed);
    let mut mismatches = 0;
    for _ in 0..KERNEL_INSTANCES {
        let (rows, cols) = (r.random_range(1..14), r.random_range(1..14));
        let classes = r.random_range(1..6);
        let map = brute::random_map(&mut r, rows, cols, classes);
        let k = [1, 3, 5, 7][r.random_range(0..4)];
        if median_filter(&map, k).unwrap() != brute::median(&map, k) {
            mismatches += 1;
        }
    }
    outcome("kernel oracle: median_filter", mismatches == 0, format!("{KERNEL_INSTANCES} instances, {mismatches} mismatches"))
}

pub fn morphology_oracle(seed: u64) -> Outcome {
    let mut r = rng(seed);
    let mut mismatches = 0;
    for _ in 0..KERNEL_INSTANCES {
        let (rows, cols) = (r.random_range(1..16), r.random_range(1..16));
        let map = brute::random_map(&mut r, rows, cols, 5);
        let class = ClassLabel::PLASTICS[r.random_range(0..4)];
        let size = [1, 3, 5][r.random_range(0..3)];
        if morph_open(&map, class, size).unwrap() != brute::morph_open(&map, class, size) {
            mismatches += 1;
        }
        if morph_close(&map, class, size).unwrap() != brute::morph_close(&map, class, size) {
            mismatches += 1;
        }
    }
    outcome(
        "kernel oracle: morph_open/close",
        mismatches == 0,
        format!("{KERNEL_INSTANCES} instances each, {mismatches} mismatches"),
    )
}

pub fn metrics_oracle(seed: u64) -> Outcome {
    let mut r = rng(seed);
    let (mut count_bad, mut worst) = (0, 0.0f64);
    let close = |a: f64, b: f64| oracles::rel_err(a, b);
    for _ in 0..KERNEL_INSTANCES {
        let (rows, cols) = (r.random_range(1..12), r.random_range(1..12));
        let classes = r.random_range(1..6);
        let truth = brute::random_map(&mut r, rows, cols, classes);
        let mut pred = truth.clone();
        for l in pred.labels_mut() {
            if r.random_bool(0.4) {
                *l = ClassLabel::ALL[r.random_range(0..5)];
            }
        }
        let want = brute::metrics(&truth, &pred);
        let counts = confusion_counts(&truth, &pred).unwrap();
        if counts != want.counts {
            count_bad += 1;
        }
        worst = worst.max(close(accuracy_from(&counts).unwrap(), want.accuracy));
        for (g, w) in recall_from(&counts).iter().zip(&want.recall) {
            match (g, w) {
                (Some(g), Some(w)) => worst = worst.max(close(*g, *w)),
                (None, None) => {}
                _ => count_bad += 1,
            }
        }
        match (kappa_from(&counts), want.kappa) {
            (Some(g), Some(w)) => worst = worst.max((g - w).abs()),
            (None, None) => {}
            _ => count_bad += 1,
        }
    }
    outcome(
        "kernel oracle: confusion/accuracy/recall/kappa",
        count_bad == 0 && worst <= 1e-6,
        format!("{KERNEL_INSTANCES} instances, {count_bad} count or definedness mismatches, max dev {worst:.2e}"),
    )
}

pub fn kernel_oracles(seed: u64) -> Vec<Outcome> {
    vec![
        conv1d_oracle(seed),
        maxpool_oracle(seed + 1),
        batchnorm_oracle(seed + 2),
        median_oracle(seed + 3),
        morphology_oracle(seed + 4),
        metrics_oracle(seed + 5),
    ]
}

/// White references constructed so that `white - black` equals `M` in every
/// band; both schemes must then agree in full double precision.
pub fn normalization_equivalence(seed: u64, cubes: usize) -> Outcome {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    let mut f32_mismatch = 0usize;
    for _ in 0..cubes {
        let (rows, cols, bands) = (r.random_range(1..5), r.random_range(1..6), r.random_range(1..12));
        let black: Vec<f64> = (0..bands).map(|_| r.random_range(0..200) as f64 + r.random_range(0..4) as f64 * 0.25).collect();
        let m = r.random_range(500..4000) as f64;
        let white: Vec<f64> = black.iter().map(|b| b + m).collect();
        let raw: Vec<u16> = (0..rows * cols * bands).map(|_| r.random_range(0..=4095)).collect();
        let cube = HyperCube::new_raw(rows, cols, bands, raw.clone()).unwrap();
        let reference = ReferenceFrame::new(black).unwrap().with_white(white).unwrap().with_dataset_max(m).unwrap();
        let eq1 = Normalizer::white_black(&reference).unwrap();
        let eq2 = Normalizer::max_reference(&reference).unwrap();
        for (i, &v) in raw.iter().enumerate() {
            worst = worst.max(oracles::rel_err(eq1.value(i % bands, v), eq2.value(i % bands, v)));
        }
        let a = normalize_white_black(&cube, &reference).unwrap();
        let b = normalize_max(&cube, &reference).unwrap();
        f32_mismatch += a.normalized().unwrap().iter().zip(b.normalized().unwrap()).filter(|(x, y)| x != y).count();
    }
    outcome(
        "normalization equivalence",
        worst <= 1e-12 && f32_mismatch == 0,
        format!("{cubes} cubes, max rel dev {worst:.2e} (tol 1e-12), {f32_mismatch} differing stored samples"),
    )
}

pub fn lr_exactness() -> Outcome {
    let cfg = TrainConfig::default();
    let cases = [(10, 0.001), (30, 0.00055), (50, 0.0001)];
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (t, want) in cases {
        let got = lr_schedule(t, &cfg).unwrap();
        worst = worst.max(oracles::rel_err(got, want));
        parts.push(format!("η({t})={got}"));
    }
    outcome("learning-rate schedule", worst <= 1e-12, format!("{}, max rel dev {worst:.1e} (tol 1e-12)", parts.join(", ")))
}

/// Idempotence, (anti-)extensivity and duality of opening and closing.
pub fn morphology_laws(seed: u64, fixtures: usize) -> Outcome {
    let mut r = rng(seed);
    let mut broken = Vec::new();
    for i in 0..fixtures {
        let (rows, cols) = (r.random_range(1..20), r.random_range(1..20));
        let p = r.random_range(0.1..0.9);
        let size = [1, 3, 5, 7][r.random_range(0..4)];
        let a = BinaryImage::new(rows, cols, brute::random_bits(&mut r, rows * cols, p)).unwrap();
        let (o, c) = (a.open(size), a.close(size));
        let laws = [
            ("open idempotent", o.open(size) == o),
            ("close idempotent", c.close(size) == c),
            ("open anti-extensive", o.is_subset_of(&a)),
            ("close extensive", a.is_subset_of(&c)),
            ("duality", a.complement().open(size) == c.complement()),
        ];
        for (law, ok) in laws {
            if !ok {
                broken.push(format!("{law} (fixture {i})"));
            }
        }
    }
    let detail = if broken.is_empty() {
        format!("{fixtures} fixtures, 5 laws each, all exact")
    } else {
        format!("{fixtures} fixtures, {} violations, first: {}", broken.len(), broken[0])
    };
    outcome("morphology laws", broken.is_empty(), detail)
}

/// Normalized cube with random spectra and a model with random weights.
fn random_cube(seed: u64, rows: usize, cols: usize) -> HyperCube {
    let mut r = rng(seed);
    let data: Vec<f32> = (0..rows * cols * INPUT_LEN).map(|_| r.random_range(0.0..1.0)).collect();
    HyperCube::new_normalized(rows, cols, INPUT_LEN, data).unwrap()
}

pub fn streaming_equivalence(seed: u64, permutations: usize) -> Outcome {
    let params = ModelParams::<f32>::init(seed, ArchConfig::default());
    let cube = random_cube(seed, 9, 24);
    let batch = classify_cube_batch(&params, &cube, 50).unwrap();
    let mut r = rng(seed);
    let mut order: Vec<usize> = (0..cube.rows()).collect();
    let mut same = 0;
    for _ in 0..permutations {
        order.shuffle(&mut r);
        let streamed = stream_lines(&params, LineSource::Normalized(&cube), &order, 1).unwrap().finish().unwrap();
        same += usize::from(streamed == batch);
    }
    let classes = batch.histogram().iter().filter(|&&n| n > 0).count();
    outcome(
        "streaming/batch equivalence",
        same == permutations,
        format!("{same}/{permutations} random line orders identical to whole-cube map ({classes} classes present)"),
    )
}

pub fn gradient_check(eps: f64, seeds: &[u64]) -> Outcome {
    let mut worst = (0.0f64, String::new());
    let mut tensors = 0;
    for &s in seeds {
        for t in gradcheck::check(s, 2, eps, 3, 3) {
            tensors += 1;
            if t.rel_error > worst.0 {
                worst = (t.rel_error, format!("{} seed {s}", t.name));
            }
        }
    }
    outcome(
        &format!("gradient check (ε={eps:.0e})"),
        worst.0 < 1e-3,
        format!(
            "{} triples, {tensors} tensor checks, worst rel error {:.2e} at {} (tol 1e-3)",
            seeds.len(),
            worst.0,
            worst.1
        ),
    )
}

/// A small rendered, normalized scene flattened into training pixels.
pub fn tiny_dataset(seed: u64) -> PixelDataset {
    let text = format!(
        "scene tiny\nrole train\nrows 24\ncols 48\nseed {seed}\n\
         rect HDPE 2 2 8 10\nrect PET 2 20 8 10\nrect PP 13 2 8 10\nrect PS 13 20 8 10\n"
    );
    let spec = &parse_scenes(&text).unwrap()[0];
    let out = render_scene(spec, &default_signatures(), 1.0, 0).unwrap();
    let reference = ReferenceFrame::new(vec![48.0; INPUT_LEN]).unwrap().with_dataset_max(2200.0).unwrap();
    let cube = normalize_max(&out.cube, &reference).unwrap();
    flatten_to_pixels(&[(&cube, &out.mask)]).unwrap()
}

pub fn reduced_train_config() -> TrainConfig {
    TrainConfig { epochs: 3, warmup: 1, batch_size: 64, ..TrainConfig::default() }
}

pub fn determinism(seed: u64) -> Outcome {
    let ds = tiny_dataset(seed);
    let cfg = TrainConfig { seed, ..reduced_train_config() };
    let run = || train(&ds, &cfg, TrainOptions::default()).unwrap();
    let (pa, ra) = run();
    let (pb, rb) = run();
    let same_report = ra.to_json() == rb.to_json();
    let same_ckpt = pa.to_checkpoint_bytes() == pb.to_checkpoint_bytes();
    outcome(
        "determinism",
        same_report && same_ckpt,
        format!(
            "two runs, {} samples, {} epochs: reports {}, checkpoints {}",
            ds.len(),
            cfg.epochs,
            if same_report { "identical" } else { "DIFFER" },
            if same_ckpt { "bitwise identical" } else { "DIFFER" }
        ),
    )
}
