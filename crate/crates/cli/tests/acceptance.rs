//! Acceptance suite: one PASS/FAIL line per criterion, written straight to
//! stdout so the lines survive test-output capture.
//!
//! Set `FIGR_MNIST_DIR` to a directory holding `train-images-idx3-ubyte` and
//! `train-labels-idx1-ubyte` to parse the real MNIST training set; otherwise a
//! 60000-image fixture with the same header is generated.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use figr_cli::dataset::idx_classes;
use figr_core::autodiff::relative_error;
use figr_core::data::{
    bilinear_resize, decode_shard, encode_shard, normalize, synth_glyph_dataset, write_pgm, RawImage,
};
use figr_core::losses::{critic_loss, gradient_penalty, LossConfig};
use figr_core::meta::{
    critic_gradient, generator_gradient, inner_loop, meta_step, sgd_step, AdamConfig, InnerConfig, MetaState,
    Networks,
};
use figr_core::nn::{params_delta, sample_latent, ModelConfig, LAYER_NORM_EPS};
use figr_core::rng::{InnerRngs, TrainRngs};
use figr_core::{Array, Graph, Precision};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const DESK_CONFIG: &str = "\
image_size = 16
latent_dim = 32
base_width = 16
n_blocks = 1
k = 10
n = 4
inner_lr = 0.0001
outer_lr = 0.00001
dataset_format = synth
synth_classes = 200
synth_per_class = 20
synth_seed = 1
split_seed = 1
n_validation = 10
meta_steps = 2000
checkpoint_every = 500
sample_every = 500
seed = 1
";
const DESK_TIME_LIMIT_S: f64 = 30.0 * 60.0;
const GRADCHECK_TIME_LIMIT_S: f64 = 120.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: usize, name: &str, o: &Outcome) {
    let line = format!("criterion {id} {name}: {} ({})\n", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn figr(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_figr")).args(args).output().expect("spawn figr")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn ckpt(run: &Path, step: u64) -> PathBuf {
    figr_cli::train::checkpoint_path(run, step)
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let out = figr(&["gradcheck", "--trials", "20"]);
    let secs = start.elapsed().as_secs_f64();
    let text = String::from_utf8_lossy(&out.stdout);
    let summary = text.lines().last().unwrap_or("").to_owned();
    Outcome {
        pass: out.status.success() && secs < GRADCHECK_TIME_LIMIT_S,
        detail: format!("{summary}; {secs:.1} s, limit {GRADCHECK_TIME_LIMIT_S} s"),
    }
}

/// Penalty of the linear critic `D(x) = w·x`, whose input gradient is `w`
/// everywhere, so the penalty is `λ(‖w‖ − 1)²` for any interpolates.
fn linear_penalty(norm: f64) -> f64 {
    let dim = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let w: Vec<f64> = dir.iter().map(|v| v * norm / len).collect();
    let real = Array::new(vec![3, 1, 4, 4], (0..48).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let fake = Array::new(vec![3, 1, 4, 4], (0..48).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let mut g = Graph::<f64>::new();
    let wv = g.constant(Array::new(vec![dim, 1], w).unwrap());
    let gp = gradient_penalty(
        &mut g,
        |g: &mut Graph<f64>, x| {
            let flat = g.reshape(x, &[3, dim])?;
            g.matmul(flat, wv)
        },
        &real,
        &fake,
        10.0,
        &mut rng,
    )
    .unwrap();
    g.value(gp).item()
}

fn analytic_penalty() -> Outcome {
    let p3 = linear_penalty(3.0);
    let p1 = linear_penalty(1.0);
    Outcome {
        pass: (p3 - 40.0).abs() <= 1e-5 && p1.abs() <= 1e-9,
        detail: format!("‖w‖=3 gives {p3:.9} (40 ± 1e-5), ‖w‖=1 gives {p1:.3e} (0 ± 1e-9)"),
    }
}

fn reptile_structure() -> Outcome {
    let cfg = ModelConfig { image_size: 8, latent_dim: 4, base_width: 3, n_blocks: 1, channels: 1, precision: Precision::Double };
    let nets = Networks::new(&cfg).unwrap();
    let (d, g) = nets.init::<f64>(11);
    let ds = synth_glyph_dataset(4, 6, 8, 3).unwrap();
    let x = ds.sample_images::<f64, _>(2, 4, &mut ChaCha8Rng::seed_from_u64(1));
    let loss = LossConfig::default();
    let lr = 1e-4;

    // (a) Φ − W against the recorded inner gradients.
    let cfg_a = InnerConfig { k: 10, n: 4, inner_lr: lr };
    let out = inner_loop(&nets, &d, &g, &x, &cfg_a, &loss, &mut InnerRngs::new(5), true).unwrap();
    let trace = out.trace.unwrap();
    let summed = |grads: &[Vec<f64>]| -> Vec<f64> {
        (0..grads[0].len()).map(|i| lr * grads.iter().map(|g| g[i]).sum::<f64>()).collect()
    };
    let ea_d = relative_error(&params_delta(&d, &out.w_d).unwrap(), &summed(&trace.d_grads));
    let ea_g = relative_error(&params_delta(&g, &out.w_g).unwrap(), &summed(&trace.g_grads));

    // (b) K = 1 against loss gradients recomputed with the same draws.
    let rngs = InnerRngs::new(9);
    let one = InnerConfig { k: 1, ..cfg_a };
    let out1 = inner_loop(&nets, &d, &g, &x, &one, &loss, &mut rngs.clone(), false).unwrap();
    let mut probe = rngs.clone();
    let z1 = sample_latent::<f64, _>(4, &cfg, &mut probe.latent);
    let (_, gd) = critic_gradient(&nets, &d, &g, &x, &z1, &loss, &mut probe.interpolation).unwrap();
    let w_d = sgd_step(&d, &gd, lr).unwrap();
    let z2 = sample_latent::<f64, _>(4, &cfg, &mut probe.latent);
    let (_, gg) = generator_gradient(&nets, &w_d, &g, &z2, &loss).unwrap();
    let scaled = |v: &[f64]| v.iter().map(|x| lr * x).collect::<Vec<_>>();
    let eb_d = relative_error(&params_delta(&d, &out1.w_d).unwrap(), &scaled(&gd));
    let eb_g = relative_error(&params_delta(&g, &out1.w_g).unwrap(), &scaled(&gg));

    // (c) inner_lr = 0 leaves Φ fixed through full meta-steps.
    let (d32, g32) = nets.init::<f32>(12);
    let mut state = MetaState::new(d32.clone(), g32.clone(), AdamConfig::default());
    let mut train = TrainRngs::new(4);
    let zero = InnerConfig { k: 3, n: 4, inner_lr: 0.0 };
    for _ in 0..5 {
        meta_step(&nets, &mut state, &ds, &zero, &loss, &mut train).unwrap();
    }
    let fixed = state.phi_d == d32 && state.phi_g == g32;

    let a = ea_d.max(ea_g);
    let b = eb_d.max(eb_g);
    Outcome {
        pass: a < 1e-6 && b < 1e-6 && fixed,
        detail: format!(
            "(a) rel {a:.2e} < 1e-6 over K=10; (b) K=1 rel {b:.2e} < 1e-6; (c) inner_lr=0 fixed point {}",
            if fixed { "holds" } else { "broken" }
        ),
    }
}

struct EvalRow {
    mmd2: f64,
    baseline: f64,
    nn: f64,
}

fn parse_eval(csv: &str) -> Vec<EvalRow> {
    csv.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            EvalRow { mmd2: f[2].parse().unwrap(), baseline: f[3].parse().unwrap(), nn: f[4].parse().unwrap() }
        })
        .collect()
}

fn desk_experiment(config: &Path, run_a: &Path) -> (Outcome, bool) {
    let start = Instant::now();
    let out = figr(&["train", "--config", path_str(config), "--out", path_str(run_a)]);
    let secs = start.elapsed().as_secs_f64();
    if !out.status.success() {
        let err = String::from_utf8_lossy(&out.stderr).into_owned();
        return (Outcome { pass: false, detail: format!("training failed: {err}") }, false);
    }
    let csv_path = run_a.join("eval.csv");
    let final_ckpt = ckpt(run_a, 2000);
    let ev = figr(&["eval", "--checkpoint", path_str(&final_ckpt), "--trials", "10", "--out", path_str(&csv_path)]);
    if !ev.status.success() {
        let err = String::from_utf8_lossy(&ev.stderr).into_owned();
        return (Outcome { pass: false, detail: format!("eval failed: {err}") }, true);
    }
    let rows = parse_eval(&std::fs::read_to_string(&csv_path).unwrap());
    let wins = rows.iter().filter(|r| r.mmd2 < r.baseline).count();
    let count = rows.len() as f64;
    let mean_nn = rows.iter().map(|r| r.nn).sum::<f64>() / count;
    let mean_mmd = rows.iter().map(|r| r.mmd2).sum::<f64>() / count;
    let mean_base = rows.iter().map(|r| r.baseline).sum::<f64>() / count;
    let pass = rows.len() == 10 && wins >= 9 && mean_nn > 0.0 && secs < DESK_TIME_LIMIT_S;
    // control: the same protocol on the run's untrained step-0 parameters
    let control = figr(&["eval", "--checkpoint", path_str(&ckpt(run_a, 0)), "--trials", "10"]);
    let control = if control.status.success() {
        let rows = parse_eval(&String::from_utf8_lossy(&control.stdout));
        let wins = rows.iter().filter(|r| r.mmd2 < r.baseline).count();
        let mean = rows.iter().map(|r| r.mmd2).sum::<f64>() / rows.len() as f64;
        format!("step-0 control wins {wins}/10 with mean mmd2 {mean:.4}")
    } else {
        "step-0 control failed".into()
    };
    let detail = format!(
        "2000 steps in {:.1} min (limit 30); meta-trained wins {wins}/10 (need 9); mean mmd2 {mean_mmd:.4} vs random-init {mean_base:.4}; mean nn_distance {mean_nn:.4} > 0; {control}",
        secs / 60.0
    );
    (Outcome { pass, detail }, true)
}

fn determinism(config: &Path, run_a: &Path, run_b: &Path, run_c: &Path) -> Outcome {
    let b = figr(&["train", "--config", path_str(config), "--out", path_str(run_b)]);
    let resume_from = ckpt(run_a, 1000);
    let c = figr(&["train", "--config", path_str(config), "--out", path_str(run_c), "--resume", path_str(&resume_from)]);
    if !b.status.success() || !c.status.success() {
        return Outcome { pass: false, detail: "a determinism run failed".into() };
    }
    let same = |x: &Path, y: &Path| matches!((std::fs::read(x), std::fs::read(y)), (Ok(p), Ok(q)) if p == q);
    let repeat: Vec<String> = [500, 1000, 2000]
        .iter()
        .map(|&s| format!("{s}:{}", if same(&ckpt(run_a, s), &ckpt(run_b, s)) { "identical" } else { "DIFFERENT" }))
        .collect();
    let resumed = same(&ckpt(run_a, 2000), &ckpt(run_c, 2000));
    Outcome {
        pass: repeat.iter().all(|s| s.ends_with("identical")) && resumed,
        detail: format!(
            "repeat run checkpoints {}; resume from 1000 to 2000 {}",
            repeat.join(" "),
            if resumed { "identical" } else { "DIFFERENT" }
        ),
    }
}

/// IDX bytes written field by field, independent of the library writer.
fn idx_fixture(count: usize) -> (Vec<u8>, Vec<u8>) {
    let mut images = Vec::with_capacity(16 + count * 784);
    for v in [0x0000_0803u32, count as u32, 28, 28] {
        images.extend_from_slice(&v.to_be_bytes());
    }
    for i in 0..count {
        images.extend((0..784).map(|p| ((i * 7 + p * 13) % 256) as u8));
    }
    let mut labels = Vec::with_capacity(8 + count);
    for v in [0x0000_0801u32, count as u32] {
        labels.extend_from_slice(&v.to_be_bytes());
    }
    labels.extend((0..count).map(|i| (i % 10) as u8));
    (images, labels)
}

/// Half-pixel bilinear sample with edge clamping, one pixel at a time.
fn oracle_resize(src: &[f64], h: usize, w: usize, oh: usize, ow: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(oh * ow);
    for y in 0..oh {
        for x in 0..ow {
            let sy = ((y as f64 + 0.5) * h as f64 / oh as f64 - 0.5).clamp(0.0, (h - 1) as f64);
            let sx = ((x as f64 + 0.5) * w as f64 / ow as f64 - 0.5).clamp(0.0, (w - 1) as f64);
            let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
            let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
            let (fy, fx) = (sy - y0 as f64, sx - x0 as f64);
            let at = |r: usize, c: usize| src[r * w + c];
            out.push(
                at(y0, x0) * (1.0 - fy) * (1.0 - fx)
                    + at(y0, x1) * (1.0 - fy) * fx
                    + at(y1, x0) * fy * (1.0 - fx)
                    + at(y1, x1) * fy * fx,
            );
        }
    }
    out
}

fn data_fidelity(tmp: &Path) -> Outcome {
    // MNIST IDX.
    let (images, labels, source) = match std::env::var_os("FIGR_MNIST_DIR") {
        Some(dir) => {
            let dir = PathBuf::from(dir);
            let images = std::fs::read(dir.join("train-images-idx3-ubyte")).unwrap_or_default();
            let labels = std::fs::read(dir.join("train-labels-idx1-ubyte")).unwrap_or_default();
            (images, labels, "real MNIST files")
        }
        None => {
            let (i, l) = idx_fixture(60000);
            (i, l, "generated 60000-image IDX fixture; set FIGR_MNIST_DIR for the real files")
        }
    };
    let classes = idx_classes(&images, &labels);
    let (count, all_28) = match &classes {
        Ok(c) => (
            c.iter().map(|k| k.images.len()).sum::<usize>(),
            c.iter().flat_map(|k| &k.images).all(|im| im.width == 28 && im.height == 28),
        ),
        Err(_) => (0, false),
    };
    let idx_ok = count == 60000 && all_28;

    // FGR8 pack through the CLI and bit-exact reload.
    let root = tmp.join("pgm");
    let mut originals = Vec::new();
    for (c, name) in ["ka", "kb"].iter().enumerate() {
        std::fs::create_dir_all(root.join(name)).unwrap();
        let mut imgs = Vec::new();
        for i in 0..3u8 {
            let px = (0..30u8).map(|p| p.wrapping_mul(37).wrapping_add(i * 11 + c as u8 * 101)).collect();
            let img = RawImage::new(5, 6, px).unwrap();
            std::fs::write(root.join(name).join(format!("{i:02}.pgm")), write_pgm(&img)).unwrap();
            imgs.push(img);
        }
        originals.push(imgs);
    }
    let shard = tmp.join("fixture.fgr8");
    let packed = figr(&["pack", path_str(&root), path_str(&shard)]);
    let stats = figr(&["stats", path_str(&shard)]);
    let stats_text = String::from_utf8_lossy(&stats.stdout).into_owned();
    let bytes = std::fs::read(&shard).unwrap_or_default();
    let shard_ok = packed.status.success()
        && stats_text.contains("classes: 2\nimages: 6\n")
        && decode_shard(&bytes).is_ok_and(|cls| {
            cls.iter().map(|c| c.images.clone()).collect::<Vec<_>>() == originals
                && encode_shard(&cls).is_ok_and(|again| again == bytes)
        });

    // Bilinear resize against the per-pixel oracle.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pairs = [(28, 32), (28, 16), (32, 16), (64, 32), (200, 32), (7, 5), (3, 8), (16, 16)];
    let mut worst: f64 = 0.0;
    for (s, t) in pairs {
        let src: Vec<f64> = (0..s * s).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ours = bilinear_resize(&src, s, s, t, t);
        let oracle = oracle_resize(&src, s, s, t, t);
        worst = ours.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    let resize_ok = worst <= 1e-6;

    Outcome {
        pass: idx_ok && shard_ok && resize_ok,
        detail: format!(
            "IDX {count} images, all 28x28 {all_28} ({source}); FGR8 pack/load bit-exact {shard_ok}; bilinear max abs diff {worst:.2e} <= 1e-6 over {} size pairs incl. 200->32",
            pairs.len()
        ),
    }
}

fn loss_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut antisym = true;
    for _ in 0..200 {
        let b = rng.random_range(1..9);
        let a = Array::<f64>::new(vec![b, 1], (0..b).map(|_| rng.random_range(-1e3..1e3)).collect()).unwrap();
        let c = Array::<f64>::new(vec![b, 1], (0..b).map(|_| rng.random_range(-1e3..1e3)).collect()).unwrap();
        let mut g = Graph::new();
        let (av, cv) = (g.constant(a), g.constant(c));
        let l1 = critic_loss(&mut g, av, cv).unwrap();
        let l2 = critic_loss(&mut g, cv, av).unwrap();
        antisym &= g.value(l1).item() == -g.value(l2).item();
    }
    let norm_ok = normalize(0) == -1.0 && normalize(255) == 1.0;

    let (b, d) = (4, 96);
    let x: Vec<f64> = (0..b * d).map(|_| {
        let n: f64 = StandardNormal.sample(&mut rng);
        2.0 * n + rng.random_range(-3.0..3.0)
    }).collect();
    let mut g = Graph::new();
    let xv = g.constant(Array::new(vec![b, d], x).unwrap());
    let one = g.constant(Array::full(&[d], 1.0));
    let zero = g.constant(Array::zeros(&[d]));
    let y = g.layer_norm(xv, one, zero, LAYER_NORM_EPS).unwrap();
    let (mut mean_err, mut var_err): (f64, f64) = (0.0, 0.0);
    for row in g.value(y).data().chunks(d) {
        let m = row.iter().sum::<f64>() / d as f64;
        let v = row.iter().map(|v| (v - m).powi(2)).sum::<f64>() / d as f64;
        mean_err = mean_err.max(m.abs());
        var_err = var_err.max((v - 1.0).abs());
    }
    let ln_ok = mean_err <= 1e-6 && var_err <= 1e-5;
    Outcome {
        pass: antisym && norm_ok && ln_ok,
        detail: format!(
            "critic_loss antisymmetry exact {antisym}; normalize {{0,255}} -> {{-1,+1}} exact {norm_ok}; layer_norm per-sample |mean| {mean_err:.1e} <= 1e-6, |var-1| {var_err:.1e} <= 1e-5"
        ),
    }
}

#[test]
fn acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("desk.cfg");
    std::fs::write(&config, DESK_CONFIG).unwrap();
    let (run_a, run_b, run_c) = (tmp.path().join("run_a"), tmp.path().join("run_b"), tmp.path().join("run_c"));

    let mut results = Vec::new();
    let mut record = |id: usize, name: &str, o: Outcome| {
        report(id, name, &o);
        results.push((id, o.pass));
    };
    record(1, "gradient oracle", gradient_oracle());
    record(2, "analytic gradient penalty", analytic_penalty());
    record(3, "reptile structure", reptile_structure());
    let (desk, trained) = desk_experiment(&config, &run_a);
    record(4, "desk-scale experiment", desk);
    let det = if trained {
        determinism(&config, &run_a, &run_b, &run_c)
    } else {
        Outcome { pass: false, detail: "skipped: reference run failed".into() }
    };
    record(5, "determinism", det);
    record(6, "data fidelity", data_fidelity(tmp.path()));
    record(7, "loss algebra", loss_algebra());

    let failed: Vec<usize> = results.iter().filter(|(_, p)| !p).map(|(id, _)| *id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
