//! End-to-end acceptance suite: one PASS/FAIL line per criterion.

#[path = "../../core/tests/oracles/mod.rs"]
mod oracles;

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resynth::imaging::save_png;
use resynth::metrics::{aupr, auroc, balanced_accuracy, ScoredSet};
use resynth::model::{
    focal_loss, grad_check_loc, grad_check_recon, FeatureMap, Guidance, LocInput, LocNet, LossConfig, NetConfig,
    ReconNet, DEFAULT_STEP,
};
use resynth::pipeline::{lr_at, run_demo, toy_retina, DemoConfig, TrainConfig};
use resynth::synth::{distance_transform, fusion_weights, self_mix_paste};
use resynth::{BinaryMask, ImageRGB, ScalarField};
use tempfile::TempDir;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize) -> BinaryMask {
    let density: f64 = rng.gen();
    let bits = (0..h * w).map(|_| u8::from(rng.gen_bool(density))).collect();
    BinaryMask::new(h, w, bits).unwrap()
}

fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> ImageRGB {
    ImageRGB::new(h, w, (0..h * w * 3).map(|_| rng.gen()).collect()).unwrap()
}

fn synthesis_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut edt_bad = 0;
    let mut endpoint_bad = 0;
    let mut convex_bad = 0;
    for _ in 0..200 {
        let (h, w) = (rng.gen_range(1..=32), rng.gen_range(1..=32));
        let mask = random_mask(&mut rng, h, w);
        let d = distance_transform(&mask);
        edt_bad += usize::from(d.data() != oracles::edt_brute(&mask).as_slice());

        let alpha = 0.7;
        let wts = fusion_weights(&d, alpha).unwrap();
        let spans = wts.data().iter().all(|&v| (alpha..=1.0).contains(&v));
        let exact = d.max() == d.min() || (wts.min() == alpha && wts.max() == 1.0);
        endpoint_bad += usize::from(!(spans && exact));

        let (src, tgt) = (random_image(&mut rng, h, w), random_image(&mut rng, h, w));
        let (out, _) = self_mix_paste(&src, &tgt, &mask, &wts).unwrap();
        convex_bad += usize::from(!oracles::is_convex_blend(&out, &src, &tgt));
    }
    let t = start.elapsed();
    check(
        edt_bad + endpoint_bad + convex_bad == 0 && within(t, 10),
        format!("EDT mismatches {edt_bad}, endpoint failures {endpoint_bad}, convexity failures {convex_bad}, {t:.2?}"),
    )
}

fn metric_exactness() -> Outcome {
    const GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut bad, mut tied) = (0, 0);
    let mut done = 0;
    while done < 1000 {
        let n = rng.gen_range(2..=8);
        let s: Vec<f64> = (0..n).map(|_| GRID[rng.gen_range(0..9)]).collect();
        let l: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        if !(l.contains(&true) && l.contains(&false)) {
            continue;
        }
        done += 1;
        let mut uniq = s.clone();
        uniq.sort_by(f64::total_cmp);
        uniq.dedup();
        tied += usize::from(uniq.len() < n);
        let set = ScoredSet::new(s.clone(), l.clone()).unwrap();
        let ok = (auroc(&set).unwrap() - oracles::auroc_pairs(&s, &l)).abs() < 1e-12
            && (aupr(&set).unwrap() - oracles::ap_rank_sum(&s, &l)).abs() < 1e-12
            && (balanced_accuracy(&set).unwrap().0 - oracles::balanced_acc_sweep(&s, &l)).abs() < 1e-12;
        bad += usize::from(!ok);
    }
    let t = start.elapsed();
    check(
        bad == 0 && tied > 0 && within(t, 30),
        format!("{bad} of 1000 sets disagree ({tied} with ties), {t:.2?}"),
    )
}

fn focal(p: &[f64], m: &[bool], tau: f64) -> f64 {
    let pred = ScalarField::new(1, p.len(), p.to_vec()).unwrap();
    let mask = BinaryMask::new(1, m.len(), m.iter().map(|&b| u8::from(b)).collect()).unwrap();
    focal_loss(&pred, &mask, &LossConfig { tau, ..Default::default() }).unwrap()
}

fn loss_arithmetic() -> Outcome {
    let a = focal(&[0.5], &[true], 2.0);
    let b = focal(&[0.9], &[false], 2.0);
    let c = focal(&[1.0 - 1e-9, 1e-9], &[true, false], 2.0);
    let rel = |x: f64, want: f64| (x - want).abs() / want;
    let examples = rel(a, 0.25 * 2f64.ln()) < 1e-5
        && rel(b, 0.81 * 10f64.ln()) < 1e-5
        && format!("{a:.5}") == "0.17329"
        && format!("{b:.5}") == "1.86509"
        && c < 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.gen_range(1..64);
        let p: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let m: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        worst = worst.max((focal(&p, &m, 0.0) - oracles::bce(&p, &m)).abs());
    }
    check(
        examples && worst < 1e-10,
        format!("examples {a:.7} {b:.7} {c:.1e}, tau=0 vs BCE max diff {worst:.1e}"),
    )
}

fn pattern(n: usize, phase: f64) -> ImageRGB {
    let data = (0..n * n * 3).map(|i| 0.5 + 0.45 * ((i as f64) * 0.73 + phase).sin()).collect();
    ImageRGB::from_clamped(n, n, data)
}

fn gradient_correctness() -> Outcome {
    let cfg = NetConfig {
        levels: 2,
        base_channels: 4,
        input_size: 8,
        seed: 11,
    };
    let recon = ReconNet::<f64>::new(cfg).unwrap();
    let loc = LocNet::<f64>::new(cfg, LocInput::Features).unwrap();
    let img = pattern(8, 0.7);
    let r = grad_check_recon(&recon, &img, DEFAULT_STEP, 1e-4).unwrap();
    let guidance = Guidance::Features(recon.encode(&FeatureMap::from_image(&img)).unwrap());
    let mut mask = BinaryMask::zeros(8, 8);
    for (y, x) in [(1, 2), (2, 2), (2, 3), (3, 3), (5, 6)] {
        mask.set(y, x, true);
    }
    let l = grad_check_loc(&loc, &img, &guidance, &mask, 2.0, DEFAULT_STEP, 1e-4).unwrap();
    let small = recon.n_params() <= 10_000 && loc.n_params() <= 10_000;
    check(
        small && r.passed && l.passed,
        format!(
            "recon {} params max rel {:.1e}, loc {} params max rel {:.1e}",
            r.n_params, r.max_rel_error, l.n_params, l.max_rel_error
        ),
    )
}

fn schedule() -> Outcome {
    let cfg = TrainConfig::default();
    let (w, last) = (cfg.warmup_epochs, cfg.total_epochs - 1);
    let at = |e| lr_at(e, &cfg).unwrap();
    let peak = (at(w) - 5e-5).abs() < 1e-9;
    let floor = (at(last) - 2.5e-5).abs() < 1e-9;
    // Warmup slope bounds the step into the junction; the cosine side is flat there.
    let step = cfg.lr_init / w as f64;
    let continuous = (at(w) - at(w - 1) - step).abs() < 1e-15 && (at(w + 1) - at(w)).abs() < step;
    check(
        peak && floor && continuous,
        format!("lr({w}) = {:.3e}, lr({last}) = {:.3e}, lr({}) = {:.3e}", at(w), at(last), w + 1, at(w + 1)),
    )
}

fn toy_experiment() -> (Outcome, Outcome) {
    let cfg = DemoConfig::default();
    let out = match run_demo(&cfg) {
        Ok(out) => out,
        Err(e) => return (Err(format!("demo failed: {e}")), Err("demo failed".into())),
    };
    let full = &out.full_metrics;
    let t = out.wall_clock_secs;
    let six = check(
        full.image.auroc >= 0.90 && full.pixel.aupr >= 0.30 && t <= 1800.0,
        format!(
            "image AUROC {:.4} (>= 0.90), pixel AUPR {:.4} (>= 0.30), {t:.0}s for both variants",
            full.image.auroc, full.pixel.aupr
        ),
    );
    let seven = match &out.ablation {
        Some((_, m)) => check(
            full.pixel.aupr > m.pixel.aupr,
            format!("pixel AUPR full {:.4} vs no recon features {:.4}", full.pixel.aupr, m.pixel.aupr),
        ),
        None => Err("ablation did not run".into()),
    };
    (six, seven)
}

const TINY: &str = "[preprocess]\ninput_size = 32\nclahe = false\n\n[net]\nlevels = 2\nbase_channels = 4\ninput_size = 32\n\n[train]\nlr_init = 0.001\nlr_min = 0.0005\nwarmup_epochs = 1\ntotal_epochs = 3\nbatch_size = 2\n";

/// Runs synth, both training stages and predict under `--deterministic`; returns every artifact.
fn cli_artifacts(root: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let data = root.join("data");
    let normal = data.join("train/normal");
    fs::create_dir_all(&normal).map_err(|e| e.to_string())?;
    for i in 0..4 {
        save_png(&toy_retina(32, i).unwrap(), normal.join(format!("n{i}.png"))).map_err(|e| e.to_string())?;
    }
    let cfg = root.join("tiny.toml");
    fs::write(&cfg, TINY).map_err(|e| e.to_string())?;
    let p = |rel: &str| root.join(rel).to_string_lossy().into_owned();
    let steps: [&[&str]; 4] = [
        &["synth", "--src-dir", &p("data/train/normal"), "--out-dir", &p("synth"), "--count", "4"],
        &["train-recon", "--data", &p("data"), "--out", &p("recon.ckpt")],
        &["train-loc", "--data", &p("data"), "--recon-ckpt", &p("recon.ckpt"), "--out", &p("loc.ckpt")],
        &["predict", "--loc-ckpt", &p("loc.ckpt"), "--recon-ckpt", &p("recon.ckpt"), "--input", &p("data/train/normal"), "--out-dir", &p("pred")],
    ];
    for args in steps {
        let out = Command::new(env!("CARGO_BIN_EXE_resynth"))
            .args(["--config", &p("tiny.toml"), "--deterministic", "--seed", "9"])
            .args(args)
            .env("RUST_LOG", "error")
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{} failed: {}", args[0], String::from_utf8_lossy(&out.stderr)));
        }
    }
    let mut files = Vec::new();
    for dir in ["synth", "synth/images", "synth/masks", "pred"] {
        for entry in fs::read_dir(root.join(dir)).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_file() {
                files.push(path);
            }
        }
    }
    files.push(root.join("recon.ckpt"));
    files.push(root.join("loc.ckpt"));
    files.sort();
    files
        .into_iter()
        .map(|f| {
            let rel = f.strip_prefix(root).unwrap().to_string_lossy().into_owned();
            fs::read(&f).map(|b| (rel, b)).map_err(|e| e.to_string())
        })
        .collect()
}

fn determinism() -> Outcome {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let first = cli_artifacts(a.path())?;
    let second = cli_artifacts(b.path())?;
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    check(
        first.len() == second.len() && differing.is_empty(),
        format!("{} artifacts compared, differing: {differing:?}", first.len()),
    )
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters from the test runner are not meaningful here.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (1, "synthesis exactness", synthesis_exactness()),
        (2, "metric exactness", metric_exactness()),
        (3, "loss arithmetic", loss_arithmetic()),
        (4, "gradient correctness", gradient_correctness()),
        (5, "learning-rate schedule", schedule()),
    ];
    let (six, seven) = toy_experiment();
    results.push((6, "toy end-to-end", six));
    results.push((7, "ablation direction", seven));
    results.push((8, "determinism", determinism()));

    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {n} PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} FAIL {name}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
