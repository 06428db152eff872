use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use resynth::imaging::{load_heatmap, save_mask, save_png};
use resynth::pipeline::{toy_retina, Config};
use resynth::BinaryMask;
use tempfile::TempDir;

const SIZE: usize = 32;

const TINY: &str = r#"
[preprocess]
input_size = 32
clahe = false

[net]
levels = 2
base_channels = 4
input_size = 32

[train]
lr_init = 0.001
lr_min = 0.0005
warmup_epochs = 1
total_epochs = 3
batch_size = 2
"#;

fn resynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resynth"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    /// Four normals, four test images; the first two test images carry a square lesion.
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let root = dir.path().join("data");
        for sub in ["train/normal", "test/images", "test/masks"] {
            fs::create_dir_all(root.join(sub)).unwrap();
        }
        for i in 0..4u64 {
            save_png(&toy_retina(SIZE, i).unwrap(), root.join(format!("train/normal/n{i}.png"))).unwrap();
            let mut img = toy_retina(SIZE, 100 + i).unwrap();
            let mut mask = BinaryMask::zeros(SIZE, SIZE);
            if i < 2 {
                for y in 10..18 {
                    for x in 12..20 {
                        img.set_pixel(y, x, [0.9, 0.9, 0.2]);
                        mask.set(y, x, true);
                    }
                }
            }
            save_png(&img, root.join(format!("test/images/t{i}.png"))).unwrap();
            save_mask(&mask, root.join(format!("test/masks/t{i}.png"))).unwrap();
        }
        fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
        Self { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn run(&self, args: &[&str]) -> Output {
        let cfg = self.path("tiny.toml");
        let mut all = vec!["--config", s(&cfg)];
        all.extend_from_slice(args);
        resynth(&all)
    }

    fn train(&self, extra: &[&str]) -> (PathBuf, PathBuf) {
        let (data, recon, loc) = (self.path("data"), self.path("recon.ckpt"), self.path("loc.ckpt"));
        let out = self.run(&[&[
            "train-recon", "--data", s(&data), "--out", s(&recon),
        ][..], extra].concat());
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let out = self.run(&[&[
            "train-loc", "--data", s(&data), "--recon-ckpt", s(&recon), "--out", s(&loc),
        ][..], extra].concat());
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        (recon, loc)
    }
}

#[test]
fn missing_subcommand_and_bad_flags_are_usage_errors() {
    assert_eq!(code(&resynth(&[])), 1);
    assert_eq!(code(&resynth(&["--no-such-flag"])), 1);
    assert_eq!(code(&resynth(&["--help"])), 0);
    assert_eq!(code(&resynth(&["eval", "--mode", "volume"])), 1);
}

#[test]
fn dumped_config_parses_back_to_the_same_config() {
    let fx = Fixture::new();
    let out = fx.run(&["--seed", "17", "--dump-config"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let parsed = Config::from_toml_str(&text).unwrap();
    let mut expected = Config::from_toml_str(TINY).unwrap();
    expected.train.seed = 17;
    expected.net.seed = 17;
    assert_eq!(parsed, expected);
}

#[test]
fn bad_config_file_is_a_usage_error() {
    let fx = Fixture::new();
    let bad = fx.path("bad.toml");
    fs::write(&bad, "[train]\nwarmup_epochs = 9\ntotal_epochs = 3\n").unwrap();
    assert_eq!(code(&resynth(&["--config", s(&bad), "--dump-config"])), 1);
}

#[test]
fn synth_count_zero_writes_an_empty_manifest() {
    let fx = Fixture::new();
    let out_dir = fx.path("synth");
    let out = fx.run(&["synth", "--src-dir", s(&fx.path("data/train/normal")), "--out-dir", s(&out_dir), "--count", "0"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_to_string(out_dir.join("manifest.jsonl")).unwrap(), "");
}

#[test]
fn synth_manifest_references_only_source_files() {
    let fx = Fixture::new();
    let src = fx.path("two");
    fs::create_dir_all(&src).unwrap();
    for name in ["a.png", "b.png"] {
        fs::copy(fx.path("data/train/normal/n0.png"), src.join(name)).unwrap();
    }
    let out_dir = fx.path("synth");
    let out = fx.run(&["synth", "--src-dir", s(&src), "--out-dir", s(&out_dir), "--count", "16"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = fs::read_to_string(out_dir.join("manifest.jsonl")).unwrap();
    let lines: Vec<_> = manifest.lines().collect();
    assert_eq!(lines.len(), 16);
    for line in lines {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["source", "target"] {
            let name = rec[key].as_str().unwrap();
            assert!(name == "a.png" || name == "b.png", "{key} = {name}");
        }
        let id = rec["id"].as_str().unwrap();
        assert!(out_dir.join("images").join(format!("{id}.png")).is_file());
        assert!(out_dir.join("masks").join(format!("{id}.png")).is_file());
    }
}

#[test]
fn synth_without_images_is_a_data_error() {
    let fx = Fixture::new();
    let empty = fx.path("empty");
    fs::create_dir_all(&empty).unwrap();
    let out = fx.run(&["synth", "--src-dir", s(&empty), "--out-dir", s(&fx.path("o"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn train_loc_requires_a_recon_checkpoint_unless_ablated() {
    let fx = Fixture::new();
    let data = fx.path("data");
    let loc = fx.path("loc.ckpt");
    let out = fx.run(&["train-loc", "--data", s(&data), "--out", s(&loc)]);
    assert_eq!(code(&out), 1);
    let out = fx.run(&["train-loc", "--data", s(&data), "--out", s(&loc), "--ablation", "no-recon-features"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(loc.is_file());
    assert!(loc.with_extension("jsonl").is_file());
}

#[test]
fn stage_two_checkpoint_as_recon_is_rejected() {
    let fx = Fixture::new();
    let (_, loc) = fx.train(&[]);
    let out = fx.run(&["train-loc", "--data", s(&fx.path("data")), "--recon-ckpt", s(&loc), "--out", s(&fx.path("x.ckpt"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage"));
}

#[test]
fn predict_then_eval_round_trip() {
    let fx = Fixture::new();
    let (recon, loc) = fx.train(&[]);
    let preds = fx.path("preds");
    let out = fx.run(&[
        "predict", "--loc-ckpt", s(&loc), "--recon-ckpt", s(&recon),
        "--input", s(&fx.path("data/test/images")), "--out-dir", s(&preds),
        "--overlay-threshold", "0.5", "--masks", s(&fx.path("data/test/masks")),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for i in 0..4 {
        let heat = load_heatmap(preds.join(format!("t{i}.png"))).unwrap();
        assert_eq!(heat.dims(), (SIZE, SIZE));
        assert!(preds.join(format!("overlays/t{i}.png")).is_file());
    }

    for mode in ["pixel", "image"] {
        let json = fx.path(&format!("{mode}.json"));
        let out = fx.run(&["eval", "--data", s(&fx.path("data")), "--pred-dir", s(&preds), "--mode", mode, "--json", s(&json)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let table = String::from_utf8(out.stdout).unwrap();
        for col in ["AUROC", "ACC", "AUPR"] {
            assert!(table.contains(col), "{table}");
        }
        let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
        let auroc = report["auroc"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&auroc));
    }
}

#[test]
fn pixel_eval_without_masks_is_a_data_error() {
    let fx = Fixture::new();
    let data = fx.path("data");
    fs::remove_dir_all(data.join("test/masks")).unwrap();
    fs::write(data.join("test/labels.csv"), "t0.png,1\nt1.png,1\nt2.png,0\nt3.png,0\n").unwrap();
    let preds = fx.path("preds");
    fs::create_dir_all(&preds).unwrap();
    for i in 0..4 {
        resynth::imaging::save_heatmap(&resynth::ScalarField::filled(SIZE, SIZE, 0.25 * i as f64), preds.join(format!("t{i}.png"))).unwrap();
    }
    let out = fx.run(&["eval", "--data", s(&data), "--pred-dir", s(&preds), "--mode", "pixel"]);
    assert_eq!(code(&out), 2);
    let out = fx.run(&["eval", "--data", s(&data), "--pred-dir", s(&preds), "--mode", "image", "--k", "10"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(preds.join("metrics_image.json").is_file());
}

#[test]
fn ingest_builds_the_dataset_layout() {
    let fx = Fixture::new();
    let raw = fx.path("data");
    let labels = fx.path("labels.csv");
    fs::write(&labels, "t3.png,0\n").unwrap();
    let masks = fx.path("some_masks");
    fs::create_dir_all(&masks).unwrap();
    for i in 0..3 {
        fs::copy(raw.join(format!("test/masks/t{i}.png")), masks.join(format!("t{i}.png"))).unwrap();
    }
    let out_root = fx.path("ingested");
    let out = resynth(&[
        "ingest", "--normals", s(&raw.join("train/normal")), "--images", s(&raw.join("test/images")),
        "--masks", s(&masks), "--labels", s(&labels), "--out", s(&out_root),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read_dir(out_root.join("train/normal")).unwrap().count(), 4);
    assert_eq!(fs::read_dir(out_root.join("test/images")).unwrap().count(), 4);
    assert_eq!(fs::read_dir(out_root.join("test/masks")).unwrap().count(), 3);
    assert_eq!(fs::read_to_string(out_root.join("test/labels.csv")).unwrap(), "t3.png,0\n");

    fs::write(&labels, "other.png,1\n").unwrap();
    let out = resynth(&[
        "ingest", "--images", s(&raw.join("test/images")), "--masks", s(&masks),
        "--labels", s(&labels), "--out", s(&fx.path("again")),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let runs: Vec<Vec<Vec<u8>>> = (0..2)
        .map(|_| {
            let fx = Fixture::new();
            let flags = ["--deterministic", "--seed", "5"];
            let synth = fx.path("synth");
            let out = fx.run(&[&flags[..], &["synth", "--src-dir", s(&fx.path("data/train/normal")), "--out-dir", s(&synth), "--count", "3"]].concat());
            assert_eq!(code(&out), 0);
            let (recon, loc) = fx.train(&flags);
            let preds = fx.path("preds");
            let out = fx.run(&[&flags[..], &["predict", "--loc-ckpt", s(&loc), "--recon-ckpt", s(&recon), "--input", s(&fx.path("data/test/images/t0.png")), "--out-dir", s(&preds)]].concat());
            assert_eq!(code(&out), 0);
            let mut files = vec![
                synth.join("manifest.jsonl"),
                synth.join("images/000002.png"),
                synth.join("masks/000002.png"),
                recon,
                loc,
                preds.join("t0.png"),
            ];
            files.sort();
            files.iter().map(|f| fs::read(f).unwrap()).collect()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}
