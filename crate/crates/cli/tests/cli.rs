use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use groupcam::persist::read_grid;
use tempfile::TempDir;

const SMALL_CONFIG: &str = r#"{"train":{"min_accuracy":0.0,"heldout_size":8,"epochs":1}}"#;

fn groupcam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_groupcam")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = groupcam(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn make_fixtures(out: &Path) {
    let cfg = out.with_extension("config.json");
    fs::write(&cfg, SMALL_CONFIG).unwrap();
    ok(&["make-fixtures", "--n", "24", "--config", s(&cfg), "--out", s(out)]);
}

/// A small fixture directory shared by the tests of this binary.
fn fixtures() -> &'static Path {
    static DIR: OnceLock<(TempDir, PathBuf)> = OnceLock::new();
    &DIR.get_or_init(|| {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("fixtures");
        make_fixtures(&out);
        (tmp, out)
    })
    .1
}

fn heldout_image(i: usize) -> PathBuf {
    fixtures().join("heldout/images").join(format!("{}.png", groupcam::model::dataset::sample_id(i)))
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn make_fixtures_writes_a_reproducible_dataset() {
    let dir = fixtures();
    for f in ["model.json", "train_report.json", "config.json", "index.json", "dataset.json", "heldout/index.json"] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    assert_eq!(fs::read_dir(dir.join("images")).unwrap().count(), 24);
    assert_eq!(fs::read_dir(dir.join("heldout/images")).unwrap().count(), 8);
    assert_eq!(json(&dir.join("config.json"))["train"]["epochs"], 1);

    let tmp = tempfile::tempdir().unwrap();
    let again = tmp.path().join("again");
    make_fixtures(&again);
    for f in ["index.json", "heldout/index.json", "model.json"] {
        assert_eq!(fs::read(dir.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn make_fixtures_rejects_an_empty_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let out = groupcam(&["make-fixtures", "--n", "0", "--out", s(&tmp.path().join("x"))]);
    assert!(!out.status.success());
}

#[test]
fn explain_records_defaults_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let model = fixtures().join("model.json");
    let image = heldout_image(0);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        ok(&["explain", "--model", s(&model), "--image", s(&image), "--out", s(out)]);
    }
    let cfg = json(&a.join("config.json"));
    assert_eq!(cfg["method"], "groupcam");
    assert_eq!(cfg["saliency"]["groups"], 32);
    assert_eq!(cfg["saliency"]["theta"], 70.0);
    assert_eq!(cfg["saliency"]["ksize"], 51);
    assert_eq!(cfg["saliency"]["sigma"], 50.0);
    let sidecar = json(&a.join("saliency.json"));
    assert_eq!(sidecar["config"], cfg["saliency"]);
    assert_eq!(sidecar["class_index"], cfg["class"]);
    for f in ["saliency.grid", "saliency.png", "overlay.png", "groups.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    assert_eq!(fs::read_to_string(a.join("groups.csv")).unwrap().lines().count(), 33);
    let map = read_grid(a.join("saliency.grid")).unwrap();
    assert_eq!((map.height(), map.width()), (64, 64));
    assert!(map.data().iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn one_group_without_denoising_reproduces_gradcam() {
    let tmp = tempfile::tempdir().unwrap();
    let model = fixtures().join("model.json");
    let mut compared = 0;
    for i in 0..8 {
        let image = heldout_image(i);
        let (g, c) = (tmp.path().join(format!("group{i}")), tmp.path().join(format!("grad{i}")));
        ok(&["explain", "--model", s(&model), "--image", s(&image), "--groups", "1", "--no-denoise", "--out", s(&g)]);
        ok(&["explain", "--model", s(&model), "--image", s(&image), "--method", "gradcam", "--out", s(&c)]);
        let groups = fs::read_to_string(g.join("groups.csv")).unwrap();
        let alpha: f64 = groups.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        if alpha <= 0.0 {
            continue;
        }
        let (a, b) = (read_grid(g.join("saliency.grid")).unwrap(), read_grid(c.join("saliency.grid")).unwrap());
        let diff = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-6, "image {i}: max difference {diff}");
        compared += 1;
    }
    assert!(compared > 0, "no image had a positive confidence gain");
}

#[test]
fn explain_rejects_bad_arguments() {
    let tmp = tempfile::tempdir().unwrap();
    let model = fixtures().join("model.json");
    let image = heldout_image(0);
    let out = tmp.path().join("x");
    for extra in [&["--class", "5"][..], &["--groups", "0"], &["--theta", "120"], &["--layer", "conv9"], &["--alpha", "2"]] {
        let mut args = vec!["explain", "--model", s(&model), "--image", s(&image), "--out", s(&out)];
        args.extend_from_slice(extra);
        assert!(!groupcam(&args).status.success(), "{extra:?} accepted");
    }
    let missing = groupcam(&["explain", "--model", s(&model), "--image", s(&tmp.path().join("none.png")), "--out", s(&out)]);
    assert!(!missing.status.success());
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn evaluate_summaries_are_consistent_and_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let model = fixtures().join("model.json");
    let dataset = fixtures().join("heldout");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (out, jobs) in [(&a, "1"), (&b, "2")] {
        ok(&[
            "evaluate",
            "--model",
            s(&model),
            "--dataset",
            s(&dataset),
            "--metrics",
            "auc,pointing,sanity",
            "--groups",
            "8",
            "--step-fraction",
            "0.125",
            "--jobs",
            jobs,
            "--out",
            s(out),
        ]);
    }
    for f in ["auc.csv", "pointing.csv", "sanity.json", "sanity_images.json", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }

    let auc = csv_rows(&a.join("auc.csv"));
    assert_eq!(auc.len(), 8);
    let (mut ins_sum, mut del_sum) = (0.0, 0.0);
    for row in &auc {
        let v: Vec<f64> = row[2..].iter().map(|x| x.parse().unwrap()).collect();
        assert!((v[0] - v[1] - v[2]).abs() < 1e-12);
        ins_sum += v[0];
        del_sum += v[1];
    }
    let summary = json(&a.join("summary.json"));
    let mean_ins = summary["mean_insertion"].as_f64().unwrap();
    let mean_del = summary["mean_deletion"].as_f64().unwrap();
    assert!((mean_ins - ins_sum / 8.0).abs() < 1e-12);
    assert!((mean_del - del_sum / 8.0).abs() < 1e-12);
    assert!((summary["mean_overall"].as_f64().unwrap() - (mean_ins - mean_del)).abs() < 1e-12);

    let pointing = csv_rows(&a.join("pointing.csv"));
    let mean_row = pointing.last().unwrap();
    assert_eq!(mean_row[0], "mean");
    let categories = &pointing[..pointing.len() - 1];
    let total: usize = categories.iter().map(|r| r[1].parse::<usize>().unwrap() + r[2].parse::<usize>().unwrap()).sum();
    assert_eq!(total, 8);
    let mean_acc = categories.iter().map(|r| r[3].parse::<f64>().unwrap()).sum::<f64>() / categories.len() as f64;
    assert!((summary["pointing_accuracy"].as_f64().unwrap() - mean_acc).abs() < 1e-12);

    let sanity = json(&a.join("sanity.json"));
    let layers = sanity["layers"].as_array().unwrap();
    assert_eq!(layers[0]["layer_id"], "original");
    assert_eq!(layers[0]["similarity"], 1.0);
    assert_eq!(json(&a.join("sanity_images.json")).as_array().unwrap().len(), 8);
}

#[test]
fn evaluate_needs_annotations() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = tmp.path().join("data");
    fs::create_dir_all(dataset.join("images")).unwrap();
    fs::copy(heldout_image(0), dataset.join("images").join("img.png")).unwrap();
    let model = fixtures().join("model.json");
    let run = || {
        groupcam(&[
            "evaluate",
            "--model",
            s(&model),
            "--dataset",
            s(&dataset),
            "--metrics",
            "pointing",
            "--out",
            s(&tmp.path().join("out")),
        ])
    };
    let out = run();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("annotations"));
    assert!(!groupcam(&["evaluate", "--model", s(&model), "--dataset", s(&dataset), "--metrics", "speed", "--out", "x"])
        .status
        .success());
}

#[test]
fn finetune_with_zero_epochs_reports_only_the_start() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ft");
    ok(&["finetune", "--model", s(&fixtures().join("model.json")), "--dataset", s(fixtures()), "--epochs", "0", "--out", s(&out)]);
    let report = json(&out.join("report.json"));
    assert!(report["augmented"].as_array().unwrap().is_empty());
    assert!(report["control"].as_array().unwrap().is_empty());
    assert_eq!(fs::read_to_string(out.join("curves.csv")).unwrap().lines().count(), 2);
    assert_eq!(fs::read(out.join("model_augmented.json")).unwrap(), fs::read(out.join("model_control.json")).unwrap());
}

#[test]
fn finetune_writes_paired_series_and_epoch_renders() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ft");
    let model = fixtures().join("model.json");
    ok(&[
        "finetune",
        "--model",
        s(&model),
        "--dataset",
        s(fixtures()),
        "--epochs",
        "2",
        "--groups",
        "4",
        "--render-epochs",
        "--out",
        s(&out),
    ]);
    let report = json(&out.join("report.json"));
    let (aug, ctl) = (report["augmented"].as_array().unwrap(), report["control"].as_array().unwrap());
    assert_eq!(aug.len(), 2);
    assert_eq!(ctl.len(), 2);
    assert_eq!(fs::read_to_string(out.join("curves.csv")).unwrap().lines().count(), 6);
    for epoch in ["epoch_001", "epoch_002"] {
        let dir = out.join("epochs").join(epoch);
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 8, "{epoch}");
    }
    let bad = groupcam(&["finetune", "--model", s(&model), "--dataset", s(fixtures()), "--groups", "0", "--out", s(&out)]);
    assert!(!bad.status.success());
}
