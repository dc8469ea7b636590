use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pointup::cloud::io::{load_ply, load_xyz};
use pointup::metrics::{read_csv, MetricsRow};

fn pointup(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pointup"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = pointup(args);
    assert!(
        out.status.success(),
        "pointup {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const DATA: &[&str] = &[
    "--set",
    "n=16",
    "--set",
    "r=2",
    "--set",
    "train_per_kind=2",
    "--set",
    "test_per_kind=1",
    "--set",
    "kinds=[\"sphere\",\"torus\"]",
];

const MODEL: &[&str] = &[
    "--set",
    "model.n=16",
    "--set",
    "model.r=2",
    "--set",
    "model.c=8",
    "--set",
    "model.feat_blocks=1",
    "--set",
    "model.feat_knn=4",
    "--set",
    "model.k=4",
    "--set",
    "epochs=2",
    "--set",
    "batch_size=2",
];

fn gen_data(dir: &Path) {
    let mut args = vec!["gen-data", "--out", s(dir), "--seed", "3"];
    args.extend(DATA);
    ok(&args);
}

fn train(data: &Path, out: &Path) {
    let mut args = vec!["train", "--data", s(data), "--out", s(out)];
    args.extend(MODEL);
    ok(&args);
}

#[test]
fn generate_train_evaluate_and_upsample() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let run = tmp.path().join("run");
    gen_data(&data);
    assert!(data.join("manifest.json").exists());
    assert!(data.join("pair_00000_input.xyz").exists());
    let effective: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(data.join("effective-config.json")).unwrap()).unwrap();
    assert_eq!(effective["seed"], 3);
    assert_eq!(effective["n"], 16);

    train(&data, &run);
    let ckpt = run.join("model.ckpt");
    assert!(ckpt.exists() && run.join("train_log.csv").exists());

    let eval = tmp.path().join("eval");
    ok(&["eval", "--data", s(&data), "--ckpt", s(&ckpt), "--out", s(&eval)]);
    let rows: Vec<MetricsRow> = read_csv(&eval.join("metrics.csv")).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.last().unwrap().name, "mean");
    assert!(rows.iter().all(|r| r.n_out == 32 && r.p2f_mean_e3.is_some()));

    let sweep = tmp.path().join("sweep");
    ok(&[
        "noise-sweep",
        "--data",
        s(&data),
        "--ckpt",
        s(&ckpt),
        "--out",
        s(&sweep),
        "--set",
        "levels=[0,0.02]",
    ]);
    assert_eq!(
        fs::read_to_string(sweep.join("noise_sweep.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );

    let input = data.join("pair_00000_input.xyz");
    let target = data.join("pair_00000_target.xyz");
    let up = tmp.path().join("up");
    ok(&[
        "upsample",
        "--in",
        s(&input),
        "--ckpt",
        s(&ckpt),
        "--r",
        "2",
        "--target",
        s(&target),
        "--out",
        s(&up),
    ]);
    assert_eq!(load_xyz(&up.join("upsampled.xyz")).unwrap().len(), 32);
    let map = load_ply(&up.join("error_map.ply")).unwrap();
    assert_eq!(map.attr("error").unwrap().len(), load_xyz(&target).unwrap().len());

    let wrong = pointup(&[
        "upsample",
        "--in",
        s(&input),
        "--ckpt",
        s(&ckpt),
        "--r",
        "4",
        "--out",
        s(&up),
    ]);
    assert!(!wrong.status.success());
}

#[test]
fn upsample_against_an_analytic_surface() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let run = tmp.path().join("run");
    gen_data(&data);
    train(&data, &run);
    let surface = tmp.path().join("sphere.json");
    fs::write(&surface, r#"{"surface": {"kind": "sphere", "radius": 1.0}, "pose": {"rotation": [[1,0,0],[0,1,0],[0,0,1]], "translation": [0,0,0]}}"#).unwrap();
    let up = tmp.path().join("up");
    let input = data.join("pair_00000_input.xyz");
    let stdout = ok(&[
        "upsample",
        "--in",
        s(&input),
        "--ckpt",
        s(&run.join("model.ckpt")),
        "--surface",
        s(&surface),
        "--out",
        s(&up),
    ]);
    assert!(stdout.contains("P2F"));
    assert_eq!(load_ply(&up.join("error_map.ply")).unwrap().len(), 32);
}

#[test]
fn effective_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen_data(&data);
    let first = tmp.path().join("first");
    train(&data, &first);
    let second = tmp.path().join("second");
    let config = first.join("effective-config.json");
    ok(&["train", "--data", s(&data), "--out", s(&second), "--config", s(&config)]);
    for file in ["model.ckpt", "train_log.csv", "effective-config.json"] {
        assert_eq!(
            fs::read(first.join(file)).unwrap(),
            fs::read(second.join(file)).unwrap(),
            "{file}"
        );
    }
    let regenerated = tmp.path().join("regen");
    ok(&[
        "gen-data",
        "--out",
        s(&regenerated),
        "--config",
        s(&data.join("effective-config.json")),
    ]);
    assert_eq!(
        fs::read(data.join("manifest.json")).unwrap(),
        fs::read(regenerated.join("manifest.json")).unwrap()
    );
}

#[test]
fn bad_configuration_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pointup(&["gen-data", "--out", s(tmp.path()), "--set", "no_such_key=1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));

    let data = tmp.path().join("data");
    gen_data(&data);
    let mismatch = pointup(&["train", "--data", s(&data), "--out", s(tmp.path()), "--set", "epochs=1"]);
    assert!(!mismatch.status.success());
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("model.n"));
}

#[test]
fn ablation_table_has_one_row_per_variant() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen_data(&data);
    let out = tmp.path().join("ablate");
    let mut args = vec!["ablate", "--data", s(&data), "--out", s(&out)];
    let train_overrides: Vec<String> = MODEL.chunks(2).map(|kv| format!("train.{}", kv[1])).collect();
    for kv in &train_overrides {
        args.extend(["--set", kv.as_str()]);
    }
    ok(&args);
    let table = fs::read_to_string(out.join("ablation.csv")).unwrap();
    let models: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(models, ["A", "B", "C", "D", "Full"]);
    assert!(table.lines().next().unwrap().contains("cd_e3"));
}

#[test]
fn gradcheck_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = ok(&["gradcheck", "--out", s(tmp.path()), "--set", "cases_per_primitive=3"]);
    assert!(!stdout.contains("FAIL"));
    assert!(tmp.path().join("gradcheck.csv").exists());
}
