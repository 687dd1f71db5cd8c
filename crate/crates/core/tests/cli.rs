use std::path::Path;
use std::process::Command;

use phasemotion::cli;
use phasemotion::data::{load_dir, make_windows};
use phasemotion::{Model, Skeleton};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phasemotion"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("phasemotion").chain(args.iter().copied());
    let code = cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth_into(dir: &Path, kind: &str, count: &str, seed: &str, frames: &str) {
    let (code, _, err) = run(&[
        "synth", "--kind", kind, "--skeleton", "toy7", "--frames", frames, "--count", count, "--seed", seed, "--out", p(dir),
    ]);
    assert_eq!(code, 0, "{err}");
}

const TINY: [&str; 10] = ["--skeleton", "toy7", "--hidden", "8", "--stride", "3", "--seed", "4", "--batch", "4"];

#[test]
fn exit_codes_of_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bin().output().unwrap().status.code(), Some(2));
    assert_eq!(bin().arg("frobnicate").output().unwrap().status.code(), Some(2));
    let unknown = bin()
        .args(["synth", "--kind", "spiral", "--out", p(dir.path())])
        .output()
        .unwrap();
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("spiral"));
    let missing = bin()
        .args(["predict", "--checkpoint", p(&dir.path().join("nope.json")), "--data", p(dir.path()), "--out", p(dir.path())])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn ablate_with_every_pathway_off_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    synth_into(dir.path(), "circle", "2", "0", "40");
    let (code, _, err) = run(&[
        "ablate", "--data", p(dir.path()), "--out", p(&dir.path().join("o")), "--epochs", "1",
        "--no-explicit", "--no-implicit", "--no-displacement", "--skeleton", "toy7",
    ]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn synth_is_byte_deterministic_and_reloads() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let (code, _, err) = run(&["synth", "--kind", "constant_velocity", "--frames", "100", "--seed", "7", "--out", p(d.path())]);
        assert_eq!(code, 0, "{err}");
    }
    let name = "constant_velocity_7.csv";
    assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
    let ds = load_dir(a.path(), &Skeleton::default_eval()).unwrap();
    assert_eq!(ds.sequences[0].sequence.frames(), 100);
}

#[test]
fn zero_epochs_saves_the_initialisation() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth_into(&data, "sinusoid_limbs", "2", "0", "40");
    let out = dir.path().join("run");
    let mut args = vec!["train", "--data", p(&data), "--out", p(&out), "--epochs", "0"];
    args.extend(TINY);
    let (code, _, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    let (loaded, _) = Model::load(&out.join("checkpoint.json")).unwrap();
    let fresh = Model::new(loaded.config().clone(), Skeleton::toy(), 4).unwrap();
    assert_eq!(loaded.params(), fresh.params());
    let ds = load_dir(&data, &Skeleton::toy()).unwrap();
    let w = make_windows(&ds, 9, 25, 5).unwrap();
    assert_eq!(loaded.predict(&w[0].observed).unwrap().poses.frames(), 25);
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn numbers(v: &Value, out: &mut Vec<f64>) {
    match v {
        Value::Number(n) => out.push(n.as_f64().unwrap()),
        Value::Array(a) => a.iter().for_each(|x| numbers(x, out)),
        Value::Object(o) => o.values().for_each(|x| numbers(x, out)),
        _ => {}
    }
}

#[test]
fn train_predict_eval_pipeline_is_consistent_and_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth_into(&data, "sinusoid_limbs", "3", "20", "45");
    let train = |out: &Path| {
        let mut args = vec!["train", "--data", p(&data), "--out", p(out), "--epochs", "2"];
        args.extend(TINY);
        let (code, _, err) = run(&args);
        assert_eq!(code, 0, "{err}");
    };
    let (r1, r2) = (dir.path().join("r1"), dir.path().join("r2"));
    train(&r1);
    train(&r2);
    for f in ["loss.log", "checkpoint.json"] {
        assert_eq!(std::fs::read(r1.join(f)).unwrap(), std::fs::read(r2.join(f)).unwrap(), "{f}");
    }

    let ck = r1.join("checkpoint.json");
    let preds = dir.path().join("pred");
    let (code, _, err) = run(&["predict", "--checkpoint", p(&ck), "--data", p(&data), "--out", p(&preds), "--stride", "2"]);
    assert_eq!(code, 0, "{err}");

    let direct = dir.path().join("direct");
    let (code, _, err) = run(&["eval", "--checkpoint", p(&ck), "--data", p(&data), "--stride", "2", "--out", p(&direct)]);
    assert_eq!(code, 0, "{err}");
    let scored = dir.path().join("scored");
    let (code, _, err) = run(&[
        "eval", "--pred", p(&preds), "--data", p(&data), "--skeleton", "toy7", "--stride", "2", "--out", p(&scored),
    ]);
    assert_eq!(code, 0, "{err}");

    let (mut a, mut b) = (Vec::new(), Vec::new());
    numbers(&report(&direct), &mut a);
    numbers(&report(&scored), &mut b);
    assert_eq!(a.len(), b.len());
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-9), "{a:?} vs {b:?}");
}

#[test]
fn gradcheck_command_passes_on_seed_zero() {
    let (code, out, _) = run(&["gradcheck", "--seed", "0"]);
    assert_eq!(code, 0);
    assert!(out.lines().count() > 10);
    assert!(out.lines().all(|l| l.ends_with("ok")), "{out}");
}
