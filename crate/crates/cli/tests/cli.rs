use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
format_version = 1
seed = 3
exec = "sequential"

[gen.vocab]
room_types = 6
object_types = 12
colors = 8

[data]
train_houses = 4
eval_houses = 3
questions_per_house = 2
spawns_per_question = 1

[model]
q_dim = 6
hidden = 5
o_dim = 3
p_dim = 3
a_dim = 3
answer_embed = 4
answer_hidden = 4

[eval]
offsets = [10, 30]
sub_episodes = 4

[log]
wallclock = false
"#;

fn nmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nmc"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("nmc runs")
}

fn ok(args: &[&str]) -> Output {
    let out = nmc(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_config(dir: &Path) -> String {
    let p = dir.join("tiny.toml");
    fs::write(&p, TINY).unwrap();
    p.to_str().unwrap().to_string()
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn eval_without_checkpoint_is_a_usage_error() {
    let out = nmc(&["eval"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--checkpoint"));
}

#[test]
fn unknown_task_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out_dir = tmp.path().join("o");
    let out = nmc(&[
        "train-rl",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--from-scratch",
        "--task",
        "fly",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gen_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        ok(&[
            "gen",
            "--config",
            &cfg,
            "--seed",
            "11",
            "--out",
            d.to_str().unwrap(),
        ]);
    }
    for sub in ["train", "eval"] {
        let (x, y) = (dir_bytes(&a.join(sub)), dir_bytes(&b.join(sub)));
        assert!(!x.is_empty());
        assert_eq!(x, y, "{sub} differs");
    }
}

#[test]
fn smoke_pipeline_writes_a_parseable_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out = tmp.path().join("run");
    let o = out.to_str().unwrap();
    ok(&["gen", "--config", &cfg, "--out", o]);
    ok(&["plan", "--config", &cfg, "--data", o, "--out", o]);
    assert!(
        fs::read_to_string(out.join("corpus.jsonl"))
            .unwrap()
            .lines()
            .count()
            > 0
    );
    ok(&[
        "train-bc", "--config", &cfg, "--data", o, "--epochs", "1", "--out", o,
    ]);
    let ckpt = out.join("checkpoint.json");
    assert!(ckpt.exists());
    let stdout = ok(&[
        "eval",
        "--config",
        &cfg,
        "--data",
        o,
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--out",
        o,
    ])
    .stdout;
    assert!(String::from_utf8_lossy(&stdout).contains("report.csv"));

    let report = nmc_core::eval::MetricReport::read(&out.join("report.csv")).unwrap();
    for task in ["exit-room", "find-room", "find-object"] {
        for m in ["success", "success_sampled", "success_random"] {
            let v = report.value(m, task).unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }
    for k in ["T-10", "T-30"] {
        assert!(report.value("accuracy", k).is_some());
        assert!(report.value("d_delta", k).is_some());
    }
    assert!(report.value("iou", "master").is_some());

    let dump = fs::read_dir(out.join("dumps"))
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    let text = ok(&["inspect", "--dump", dump.to_str().unwrap()]).stdout;
    assert!(!text.is_empty());
}
