//! End-to-end checks of the `cura` binary on tiny configurations.

use std::path::Path;
use std::process::{Command, Output};

fn cura(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cura")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_one_line_error(o: &Output, kind: &str) {
    assert!(!o.status.success());
    let err = stderr(o);
    let lines: Vec<&str> = err.lines().collect();
    let last = lines.last().copied().unwrap_or("");
    assert!(last.starts_with(&format!("error kind={kind} msg=\"")), "got: {err}");
    assert!(last.ends_with('"'), "got: {err}");
}

#[test]
fn help_documents_every_flag() {
    let top = cura(&["--help"]);
    assert!(top.status.success());
    let text = String::from_utf8_lossy(&top.stdout);
    for sub in ["pretrain-encoder", "train", "eval", "dump", "report"] {
        assert!(text.contains(sub), "top-level help misses {sub}");
    }
    let expected: &[(&str, &[&str])] = &[
        ("pretrain-encoder", &["--episodes", "--seed", "--config", "--out", "--jobs"]),
        (
            "train",
            &["--variant", "--scenario", "--object-size", "--seed", "--config", "--out", "--jobs", "--resume", "--encoder"],
        ),
        (
            "eval",
            &["--variant", "--scenario", "--object-size", "--seed", "--episodes", "--config", "--out", "--jobs", "--run"],
        ),
        ("dump", &["--variant", "--scenario", "--object-size", "--seed", "--episodes", "--config", "--out", "--run"]),
        ("report", &["--out"]),
    ];
    for (sub, flags) in expected {
        let o = cura(&[sub, "--help"]);
        assert!(o.status.success());
        let text = String::from_utf8_lossy(&o.stdout);
        for f in *flags {
            assert!(text.contains(f), "{sub} --help misses {f}");
        }
    }
}

#[test]
fn usage_errors_are_one_line() {
    assert_one_line_error(&cura(&["train", "--variant", "nope", "--out", "x"]), "usage");
    assert_one_line_error(&cura(&["train", "--out", "x"]), "usage");
    assert_one_line_error(&cura(&["frobnicate"]), "usage");
}

#[test]
fn runtime_errors_are_one_line() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing");
    assert_one_line_error(&cura(&["eval", "--run", missing.to_str().unwrap(), "--out", "x"]), "io");
    let bad = tmp.path().join("bad.txt");
    std::fs::write(&bad, "horizon = lots\n").unwrap();
    let o = cura(&["train", "--variant", "cura_ppo", "--config", bad.to_str().unwrap(), "--out", tmp.path().join("r").to_str().unwrap()]);
    assert_one_line_error(&o, "config");
    assert!(stderr(&o).contains("horizon"));
}

fn write_tiny_config(dir: &Path) -> String {
    let p = dir.join("tiny.txt");
    std::fs::write(
        &p,
        "iterations = 2\nn_envs = 2\nhorizon = 32\nminibatch = 32\nepochs = 1\ncheckpoint_every = 1\nworld_scale = 0.5\ntimeout = 10\n",
    )
    .unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn train_eval_dump_report_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(tmp.path());
    let run = tmp.path().join("run");
    let run_s = run.to_str().unwrap();
    let o = cura(&["train", "--variant", "cura_ppo", "--seed", "3", "--config", &cfg, "--out", run_s, "--quiet"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["config.txt", "version.txt", "encoder.ckpt", "train_log.csv", "ckpt_00002/manifest.txt"] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let config = std::fs::read_to_string(run.join("config.txt")).unwrap();
    assert!(config.contains("variant = cura_ppo") && config.contains("seed = 3"));

    // Resuming a finished run adds no rows.
    let rows = std::fs::read_to_string(run.join("train_log.csv")).unwrap().lines().count();
    let o = cura(&["train", "--variant", "cura_ppo", "--seed", "3", "--config", &cfg, "--out", run_s, "--resume", "--quiet"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(run.join("train_log.csv")).unwrap().lines().count(), rows);

    let ev = tmp.path().join("eval");
    let o = cura(&["eval", "--run", run_s, "--episodes", "3", "--jobs", "2", "--out", ev.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(ev.join("eval_report.csv")).unwrap();
    assert!(report.starts_with("# desk-scale evaluation: 3 episodes per cell"));
    assert_eq!(report.lines().filter(|l| l.starts_with("cura_ppo,")).count(), 6);

    let o = cura(&["eval", "--run", run_s, "--variant", "push_base", "--episodes", "1", "--out", ev.to_str().unwrap()]);
    assert_one_line_error(&o, "config");

    let d = tmp.path().join("dump");
    let o = cura(&["dump", "--run", run_s, "--seed", "5", "--out", d.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    let steps: usize = out
        .split_whitespace()
        .find_map(|t| t.strip_prefix("steps="))
        .unwrap()
        .parse()
        .unwrap();
    let trace = std::fs::read_to_string(d.join("trace.txt")).unwrap();
    assert_eq!(trace.lines().count(), steps + 1);
    let q = std::fs::read_to_string(d.join("quantiles.csv")).unwrap();
    assert!(q.lines().all(|l| l.split(',').count() == 50));
    assert_eq!(std::fs::read_dir(d.join("maps")).unwrap().count(), steps + 1);
    assert!(out.contains("replay_max_dev=0e0"), "{out}");

    let rep = tmp.path().join("rep");
    let o = cura(&["report", tmp.path().to_str().unwrap(), "--out", rep.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(rep.join("summary.txt")).unwrap();
    assert!(table.lines().next().unwrap().contains("adversarial 1"));
    assert!(table.lines().nth(1).unwrap().starts_with("cura_ppo"));
}

#[test]
fn pretrain_encoder_writes_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("p.txt");
    std::fs::write(&cfg, "world_scale = 0.5\ntimeout = 6\nvae_epochs = 1\nvae_hidden = 16\nvae_latent_dim = 4\n").unwrap();
    let out = tmp.path().join("enc");
    let o = cura(&["pretrain-encoder", "--episodes", "3", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("encoder.ckpt").exists());
    assert!(out.join("pretrain_report.txt").exists());

    // The pretrained encoder plugs into training and sets a 4-d latent.
    let run = tmp.path().join("run");
    std::fs::write(tmp.path().join("t.txt"), "iterations = 1\nn_envs = 1\nhorizon = 16\nminibatch = 16\nepochs = 1\nworld_scale = 0.5\n").unwrap();
    let o = cura(&[
        "train",
        "--variant",
        "baseline_conf",
        "--encoder",
        out.join("encoder.ckpt").to_str().unwrap(),
        "--config",
        tmp.path().join("t.txt").to_str().unwrap(),
        "--out",
        run.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = std::fs::read_to_string(run.join("ckpt_00001/manifest.txt")).unwrap();
    assert!(manifest.contains("obs_dim = 28"), "{manifest}");
}
