use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: [&str; 8] = [
    "--set",
    "network.extractor=16",
    "--set",
    "network.hidden=[16]",
    "--set",
    "td3.warmup_steps=200",
    "--set",
    "td3.batch_size=16",
];

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_swarm-engage"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn train(dir: &Path, steps: u64, seed: u64) -> PathBuf {
    let out = dir.to_str().unwrap();
    let steps = steps.to_string();
    let seed = seed.to_string();
    let mut args = vec!["train", "--steps", &steps, "--seed", &seed, "--out", out];
    args.extend(SMALL);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    dir.join("final.ckpt")
}

#[test]
fn missing_config_names_path() {
    let o = run(&["train", "--config", "/definitely/missing.toml"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("/definitely/missing.toml"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);
}

#[test]
fn bad_override_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["train", "--steps", "0", "--out", dir.path().to_str().unwrap(), "--set", "td3.nope=1"]);
    assert!(!o.status.success());
}

#[test]
fn smoke_train_writes_metrics_and_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train(dir.path(), 1000, 3);
    assert!(ckpt.is_file());
    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(
        lines.next().unwrap(),
        "episode,stage,stage_name,env_steps,return,eliminations,steps,outcome"
    );
    assert!(lines.count() >= 1);
    assert!(dir.path().join("timing.csv").is_file());
    assert!(dir.path().join("stages.csv").is_file());
    assert!(dir.path().join("config.toml").is_file());
}

#[test]
fn validation_writes_scores_and_best_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["train", "--steps", "600", "--out", dir.path().to_str().unwrap()];
    args.extend(SMALL);
    args.extend(["--set", "validation.every=250", "--set", "validation.episodes=2"]);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let log = std::fs::read_to_string(dir.path().join("validation.csv")).unwrap();
    let mut lines = log.lines();
    assert_eq!(lines.next().unwrap(), "env_steps,stage,successes,episodes,mean_return,improved");
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() >= 2, "{log}");
    assert!(rows.last().unwrap().starts_with("600,"));
    assert!(rows.iter().all(|r| r.split(',').nth(3) == Some("2")));
    assert!(dir.path().join("best.ckpt").is_file());

    let plain = tempfile::tempdir().unwrap();
    train(plain.path(), 600, 0);
    assert!(!plain.path().join("validation.csv").exists());
    assert!(!plain.path().join("best.ckpt").exists());
    let read = |d: &Path| std::fs::read(d.join("metrics.csv")).unwrap();
    assert_eq!(read(dir.path()), read(plain.path()));
}

#[test]
fn same_seed_gives_identical_metrics() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    train(a.path(), 800, 5);
    train(b.path(), 800, 5);
    let read = |d: &Path| std::fs::read(d.join("metrics.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    assert_eq!(
        std::fs::read(a.path().join("final.ckpt")).unwrap(),
        std::fs::read(b.path().join("final.ckpt")).unwrap()
    );
}

#[test]
fn eval_zero_episodes_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train(dir.path(), 0, 1);
    let summary = dir.path().join("s.json");
    let o = run(&[
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--episodes",
        "0",
        "--out",
        summary.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(summary).unwrap()).unwrap();
    assert_eq!(v["episodes"], 0);
    assert!(v["success_rate"].is_null());
}

#[test]
fn eval_untrained_on_scenario1() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train(dir.path(), 0, 2);
    let summary = dir.path().join("s.json");
    let o = run(&[
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--scenario",
        "scenario1",
        "--episodes",
        "2",
        "--out",
        summary.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(summary).unwrap()).unwrap();
    let rate = v["success_rate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rate));
    assert!(v["mean_length"].as_f64().unwrap() >= 1.0);
}

#[test]
fn corrupt_checkpoint_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ckpt");
    std::fs::write(&bad, b"garbage\x00\x01\x02").unwrap();
    let o = run(&["eval", "--checkpoint", bad.to_str().unwrap(), "--episodes", "1"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("checkpoint header mismatch"), "{}", stderr(&o));
}

#[test]
fn checkpoint_shape_mismatch_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train(dir.path(), 0, 1);
    let o = run(&[
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--episodes",
        "1",
        "--set",
        "sim.n_cluster=2",
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("observation"), "{}", stderr(&o));
}

fn rollout(ckpt: &Path, out: &Path, seed: u64) -> Output {
    run(&[
        "rollout",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--seed",
        &seed.to_string(),
        "--out",
        out.to_str().unwrap(),
    ])
}

fn records(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn rollout_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train(dir.path(), 0, 4);
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    assert!(rollout(&ckpt, &a, 9).status.success());
    assert!(rollout(&ckpt, &b, 9).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn rollout_to_unwritable_path_fails() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train(dir.path(), 0, 4);
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = rollout(&ckpt, &blocker.join("sub").join("t.jsonl"), 1);
    assert!(!o.status.success());
}

#[test]
fn rollout_record_counts() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train(dir.path(), 0, 6);
    let path = dir.path().join("t.jsonl");
    assert!(rollout(&ckpt, &path, 2).status.success());
    let recs = records(&path);
    assert_eq!(recs[0]["kind"], "header");
    assert_eq!(recs[1]["kind"], "state");
    let end = recs.last().unwrap();
    assert_eq!(end["kind"], "end");

    let decisions = recs.iter().filter(|r| r["kind"] == "decision").count();
    assert_eq!(decisions as u64, end["decision_steps"].as_u64().unwrap());
    let substeps: Vec<&Value> = recs.iter().filter(|r| r["kind"] == "substep").collect();
    let t_end = end["t"].as_f64().unwrap();
    assert_eq!(substeps.len(), (t_end / 0.1).round() as usize);

    // each substep lists exactly the agents alive when it began
    let mut alive_before = recs[1]["agents"].as_array().unwrap().len();
    let mut entries = 0;
    for s in &substeps {
        let agents = s["agents"].as_array().unwrap();
        assert_eq!(agents.len(), alive_before);
        entries += agents.len();
        alive_before = agents.iter().filter(|a| a[2] == true).count();
    }
    assert_eq!(recs.len(), 3 + decisions + substeps.len());
    assert!(entries >= substeps.len());
}

/// `(x, y, theta)` after one substep from `prev` with the post-update `v`, `omega`.
fn arc_oracle(prev: [f64; 3], v: f64, w: f64, dt: f64) -> [f64; 3] {
    let half = 0.5 * w * dt;
    let sinc = if half == 0.0 { 1.0 } else { half.sin() / half };
    let mid = prev[2] + half;
    [
        prev[0] + v * dt * sinc * mid.cos(),
        prev[1] + v * dt * sinc * mid.sin(),
        prev[2] + w * dt,
    ]
}

fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

#[test]
fn rollout_replays_through_kinematics() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = train(dir.path(), 0, 7);
    let path = dir.path().join("t.jsonl");
    assert!(rollout(&ckpt, &path, 3).status.success());
    let recs = records(&path);
    let dt = recs[0]["dt_sim"].as_f64().unwrap();

    let key = |a: &Value| (a[0].as_u64().unwrap(), a[1].as_str().unwrap().to_string());
    let mut prev: std::collections::HashMap<(u64, String), Vec<f64>> = recs[1]["agents"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| (key(a), (3..8).map(|i| a[i].as_f64().unwrap()).collect()))
        .collect();
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for r in recs.iter().filter(|r| r["kind"] == "substep") {
        for a in r["agents"].as_array().unwrap() {
            let now: Vec<f64> = (3..8).map(|i| a[i].as_f64().unwrap()).collect();
            let p = &prev[&key(a)];
            let expect = arc_oracle([p[0], p[1], p[2]], now[3], now[4], dt);
            worst = worst
                .max((expect[0] - now[0]).abs())
                .max((expect[1] - now[1]).abs())
                .max(angle_diff(expect[2], now[2]));
            checked += 1;
            prev.insert(key(a), now);
        }
    }
    assert!(checked > 100);
    assert!(worst < 1e-9, "max deviation {worst}");
}

fn write_metrics(path: &Path, rows: &[(u64, usize, f64)]) {
    let mut text = String::from("episode,stage,stage_name,env_steps,return,eliminations,steps,outcome\n");
    for (i, &(ep, stage, ret)) in rows.iter().enumerate() {
        text.push_str(&format!("{ep},{stage},s{stage},{},{ret},0,10,timeout\n", 10 * (i + 1)));
    }
    std::fs::write(path, text).unwrap();
}

fn plot(metrics: &Path) -> (Output, Option<Value>) {
    let out = metrics.with_extension("json");
    let o = run(&["plot", metrics.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let v = std::fs::read_to_string(&out).ok().map(|t| serde_json::from_str(&t).unwrap());
    (o, v)
}

#[test]
fn plot_empty_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    write_metrics(&m, &[]);
    let (o, v) = plot(&m);
    assert!(o.status.success());
    let v = v.unwrap();
    assert!(v["points"].as_array().unwrap().is_empty());
    assert!(v["stage_markers"].as_array().unwrap().is_empty());
}

#[test]
fn plot_constant_and_markers() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    write_metrics(&m, &[(0, 0, 2.5), (1, 0, 2.5), (2, 1, 2.5), (3, 2, 2.5)]);
    let (o, v) = plot(&m);
    assert!(o.status.success());
    let v = v.unwrap();
    for p in v["points"].as_array().unwrap() {
        assert_eq!(p["smoothed"].as_f64().unwrap(), 2.5);
    }
    let markers = v["stage_markers"].as_array().unwrap();
    assert_eq!(markers.len(), 2);
    assert_eq!(markers[0]["stage_name"], "s1");
    assert_eq!(markers[0]["env_steps"], 30);
    assert_eq!(markers[1]["stage"], 2);
}

#[test]
fn plot_malformed_row_names_line() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    write_metrics(&m, &[(0, 0, 1.0)]);
    let mut text = std::fs::read_to_string(&m).unwrap();
    text.push_str("1,0,s0,20,oops,0,10,timeout\n");
    std::fs::write(&m, text).unwrap();
    let (o, _) = plot(&m);
    assert!(!o.status.success());
    assert!(stderr(&o).contains(":3:"), "{}", stderr(&o));
}

#[test]
fn plot_reads_real_training_output() {
    let dir = tempfile::tempdir().unwrap();
    train(dir.path(), 300, 8);
    let (o, v) = plot(&dir.path().join("metrics.csv"));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!v.unwrap()["points"].as_array().unwrap().is_empty());
}

#[test]
fn init_config_prints_defaults() {
    let o = run(&["init-config"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("[scenarios.easy]"));
}
