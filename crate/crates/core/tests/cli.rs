use std::path::Path;
use std::process::{Command, Output};

fn jobrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jobrec")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = jobrec(args);
    assert_eq!(o.status.code(), Some(0), "{args:?}\n{}", stderr(&o));
    stdout(&o)
}

/// generate, featurize and a one-epoch training run on capped data.
fn prepared(dir: &Path) -> String {
    let d = dir.to_str().unwrap().to_string();
    ok(&["generate", "--out", &d]);
    ok(&["featurize", "--data", &d]);
    ok(&["train", "--data", &d, "--epochs", "1", "--max-interactions", "4000"]);
    d
}

#[test]
fn help_lists_flags_and_defaults() {
    let top = ok(&["--help"]);
    for sub in ["generate", "featurize", "train", "grad-check", "recommend", "evaluate", "simulate-ctr"] {
        assert!(top.contains(sub), "{sub}");
    }
    let h = ok(&["simulate-ctr", "--help"]);
    for flag in ["--arms", "--seeds", "--top", "--preference", "--data", "--config", "--seed", "--json"] {
        assert!(h.contains(flag), "{flag}");
    }
    assert!(h.contains("[default: blended,ml]"));
    assert!(ok(&["grad-check", "--help"]).contains("[default: 20]"));
}

#[test]
fn usage_and_config_errors_exit_2() {
    assert_eq!(jobrec(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(jobrec(&["recommend"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let o = jobrec(&["--config", cfg.to_str().unwrap(), "grad-check", "--configs", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no_such_key"));
    let o = jobrec(&["--json", "simulate-ctr", "--arms", "blended", "--data", "x"]);
    assert_eq!(o.status.code(), Some(2));
    let last = stderr(&o).lines().last().unwrap().to_string();
    let v: serde_json::Value = serde_json::from_str(&last).unwrap();
    assert_eq!(v["error"], "config");
}

#[test]
fn missing_data_exits_3() {
    let o = jobrec(&["featurize", "--data", "/nonexistent/dir"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("error (data)"));
}

#[test]
fn grad_check_passes() {
    let out = ok(&["grad-check", "--configs", "20"]);
    assert_eq!(out.lines().count(), 21);
    let worst: f64 = out.lines().last().unwrap().rsplit(' ').next().unwrap().parse().unwrap();
    assert!(worst < 1e-4);
    // An absurd step makes the check fail with the check exit code.
    assert_eq!(jobrec(&["grad-check", "--configs", "2", "--h", "0.5"]).status.code(), Some(4));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "seed = 1\n").unwrap();
    let c = cfg.to_str().unwrap();
    let via_flag = jobrec(&["--config", c, "--seed", "2", "grad-check", "--configs", "2"]);
    assert!(stderr(&via_flag).contains("seed = 2"));
    std::fs::write(&cfg, "seed = 2\n").unwrap();
    let via_file = jobrec(&["--config", c, "grad-check", "--configs", "2"]);
    assert_eq!(via_flag.stdout, via_file.stdout);
}

#[test]
fn pipeline_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = prepared(dir.path());

    let gen: serde_json::Value = serde_json::from_str(&ok(&["--json", "generate", "--out", &d])).unwrap();
    assert_eq!(gen["candidates"], 800);

    let one = ok(&["recommend", "--data", &d, "--candidate", "C017", "--top", "20"]);
    assert!(!one.is_empty());
    let sources = ["machine_learning", "similar_jobs_applied", "similar_candidates_applied", "edge_case"];
    for line in one.lines() {
        let parts: Vec<&str> = line.split('\t').collect();
        assert_eq!(parts.len(), 2, "{line}");
        assert!(sources.contains(&parts[1]), "{line}");
    }
    assert_eq!(jobrec(&["recommend", "--data", &d, "--candidate", "nobody"]).status.code(), Some(3));

    let serial = ok(&["recommend", "--data", &d, "--all", "--top", "5"]);
    let parallel = ok(&["--parallel", "recommend", "--data", &d, "--all", "--top", "5"]);
    assert_eq!(serial, parallel);
    assert!(serial.lines().all(|l| l.split('\t').count() == 3));

    let counters = dir.path().join("counters.jsonl");
    let cpath = counters.to_str().unwrap();
    ok(&["recommend", "--data", &d, "--candidate", "C017", "--top", "3", "--counters", cpath]);
    let stored = std::fs::read_to_string(&counters).unwrap();
    assert!(stored.lines().count() > 0);
    assert!(stored.contains("\"count\":1"));
    ok(&["recommend", "--data", &d, "--candidate", "C017", "--top", "3", "--counters", cpath]);
    assert!(std::fs::read_to_string(&counters).unwrap().contains("\"count\":2"));

    let table = ok(&["evaluate", "--data", &d]);
    assert!(table.contains("Bi-LSTM + attention"));
    assert!(table.contains("Majority class"));
    assert!(table.contains("F1(1)"));

    // The one-epoch model is timid, so lower the cutoff to get ML slates.
    let cfg = dir.path().join("low.toml");
    std::fs::write(&cfg, "ml_cutoff = 0.05\n").unwrap();
    let c = cfg.to_str().unwrap();
    let ctr: serde_json::Value =
        serde_json::from_str(&ok(&["--json", "--config", c, "simulate-ctr", "--data", &d, "--seeds", "2"])).unwrap();
    assert_eq!(ctr["runs"].as_array().unwrap().len(), 2);
    let r = &ctr["runs"][0]["report"];
    assert!(r["blended"]["impressions"].as_u64().unwrap() > 0);
    assert!(r["ml_only"]["ctr"].as_f64().unwrap() <= 1.0);
}
