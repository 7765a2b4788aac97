use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn inforefine(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inforefine")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn quick_config() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/quick.toml").display().to_string()
}

#[test]
fn help_lists_every_subcommand() {
    let o = inforefine(&["--help"]);
    assert_eq!(code(&o), 0);
    for sub in ["generate", "refine", "solve", "fit", "predict", "control", "report"] {
        assert!(stdout(&o).contains(sub), "{sub} missing from help");
    }
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&inforefine(&[])), 1);
    assert_eq!(code(&inforefine(&["frobnicate"])), 1);
    assert_eq!(code(&inforefine(&["refine", "--budget", "many"])), 1);
    assert_eq!(code(&inforefine(&["control", "--problem", "x.json", "--cost", "exp:1"])), 1);
    let o = inforefine(&["--parallelism", "0", "generate"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("parallelism"));
}

#[test]
fn malformed_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    let o = inforefine(&["--out", dir.path().to_str().unwrap(), "solve", "--problem", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "seed = 1\nbogus = true\n").unwrap();
    let o = inforefine(&["--config", cfg.to_str().unwrap(), "generate"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("bogus"));
}

#[test]
fn runtime_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let o = inforefine(&["--out", dir.path().to_str().unwrap(), "solve", "--problem", missing.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let o = inforefine(&["--out", dir.path().to_str().unwrap(), "fit", "--degree", "1"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn quick_pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let config = quick_config();
    let run = |args: &[&str]| {
        let mut all = vec!["--config", config.as_str(), "--out", out];
        all.extend_from_slice(args);
        let o = inforefine(&all);
        assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
        stdout(&o)
    };
    run(&["generate"]);
    run(&["refine", "--split", "all"]);
    let fit = run(&["fit"]);
    assert_eq!(fit.lines().count(), 2);
    run(&["predict"]);
    let report = run(&["report"]);
    assert!(report.lines().next().unwrap().contains("model-d1"), "{report}");

    let problem = dir.path().join("corpus/mazes/mazes-0000.json");
    let problem = problem.to_str().unwrap();
    let solved = run(&["solve", "--problem", problem]);
    assert!(solved.contains("EV_I*"));
    let control = run(&["control", "--problem", problem, "--cost", "exp:0.001,1.5"]);
    assert!(control.contains("stop step"));

    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["problems"].as_array().unwrap().len(), 4);
    assert!(dir.path().join("control/mazes-0000.svg").exists());
}
