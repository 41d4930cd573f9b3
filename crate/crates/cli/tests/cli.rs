use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lanegame(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lanegame"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("run.toml");
    fs::write(
        &path,
        "seed = 5\nout = \"out\"\n[synth]\nevents = 90\n[validate]\ncv_splits = 0\n[simulate]\nreps = 2\nsteps = 10\n",
    )
    .unwrap();
    path.display().to_string()
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = lanegame(&["--help"], dir.path());
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["extract", "cluster", "fit", "validate", "games", "simulate", "synth", "report"] {
        assert!(text.contains(sub), "{sub}");
    }
    assert_eq!(code(&lanegame(&["--version"], dir.path())), 0);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&lanegame(&[], dir.path())), 1);
    assert_eq!(code(&lanegame(&["frobnicate"], dir.path())), 1);
    assert_eq!(code(&lanegame(&["synth", "--seed", "minus-one"], dir.path())), 1);
    fs::write(dir.path().join("bad.toml"), "[simulate]\nnoise_ks = [-1.0]\n").unwrap();
    let o = lanegame(&["synth", "--config", "bad.toml"], dir.path());
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    fs::write(dir.path().join("typo.toml"), "sed = 1\n").unwrap();
    assert_eq!(code(&lanegame(&["synth", "--config", "typo.toml"], dir.path())), 1);
}

#[test]
fn missing_artifact_is_a_data_error_naming_the_command() {
    let dir = tempfile::tempdir().unwrap();
    let o = lanegame(&["fit", "--out", "empty"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("run `cluster` first"), "{}", stderr(&o));
}

#[test]
fn malformed_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("t.csv"), "track_id,time\nx,1\n").unwrap();
    fs::write(dir.path().join("m.csv"), "lane_id\n").unwrap();
    let o = lanegame(&["extract", "--trajectories", "t.csv", "--map", "m.csv"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 1"), "{}", stderr(&o));
}

#[test]
fn optimizer_failure_is_a_numeric_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    for stage in ["synth", "extract", "cluster"] {
        assert_eq!(code(&lanegame(&[stage, "--config", &cfg], dir.path())), 0);
    }
    let text = fs::read_to_string(&cfg).unwrap() + "[fit]\nmax_iterations = 1\npg_tol = 1e-300\nf_tol = 0.0\n";
    fs::write(&cfg, text).unwrap();
    let o = lanegame(&["fit", "--config", &cfg], dir.path());
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("optimizer failed"), "{}", stderr(&o));
    assert!(!dir.path().join("out/model.json").exists());
}

#[test]
fn staged_run_matches_all_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    for stage in ["synth", "extract", "cluster", "fit", "validate", "games", "simulate", "report"] {
        let o = lanegame(&[stage, "--config", &cfg], dir.path());
        assert_eq!(code(&o), 0, "{stage}: {}", stderr(&o));
    }
    let o = lanegame(&["all", "--config", &cfg, "--out", "again"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for name in ["events.csv", "model.json", "payoffs.csv", "simulation.json", "report.md", "manifest.json"] {
        assert_eq!(
            fs::read(dir.path().join("out").join(name)).unwrap(),
            fs::read(dir.path().join("again").join(name)).unwrap(),
            "{name}"
        );
    }
    assert_eq!(code(&lanegame(&["verify", "--config", &cfg], dir.path())), 0);
    fs::write(dir.path().join("out/payoffs.csv"), "tampered").unwrap();
    assert_eq!(code(&lanegame(&["verify", "--config", &cfg], dir.path())), 2);

    let o = lanegame(&["show-config", "--config", &cfg, "--seed", "77"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("seed = 77"));
}

#[test]
fn seed_flag_changes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&lanegame(&["synth", "--out", "a", "--seed", "1", "--events", "3"], dir.path())), 0);
    assert_eq!(code(&lanegame(&["synth", "--out", "b", "--seed", "2", "--events", "3"], dir.path())), 0);
    assert_eq!(code(&lanegame(&["synth", "--out", "c", "--seed", "1", "--events", "3"], dir.path())), 0);
    let read = |d: &str| fs::read(dir.path().join(d).join("trajectories.csv")).unwrap();
    assert_ne!(read("a"), read("b"));
    assert_eq!(read("a"), read("c"));
}
