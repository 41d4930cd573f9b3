mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use common::{lane_change_fixture, two_lane_map};
use lanegame::evolution::SweepGrid;
use lanegame::io::{parse_events, write_map, write_trajectories};
use lanegame::pipeline::{
    cmd_cluster, cmd_extract, cmd_fit, cmd_games, cmd_report, cmd_simulate, cmd_synth, cmd_validate, load_model,
    run_all, stream_seed, Manifest, OutputLock, PipelineConfig, SimulationOutput, EVENTS, EXTRACT_SUMMARY, GAMES,
    LABELED_EVENTS, MAP, MODEL, NULL_MODEL, PAYOFFS, REJECTIONS, REPORT, SIMULATION, TIMESERIES, TRAJECTORIES,
    VALIDATION,
};
use lanegame::qre::UtilityModel;
use lanegame::Error;

fn small_config(out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        out: out.to_path_buf(),
        seed: 11,
        ..PipelineConfig::default()
    };
    cfg.synth.events = 120;
    cfg.validate.cv_splits = 2;
    cfg.simulate.reps = 3;
    cfg.simulate.steps = 20;
    cfg
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn write_fixture(dir: &Path, tracks: &[lanegame::extract::Track]) -> (PathBuf, PathBuf) {
    let t = dir.join("tracks.csv");
    let m = dir.join("lanes.csv");
    fs::write(&t, write_trajectories(tracks).unwrap()).unwrap();
    fs::write(&m, write_map(two_lane_map().lanes()).unwrap()).unwrap();
    (t, m)
}

#[test]
fn full_pipeline_writes_every_artifact_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = small_config(&out);
    let stages = run_all(&cfg).unwrap();
    assert_eq!(stages.len(), 8);
    for name in [
        TRAJECTORIES, MAP, EVENTS, REJECTIONS, EXTRACT_SUMMARY, LABELED_EVENTS, MODEL, NULL_MODEL, VALIDATION,
        PAYOFFS, GAMES, SIMULATION, TIMESERIES, REPORT,
    ] {
        assert!(out.join(name).is_file(), "{name}");
    }
    let first = snapshot(&out);
    assert!(!first.contains_key(".lock"));
    Manifest::load(&out).unwrap().verify(&out).unwrap();

    run_all(&cfg).unwrap();
    assert_eq!(snapshot(&out), first);

    // A second directory with the same seed gets the same bytes.
    let other = dir.path().join("again");
    run_all(&small_config(&other)).unwrap();
    assert_eq!(snapshot(&other), first);

    let mut reseeded = small_config(&dir.path().join("reseeded"));
    reseeded.seed = 12;
    run_all(&reseeded).unwrap();
    assert_ne!(snapshot(&reseeded.out)[TRAJECTORIES], first[TRAJECTORIES]);
}

#[test]
fn manifest_chains_stage_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    run_all(&cfg).unwrap();
    let m = Manifest::load(dir.path()).unwrap();
    let stages: Vec<&str> = m.entries.iter().map(|e| e.stage.as_str()).collect();
    assert_eq!(stages, ["synth", "extract", "cluster", "fit", "validate", "games", "simulate", "report"]);
    let cluster = m.entry("cluster").unwrap();
    let extract = m.entry("extract").unwrap();
    let produced = extract.outputs.iter().find(|f| f.path == EVENTS).unwrap();
    let consumed = cluster.inputs.iter().find(|f| f.path == EVENTS).unwrap();
    assert_eq!(produced, consumed);
    assert_eq!(cluster.stream_seed, Some(stream_seed(11, "cluster")));
    assert_eq!(m.entry("fit").unwrap().stream_seed, None);

    // Rewriting an upstream artifact breaks the chain until it is rerun.
    let events = dir.path().join(EVENTS);
    let text = fs::read_to_string(&events).unwrap();
    fs::write(&events, text.replacen("HDV", "AV", 1)).unwrap();
    assert!(m.verify(dir.path()).is_err());
    cmd_extract(&cfg).unwrap();
    Manifest::load(dir.path()).unwrap().verify(dir.path()).unwrap();
    // Rerunning extract restores the same bytes, so downstream still matches.
    assert_eq!(fs::read_to_string(&events).unwrap(), text);

    // A stage that consumed an older version is reported.
    let mut m = Manifest::load(dir.path()).unwrap();
    m.entries.iter_mut().find(|e| e.stage == "fit").unwrap().inputs[0].sha256 = "0".repeat(64);
    let err = m.verify(dir.path()).unwrap_err();
    assert!(err.to_string().contains("rerun `fit`"), "{err}");
}

#[test]
fn missing_upstream_artifacts_name_the_command() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let cases: [(fn(&PipelineConfig) -> lanegame::Result<_>, &str); 7] = [
        (cmd_extract, "synth"),
        (cmd_cluster, "extract"),
        (cmd_fit, "cluster"),
        (cmd_validate, "cluster"),
        (cmd_games, "cluster"),
        (cmd_simulate, "games"),
        (cmd_report, "cluster"),
    ];
    for (cmd, needed) in cases {
        match cmd(&cfg) {
            Err(Error::MissingArtifact { command, .. }) => assert_eq!(command, needed),
            other => panic!("expected a missing artifact, got {other:?}"),
        }
    }
    assert!(!dir.path().join(".lock").exists());
    // Failed stages leave no manifest behind.
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn empty_trajectory_file_gives_empty_events() {
    let dir = tempfile::tempdir().unwrap();
    let (t, m) = write_fixture(dir.path(), &[]);
    fs::write(&t, "").unwrap();
    let mut cfg = small_config(&dir.path().join("out"));
    cfg.input.trajectories = Some(t);
    cfg.input.map = Some(m);
    cmd_extract(&cfg).unwrap();
    let events = fs::read_to_string(cfg.out.join(EVENTS)).unwrap();
    assert_eq!(events.lines().count(), 1);
    assert!(parse_events(&events).unwrap().is_empty());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(cfg.out.join(EXTRACT_SUMMARY)).unwrap()).unwrap();
    assert_eq!(summary["events"], 0);
    assert_eq!(summary["candidates"], 0);
}

#[test]
fn one_lane_change_gives_one_event_row() {
    let dir = tempfile::tempdir().unwrap();
    let (t, m) = write_fixture(dir.path(), &lane_change_fixture(7.25, 10.0, |_| 0.0));
    let mut cfg = small_config(&dir.path().join("out"));
    cfg.input.trajectories = Some(t.clone());
    cfg.input.map = Some(m);
    cmd_extract(&cfg).unwrap();
    let rows = parse_events(&fs::read_to_string(cfg.out.join(EVENTS)).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    let e = &rows[0].event;
    assert_eq!((e.active_id.as_str(), e.lead_id.as_str(), e.passive_id.as_str()), ("act", "lead", "lag"));
    let entry = Manifest::load(&cfg.out).unwrap().entry("extract").unwrap().clone();
    assert_eq!(entry.inputs[0].path, t.display().to_string());
}

#[test]
fn rejection_log_lists_the_turn() {
    let dir = tempfile::tempdir().unwrap();
    let (t, m) = write_fixture(dir.path(), &lane_change_fixture(7.25, 10.0, |t| if t < 7.3 { 0.0 } else { 0.3 }));
    let mut cfg = small_config(&dir.path().join("out"));
    cfg.input.trajectories = Some(t);
    cfg.input.map = Some(m);
    cmd_extract(&cfg).unwrap();
    let log = fs::read_to_string(cfg.out.join(REJECTIONS)).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines[0], "track_id,tick,reason,detail");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("act,73,heading,"), "{}", lines[1]);
}

#[test]
fn malformed_trajectory_row_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let (t, m) = write_fixture(dir.path(), &lane_change_fixture(7.25, 10.0, |_| 0.0));
    let mut text = fs::read_to_string(&t).unwrap();
    text.push_str("act,99.9,zero,0,0,1,0,0,HDV\n");
    let line = text.lines().count() as u64;
    fs::write(&t, text).unwrap();
    let mut cfg = small_config(&dir.path().join("out"));
    cfg.input.trajectories = Some(t);
    cfg.input.map = Some(m);
    match cmd_extract(&cfg) {
        Err(Error::Parse { line: l, .. }) => assert_eq!(l, line),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn events_input_skips_extraction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&dir.path().join("src"));
    cmd_synth(&cfg).unwrap();
    cmd_extract(&cfg).unwrap();
    let mut cfg2 = small_config(&dir.path().join("dst"));
    cfg2.input.events = Some(cfg.out.join(EVENTS));
    cfg2.validate.cv_splits = 0;
    let stages = run_all(&cfg2).unwrap();
    assert_eq!(stages[0].stage, "cluster");
    assert!(!cfg2.out.join(TRAJECTORIES).exists());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(cfg2.out.join(VALIDATION)).unwrap()).unwrap();
    assert!(v["cross_validation"].is_null());
    assert!(fs::read_to_string(cfg2.out.join(REPORT)).unwrap().contains("## Simulation"));
}

#[test]
fn default_simulation_is_the_baseline_configuration() {
    let cfg = PipelineConfig::default();
    let configs = cfg.simulate.configs();
    assert_eq!(configs.len(), 1);
    let c = &configs[0];
    assert_eq!((c.neighbor_size, c.noise_k, c.mpr, c.contact_freq), (2, 2.0, 0.5, 0.0));
    assert_eq!((c.width, c.height, c.steps, c.reps), (20, 20, 200, 20));
    assert_eq!((c.init_coop.av, c.init_coop.hdv), (0.51, 0.42));
    assert_eq!(SweepGrid::full_factorial().configs().len(), 81);
}

#[test]
fn simulation_output_echoes_configs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.simulate.mprs = vec![0.2, 0.8];
    run_all(&cfg).unwrap();
    let sim: SimulationOutput = serde_json::from_str(&fs::read_to_string(dir.path().join(SIMULATION)).unwrap()).unwrap();
    assert_eq!(sim.runs.len(), 2);
    assert_eq!(sim.master_seed, stream_seed(11, "simulate"));
    for r in &sim.runs {
        assert_eq!(r.reps.len(), 3);
        assert!(r.reps.iter().all(|s| s.coop_all.len() == 21));
    }
    assert_eq!(sim.runs[1].config.mpr, 0.8);
    let ts = fs::read_to_string(dir.path().join(TIMESERIES)).unwrap();
    assert_eq!(ts.lines().count(), 1 + 2 * 3 * 21);
}

#[test]
fn fitted_model_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    for cmd in [cmd_synth, cmd_extract, cmd_cluster, cmd_fit] {
        cmd(&cfg).unwrap();
    }
    let path = dir.path().join(MODEL);
    let model = load_model(&path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(model.to_json().unwrap(), text);
    let back = UtilityModel::from_json(&model.to_json().unwrap()).unwrap();
    assert_eq!(back, model);
    assert!(model.beta.iter().zip(&back.beta).all(|(a, b)| a.to_bits() == b.to_bits()));

    let truncated = dir.path().join("truncated.json");
    fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    assert!(matches!(load_model(&truncated), Err(Error::Json(_))));

    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value["lambda"][0][1] = serde_json::json!(12.5);
    let edited = dir.path().join("edited.json");
    fs::write(&edited, serde_json::to_string(&value).unwrap()).unwrap();
    assert!(matches!(load_model(&edited), Err(Error::ModelInvalid(_))));

    value["lambda"][0][1] = serde_json::json!(1.0);
    value["schema_version"] = serde_json::json!(99);
    fs::write(&edited, serde_json::to_string(&value).unwrap()).unwrap();
    assert!(matches!(load_model(&edited), Err(Error::SchemaVersion { found: 99, .. })));
}

#[test]
fn locked_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let lock = OutputLock::acquire(dir.path()).unwrap();
    assert!(matches!(cmd_synth(&cfg), Err(Error::Locked(_))));
    drop(lock);
    cmd_synth(&cfg).unwrap();
}

#[test]
fn invalid_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.simulate.noise_ks = vec![0.0];
    let err = cmd_synth(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn config_file_paths_resolve_against_its_directory() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, "seed = 3\nout = \"o\"\n[input]\nevents = \"ev.csv\"\n").unwrap();
    let cfg = PipelineConfig::load(&path).unwrap();
    assert_eq!(cfg.out, dir.path().join("o"));
    assert_eq!(cfg.input.events, Some(dir.path().join("ev.csv")));
    assert!(matches!(PipelineConfig::load(&dir.path().join("none.toml")), Err(Error::Io { .. })));
}
