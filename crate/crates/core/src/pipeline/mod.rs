//! Stage commands that read and write plain CSV/JSON artifacts in one
//! output directory, recording each run in a hash-chained manifest.

mod config;
mod manifest;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{
    ClusterSection, FitSection, GamesSection, InputSection, PipelineConfig, SynthSection, ValidateSection,
};
pub use manifest::{sha256_hex, FileHash, Manifest, ManifestEntry, MANIFEST_FILE};

use crate::cluster::{cluster_events, ClusterReport};
use crate::error::{Error, Result};
use crate::evolution::{run_sweep, write_timeseries, RunRecord};
use crate::extract::scenario::{generate, ScenarioConfig};
use crate::extract::{extract_events, Rejection, STATE_NAMES};
use crate::games::{classify_states, parse_payoffs, state_pool, tabulate_records, write_payoffs, GameState, GamesReport};
use crate::io::{parse_events, parse_map, parse_trajectories, read_to_string, write_events, write_map, write_string, write_trajectories, EventRow};
use crate::qre::{
    cross_validate, fit, fit_null, predict_and_score, validate, vif, CrossValidation, LikelihoodRatio, Observation,
    Scores, UtilityModel,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const TRAJECTORIES: &str = "trajectories.csv";
pub const MAP: &str = "map.csv";
pub const EVENTS: &str = "events.csv";
pub const REJECTIONS: &str = "rejections.csv";
pub const EXTRACT_SUMMARY: &str = "extract_summary.json";
pub const LABELED_EVENTS: &str = "labeled_events.csv";
pub const CLUSTERS: &str = "clusters.json";
pub const MODEL: &str = "model.json";
pub const NULL_MODEL: &str = "null_model.json";
pub const VALIDATION: &str = "validation.json";
pub const PAYOFFS: &str = "payoffs.csv";
pub const GAMES: &str = "games.json";
pub const SIMULATION: &str = "simulation.json";
pub const TIMESERIES: &str = "timeseries.csv";
pub const REPORT: &str = "report.md";
pub const LOCK_FILE: &str = ".lock";

pub const STAGES: [&str; 8] = ["synth", "extract", "cluster", "fit", "validate", "games", "simulate", "report"];

/// Seed of a named random stream derived from the master seed.
pub fn stream_seed(master: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(name.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

/// Exclusive hold on an output directory for the lifetime of the guard.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(out: &Path) -> Result<Self> {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let path = out.join(LOCK_FILE);
        match File::create_new(&path) {
            Ok(_) => Ok(OutputLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(path)),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// What a stage wrote, for the command line to print.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub stage: &'static str,
    pub outputs: Vec<PathBuf>,
    pub summary: String,
}

struct Stage<'a> {
    cfg: &'a PipelineConfig,
    name: &'static str,
    stream_seed: Option<u64>,
    inputs: Vec<FileHash>,
    outputs: Vec<(String, String)>,
    _lock: OutputLock,
}

impl<'a> Stage<'a> {
    fn begin(cfg: &'a PipelineConfig, name: &'static str, uses_rng: bool) -> Result<Self> {
        cfg.validate()?;
        let lock = OutputLock::acquire(&cfg.out)?;
        info!("stage {name}");
        Ok(Stage {
            cfg,
            name,
            stream_seed: uses_rng.then(|| stream_seed(cfg.seed, name)),
            inputs: Vec::new(),
            outputs: Vec::new(),
            _lock: lock,
        })
    }

    fn seed(&self) -> u64 {
        self.stream_seed.expect("stage declared a random stream")
    }

    fn record_input(&mut self, label: String, text: &str) {
        self.inputs.push(FileHash {
            path: label,
            sha256: sha256_hex(text.as_bytes()),
        });
    }

    /// Reads an artifact that an earlier stage left in the output directory.
    fn artifact(&mut self, name: &str, producer: &'static str) -> Result<String> {
        let path = self.cfg.out.join(name);
        if !path.exists() {
            return Err(Error::MissingArtifact { path, command: producer });
        }
        let text = read_to_string(&path)?;
        self.record_input(name.to_string(), &text);
        Ok(text)
    }

    fn external(&mut self, path: &Path) -> Result<String> {
        let text = read_to_string(path)?;
        self.record_input(path.display().to_string(), &text);
        Ok(text)
    }

    fn write(&mut self, name: &str, contents: String) {
        self.outputs.push((name.to_string(), contents));
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, serde_json::to_string_pretty(value)? + "\n");
        Ok(())
    }

    /// Writes the outputs and the manifest entry. Nothing is written if the
    /// stage failed before this point.
    fn finish(self, summary: String) -> Result<StageOutcome> {
        let out = &self.cfg.out;
        let mut hashes = Vec::with_capacity(self.outputs.len());
        let mut paths = Vec::with_capacity(self.outputs.len());
        for (name, contents) in &self.outputs {
            let path = out.join(name);
            write_string(&path, contents)?;
            hashes.push(FileHash {
                path: name.clone(),
                sha256: sha256_hex(contents.as_bytes()),
            });
            paths.push(path);
        }
        let mut manifest = Manifest::load(out)?;
        manifest.record(
            ManifestEntry {
                stage: self.name.to_string(),
                version: VERSION.to_string(),
                master_seed: self.cfg.seed,
                stream_seed: self.stream_seed,
                inputs: self.inputs,
                outputs: hashes,
            },
            &STAGES,
        );
        manifest.save(out)?;
        Ok(StageOutcome {
            stage: self.name,
            outputs: paths,
            summary,
        })
    }
}

/// Writes a synthetic trajectory file and lane map.
pub fn cmd_synth(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let mut st = Stage::begin(cfg, "synth", true)?;
    let sc = generate(&ScenarioConfig {
        events: cfg.synth.events,
        seed: st.seed(),
    });
    st.write(TRAJECTORIES, write_trajectories(&sc.tracks)?);
    st.write(MAP, write_map(&sc.lanes)?);
    let summary = format!("{} tracks, {} lanes", sc.tracks.len(), sc.lanes.len());
    st.finish(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractSummary {
    pub tracks: usize,
    pub candidates: usize,
    pub events: usize,
    pub rejections: BTreeMap<String, usize>,
}

fn write_rejections(rejections: &[Rejection]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Data(e.to_string());
    w.write_record(["track_id", "tick", "reason", "detail"]).map_err(csv_err)?;
    for r in rejections {
        w.serialize((&r.track_id, r.tick, &r.reason, &r.detail)).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}

/// Detects lane changes and writes the event table, the rejection log and
/// a count summary.
pub fn cmd_extract(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let mut st = Stage::begin(cfg, "extract", false)?;
    let (traj_text, map_text) = match (&cfg.input.trajectories, &cfg.input.map) {
        (Some(t), Some(m)) => (st.external(t)?, st.external(m)?),
        _ => (st.artifact(TRAJECTORIES, "synth")?, st.artifact(MAP, "synth")?),
    };
    let tracks = if traj_text.trim().is_empty() {
        Vec::new()
    } else {
        parse_trajectories(&traj_text)?
    };
    let map = parse_map(&map_text)?;
    let ex = extract_events(&tracks, &map)?;
    let rows: Vec<EventRow> = ex.events.into_iter().map(EventRow::unlabeled).collect();
    let mut by_reason = BTreeMap::new();
    for r in &ex.rejections {
        *by_reason.entry(r.reason.clone()).or_insert(0) += 1;
    }
    let summary = ExtractSummary {
        tracks: tracks.len(),
        candidates: ex.candidates,
        events: rows.len(),
        rejections: by_reason,
    };
    st.write(EVENTS, write_events(&rows, false)?);
    st.write(REJECTIONS, write_rejections(&ex.rejections)?);
    st.write_json(EXTRACT_SUMMARY, &summary)?;
    st.finish(format!(
        "{} events from {} candidates, {} rejected",
        summary.events,
        summary.candidates,
        ex.rejections.len()
    ))
}

/// Labels each event's behaviors by k-means and writes the labeled table.
pub fn cmd_cluster(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let mut st = Stage::begin(cfg, "cluster", true)?;
    let text = match &cfg.input.events {
        Some(p) => st.external(p)?,
        None => st.artifact(EVENTS, "extract")?,
    };
    let mut rows = parse_events(&text)?;
    let report = cluster_events(&mut rows, st.seed(), cfg.cluster.restarts)?;
    st.write(LABELED_EVENTS, write_events(&rows, true)?);
    st.write_json(CLUSTERS, &report)?;
    st.finish(format!(
        "{} events; active Wilks {:.4}, passive Wilks {:.4}",
        rows.len(),
        report.active.manova.wilks_lambda,
        report.passive.manova.wilks_lambda
    ))
}

fn observations(text: &str) -> Result<(Vec<EventRow>, Vec<Observation>)> {
    let rows = parse_events(text)?;
    let obs = Observation::from_rows(&rows)?;
    Ok((rows, obs))
}

/// Fits the full and intercept-only utility models.
pub fn cmd_fit(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let mut st = Stage::begin(cfg, "fit", false)?;
    let (_, obs) = observations(&st.artifact(LABELED_EVENTS, "cluster")?)?;
    let opts = cfg.fit.options();
    let full = fit(&obs, &opts)?;
    let null = fit_null(&obs, &opts)?;
    st.write(MODEL, full.to_json()?);
    st.write(NULL_MODEL, null.to_json()?);
    let ll = |m: &UtilityModel| m.diagnostics.as_ref().map_or(f64::NAN, |d| d.log_likelihood);
    st.finish(format!(
        "{} events; log-likelihood full {:.3}, null {:.3}",
        obs.len(),
        ll(&full),
        ll(&null)
    ))
}

/// Reads and validates a model file written by `fit`.
pub fn load_model(path: &Path) -> Result<UtilityModel> {
    UtilityModel::from_json(&read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub likelihood_ratio: LikelihoodRatio,
    /// Per state variable and the intercept column.
    pub vif: BTreeMap<String, f64>,
    pub max_vif: f64,
    pub in_sample: Scores,
    pub cross_validation: Option<CrossValidation>,
}

/// Likelihood-ratio test, collinearity check, in-sample scores and
/// repeated train/test splits.
pub fn cmd_validate(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let mut st = Stage::begin(cfg, "validate", true)?;
    let (_, obs) = observations(&st.artifact(LABELED_EVENTS, "cluster")?)?;
    let full = UtilityModel::from_json(&st.artifact(MODEL, "fit")?)?;
    let null = UtilityModel::from_json(&st.artifact(NULL_MODEL, "fit")?)?;
    let lr = validate(&full, &null, &obs)?;
    let rows: Vec<Vec<f64>> = obs.iter().map(|o| o.state.to_vec()).collect();
    let factors = vif(&rows)?;
    let names = STATE_NAMES.iter().map(|s| s.to_string()).chain(["intercept".to_string()]);
    let max_vif = factors[..STATE_NAMES.len()].iter().copied().fold(0.0, f64::max);
    let cv = if cfg.validate.cv_splits > 0 {
        Some(cross_validate(
            &obs,
            &cfg.fit.options(),
            cfg.validate.cv_splits,
            cfg.validate.train_fraction,
            st.seed(),
        )?)
    } else {
        None
    };
    let report = ValidationReport {
        vif: names.zip(factors).collect(),
        max_vif,
        in_sample: predict_and_score(&full, &obs)?,
        cross_validation: cv,
        likelihood_ratio: lr,
    };
    st.write_json(VALIDATION, &report)?;
    let lr = &report.likelihood_ratio;
    st.finish(format!(
        "LRT {:.1} on {} df, McFadden {:.4}, max VIF {:.2}",
        lr.lrt_stat, lr.df, lr.mcfadden, report.max_vif
    ))
}

/// Builds per-state payoff tables, classifies them and tabulates classes
/// by interaction pair.
pub fn cmd_games(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let mut st = Stage::begin(cfg, "games", false)?;
    let rows = parse_events(&st.artifact(LABELED_EVENTS, "cluster")?)?;
    let model = UtilityModel::from_json(&st.artifact(MODEL, "fit")?)?;
    let states = GameState::from_rows(&rows)?;
    let records = classify_states(&states, &model, cfg.games.eps);
    let tabs = tabulate_records(&records)?;
    let report = GamesReport::new(&tabs, cfg.games.eps);
    st.write(PAYOFFS, write_payoffs(&records)?);
    st.write_json(GAMES, &report)?;
    st.finish(format!(
        "{} states; dilemma share active {:.3}, passive {:.3}",
        states.len(),
        report.active_dilemma_share,
        report.passive_dilemma_share
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutput {
    pub master_seed: u64,
    pub pool_size: usize,
    pub runs: Vec<RunRecord>,
}

/// Runs the lattice sweep over the state pool from `games`.
pub fn cmd_simulate(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let mut st = Stage::begin(cfg, "simulate", true)?;
    let records = parse_payoffs(&st.artifact(PAYOFFS, "games")?)?;
    let pool = state_pool(&records)?;
    let seed = st.seed();
    let runs = run_sweep(&cfg.simulate.configs(), &pool, seed)?;
    st.write(TIMESERIES, write_timeseries(&runs)?);
    let out = SimulationOutput {
        master_seed: seed,
        pool_size: pool.len(),
        runs,
    };
    st.write_json(SIMULATION, &out)?;
    st.finish(format!(
        "{} configurations over {} states",
        out.runs.len(),
        out.pool_size
    ))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("n/a".to_string(), |x| format!("{x:.3}"))
}

/// Markdown summary of every stage's JSON output.
pub fn cmd_report(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let mut st = Stage::begin(cfg, "report", false)?;
    let extract: Option<ExtractSummary> = if cfg.out.join(EXTRACT_SUMMARY).exists() {
        Some(serde_json::from_str(&st.artifact(EXTRACT_SUMMARY, "extract")?)?)
    } else {
        None
    };
    let clusters: ClusterReport = serde_json::from_str(&st.artifact(CLUSTERS, "cluster")?)?;
    let validation: ValidationReport = serde_json::from_str(&st.artifact(VALIDATION, "validate")?)?;
    let games: GamesReport = serde_json::from_str(&st.artifact(GAMES, "games")?)?;
    let sim: SimulationOutput = serde_json::from_str(&st.artifact(SIMULATION, "simulate")?)?;

    let mut md = String::new();
    let w = &mut md;
    let _ = writeln!(w, "# Pipeline report\n\nMaster seed {}.\n", cfg.seed);
    if let Some(e) = &extract {
        let _ = writeln!(w, "## Extraction\n\n{} tracks, {} candidates, {} events.\n", e.tracks, e.candidates, e.events);
        for (reason, n) in &e.rejections {
            let _ = writeln!(w, "- rejected ({reason}): {n}");
        }
        let _ = writeln!(w);
    }
    let _ = writeln!(w, "## Behavior clusters\n\n| role | label | size | Wilks | p |\n|---|---|---|---|---|");
    for r in [&clusters.active, &clusters.passive] {
        for c in &r.clusters {
            let _ = writeln!(
                w,
                "| {} | {} | {} | {:.4} | {:.3e} |",
                r.role.as_str(),
                c.label.as_str(),
                c.size,
                r.manova.wilks_lambda,
                r.manova.p_value
            );
        }
    }
    let lr = &validation.likelihood_ratio;
    let _ = writeln!(w, "\n## Utility model\n");
    let _ = writeln!(w, "- log-likelihood: full {:.3}, null {:.3}", lr.ll_full, lr.ll_null);
    let _ = writeln!(w, "- LRT {:.3} on {} df (p = {:.3e}), McFadden {:.4}", lr.lrt_stat, lr.df, lr.p_value, lr.mcfadden);
    let _ = writeln!(w, "- max VIF {:.3}", validation.max_vif);
    let s = &validation.in_sample;
    let _ = writeln!(
        w,
        "- in-sample accuracy {:.3}, macro F1 {}",
        s.accuracy,
        fmt_opt(s.macro_f1)
    );
    if let Some(cv) = &validation.cross_validation {
        let f1 = cv.macro_avg.get("f1").copied().flatten();
        let _ = writeln!(
            w,
            "- {} splits, macro F1 {}",
            cv.splits,
            f1.map_or("n/a".to_string(), |m| format!("{:.3} ± {:.3}", m.mean, m.std))
        );
    }
    let _ = writeln!(w, "\n## Game classes\n\n| pair | events | active dilemma share | passive dilemma share |\n|---|---|---|---|");
    for p in &games.pairs {
        let _ = writeln!(
            w,
            "| {} | {} | {:.3} | {:.3} |",
            p.pair, p.events, p.active_dilemma_share, p.passive_dilemma_share
        );
    }
    let _ = writeln!(w, "\n## Simulation\n\n{} states in the pool.\n", sim.pool_size);
    let _ = writeln!(w, "| config | final mean | median | q1 | q3 |\n|---|---|---|---|---|");
    for r in &sim.runs {
        let last = r.band_all.mean.last().copied().unwrap_or(f64::NAN);
        let b = &r.final_box;
        let _ = writeln!(w, "| {} | {:.3} | {:.3} | {:.3} | {:.3} |", r.label, last, b.median, b.q1, b.q3);
    }
    st.write(REPORT, md);
    st.finish(format!("report over {} configurations", sim.runs.len()))
}

/// Runs every stage in order. Trajectory input comes from the config or,
/// failing that, from `synth`; a configured event file skips both.
pub fn run_all(cfg: &PipelineConfig) -> Result<Vec<StageOutcome>> {
    let mut done = Vec::new();
    if cfg.input.events.is_none() {
        if cfg.input.trajectories.is_none() {
            done.push(cmd_synth(cfg)?);
        }
        done.push(cmd_extract(cfg)?);
    }
    for cmd in [cmd_cluster, cmd_fit, cmd_validate, cmd_games, cmd_simulate, cmd_report] {
        done.push(cmd(cfg)?);
    }
    Ok(done)
}
