use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cluster::DEFAULT_RESTARTS;
use crate::error::{Error, Result};
use crate::evolution::SweepGrid;
use crate::games::DEFAULT_EPS;
use crate::io::read_to_string;
use crate::optimize::Options;
use crate::qre::{FitOptions, DEFAULT_L1_WEIGHT};

/// Input files. Unset trajectory and map paths fall back to the output of
/// `synth`; a set `events` path skips extraction.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputSection {
    pub trajectories: Option<PathBuf>,
    pub map: Option<PathBuf>,
    pub events: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    /// Number of lane-change scenarios to generate.
    pub events: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection { events: 300 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterSection {
    pub restarts: usize,
}

impl Default for ClusterSection {
    fn default() -> Self {
        ClusterSection { restarts: DEFAULT_RESTARTS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub l1_weight: f64,
    pub max_iterations: usize,
    /// Projected-gradient tolerance of the optimizer.
    pub pg_tol: f64,
    /// Relative objective-decrease tolerance of the optimizer.
    pub f_tol: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        let o = Options::default();
        FitSection {
            l1_weight: DEFAULT_L1_WEIGHT,
            max_iterations: o.max_iterations,
            pg_tol: o.pg_tol,
            f_tol: o.f_tol,
        }
    }
}

impl FitSection {
    pub fn options(&self) -> FitOptions {
        FitOptions {
            l1_weight: self.l1_weight,
            optimizer: Options {
                max_iterations: self.max_iterations,
                pg_tol: self.pg_tol,
                f_tol: self.f_tol,
                ..Options::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    /// Random train/test splits; 0 skips cross-validation.
    pub cv_splits: usize,
    pub train_fraction: f64,
}

impl Default for ValidateSection {
    fn default() -> Self {
        ValidateSection {
            cv_splits: 5,
            train_fraction: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GamesSection {
    /// Strict-inequality margin of the classifier.
    pub eps: f64,
}

impl Default for GamesSection {
    fn default() -> Self {
        GamesSection { eps: DEFAULT_EPS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub input: InputSection,
    pub synth: SynthSection,
    pub cluster: ClusterSection,
    pub fit: FitSection,
    pub validate: ValidateSection,
    pub games: GamesSection,
    pub simulate: SweepGrid,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            out: PathBuf::from("out"),
            input: InputSection::default(),
            synth: SynthSection::default(),
            cluster: ClusterSection::default(),
            fit: FitSection::default(),
            validate: ValidateSection::default(),
            games: GamesSection::default(),
            simulate: SweepGrid::default(),
        }
    }
}

impl PipelineConfig {
    /// Parses TOML. Relative paths are resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        resolve(&mut cfg.out);
        for p in [&mut cfg.input.trajectories, &mut cfg.input.map, &mut cfg.input.events]
            .into_iter()
            .flatten()
        {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.input.trajectories.is_some() != self.input.map.is_some() {
            return bad("input.trajectories and input.map must be given together");
        }
        if self.synth.events == 0 {
            return bad("synth.events must be positive");
        }
        if self.cluster.restarts == 0 {
            return bad("cluster.restarts must be positive");
        }
        let f = &self.fit;
        if !(f.l1_weight >= 0.0 && f.l1_weight.is_finite()) {
            return bad("fit.l1_weight must be finite and non-negative");
        }
        if f.max_iterations == 0 || !(f.pg_tol > 0.0) || !(f.f_tol >= 0.0) {
            return bad("fit.max_iterations and fit.pg_tol must be positive, fit.f_tol non-negative");
        }
        let v = &self.validate;
        if v.cv_splits > 0 && !(v.train_fraction > 0.0 && v.train_fraction < 1.0) {
            return bad("validate.train_fraction must lie in (0, 1)");
        }
        if !(self.games.eps >= 0.0 && self.games.eps.is_finite()) {
            return bad("games.eps must be finite and non-negative");
        }
        let configs = self.simulate.configs();
        if configs.is_empty() {
            return bad("simulate grid has an empty axis");
        }
        for c in &configs {
            c.validate()?;
        }
        Ok(())
    }
}
