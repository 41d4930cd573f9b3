//! Evolution of cooperation on a toroidal lattice of AVs and HDVs.
//!
//! Every step draws one observed state, each agent plays both roles against
//! every neighbor with that state's payoff tables, and agents then imitate a
//! random same-type neighbor under the Fermi rule. Updates are synchronous.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::games::StateGames;
use crate::numeric::quantile_sorted;
use crate::types::{Outcome, Pair, Role, VehicleType};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitCoop {
    #[serde(rename = "AV")]
    pub av: f64,
    #[serde(rename = "HDV")]
    pub hdv: f64,
}

impl Default for InitCoop {
    fn default() -> Self {
        InitCoop { av: 0.51, hdv: 0.42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub width: usize,
    pub height: usize,
    pub mpr: f64,
    pub neighbor_size: usize,
    pub noise_k: f64,
    /// Grid shuffles per step; the grid is shuffled every `round(1/f)` steps.
    pub contact_freq: f64,
    pub steps: usize,
    pub reps: usize,
    pub init_coop: InitCoop,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            width: 20,
            height: 20,
            mpr: 0.5,
            neighbor_size: 2,
            noise_k: 2.0,
            contact_freq: 0.0,
            steps: 200,
            reps: 20,
            init_coop: InitCoop::default(),
        }
    }
}

fn unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("grid dimensions must be positive".into()));
        }
        if self.neighbor_size == 0 {
            return Err(Error::Config("neighbor_size must be at least 1".into()));
        }
        if !(self.noise_k > 0.0 && self.noise_k.is_finite()) {
            return Err(Error::Config(format!("noise_k must be positive and finite, got {}", self.noise_k)));
        }
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        unit("mpr", self.mpr)?;
        unit("contact_freq", self.contact_freq)?;
        unit("init_coop.AV", self.init_coop.av)?;
        unit("init_coop.HDV", self.init_coop.hdv)?;
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    pub fn shuffle_period(&self) -> Option<usize> {
        (self.contact_freq > 0.0).then(|| ((1.0 / self.contact_freq).round() as usize).max(1))
    }

    pub fn shuffles_at(&self, step: usize) -> bool {
        self.shuffle_period().is_some_and(|p| step.is_multiple_of(p))
    }

    pub fn label(&self) -> String {
        format!(
            "n{}_k{}_mpr{}_c{}",
            self.neighbor_size, self.noise_k, self.mpr, self.contact_freq
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Agent {
    pub cooperates: bool,
    pub vtype: VehicleType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridWorld {
    pub width: usize,
    pub height: usize,
    pub agents: Vec<Agent>,
}

impl GridWorld {
    pub fn count(&self, vtype: Option<VehicleType>) -> (usize, usize) {
        self.agents
            .iter()
            .filter(|a| vtype.is_none_or(|t| a.vtype == t))
            .fold((0, 0), |(c, n), a| (c + usize::from(a.cooperates), n + 1))
    }

    /// Cooperating share of all agents, or of one type; `None` when empty.
    pub fn cooperation(&self, vtype: Option<VehicleType>) -> Option<f64> {
        let (c, n) = self.count(vtype);
        (n > 0).then(|| c as f64 / n as f64)
    }
}

/// Places exactly `round(mpr * cells)` AVs at random and draws strategies
/// per type with the configured initial cooperation.
pub fn init_grid(config: &SimConfig, rng: &mut impl Rng) -> GridWorld {
    let n = config.cells();
    let n_av = (config.mpr * n as f64).round() as usize;
    let mut types: Vec<VehicleType> = (0..n)
        .map(|i| if i < n_av { VehicleType::Av } else { VehicleType::Hdv })
        .collect();
    types.shuffle(rng);
    let agents = types
        .into_iter()
        .map(|vtype| {
            let p = match vtype {
                VehicleType::Av => config.init_coop.av,
                VehicleType::Hdv => config.init_coop.hdv,
            };
            Agent { cooperates: rng.random::<f64>() < p, vtype }
        })
        .collect();
    GridWorld { width: config.width, height: config.height, agents }
}

/// Cells within Manhattan distance `1..=radius` of `cell` on the torus,
/// sorted and without duplicates.
pub fn neighbors(width: usize, height: usize, cell: usize, radius: usize) -> Vec<usize> {
    let (w, h, r) = (width as i64, height as i64, radius as i64);
    let (x, y) = ((cell % width) as i64, (cell / width) as i64);
    let mut out = Vec::new();
    for dy in -r..=r {
        let span = r - dy.abs();
        for dx in -span..=span {
            let c = ((y + dy).rem_euclid(h) * w + (x + dx).rem_euclid(w)) as usize;
            if c != cell {
                out.push(c);
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

pub fn neighbor_lists(width: usize, height: usize, radius: usize) -> Vec<Vec<usize>> {
    (0..width * height).map(|c| neighbors(width, height, c, radius)).collect()
}

/// Fermi adoption probability of imitating a neighbor with payoff `e_y`.
pub fn fermi(e_x: f64, e_y: f64, k: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::Config(format!("noise parameter must be positive, got {k}")));
    }
    Ok(adoption(e_x, e_y, k))
}

fn adoption(e_x: f64, e_y: f64, k: f64) -> f64 {
    1.0 / (1.0 + (-(e_y - e_x) / k).exp())
}

/// Payoff `x` collects from one neighbor `y`: once as the active vehicle and
/// once as the passive one, summed.
pub fn pair_payoff(game: &StateGames, x: Agent, y: Agent) -> f64 {
    let as_active = Pair::new(x.vtype, y.vtype);
    let as_passive = Pair::new(y.vtype, x.vtype);
    let a = game.payoffs[as_active.index()][Role::Active.index()]
        [Outcome::from_choices(x.cooperates, y.cooperates).index()];
    let p = game.payoffs[as_passive.index()][Role::Passive.index()]
        [Outcome::from_choices(y.cooperates, x.cooperates).index()];
    a + p
}

/// Mean payoff of every agent over all of its role-pair interactions.
pub fn play_round(grid: &GridWorld, nbrs: &[Vec<usize>], game: &StateGames) -> Vec<f64> {
    grid.agents
        .iter()
        .zip(nbrs)
        .map(|(x, ns)| {
            if ns.is_empty() {
                return 0.0;
            }
            let total: f64 = ns.iter().map(|&j| pair_payoff(game, *x, grid.agents[j])).sum();
            total / (2 * ns.len()) as f64
        })
        .collect()
}

/// One synchronous imitation round from a snapshot of strategies and payoffs.
/// Returns the number of agents whose strategy changed.
pub fn update(grid: &mut GridWorld, nbrs: &[Vec<usize>], payoffs: &[f64], k: f64, rng: &mut impl Rng) -> usize {
    let snapshot = grid.agents.clone();
    let mut same = Vec::new();
    let mut changed = 0;
    for (i, x) in snapshot.iter().enumerate() {
        same.clear();
        same.extend(nbrs[i].iter().copied().filter(|&j| snapshot[j].vtype == x.vtype));
        if same.is_empty() {
            continue;
        }
        let j = same[rng.random_range(0..same.len())];
        if rng.random::<f64>() < adoption(payoffs[i], payoffs[j], k) && snapshot[j].cooperates != x.cooperates {
            grid.agents[i].cooperates = snapshot[j].cooperates;
            changed += 1;
        }
    }
    changed
}

/// Uniform random permutation of agents over cells.
pub fn shuffle_grid(grid: &mut GridWorld, rng: &mut impl Rng) {
    grid.agents.shuffle(rng);
}

/// Plays one step with a uniformly drawn state and returns its pool index.
pub fn step(grid: &mut GridWorld, nbrs: &[Vec<usize>], pool: &[StateGames], k: f64, rng: &mut impl Rng) -> usize {
    let s = rng.random_range(0..pool.len());
    let payoffs = play_round(grid, nbrs, &pool[s]);
    update(grid, nbrs, &payoffs, k, rng);
    s
}

/// Cooperating shares after every step, starting with the initial grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepSeries {
    pub rep: usize,
    pub stream: u64,
    pub coop_all: Vec<f64>,
    pub coop_av: Vec<Option<f64>>,
    pub coop_hdv: Vec<Option<f64>>,
}

/// Independent stream for one replication of one configuration.
pub fn rep_rng(master_seed: u64, config_id: usize, rep: usize) -> (ChaCha8Rng, u64) {
    let stream = ((config_id as u64) << 32) | rep as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    (rng, stream)
}

/// Runs one replication.
pub fn run_rep(config: &SimConfig, pool: &[StateGames], mut rng: ChaCha8Rng, rep: usize, stream: u64) -> Result<RepSeries> {
    config.validate()?;
    if pool.is_empty() {
        return Err(Error::Data("state pool is empty".into()));
    }
    let nbrs = neighbor_lists(config.width, config.height, config.neighbor_size);
    let mut grid = init_grid(config, &mut rng);
    let mut series = RepSeries {
        rep,
        stream,
        coop_all: Vec::with_capacity(config.steps + 1),
        coop_av: Vec::with_capacity(config.steps + 1),
        coop_hdv: Vec::with_capacity(config.steps + 1),
    };
    let record = |grid: &GridWorld, s: &mut RepSeries| {
        s.coop_all.push(grid.cooperation(None).unwrap_or(0.0));
        s.coop_av.push(grid.cooperation(Some(VehicleType::Av)));
        s.coop_hdv.push(grid.cooperation(Some(VehicleType::Hdv)));
    };
    record(&grid, &mut series);
    for t in 1..=config.steps {
        if config.shuffles_at(t) {
            shuffle_grid(&mut grid, &mut rng);
        }
        step(&mut grid, &nbrs, pool, config.noise_k, &mut rng);
        record(&grid, &mut series);
    }
    Ok(series)
}

/// Mean and two-sided 95% t band per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Five-number summary of the final-step shares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_id: usize,
    pub label: String,
    pub config: SimConfig,
    pub master_seed: u64,
    pub reps: Vec<RepSeries>,
    pub band_all: Band,
    pub band_av: Option<Band>,
    pub band_hdv: Option<Band>,
    pub final_all: Vec<f64>,
    pub final_box: BoxStats,
}

fn band(series: &[Vec<f64>]) -> Band {
    let n = series.len();
    let steps = series[0].len();
    let t = if n > 1 {
        StudentsT::new(0.0, 1.0, (n - 1) as f64).map(|d| d.inverse_cdf(0.975)).unwrap_or(f64::NAN)
    } else {
        0.0
    };
    let mut out = Band { mean: Vec::with_capacity(steps), lower: Vec::with_capacity(steps), upper: Vec::with_capacity(steps) };
    for k in 0..steps {
        let xs: Vec<f64> = series.iter().map(|s| s[k]).collect();
        let m = crate::numeric::mean(&xs);
        let half = if n > 1 { t * crate::numeric::sample_std(&xs) / (n as f64).sqrt() } else { 0.0 };
        out.mean.push(m);
        out.lower.push(m - half);
        out.upper.push(m + half);
    }
    out
}

fn typed_band(series: &[&Vec<Option<f64>>]) -> Option<Band> {
    let full: Option<Vec<Vec<f64>>> = series.iter().map(|s| s.iter().copied().collect()).collect();
    full.map(|f| band(&f))
}

fn box_stats(values: &[f64]) -> BoxStats {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    BoxStats {
        min: v[0],
        q1: quantile_sorted(&v, 0.25),
        median: quantile_sorted(&v, 0.5),
        q3: quantile_sorted(&v, 0.75),
        max: v[v.len() - 1],
    }
}

pub fn summarize(config_id: usize, config: &SimConfig, master_seed: u64, reps: Vec<RepSeries>) -> RunRecord {
    let all: Vec<Vec<f64>> = reps.iter().map(|r| r.coop_all.clone()).collect();
    let final_all: Vec<f64> = all.iter().map(|s| s[s.len() - 1]).collect();
    RunRecord {
        config_id,
        label: config.label(),
        config: config.clone(),
        master_seed,
        band_all: band(&all),
        band_av: typed_band(&reps.iter().map(|r| &r.coop_av).collect::<Vec<_>>()),
        band_hdv: typed_band(&reps.iter().map(|r| &r.coop_hdv).collect::<Vec<_>>()),
        final_box: box_stats(&final_all),
        final_all,
        reps,
    }
}

/// Runs every replication of every configuration in parallel.
pub fn run_sweep(configs: &[SimConfig], pool: &[StateGames], master_seed: u64) -> Result<Vec<RunRecord>> {
    for c in configs {
        c.validate()?;
    }
    if pool.is_empty() {
        return Err(Error::Data("state pool is empty".into()));
    }
    let jobs: Vec<(usize, usize)> = configs
        .iter()
        .enumerate()
        .flat_map(|(i, c)| (0..c.reps).map(move |r| (i, r)))
        .collect();
    let results: Vec<RepSeries> = jobs
        .par_iter()
        .map(|&(i, r)| {
            let (rng, stream) = rep_rng(master_seed, i, r);
            run_rep(&configs[i], pool, rng, r, stream)
        })
        .collect::<Result<_>>()?;
    let mut it = results.into_iter();
    Ok(configs
        .iter()
        .enumerate()
        .map(|(i, c)| summarize(i, c, master_seed, it.by_ref().take(c.reps).collect()))
        .collect())
}

/// Axes of a full-factorial sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    pub neighbor_sizes: Vec<usize>,
    pub noise_ks: Vec<f64>,
    pub mprs: Vec<f64>,
    pub contact_freqs: Vec<f64>,
    pub width: usize,
    pub height: usize,
    pub steps: usize,
    pub reps: usize,
    pub init_coop: InitCoop,
}

impl Default for SweepGrid {
    /// The single baseline configuration: radius 2, K = 2, MPR 0.5, no shuffling.
    fn default() -> Self {
        SweepGrid {
            neighbor_sizes: vec![2],
            noise_ks: vec![2.0],
            mprs: vec![0.5],
            contact_freqs: vec![0.0],
            width: 20,
            height: 20,
            steps: 200,
            reps: 20,
            init_coop: InitCoop::default(),
        }
    }
}

impl SweepGrid {
    /// Three levels on each axis around the baseline, 81 configurations.
    pub fn full_factorial() -> Self {
        SweepGrid {
            neighbor_sizes: vec![1, 2, 3],
            noise_ks: vec![1.0, 2.0, 3.0],
            mprs: vec![0.2, 0.5, 0.8],
            contact_freqs: vec![0.0, 0.02, 0.04],
            ..SweepGrid::default()
        }
    }

    /// Configurations in neighbor size, noise, MPR, contact order.
    pub fn configs(&self) -> Vec<SimConfig> {
        let mut out = Vec::new();
        for &neighbor_size in &self.neighbor_sizes {
            for &noise_k in &self.noise_ks {
                for &mpr in &self.mprs {
                    for &contact_freq in &self.contact_freqs {
                        out.push(SimConfig {
                            width: self.width,
                            height: self.height,
                            mpr,
                            neighbor_size,
                            noise_k,
                            contact_freq,
                            steps: self.steps,
                            reps: self.reps,
                            init_coop: self.init_coop,
                        });
                    }
                }
            }
        }
        out
    }
}

pub const TIMESERIES_HEADER: [&str; 6] = ["config_id", "rep", "step", "coop_all", "coop_av", "coop_hdv"];

pub fn write_timeseries(records: &[RunRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Data(e.to_string());
    w.write_record(TIMESERIES_HEADER).map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for rec in records {
        for rep in &rec.reps {
            for (k, all) in rep.coop_all.iter().enumerate() {
                w.write_record([
                    rec.config_id.to_string(),
                    rep.rep.to_string(),
                    k.to_string(),
                    all.to_string(),
                    opt(rep.coop_av[k]),
                    opt(rep.coop_hdv[k]),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbor_counts() {
        assert_eq!(neighbors(20, 20, 0, 1).len(), 4);
        assert_eq!(neighbors(20, 20, 210, 2).len(), 12);
        assert_eq!(neighbors(20, 20, 399, 3).len(), 24);
        assert_eq!(neighbors(20, 20, 0, 1), vec![1, 19, 20, 380]);
    }

    #[test]
    fn small_torus_deduplicates() {
        // On a 3x3 torus every other cell is within distance 2.
        assert_eq!(neighbors(3, 3, 4, 2).len(), 8);
        assert!(!neighbors(3, 3, 4, 2).contains(&4));
    }

    #[test]
    fn fermi_values() {
        assert_eq!(fermi(1.0, 1.0, 2.0).unwrap(), 0.5);
        assert!((fermi(0.0, 2.0, 2.0).unwrap() - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!(fermi(0.0, 1.0, 0.0).is_err());
        assert!(fermi(0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn shuffle_periods() {
        let mut c = SimConfig::default();
        assert_eq!(c.shuffle_period(), None);
        c.contact_freq = 0.04;
        assert_eq!(c.shuffle_period(), Some(25));
        c.contact_freq = 0.02;
        assert_eq!(c.shuffle_period(), Some(50));
    }

    #[test]
    fn full_factorial_has_81_configs() {
        let configs = SweepGrid::full_factorial().configs();
        assert_eq!(configs.len(), 81);
        assert!(configs.iter().all(|c| c.validate().is_ok()));
    }

    #[test]
    fn invalid_configs() {
        for f in [
            |c: &mut SimConfig| c.noise_k = 0.0,
            |c: &mut SimConfig| c.mpr = 1.5,
            |c: &mut SimConfig| c.neighbor_size = 0,
            |c: &mut SimConfig| c.reps = 0,
            |c: &mut SimConfig| c.init_coop.av = -0.1,
            |c: &mut SimConfig| c.contact_freq = f64::NAN,
        ] {
            let mut c = SimConfig::default();
            f(&mut c);
            assert!(matches!(c.validate(), Err(Error::Config(_))));
        }
    }
}
