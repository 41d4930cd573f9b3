//! Per-state payoff tables, canonical (R, S, T, P) payoffs and social-dilemma
//! classification.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::EventRow;
use crate::qre::UtilityModel;
use crate::types::{InteractionType, Outcome, Pair, Role};

/// Margin applied to every strict inequality of the classifier.
pub const DEFAULT_EPS: f64 = 1e-9;

pub const PAYOFF_HEADER: [&str; 11] =
    ["state_id", "pair", "role", "R", "S", "T", "P", "class", "fear", "greed", "observed"];

/// A lane-change state together with the pair that was actually observed.
#[derive(Debug, Clone, PartialEq)]
pub struct GameState {
    pub id: String,
    pub state: [f64; 11],
    pub pair: Pair,
}

impl GameState {
    pub fn from_rows(rows: &[EventRow]) -> Result<Vec<GameState>> {
        rows.iter()
            .map(|r| {
                if r.event.state.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Data(format!(
                        "event {} has a non-finite state variable",
                        r.event.event_id
                    )));
                }
                Ok(GameState {
                    id: r.event.event_id.clone(),
                    state: r.event.state,
                    pair: Pair::new(r.event.active_type, r.event.passive_type),
                })
            })
            .collect()
    }
}

/// 2x2 bimatrix indexed by [`Outcome`]; the DD entry is always (0, 0).
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffTable {
    pub state_id: String,
    pub pair: Pair,
    pub active: [f64; 4],
    pub passive: [f64; 4],
    pub imputed: bool,
}

impl PayoffTable {
    pub fn entry(&self, outcome: Outcome) -> (f64, f64) {
        (self.active[outcome.index()], self.passive[outcome.index()])
    }

    pub fn payoffs(&self, role: Role) -> &[f64; 4] {
        match role {
            Role::Active => &self.active,
            Role::Passive => &self.passive,
        }
    }
}

fn with_baseline(u: [f64; 3]) -> [f64; 4] {
    [u[0], u[1], u[2], 0.0]
}

fn fitted(t: InteractionType) -> usize {
    t.fitted_index().expect("caller excludes AV_vs_AV")
}

/// Payoff table for `pair` at `state`. An AV-AV pair is imputed when
/// `impute` is set and rejected otherwise.
pub fn build_table(id: &str, state: &[f64], model: &UtilityModel, pair: Pair, impute: bool) -> Result<PayoffTable> {
    if pair.active_interaction() == InteractionType::AvVsAv {
        if impute {
            return Ok(impute_av_av(id, state, model));
        }
        return Err(Error::Data(format!(
            "state {id}: AV-AV has no fitted utilities and imputation is disabled"
        )));
    }
    let s = model.augment(state);
    Ok(PayoffTable {
        state_id: id.to_string(),
        pair,
        active: with_baseline(model.utilities(Role::Active, fitted(pair.active_interaction()), &s)),
        passive: with_baseline(model.utilities(Role::Passive, fitted(pair.passive_interaction()), &s)),
        imputed: false,
    })
}

/// AV-AV table whose AV payoffs in each role are the AV-vs-HDV utilities.
pub fn impute_av_av(id: &str, state: &[f64], model: &UtilityModel) -> PayoffTable {
    let s = model.augment(state);
    let t = fitted(InteractionType::AvVsHdv);
    PayoffTable {
        state_id: id.to_string(),
        pair: Pair::ALL[3],
        active: with_baseline(model.utilities(Role::Active, t, &s)),
        passive: with_baseline(model.utilities(Role::Passive, t, &s)),
        imputed: true,
    }
}

/// Tables for all four pairs in [`Pair::ALL`] order.
pub fn all_tables(id: &str, state: &[f64], model: &UtilityModel) -> [PayoffTable; 4] {
    Pair::ALL.map(|pair| build_table(id, state, model, pair, true).expect("imputation enabled"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalPayoffs {
    pub role: Role,
    pub r: f64,
    pub s: f64,
    pub t: f64,
    pub p: f64,
}

impl CanonicalPayoffs {
    pub fn new(role: Role, r: f64, t: f64, s: f64) -> Self {
        CanonicalPayoffs { role, r, s, t, p: 0.0 }
    }

    pub fn fear(&self) -> f64 {
        self.p - self.s
    }

    pub fn greed(&self) -> f64 {
        self.t - self.r
    }

    /// Payoffs of this role indexed by [`Outcome`].
    pub fn to_outcomes(&self) -> [f64; 4] {
        match self.role {
            Role::Active => [self.r, self.s, self.t, self.p],
            Role::Passive => [self.r, self.t, self.s, self.p],
        }
    }
}

/// Reward, temptation and sucker's payoff seen from `role`.
pub fn canonical(table: &PayoffTable, role: Role) -> CanonicalPayoffs {
    let u = table.payoffs(role);
    let (cc, cd, dc, dd) = (u[0], u[1], u[2], u[3]);
    let (t, s) = match role {
        Role::Active => (dc, cd),
        Role::Passive => (cd, dc),
    };
    CanonicalPayoffs { role, r: cc, s, t, p: dd }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GameClass {
    #[serde(rename = "PD")]
    PrisonersDilemma,
    #[serde(rename = "SH")]
    StagHunt,
    #[serde(rename = "CG")]
    ChickenGame,
    #[serde(rename = "OtherSD")]
    OtherSocialDilemma,
    #[serde(rename = "NonSD")]
    NonSocialDilemma,
}

impl GameClass {
    pub const ALL: [GameClass; 5] = [
        GameClass::PrisonersDilemma,
        GameClass::StagHunt,
        GameClass::ChickenGame,
        GameClass::OtherSocialDilemma,
        GameClass::NonSocialDilemma,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_social_dilemma(self) -> bool {
        self != GameClass::NonSocialDilemma
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GameClass::PrisonersDilemma => "PD",
            GameClass::StagHunt => "SH",
            GameClass::ChickenGame => "CG",
            GameClass::OtherSocialDilemma => "OtherSD",
            GameClass::NonSocialDilemma => "NonSD",
        }
    }
}

impl fmt::Display for GameClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GameClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GameClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| format!("unknown game class `{s}`"))
    }
}

/// `a > b` with margin `eps`.
fn gt(a: f64, b: f64, eps: f64) -> bool {
    a > b + eps
}

pub fn is_social_dilemma(c: &CanonicalPayoffs, eps: f64) -> bool {
    let CanonicalPayoffs { r, s, t, p, .. } = *c;
    gt(r, p, eps) && gt(r, s, eps) && gt(2.0 * r, t + s, eps) && (gt(t, r, eps) || gt(p, s, eps))
}

pub fn classify(c: &CanonicalPayoffs, eps: f64) -> GameClass {
    if !is_social_dilemma(c, eps) {
        return GameClass::NonSocialDilemma;
    }
    let CanonicalPayoffs { r, s, t, p, .. } = *c;
    let chain = |xs: [f64; 4]| xs.windows(2).all(|w| gt(w[0], w[1], eps));
    if chain([t, r, p, s]) {
        GameClass::PrisonersDilemma
    } else if chain([r, t, p, s]) {
        GameClass::StagHunt
    } else if chain([t, r, s, p]) {
        GameClass::ChickenGame
    } else {
        GameClass::OtherSocialDilemma
    }
}

/// One row of the payoff CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct GameRecord {
    pub state_id: String,
    pub pair: Pair,
    pub canonical: CanonicalPayoffs,
    pub class: GameClass,
    /// Whether `pair` is the pair observed at this state.
    pub observed: bool,
}

/// Classifies both roles of all four pair tables for every state.
pub fn classify_states(states: &[GameState], model: &UtilityModel, eps: f64) -> Vec<GameRecord> {
    states
        .par_iter()
        .flat_map_iter(|gs| {
            all_tables(&gs.id, &gs.state, model).into_iter().flat_map(move |table| {
                Role::ALL.map(|role| {
                    let c = canonical(&table, role);
                    GameRecord {
                        state_id: gs.id.clone(),
                        pair: table.pair,
                        canonical: c,
                        class: classify(&c, eps),
                        observed: table.pair == gs.pair,
                    }
                })
            })
        })
        .collect()
}

/// Joint classification counts for one pair, `counts[active][passive]`
/// indexed by [`GameClass::index`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossTab {
    pub pair: Pair,
    pub counts: [[u64; 5]; 5],
}

impl CrossTab {
    pub fn new(pair: Pair) -> Self {
        CrossTab { pair, counts: [[0; 5]; 5] }
    }

    pub fn add(&mut self, active: GameClass, passive: GameClass) {
        self.counts[active.index()][passive.index()] += 1;
    }

    pub fn row_totals(&self) -> [u64; 5] {
        self.counts.map(|row| row.iter().sum())
    }

    pub fn column_totals(&self) -> [u64; 5] {
        std::array::from_fn(|j| self.counts.iter().map(|row| row[j]).sum())
    }

    pub fn total(&self) -> u64 {
        self.row_totals().iter().sum()
    }
}

/// Cross-tabulates the observed pair's classification in both roles.
/// Pairs without events are omitted.
pub fn tabulate(states: &[GameState], model: &UtilityModel, eps: f64) -> Result<Vec<CrossTab>> {
    let classes: Vec<(Pair, GameClass, GameClass)> = states
        .par_iter()
        .map(|gs| {
            let table = build_table(&gs.id, &gs.state, model, gs.pair, false)?;
            Ok((
                gs.pair,
                classify(&canonical(&table, Role::Active), eps),
                classify(&canonical(&table, Role::Passive), eps),
            ))
        })
        .collect::<Result<_>>()?;
    Ok(tabulate_classes(&classes))
}

/// Builds cross-tabs from already classified (pair, active, passive) triples.
pub fn tabulate_classes(classes: &[(Pair, GameClass, GameClass)]) -> Vec<CrossTab> {
    let mut tabs: Vec<CrossTab> = Pair::ALL.into_iter().map(CrossTab::new).collect();
    for (pair, a, p) in classes {
        tabs[pair.index()].add(*a, *p);
    }
    tabs.retain(|t| t.total() > 0);
    tabs
}

/// Cross-tabs from the observed rows of a payoff CSV.
pub fn tabulate_records(records: &[GameRecord]) -> Result<Vec<CrossTab>> {
    let mut by_state: std::collections::BTreeMap<(&str, Pair), [Option<GameClass>; 2]> = Default::default();
    for rec in records.iter().filter(|r| r.observed) {
        let slot = &mut by_state.entry((rec.state_id.as_str(), rec.pair)).or_default()[rec.canonical.role.index()];
        if slot.is_some() {
            return Err(Error::Data(format!(
                "state {} has two {} rows for {}",
                rec.state_id, rec.canonical.role, rec.pair
            )));
        }
        *slot = Some(rec.class);
    }
    let mut classes = Vec::with_capacity(by_state.len());
    for ((id, pair), [a, p]) in by_state {
        match (a, p) {
            (Some(a), Some(p)) => classes.push((pair, a, p)),
            _ => return Err(Error::Data(format!("state {id} is missing a role for {pair}"))),
        }
    }
    Ok(tabulate_classes(&classes))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    #[serde(rename = "PD")]
    pub pd: u64,
    #[serde(rename = "SH")]
    pub sh: u64,
    #[serde(rename = "CG")]
    pub cg: u64,
    #[serde(rename = "OtherSD")]
    pub other_sd: u64,
    #[serde(rename = "NonSD")]
    pub non_sd: u64,
    #[serde(rename = "Total")]
    pub total: u64,
}

impl ClassCounts {
    fn from_array(v: [u64; 5]) -> Self {
        ClassCounts {
            pd: v[0],
            sh: v[1],
            cg: v[2],
            other_sd: v[3],
            non_sd: v[4],
            total: v.iter().sum(),
        }
    }
}

/// Rows are the active vehicle's class, columns the passive vehicle's.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossTabRows {
    #[serde(rename = "PD")]
    pub pd: ClassCounts,
    #[serde(rename = "SH")]
    pub sh: ClassCounts,
    #[serde(rename = "CG")]
    pub cg: ClassCounts,
    #[serde(rename = "OtherSD")]
    pub other_sd: ClassCounts,
    #[serde(rename = "NonSD")]
    pub non_sd: ClassCounts,
    #[serde(rename = "Total")]
    pub total: ClassCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub pair: String,
    pub events: u64,
    pub active_dilemma_share: f64,
    pub passive_dilemma_share: f64,
    pub crosstab: CrossTabRows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamesReport {
    pub eps: f64,
    pub events: u64,
    pub active_dilemma_share: f64,
    pub passive_dilemma_share: f64,
    pub pairs: Vec<PairReport>,
}

fn share(count: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 / total as f64
    }
}

fn dilemma_counts(tab: &CrossTab) -> (u64, u64) {
    let nonsd = GameClass::NonSocialDilemma.index();
    let (rows, cols) = (tab.row_totals(), tab.column_totals());
    let sum_sd = |v: [u64; 5]| v.iter().enumerate().filter(|(i, _)| *i != nonsd).map(|(_, c)| c).sum();
    (sum_sd(rows), sum_sd(cols))
}

impl GamesReport {
    pub fn new(tabs: &[CrossTab], eps: f64) -> Self {
        let mut pairs = Vec::new();
        let (mut events, mut active_sd, mut passive_sd) = (0, 0, 0);
        for tab in tabs {
            let n = tab.total();
            let (a, p) = dilemma_counts(tab);
            events += n;
            active_sd += a;
            passive_sd += p;
            let row = |c: GameClass| ClassCounts::from_array(tab.counts[c.index()]);
            pairs.push(PairReport {
                pair: tab.pair.label(),
                events: n,
                active_dilemma_share: share(a, n),
                passive_dilemma_share: share(p, n),
                crosstab: CrossTabRows {
                    pd: row(GameClass::PrisonersDilemma),
                    sh: row(GameClass::StagHunt),
                    cg: row(GameClass::ChickenGame),
                    other_sd: row(GameClass::OtherSocialDilemma),
                    non_sd: row(GameClass::NonSocialDilemma),
                    total: ClassCounts::from_array(tab.column_totals()),
                },
            });
        }
        GamesReport {
            eps,
            events,
            active_dilemma_share: share(active_sd, events),
            passive_dilemma_share: share(passive_sd, events),
            pairs,
        }
    }
}

fn fmt_f64(v: f64) -> String {
    v.to_string()
}

pub fn write_payoffs(records: &[GameRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Data(e.to_string());
    w.write_record(PAYOFF_HEADER).map_err(csv_err)?;
    for rec in records {
        let c = &rec.canonical;
        w.write_record([
            rec.state_id.clone(),
            rec.pair.label(),
            c.role.to_string(),
            fmt_f64(c.r),
            fmt_f64(c.s),
            fmt_f64(c.t),
            fmt_f64(c.p),
            rec.class.to_string(),
            fmt_f64(c.fear()),
            fmt_f64(c.greed()),
            u8::from(rec.observed).to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}

/// Parses a payoff CSV. The class is taken as written; the derived fear and
/// greed columns must be numbers but are otherwise ignored.
pub fn parse_payoffs(text: &str) -> Result<Vec<GameRecord>> {
    const FILE: &str = "payoffs";
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| Error::parse(FILE, 1, e.to_string()))?;
    if !header.iter().eq(PAYOFF_HEADER.iter().copied()) {
        return Err(Error::parse(FILE, 1, format!("expected header `{}`", PAYOFF_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::parse(FILE, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let err = |msg: String| Error::parse(FILE, line, msg);
        if rec.len() != PAYOFF_HEADER.len() {
            return Err(err(format!("expected {} fields, found {}", PAYOFF_HEADER.len(), rec.len())));
        }
        let num = |i: usize| -> Result<f64> {
            let v: f64 = rec[i]
                .parse()
                .map_err(|_| err(format!("{}: `{}` is not a number", PAYOFF_HEADER[i], &rec[i])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(err(format!("{} must be finite", PAYOFF_HEADER[i])))
            }
        };
        let role: Role = rec[2].parse().map_err(err)?;
        let c = CanonicalPayoffs { role, r: num(3)?, s: num(4)?, t: num(5)?, p: num(6)? };
        if c.p != 0.0 {
            return Err(err("P must be 0".into()));
        }
        num(8)?;
        num(9)?;
        let observed = match &rec[10] {
            "0" => false,
            "1" => true,
            other => return Err(err(format!("observed: `{other}` is not 0 or 1"))),
        };
        if rec[0].is_empty() {
            return Err(err("empty state_id".into()));
        }
        out.push(GameRecord {
            state_id: rec[0].to_string(),
            pair: rec[1].parse().map_err(err)?,
            canonical: c,
            class: rec[7].parse().map_err(err)?,
            observed,
        });
    }
    Ok(out)
}

/// Per-state payoffs of both roles for all four pairs, indexed
/// `[pair][role][outcome]`, as the lattice simulation consumes them.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGames {
    pub state_id: String,
    pub payoffs: [[[f64; 4]; 2]; 4],
}

impl StateGames {
    /// Tables given in [`Pair::ALL`] order.
    pub fn from_tables(tables: &[PayoffTable; 4]) -> Self {
        let mut payoffs = [[[0.0; 4]; 2]; 4];
        for t in tables {
            payoffs[t.pair.index()] = [t.active, t.passive];
        }
        StateGames { state_id: tables[0].state_id.clone(), payoffs }
    }

    /// The same canonical payoffs for every pair and both roles.
    pub fn uniform(state_id: &str, r: f64, t: f64, s: f64) -> Self {
        let a = CanonicalPayoffs::new(Role::Active, r, t, s).to_outcomes();
        let p = CanonicalPayoffs::new(Role::Passive, r, t, s).to_outcomes();
        StateGames { state_id: state_id.to_string(), payoffs: [[a, p]; 4] }
    }
}

/// Groups payoff records into complete per-state game sets, in order of
/// first appearance.
pub fn state_pool(records: &[GameRecord]) -> Result<Vec<StateGames>> {
    let mut order: Vec<String> = Vec::new();
    let mut seen: std::collections::HashMap<&str, (usize, [[Option<[f64; 4]>; 2]; 4])> = Default::default();
    for rec in records {
        let entry = seen.entry(rec.state_id.as_str()).or_insert_with(|| {
            order.push(rec.state_id.clone());
            (order.len() - 1, [[None; 2]; 4])
        });
        let slot = &mut entry.1[rec.pair.index()][rec.canonical.role.index()];
        if slot.is_some() {
            return Err(Error::Data(format!(
                "state {} lists {} {} twice",
                rec.state_id, rec.pair, rec.canonical.role
            )));
        }
        *slot = Some(rec.canonical.to_outcomes());
    }
    let mut pool: Vec<Option<StateGames>> = vec![None; order.len()];
    for (id, (i, slots)) in seen {
        let mut payoffs = [[[0.0; 4]; 2]; 4];
        for (pair, roles) in Pair::ALL.iter().zip(slots) {
            for (role, v) in Role::ALL.iter().zip(roles) {
                payoffs[pair.index()][role.index()] =
                    v.ok_or_else(|| Error::Data(format!("state {id} is missing {pair} {role}")))?;
            }
        }
        pool[i] = Some(StateGames { state_id: id.to_string(), payoffs });
    }
    Ok(pool.into_iter().flatten().collect())
}
