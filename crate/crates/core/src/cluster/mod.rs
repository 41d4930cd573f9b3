//! Two-way behavior clustering of active and passive vehicles, labeling of
//! the clusters as cooperative or defective, and a MANOVA separation check.

mod kmeans;
mod manova;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use kmeans::{kmeans_fit, lloyd, KMeansFit, LloydRun, MAX_ITERATIONS, SHIFT_TOL};
pub use manova::{manova_two_group, ManovaResult};

use crate::error::{Error, Result};
use crate::extract::{ACTIVE_FEATURE_NAMES, PASSIVE_FEATURE_NAMES};
use crate::io::EventRow;
use crate::standardize::Standardizer;
use crate::types::{Behavior, Outcome, Pair, Role};

pub const DEFAULT_RESTARTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub role: Role,
    pub k: usize,
    /// Centroids in standardized feature units.
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub inertia: f64,
    /// Cluster index → label. `None` until [`label_clusters`] runs.
    pub label_map: Option<[Behavior; 2]>,
}

impl ClusterModel {
    pub fn from_fit(role: Role, fit: KMeansFit) -> Self {
        ClusterModel {
            role,
            k: fit.centroids.len(),
            centroids: fit.centroids,
            assignment: fit.assignment,
            inertia: fit.inertia,
            label_map: None,
        }
    }

    /// Label of every event, in input order.
    pub fn event_labels(&self) -> Result<Vec<Behavior>> {
        let map = self
            .label_map
            .ok_or_else(|| Error::Clustering("clusters have not been labeled".into()))?;
        Ok(self.assignment.iter().map(|&c| map[c]).collect())
    }
}

/// Per-cluster mean of each raw feature column.
pub fn cluster_means(assignment: &[usize], raw: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let dim = raw.first().map(Vec::len).unwrap_or(0);
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (&c, row) in assignment.iter().zip(raw) {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(row) {
            *s += v;
        }
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, n)| s.into_iter().map(|v| v / n as f64).collect())
        .collect()
}

/// (primary column, cooperative side is larger?, tie-break column).
/// Tie-breaks always favor the smaller mean maximum acceleration.
fn label_rule(role: Role) -> (usize, bool, usize) {
    match role {
        // lane-changing time; max acceleration
        Role::Active => (0, true, 9),
        // speed gain; max acceleration
        Role::Passive => (0, false, 1),
    }
}

pub fn label_clusters(mut model: ClusterModel, raw: &[Vec<f64>]) -> Result<ClusterModel> {
    if model.k != 2 || model.centroids.len() != 2 {
        return Err(Error::Clustering("labeling needs exactly two clusters".into()));
    }
    if raw.len() != model.assignment.len() {
        return Err(Error::Data("raw feature rows do not match the assignment".into()));
    }
    let (primary, larger_is_coop, tiebreak) = label_rule(model.role);
    let means = cluster_means(&model.assignment, raw, 2);
    if means.iter().any(|m| m.len() <= primary.max(tiebreak)) {
        return Err(Error::Data("raw features have too few columns for labeling".into()));
    }
    let (a, b) = (means[0][primary], means[1][primary]);
    if a.is_nan() || b.is_nan() {
        return Err(Error::Clustering("a cluster is empty".into()));
    }
    let coop = if a != b {
        if (a > b) == larger_is_coop {
            0
        } else {
            1
        }
    } else {
        let (ta, tb) = (means[0][tiebreak], means[1][tiebreak]);
        if ta == tb {
            return Err(Error::LabelTie);
        }
        if ta < tb {
            0
        } else {
            1
        }
    };
    let mut map = [Behavior::Defective; 2];
    map[coop] = Behavior::Cooperative;
    model.label_map = Some(map);
    Ok(model)
}

pub fn outcome_of(active: Behavior, passive: Behavior) -> Outcome {
    Outcome::from_behaviors(active, passive)
}

/// Outcome counts per interaction pair, indexed `[pair][outcome]` in
/// [`Pair::ALL`] and CC, CD, DC, DD order.
pub fn outcome_counts(rows: &[EventRow]) -> [[u64; 4]; 4] {
    let mut counts = [[0u64; 4]; 4];
    for row in rows {
        if let Some(o) = row.outcome {
            let pair = Pair::new(row.event.active_type, row.event.passive_type);
            counts[pair.index()][o.index()] += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub label: Behavior,
    pub size: usize,
    /// Centroid in standardized units.
    pub centroid: Vec<f64>,
    /// Raw feature means keyed by feature name.
    pub feature_means: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleReport {
    pub role: Role,
    pub features: Vec<String>,
    pub standardization: Standardizer,
    pub inertia: f64,
    pub clusters: Vec<ClusterSummary>,
    pub manova: ManovaResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub seed: u64,
    pub restarts: usize,
    pub active: RoleReport,
    pub passive: RoleReport,
    /// Outcome counts keyed by pair label, then outcome.
    pub outcome_counts: BTreeMap<String, BTreeMap<String, u64>>,
}

fn cluster_role(role: Role, raw: &[Vec<f64>], seed: u64, restarts: usize) -> Result<(Vec<Behavior>, RoleReport)> {
    let feature_names: &[&str] = match role {
        Role::Active => &ACTIVE_FEATURE_NAMES,
        Role::Passive => &PASSIVE_FEATURE_NAMES,
    };
    let names: Vec<String> = feature_names.iter().map(|s| s.to_string()).collect();
    let std = Standardizer::fit(raw, feature_names)?;
    let z: Vec<Vec<f64>> = raw.iter().map(|r| std.transform(r)).collect();
    let fit = kmeans_fit(&z, 2, seed, restarts)?;
    let model = label_clusters(ClusterModel::from_fit(role, fit), raw)?;
    let labels = model.event_labels()?;
    let manova = manova_two_group(&z, &model.assignment)?;
    let means = cluster_means(&model.assignment, raw, 2);
    let map = model.label_map.expect("labeled above");
    let clusters = (0..2)
        .map(|c| ClusterSummary {
            label: map[c],
            size: model.assignment.iter().filter(|&&a| a == c).count(),
            centroid: model.centroids[c].clone(),
            feature_means: names.iter().cloned().zip(means[c].iter().copied()).collect(),
        })
        .collect();
    Ok((
        labels,
        RoleReport {
            role,
            features: names,
            standardization: std,
            inertia: model.inertia,
            clusters,
            manova,
        },
    ))
}

/// Clusters both roles, writes labels and outcomes into `rows`, and returns
/// the report. The passive clustering uses a seed derived from `seed`.
pub fn cluster_events(rows: &mut [EventRow], seed: u64, restarts: usize) -> Result<ClusterReport> {
    let active_raw: Vec<Vec<f64>> = rows.iter().map(|r| r.event.active_features.to_vec()).collect();
    let passive_raw: Vec<Vec<f64>> = rows.iter().map(|r| r.event.passive_features.to_vec()).collect();
    let (active_labels, active) = cluster_role(Role::Active, &active_raw, seed, restarts)?;
    let (passive_labels, passive) =
        cluster_role(Role::Passive, &passive_raw, seed ^ 0x9e37_79b9_7f4a_7c15, restarts)?;
    for ((row, a), p) in rows.iter_mut().zip(active_labels).zip(passive_labels) {
        row.active_label = Some(a);
        row.passive_label = Some(p);
        row.outcome = Some(outcome_of(a, p));
    }
    let counts = outcome_counts(rows);
    let outcome_counts = Pair::ALL
        .iter()
        .map(|pair| {
            let per: BTreeMap<String, u64> = [Outcome::CC, Outcome::CD, Outcome::DC, Outcome::DD]
                .iter()
                .map(|o| (o.as_str().to_string(), counts[pair.index()][o.index()]))
                .collect();
            (pair.label(), per)
        })
        .collect();
    Ok(ClusterReport {
        seed,
        restarts,
        active,
        passive,
        outcome_counts,
    })
}
