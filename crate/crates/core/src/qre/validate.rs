use std::collections::BTreeMap;

use log::{info, warn};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::equilibrium::Game;
use super::fit::{fit, log_likelihood, FitOptions};
use super::model::{Observation, UtilityModel};
use crate::error::{Error, Result};
use crate::numeric::{mean, sample_std};
use crate::types::{Outcome, Pair};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodRatio {
    pub ll_full: f64,
    pub ll_null: f64,
    pub lrt_stat: f64,
    pub df: usize,
    pub p_value: f64,
    pub mcfadden: f64,
    pub warning: Option<String>,
}

/// Likelihood-ratio test and McFadden's pseudo-R² from two log-likelihoods.
pub fn likelihood_ratio(ll_full: f64, ll_null: f64, df: usize) -> Result<LikelihoodRatio> {
    if df == 0 {
        return Err(Error::Data("likelihood-ratio test needs positive degrees of freedom".into()));
    }
    let lrt_stat = 2.0 * (ll_full - ll_null);
    let mcfadden = if ll_null == 0.0 { 0.0 } else { 1.0 - ll_full / ll_null };
    let warning = (ll_full < ll_null).then(|| {
        "full model log-likelihood is below the null model's; regularization is likely too strong".to_string()
    });
    if let Some(w) = &warning {
        warn!("{w}");
    }
    let p_value = if lrt_stat <= 0.0 {
        1.0
    } else {
        ChiSquared::new(df as f64).map_err(|e| Error::Data(e.to_string()))?.sf(lrt_stat)
    };
    Ok(LikelihoodRatio {
        ll_full,
        ll_null,
        lrt_stat,
        df,
        p_value,
        mcfadden,
        warning,
    })
}

pub fn validate(full: &UtilityModel, null: &UtilityModel, obs: &[Observation]) -> Result<LikelihoodRatio> {
    let ll_full = log_likelihood(full, obs)?;
    let ll_null = log_likelihood(null, obs)?;
    let df = full.kind.free_params().saturating_sub(null.kind.free_params());
    likelihood_ratio(ll_full, ll_null, df)
}

/// Variance inflation factor per column, then 1.0 for the constant.
/// Perfectly collinear columns report `f64::INFINITY`.
pub fn vif(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let p = rows.first().map(Vec::len).unwrap_or(0);
    if rows.len() < p + 2 || p < 2 {
        return Err(Error::Data(format!(
            "VIF needs at least {} rows of {p} columns, got {}",
            p + 2,
            rows.len()
        )));
    }
    let n = rows.len();
    let mut out = Vec::with_capacity(p + 1);
    for j in 0..p {
        let x = DMatrix::from_fn(n, p, |i, c| {
            if c == 0 {
                1.0
            } else {
                rows[i][if c <= j { c - 1 } else { c }]
            }
        });
        let y = DVector::from_fn(n, |i, _| rows[i][j]);
        let ybar = y.mean();
        let sst: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
        if sst <= 0.0 {
            out.push(f64::INFINITY);
            continue;
        }
        let svd = x.clone().svd(true, true);
        let coef = svd
            .solve(&y, 1e-12)
            .map_err(|e| Error::Singular(e.to_string()))?;
        let resid = &y - &x * coef;
        let r2 = 1.0 - resid.norm_squared() / sst;
        out.push(if 1.0 - r2 <= 1e-10 { f64::INFINITY } else { 1.0 / (1.0 - r2) });
    }
    out.push(1.0);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub support: u64,
}

impl ClassMetrics {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
        ClassMetrics {
            precision,
            recall,
            f1,
            support: tp + fn_,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoleCooperation {
    pub observed: u64,
    pub expected: f64,
    pub stdev: f64,
}

impl RoleCooperation {
    /// Expected count `Σp` and Bernoulli-sum stdev `sqrt(Σp(1-p))`.
    pub fn from_probabilities(probs: &[f64], observed: u64) -> Self {
        RoleCooperation {
            observed,
            expected: probs.iter().sum(),
            stdev: probs.iter().map(|p| p * (1.0 - p)).sum::<f64>().sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub n_events: usize,
    /// `confusion[truth][predicted]` in CC, CD, DC, DD order.
    pub confusion: [[u64; 4]; 4],
    pub per_outcome: BTreeMap<String, ClassMetrics>,
    pub macro_precision: Option<f64>,
    pub macro_recall: Option<f64>,
    pub macro_f1: Option<f64>,
    pub accuracy: f64,
    pub active: RoleCooperation,
    pub passive: RoleCooperation,
}

fn macro_avg(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| mean(&v))
}

pub fn scores_from_confusion(confusion: [[u64; 4]; 4], active: RoleCooperation, passive: RoleCooperation) -> Scores {
    let mut per_outcome = BTreeMap::new();
    let mut correct = 0;
    let mut total = 0;
    for (k, o) in Outcome::ALL.iter().enumerate() {
        let tp = confusion[k][k];
        let fp: u64 = (0..4).filter(|&t| t != k).map(|t| confusion[t][k]).sum();
        let fn_: u64 = (0..4).filter(|&q| q != k).map(|q| confusion[k][q]).sum();
        per_outcome.insert(o.as_str().to_string(), ClassMetrics::from_counts(tp, fp, fn_));
        correct += tp;
        total += confusion[k].iter().sum::<u64>();
    }
    Scores {
        n_events: total as usize,
        confusion,
        macro_precision: macro_avg(per_outcome.values().map(|m| m.precision)),
        macro_recall: macro_avg(per_outcome.values().map(|m| m.recall)),
        macro_f1: macro_avg(per_outcome.values().map(|m| m.f1)),
        per_outcome,
        accuracy: if total > 0 { correct as f64 / total as f64 } else { 0.0 },
        active,
        passive,
    }
}

/// Equilibrium probabilities `(p_active, p_passive)` for each observation.
pub fn predict(model: &UtilityModel, obs: &[Observation]) -> Result<Vec<(f64, f64)>> {
    obs.iter()
        .map(|o| {
            let (ta, tp) = o.type_indices()?;
            let fp = Game::from_model(model, &model.augment(&o.state), ta, tp).solve()?;
            Ok((fp.p_active, fp.p_passive))
        })
        .collect()
}

/// Thresholds each role at 0.5 and scores the joint outcome.
pub fn predict_and_score(model: &UtilityModel, obs: &[Observation]) -> Result<Scores> {
    let probs = predict(model, obs)?;
    let mut confusion = [[0u64; 4]; 4];
    for (o, (p, q)) in obs.iter().zip(&probs) {
        let pred = Outcome::from_choices(*p >= 0.5, *q >= 0.5);
        confusion[o.outcome.index()][pred.index()] += 1;
    }
    let pa: Vec<f64> = probs.iter().map(|x| x.0).collect();
    let pp: Vec<f64> = probs.iter().map(|x| x.1).collect();
    let oa = obs.iter().filter(|o| o.outcome.active_cooperates()).count() as u64;
    let op = obs.iter().filter(|o| o.outcome.passive_cooperates()).count() as u64;
    Ok(scores_from_confusion(
        confusion,
        RoleCooperation::from_probabilities(&pa, oa),
        RoleCooperation::from_probabilities(&pp, op),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    fn of(values: &[f64]) -> Option<Self> {
        (!values.is_empty()).then(|| MeanStd {
            mean: mean(values),
            std: if values.len() > 1 { sample_std(values) } else { 0.0 },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooperationSummary {
    /// Observed cooperation count across test sets.
    pub observed: MeanStd,
    /// Mean of the predicted expected counts.
    pub expected_mean: f64,
    /// Mean of the predicted Bernoulli-sum stdevs.
    pub stdev_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub splits: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub test_size: Vec<usize>,
    /// Outcome → metric name → mean/std across splits (splits where the
    /// metric is undefined are skipped).
    pub per_outcome: BTreeMap<String, BTreeMap<String, Option<MeanStd>>>,
    pub macro_avg: BTreeMap<String, Option<MeanStd>>,
    pub active: CooperationSummary,
    pub passive: CooperationSummary,
    pub split_scores: Vec<Scores>,
}

/// Train/test index split that keeps each interaction pair's share.
pub fn stratified_split(obs: &[Observation], train_fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut groups: BTreeMap<Pair, Vec<usize>> = BTreeMap::new();
    for (i, o) in obs.iter().enumerate() {
        groups.entry(o.pair).or_default().push(i);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for idx in groups.values_mut() {
        idx.shuffle(rng);
        let k = (train_fraction * idx.len() as f64).round() as usize;
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

pub fn cross_validate(obs: &[Observation], opts: &FitOptions, splits: usize, train_fraction: f64, seed: u64) -> Result<CrossValidation> {
    if splits == 0 || !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config("cross-validation needs splits > 0 and a train fraction in (0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split_scores = Vec::with_capacity(splits);
    for k in 0..splits {
        let (train, test) = stratified_split(obs, train_fraction, &mut rng);
        let train_obs: Vec<Observation> = train.iter().map(|&i| obs[i].clone()).collect();
        let test_obs: Vec<Observation> = test.iter().map(|&i| obs[i].clone()).collect();
        info!("cross-validation split {}/{splits}: {} train, {} test", k + 1, train.len(), test.len());
        let model = fit(&train_obs, opts)?;
        split_scores.push(predict_and_score(&model, &test_obs)?);
    }
    let collect = |f: &dyn Fn(&Scores) -> Option<f64>| -> Option<MeanStd> {
        let v: Vec<f64> = split_scores.iter().filter_map(f).collect();
        MeanStd::of(&v)
    };
    let mut per_outcome = BTreeMap::new();
    for o in Outcome::ALL {
        let key = o.as_str();
        let mut m = BTreeMap::new();
        m.insert("precision".to_string(), collect(&|s| s.per_outcome[key].precision));
        m.insert("recall".to_string(), collect(&|s| s.per_outcome[key].recall));
        m.insert("f1".to_string(), collect(&|s| s.per_outcome[key].f1));
        per_outcome.insert(key.to_string(), m);
    }
    let mut macro_avg = BTreeMap::new();
    macro_avg.insert("precision".to_string(), collect(&|s| s.macro_precision));
    macro_avg.insert("recall".to_string(), collect(&|s| s.macro_recall));
    macro_avg.insert("f1".to_string(), collect(&|s| s.macro_f1));
    let summary = |pick: &dyn Fn(&Scores) -> RoleCooperation| {
        let r: Vec<RoleCooperation> = split_scores.iter().map(pick).collect();
        let observed: Vec<f64> = r.iter().map(|x| x.observed as f64).collect();
        CooperationSummary {
            observed: MeanStd::of(&observed).expect("at least one split"),
            expected_mean: mean(&r.iter().map(|x| x.expected).collect::<Vec<_>>()),
            stdev_mean: mean(&r.iter().map(|x| x.stdev).collect::<Vec<_>>()),
        }
    };
    Ok(CrossValidation {
        splits,
        train_fraction,
        seed,
        test_size: split_scores.iter().map(|s| s.n_events).collect(),
        per_outcome,
        macro_avg,
        active: summary(&|s| s.active),
        passive: summary(&|s| s.passive),
        split_scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reported_likelihood_arithmetic() {
        let r = likelihood_ratio(-7521.2, -10542.4, 204).unwrap();
        assert!((r.lrt_stat - 6042.4).abs() < 1e-9);
        assert!((r.mcfadden - 0.2866).abs() < 5e-4);
        assert!(r.p_value < 1e-4);
        let same = likelihood_ratio(-50.0, -50.0, 204).unwrap();
        assert_eq!((same.lrt_stat, same.mcfadden), (0.0, 0.0));
    }

    #[test]
    fn worse_full_model_warns() {
        assert!(likelihood_ratio(-60.0, -50.0, 3).unwrap().warning.is_some());
    }

    #[test]
    fn hand_confusion_metrics() {
        let m = ClassMetrics::from_counts(3, 1, 2);
        assert_eq!(m.precision, Some(0.75));
        assert_eq!(m.recall, Some(0.6));
        assert!((m.f1.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(ClassMetrics::from_counts(0, 0, 0).recall, None);
    }

    #[test]
    fn bernoulli_sum_summary() {
        let r = RoleCooperation::from_probabilities(&[0.5; 100], 50);
        assert_eq!((r.expected, r.stdev), (50.0, 5.0));
    }

    #[test]
    fn perfect_confusion_scores_one() {
        let mut c = [[0u64; 4]; 4];
        for (k, row) in c.iter_mut().enumerate() {
            row[k] = 5 + k as u64;
        }
        let rc = RoleCooperation::from_probabilities(&[], 0);
        let s = scores_from_confusion(c, rc, rc);
        for m in s.per_outcome.values() {
            assert_eq!((m.precision, m.recall, m.f1), (Some(1.0), Some(1.0), Some(1.0)));
        }
        assert_eq!(s.macro_f1, Some(1.0));
    }
}
