use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 300;
pub const SHIFT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
    /// Restarts that ended with an empty cluster and were discarded.
    pub degenerate_restarts: usize,
}

/// Trace of a single Lloyd run.
#[derive(Debug, Clone)]
pub struct LloydRun {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<f64>,
    pub empty_cluster: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn nearest(centroids: &[Vec<f64>], p: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, p);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// k-means++ seeding.
fn seed_centroids<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    while centroids.len() < k {
        let d2: Vec<f64> = points.iter().map(|p| nearest(&centroids, p).1).collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = points.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if target < *d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            idx
        } else {
            rng.random_range(0..points.len())
        };
        centroids.push(points[next].clone());
    }
    centroids
}

/// Lloyd iterations from the given centroids until the largest centroid
/// shift drops below [`SHIFT_TOL`] or [`MAX_ITERATIONS`] is reached.
pub fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> LloydRun {
    let k = centroids.len();
    let dim = points[0].len();
    let mut assignment = vec![0; points.len()];
    let mut history = Vec::new();
    let mut empty_cluster = false;
    for _ in 0..MAX_ITERATIONS {
        let mut inertia = 0.0;
        for (a, p) in assignment.iter_mut().zip(points) {
            let (j, d) = nearest(&centroids, p);
            *a = j;
            inertia += d;
        }
        history.push(inertia);
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assignment.iter().zip(points) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        if counts.contains(&0) {
            empty_cluster = true;
            break;
        }
        let mut shift: f64 = 0.0;
        for j in 0..k {
            let new: Vec<f64> = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            shift = shift.max(sq_dist(&new, &centroids[j]).sqrt());
            centroids[j] = new;
        }
        if shift < SHIFT_TOL {
            break;
        }
    }
    let mut final_inertia = 0.0;
    for (a, p) in assignment.iter_mut().zip(points) {
        let (j, d) = nearest(&centroids, p);
        *a = j;
        final_inertia += d;
    }
    if !empty_cluster {
        history.push(final_inertia);
        let mut counts = vec![0usize; k];
        assignment.iter().for_each(|&a| counts[a] += 1);
        empty_cluster = counts.contains(&0);
    }
    LloydRun {
        centroids,
        assignment,
        inertia_history: history,
        empty_cluster,
    }
}

/// Best-of-`restarts` k-means with k-means++ seeding; deterministic per seed.
pub fn kmeans_fit(points: &[Vec<f64>], k: usize, seed: u64, restarts: usize) -> Result<KMeansFit> {
    if k == 0 || restarts == 0 {
        return Err(Error::Clustering("k and restarts must be positive".into()));
    }
    let dim = points.first().map(Vec::len).unwrap_or(0);
    if points.iter().any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite())) {
        return Err(Error::Clustering("points must be finite and of equal dimension".into()));
    }
    let mut distinct: Vec<&Vec<f64>> = Vec::new();
    for p in points {
        if !distinct.contains(&p) {
            distinct.push(p);
            if distinct.len() >= k {
                break;
            }
        }
    }
    if distinct.len() < k {
        return Err(Error::Clustering(format!(
            "need at least {k} distinct points, found {}",
            distinct.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansFit> = None;
    let mut degenerate = 0;
    for _ in 0..restarts {
        let init = seed_centroids(points, k, &mut rng);
        let run = lloyd(points, init);
        if run.empty_cluster {
            degenerate += 1;
            continue;
        }
        let inertia = *run.inertia_history.last().expect("at least one iteration");
        if best.as_ref().is_none_or(|b| inertia < b.inertia) {
            best = Some(KMeansFit {
                centroids: run.centroids,
                assignment: run.assignment,
                inertia,
                iterations: run.inertia_history.len(),
                degenerate_restarts: 0,
            });
        }
    }
    let mut fit = best.ok_or_else(|| Error::Clustering("every restart produced an empty cluster".into()))?;
    fit.degenerate_restarts = degenerate;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, 1.0).unwrap();
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for i in 0..200 {
            let g = i % 2;
            let off = if g == 0 { 0.0 } else { 10.0 };
            pts.push(vec![off + n.sample(&mut rng), n.sample(&mut rng), off + n.sample(&mut rng)]);
            truth.push(g);
        }
        (pts, truth)
    }

    #[test]
    fn separated_blobs_partition_exactly() {
        let (pts, truth) = blobs(1);
        let fit = kmeans_fit(&pts, 2, 7, 10).unwrap();
        // Brute-force label check up to a permutation.
        let same = fit.assignment.iter().zip(&truth).filter(|(a, t)| *a == *t).count();
        assert!(same == pts.len() || same == 0);
    }

    #[test]
    fn identical_points_are_degenerate() {
        let pts = vec![vec![1.0, 2.0]; 10];
        assert!(matches!(kmeans_fit(&pts, 2, 0, 10), Err(Error::Clustering(_))));
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let (pts, _) = blobs(2);
        assert_eq!(kmeans_fit(&pts, 2, 11, 10).unwrap(), kmeans_fit(&pts, 2, 11, 10).unwrap());
    }

    #[test]
    fn inertia_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec<f64>> = (0..300)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>() * 3.0])
            .collect();
        for s in 0..10 {
            let mut r = ChaCha8Rng::seed_from_u64(s);
            let run = lloyd(&pts, seed_centroids(&pts, 2, &mut r));
            for w in run.inertia_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{:?}", run.inertia_history);
            }
        }
    }
}
