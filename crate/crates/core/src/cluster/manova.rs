use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManovaResult {
    pub wilks_lambda: f64,
    pub f_value: f64,
    pub p_value: f64,
    /// (numerator, denominator) degrees of freedom.
    pub df: (f64, f64),
}

/// Two-group one-way MANOVA: Wilks' lambda `det(W) / det(W + B)` with the
/// exact two-group F transform.
pub fn manova_two_group(points: &[Vec<f64>], assignment: &[usize]) -> Result<ManovaResult> {
    if points.len() != assignment.len() {
        return Err(Error::Data("points and assignment differ in length".into()));
    }
    let p = points.first().map(Vec::len).unwrap_or(0);
    if p == 0 {
        return Err(Error::Data("MANOVA needs at least one feature".into()));
    }
    let n = points.len();
    let mut counts = [0usize; 2];
    let mut sums = [vec![0.0; p], vec![0.0; p]];
    for (x, &g) in points.iter().zip(assignment) {
        if g > 1 {
            return Err(Error::Data(format!("group index {g} is not 0 or 1")));
        }
        counts[g] += 1;
        for (s, v) in sums[g].iter_mut().zip(x) {
            *s += v;
        }
    }
    if counts.iter().any(|&c| c <= p) {
        return Err(Error::Data(format!(
            "each group needs more than {p} points (sizes {counts:?})"
        )));
    }
    let means: Vec<Vec<f64>> = (0..2)
        .map(|g| sums[g].iter().map(|s| s / counts[g] as f64).collect())
        .collect();
    let grand: Vec<f64> = (0..p)
        .map(|j| (sums[0][j] + sums[1][j]) / n as f64)
        .collect();

    let mut within = DMatrix::<f64>::zeros(p, p);
    for (x, &g) in points.iter().zip(assignment) {
        for a in 0..p {
            let da = x[a] - means[g][a];
            for b in 0..p {
                within[(a, b)] += da * (x[b] - means[g][b]);
            }
        }
    }
    let mut between = DMatrix::<f64>::zeros(p, p);
    for g in 0..2 {
        for a in 0..p {
            for b in 0..p {
                between[(a, b)] += counts[g] as f64 * (means[g][a] - grand[a]) * (means[g][b] - grand[b]);
            }
        }
    }
    let total = &within + &between;

    let logdet = |m: &DMatrix<f64>| -> Option<f64> {
        let chol = m.clone().cholesky()?;
        let l = chol.l();
        let ld: f64 = (0..p).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
        ld.is_finite().then_some(ld)
    };
    let scale = (0..p).map(|i| within[(i, i)]).fold(0.0, f64::max);
    let ld_w = logdet(&within)
        .filter(|ld| *ld > (p as f64) * (scale.max(1e-300).ln() - 30.0))
        .ok_or_else(|| {
            Error::Singular("within-group SSCP matrix is singular; remove collinear features".into())
        })?;
    let ld_t = logdet(&total)
        .ok_or_else(|| Error::Singular("total SSCP matrix is singular".into()))?;
    let lambda = (ld_w - ld_t).exp().min(1.0);

    let df1 = p as f64;
    let df2 = (n - p - 1) as f64;
    let f_value = (df2 / df1) * (1.0 - lambda) / lambda;
    let p_value = if f_value <= 0.0 {
        1.0
    } else {
        FisherSnedecor::new(df1, df2)
            .map_err(|e| Error::Data(e.to_string()))?
            .sf(f_value)
    };
    Ok(ManovaResult {
        wilks_lambda: lambda,
        f_value,
        p_value: p_value.clamp(0.0, 1.0),
        df: (df1, df2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn univariate_ratio(xs: &[f64], groups: &[usize]) -> f64 {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let g0: Vec<f64> = xs.iter().zip(groups).filter(|(_, g)| **g == 0).map(|(x, _)| *x).collect();
        let g1: Vec<f64> = xs.iter().zip(groups).filter(|(_, g)| **g == 1).map(|(x, _)| *x).collect();
        let (m0, m1, m) = (mean(&g0), mean(&g1), mean(xs));
        let ssw: f64 = g0.iter().map(|x| (x - m0).powi(2)).sum::<f64>() + g1.iter().map(|x| (x - m1).powi(2)).sum::<f64>();
        let sst: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
        ssw / sst
    }

    #[test]
    fn identical_means_give_unit_lambda() {
        let pts = vec![vec![1.0, 0.0], vec![-1.0, 1.0], vec![0.0, -1.0], vec![1.0, 0.0], vec![-1.0, 1.0], vec![0.0, -1.0]];
        let r = manova_two_group(&pts, &[0, 0, 0, 1, 1, 1]).unwrap();
        assert_eq!(r.wilks_lambda, 1.0);
        assert_eq!(r.f_value, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn one_dimensional_matches_anova_ratio() {
        let xs = [1.0, 2.0, 4.0, 3.5, 6.0, 7.5, 5.0, 9.0];
        let groups = [0, 0, 0, 0, 1, 1, 1, 1];
        let pts: Vec<Vec<f64>> = xs.iter().map(|x| vec![*x]).collect();
        let r = manova_two_group(&pts, &groups).unwrap();
        assert!((r.wilks_lambda - univariate_ratio(&xs, &groups)).abs() < 1e-9);
        assert_eq!(r.df, (1.0, 6.0));
    }

    #[test]
    fn scale_invariant() {
        let pts: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![(i as f64).sin() + (i % 2) as f64, (i as f64 * 0.7).cos()])
            .collect();
        let groups: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let scaled: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|v| v * 3.0).collect()).collect();
        let a = manova_two_group(&pts, &groups).unwrap();
        let b = manova_two_group(&scaled, &groups).unwrap();
        assert!((a.wilks_lambda - b.wilks_lambda).abs() < 1e-12);
    }

    #[test]
    fn separation_lowers_lambda() {
        let base: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 * 1.3).sin(), (i as f64 * 0.4).cos()]).collect();
        let groups: Vec<usize> = (0..30).map(|i| i % 2).collect();
        let mut last = 1.0 + 1e-12;
        for shift in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let pts: Vec<Vec<f64>> = base
                .iter()
                .zip(&groups)
                .map(|(p, g)| vec![p[0] + shift * *g as f64, p[1]])
                .collect();
            let l = manova_two_group(&pts, &groups).unwrap().wilks_lambda;
            assert!(l > 0.0 && l <= 1.0);
            assert!(l < last);
            last = l;
        }
    }

    #[test]
    fn singular_within_matrix_errors() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let groups: Vec<usize> = (0..10).map(|i| i % 2).collect();
        assert!(matches!(manova_two_group(&pts, &groups), Err(Error::Singular(_))));
    }

    #[test]
    fn small_groups_rejected() {
        let pts = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 2.0], vec![3.0, 1.0]];
        assert!(manova_two_group(&pts, &[0, 0, 1, 1]).is_err());
    }
}
