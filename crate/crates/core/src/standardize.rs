//! Column-wise z-scoring with population standard deviation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub names: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    /// Fits means and population standard deviations per column.
    pub fn fit<R: AsRef<[f64]>>(rows: &[R], names: &[&str]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Data(format!(
                "standardization needs at least 2 rows, got {}",
                rows.len()
            )));
        }
        let dim = names.len();
        if let Some(bad) = rows.iter().position(|r| r.as_ref().len() != dim) {
            return Err(Error::Data(format!("row {bad} does not have {dim} columns")));
        }
        let n = rows.len() as f64;
        let mut means = vec![0.0; dim];
        for r in rows {
            for (m, v) in means.iter_mut().zip(r.as_ref()) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; dim];
        for r in rows {
            for ((acc, v), m) in vars.iter_mut().zip(r.as_ref()).zip(&means) {
                *acc += (v - m).powi(2);
            }
        }
        let mut stds = Vec::with_capacity(dim);
        for (j, v) in vars.iter().enumerate() {
            let sd = (v / n).sqrt();
            if !(sd > 1e-12 * (1.0 + means[j].abs())) || !sd.is_finite() {
                return Err(Error::ZeroVariance(names[j].to_string()));
            }
            stds.push(sd);
        }
        Ok(Standardizer {
            names: names.iter().map(|s| s.to_string()).collect(),
            means,
            stds,
        })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// `(1, z_1, .., z_d)`.
    pub fn transform_augmented(&self, row: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(row.len() + 1);
        out.push(1.0);
        out.extend(self.transform(row));
        out
    }

    pub fn inverse(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }
}

/// Fits on `rows` and returns the augmented standardized rows with the transform.
pub fn standardize<R: AsRef<[f64]>>(rows: &[R], names: &[&str]) -> Result<(Vec<Vec<f64>>, Standardizer)> {
    let st = Standardizer::fit(rows, names)?;
    let out = rows.iter().map(|r| st.transform_augmented(r.as_ref())).collect();
    Ok((out, st))
}
