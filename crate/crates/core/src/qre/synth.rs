use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::equilibrium::Game;
use super::model::{ModelKind, Observation, UtilityModel, LAMBDA_MAX, N_SLOTS, N_TYPES};
use crate::error::{Error, Result};
use crate::extract::STATE_NAMES;
use crate::standardize::Standardizer;
use crate::types::{Outcome, Pair, Role, VehicleType};

/// Multivariate normal states and interaction-pair proportions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDistribution {
    pub mean: Vec<f64>,
    /// Row-major 11x11 covariance.
    pub covariance: Vec<Vec<f64>>,
    /// Weights for HDV-HDV, HDV-AV and AV-HDV.
    pub pair_weights: [f64; 3],
}

pub const FITTED_PAIRS: [Pair; 3] = [
    Pair::new(VehicleType::Hdv, VehicleType::Hdv),
    Pair::new(VehicleType::Hdv, VehicleType::Av),
    Pair::new(VehicleType::Av, VehicleType::Hdv),
];

impl Default for StateDistribution {
    /// Loosely traffic-like scales: speeds in m/s, gaps in s.
    fn default() -> Self {
        let mean = vec![12.0, 0.5, 0.0, 2.0, 0.0, 0.5, 0.0, 1.5, 0.0, 0.5, 0.0];
        let sd = [3.0, 0.2, 0.5, 0.8, 2.0, 0.2, 0.5, 0.6, 2.0, 0.2, 0.5];
        let mut covariance = vec![vec![0.0; 11]; 11];
        for i in 0..11 {
            covariance[i][i] = sd[i] * sd[i];
        }
        // lead and lag gaps, lead and passive relative speeds
        for (i, j, rho) in [(3, 7, 0.3), (4, 8, -0.2)] {
            covariance[i][j] = rho * sd[i] * sd[j];
            covariance[j][i] = covariance[i][j];
        }
        StateDistribution {
            mean,
            covariance,
            pair_weights: [0.7, 0.22, 0.08],
        }
    }
}

impl StateDistribution {
    /// Standardization that maps this distribution to zero mean, unit variance.
    pub fn standardizer(&self) -> Standardizer {
        Standardizer {
            names: STATE_NAMES.iter().map(|s| s.to_string()).collect(),
            means: self.mean.clone(),
            stds: (0..self.mean.len()).map(|i| self.covariance[i][i].sqrt()).collect(),
        }
    }

    fn cholesky(&self) -> Result<DMatrix<f64>> {
        let n = STATE_NAMES.len();
        if self.mean.len() != n || self.covariance.len() != n || self.covariance.iter().any(|r| r.len() != n) {
            return Err(Error::Config(format!("state distribution must be {n}-dimensional")));
        }
        if self.pair_weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || self.pair_weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config("pair weights must be non-negative with a positive sum".into()));
        }
        let cov = DMatrix::from_fn(n, n, |i, j| self.covariance[i][j]);
        cov.cholesky()
            .map(|c| c.l())
            .ok_or_else(|| Error::Config("state covariance is not positive definite".into()))
    }
}

/// Draws `n` labeled observations whose outcomes follow the equilibrium
/// choice probabilities of `theta`.
pub fn generate_synthetic(theta: &UtilityModel, n: usize, dist: &StateDistribution, seed: u64) -> Result<Vec<Observation>> {
    theta.validate()?;
    let chol = dist.cholesky()?;
    let mean = DVector::from_column_slice(&dist.mean);
    let pairs = WeightedIndex::new(dist.pair_weights).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let pair = FITTED_PAIRS[pairs.sample(&mut rng)];
        let z = DVector::from_fn(STATE_NAMES.len(), |_, _| StandardNormal.sample(&mut rng));
        let x = &mean + &chol * z;
        let mut state = [0.0; 11];
        state.copy_from_slice(x.as_slice());
        let ta = pair.active_interaction().fitted_index().expect("fitted pair");
        let tp = pair.passive_interaction().fitted_index().expect("fitted pair");
        let fp = Game::from_model(theta, &theta.augment(&state), ta, tp).solve()?;
        let a = rng.random::<f64>() < fp.p_active;
        let b = rng.random::<f64>() < fp.p_passive;
        out.push(Observation {
            state,
            pair,
            outcome: Outcome::from_choices(a, b),
        });
    }
    Ok(out)
}

fn direction(seed: usize, norm: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..N_SLOTS - 1)
        .map(|j| ((seed * 31 + j * 7 + 3) as f64 * 0.731).sin())
        .collect();
    let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x * norm / len).collect()
}

/// Coupling strength of each role's choice to the other's probability.
const COUPLING: f64 = 0.4;

/// A built-in parameter set for demonstrations and recovery checks.
///
/// Rationality sits at its upper bound and the two outcome blocks that
/// enter the likelihood only through their difference are mirror images,
/// which is the representative the penalized fit selects. Slopes are laid
/// out so that the active role gains from the passive role cooperating and
/// the passive role loses from the active role cooperating, which keeps the
/// equilibrium unique in every state.
pub fn reference_model(dist: &StateDistribution) -> UtilityModel {
    let mut m = UtilityModel::zeros(ModelKind::Full, dist.standardizer(), 0.1);
    for role in Role::ALL {
        for t in 0..N_TYPES {
            let slopes = direction(role.index() * N_TYPES + t, 1.0 + 0.1 * t as f64);
            // Active: DC mirrors CC, CD is free. Passive: CD mirrors CC, DC
            // is free.
            let (mirror, single, sign) = match role {
                Role::Active => (2, 1, 1.0),
                Role::Passive => (1, 2, -1.0),
            };
            let paired_intercept = 0.1 * sign;
            let single_intercept = 2.0 * paired_intercept - sign * COUPLING;
            let mut paired = vec![paired_intercept];
            paired.extend(&slopes);
            let mut free = vec![single_intercept];
            free.extend(slopes.iter().map(|v| 2.0 * v));
            m.beta_block_mut(role, t, 0).copy_from_slice(&paired);
            let neg: Vec<f64> = paired.iter().map(|v| -v).collect();
            m.beta_block_mut(role, t, mirror).copy_from_slice(&neg);
            m.beta_block_mut(role, t, single).copy_from_slice(&free);
            m.lambda[role.index() * N_TYPES + t] = LAMBDA_MAX;
        }
    }
    m
}
