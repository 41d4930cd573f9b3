use log::{debug, info};

use super::model::{
    beta_index, lambda_index, FitDiagnostics, ModelKind, Observation, UtilityModel, BETA_BOUND,
    LAMBDA_MAX, LAMBDA_MIN, N_BETA, N_OUTCOMES, N_PARAMS, N_SLOTS, N_TYPES,
};
use super::objective::{log_likelihood_at, objective, Prepared};
use crate::error::{Error, Result};
use crate::extract::STATE_NAMES;
use crate::optimize::{minimize, Minimum, Options};
use crate::standardize::Standardizer;
use crate::types::Role;

pub const DEFAULT_L1_WEIGHT: f64 = 0.1;
const MAX_ROUNDS: usize = 6;

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub l1_weight: f64,
    pub optimizer: Options,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            l1_weight: DEFAULT_L1_WEIGHT,
            optimizer: Options::default(),
        }
    }
}

pub fn fit_standardizer(obs: &[Observation]) -> Result<Standardizer> {
    let rows: Vec<&[f64]> = obs.iter().map(|o| &o.state[..]).collect();
    Standardizer::fit(&rows, &STATE_NAMES)
}

fn check_coverage(obs: &[Observation]) -> Result<()> {
    let mut seen = [[false; N_TYPES]; 2];
    for o in obs {
        let (ta, tp) = o.type_indices()?;
        seen[0][ta] = true;
        seen[1][tp] = true;
    }
    for role in Role::ALL {
        for (t, &ok) in seen[role.index()].iter().enumerate() {
            if !ok {
                return Err(Error::Data(format!(
                    "no events for the {} role with interaction type {}",
                    role.as_str(),
                    super::model::fitted_type(t).as_str()
                )));
            }
        }
    }
    Ok(())
}

fn full_bounds() -> (Vec<f64>, Vec<f64>) {
    let mut lower = vec![-BETA_BOUND; N_BETA];
    let mut upper = vec![BETA_BOUND; N_BETA];
    lower.extend([LAMBDA_MIN; 6]);
    upper.extend([LAMBDA_MAX; 6]);
    (lower, upper)
}

fn null_bounds() -> (Vec<f64>, Vec<f64>) {
    let mut lower = vec![0.0; N_PARAMS];
    let mut upper = vec![0.0; N_PARAMS];
    for i in 0..N_BETA {
        if i % N_SLOTS == 0 {
            lower[i] = -BETA_BOUND;
            upper[i] = BETA_BOUND;
        }
    }
    for i in N_BETA..N_PARAMS {
        lower[i] = 1.0;
        upper[i] = 1.0;
    }
    (lower, upper)
}

fn initial_params() -> Vec<f64> {
    let mut x = vec![0.0; N_BETA];
    x.extend([1.0; 6]);
    x
}

/// The likelihood depends on each (role, type) block only through
/// `lambda * beta`, so moving lambda to its upper bound while shrinking the
/// block by the same factor leaves the likelihood unchanged and never
/// increases the penalty.
pub fn rescale_to_max_rationality(x: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    for role in Role::ALL {
        for t in 0..N_TYPES {
            let li = lambda_index(role, t);
            let factor = x[li] / LAMBDA_MAX;
            out[li] = LAMBDA_MAX;
            for o in 0..N_OUTCOMES {
                let k = beta_index(role, t, o, 0);
                for v in &mut out[k..k + N_SLOTS] {
                    *v *= factor;
                }
            }
        }
    }
    out
}

struct Run {
    min: Minimum,
    iterations: usize,
    evaluations: usize,
    rounds: usize,
}

fn run_optimizer(prep: &Prepared, x0: Vec<f64>, l1: f64, lower: &[f64], upper: &[f64], opts: &Options, rescale: bool) -> Result<Run> {
    let mut last_err: Option<Error> = None;
    let mut eval = |x: &[f64], g: &mut [f64]| -> f64 {
        match objective(prep, x, l1) {
            Ok((j, _, grad)) => {
                for (gi, v) in g.iter_mut().zip(grad) {
                    *gi = -v;
                }
                -j
            }
            Err(e) => {
                last_err = Some(e);
                f64::INFINITY
            }
        }
    };
    let mut x = x0;
    let mut iterations = 0;
    let mut evaluations = 0;
    let mut rounds = 0;
    loop {
        rounds += 1;
        let min = match minimize(&mut eval, &x, lower, upper, opts) {
            Ok(m) => m,
            Err(Error::Optimizer { msg, best_objective, grad_norm, best_params }) => {
                let msg = match last_err.take() {
                    Some(e) => format!("{msg}; last objective error: {e}"),
                    None => msg,
                };
                return Err(Error::Optimizer {
                    msg,
                    best_objective: -best_objective,
                    grad_norm,
                    best_params,
                });
            }
            Err(e) => return Err(e),
        };
        iterations += min.iterations;
        evaluations += min.evaluations;
        debug!("round {rounds}: J = {:.6}, |pg| = {:.3e}, {}", -min.f, min.pg_norm, min.message);
        if !rescale || rounds >= MAX_ROUNDS {
            return Ok(Run { min, iterations, evaluations, rounds });
        }
        let moved = rescale_to_max_rationality(&min.x);
        let mut g = vec![0.0; N_PARAMS];
        let f_moved = eval(&moved, &mut g);
        evaluations += 1;
        if !(f_moved < min.f - 1e-9 * min.f.abs().max(1.0)) {
            return Ok(Run { min, iterations, evaluations, rounds });
        }
        x = moved;
    }
}

fn finish(kind: ModelKind, standardizer: Standardizer, l1: f64, prep: &Prepared, run: Run) -> Result<UtilityModel> {
    let mut model = UtilityModel::zeros(kind, standardizer, l1);
    model.set_params(&run.min.x);
    let (ll, _) = log_likelihood_at(prep, &run.min.x, false)?;
    model.diagnostics = Some(FitDiagnostics {
        converged: run.min.converged,
        message: run.min.message,
        iterations: run.iterations,
        evaluations: run.evaluations,
        rounds: run.rounds,
        objective: -run.min.f,
        log_likelihood: ll,
        projected_grad_norm: run.min.pg_norm,
        n_events: prep.len(),
    });
    model.validate()?;
    Ok(model)
}

/// L1-penalized maximum likelihood over all 216 utility coefficients and
/// six rationality parameters.
pub fn fit(obs: &[Observation], opts: &FitOptions) -> Result<UtilityModel> {
    if !(opts.l1_weight >= 0.0 && opts.l1_weight.is_finite()) {
        return Err(Error::Config("l1_weight must be finite and non-negative".into()));
    }
    check_coverage(obs)?;
    let standardizer = fit_standardizer(obs)?;
    let prep = Prepared::new(obs, &standardizer)?;
    let (lower, upper) = full_bounds();
    info!("fitting full model on {} events", prep.len());
    let run = run_optimizer(&prep, initial_params(), opts.l1_weight, &lower, &upper, &opts.optimizer, opts.l1_weight > 0.0)?;
    finish(ModelKind::Full, standardizer, opts.l1_weight, &prep, run)
}

/// Intercept-only model with unit rationality and no penalty.
pub fn fit_null(obs: &[Observation], opts: &FitOptions) -> Result<UtilityModel> {
    check_coverage(obs)?;
    let standardizer = fit_standardizer(obs)?;
    let prep = Prepared::new(obs, &standardizer)?;
    let (lower, upper) = null_bounds();
    info!("fitting null model on {} events", prep.len());
    let run = run_optimizer(&prep, initial_params(), 0.0, &lower, &upper, &opts.optimizer, false)?;
    finish(ModelKind::Null, standardizer, 0.0, &prep, run)
}

/// Unpenalized log-likelihood of `model` on `obs`, using the model's own
/// standardization.
pub fn log_likelihood(model: &UtilityModel, obs: &[Observation]) -> Result<f64> {
    let prep = Prepared::new(obs, &model.standardizer)?;
    Ok(log_likelihood_at(&prep, &model.params(), false)?.0)
}
