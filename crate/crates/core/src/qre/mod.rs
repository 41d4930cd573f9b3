//! Joint estimation of role- and type-specific utilities and rationality
//! parameters under a logit quantal-response equilibrium, with validation
//! statistics and a synthetic data generator.

mod equilibrium;
mod fit;
mod model;
mod objective;
mod synth;
mod validate;

pub use equilibrium::{solve_fixed_point, FixedPointResult, Game, DAMPING, MAX_ITERATIONS, TOLERANCE};
pub use fit::{
    fit, fit_null, fit_standardizer, log_likelihood, rescale_to_max_rationality, FitOptions,
    DEFAULT_L1_WEIGHT,
};
pub use model::{
    beta_index, expected_utilities, fitted_type, lambda_index, utility, FitDiagnostics, ModelKind,
    Observation, UtilityModel, BETA_BOUND, BETA_LAYOUT, LAMBDA_MAX, LAMBDA_MIN, N_BETA, N_LAMBDA,
    N_OUTCOMES, N_PARAMS, N_SLOTS, N_TYPES, NULL_PARAMS, SCHEMA_VERSION,
};
pub use objective::{log_likelihood_at, objective, penalty, Prepared, L1_SMOOTHING, PROB_CLIP};
pub use synth::{generate_synthetic, reference_model, StateDistribution, FITTED_PAIRS};
pub use validate::{
    cross_validate, likelihood_ratio, predict, predict_and_score, scores_from_confusion,
    stratified_split, validate, vif, ClassMetrics, CooperationSummary, CrossValidation,
    LikelihoodRatio, MeanStd, RoleCooperation, Scores,
};
