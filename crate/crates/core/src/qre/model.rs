use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::STATE_NAMES;
use crate::io::EventRow;
use crate::standardize::Standardizer;
use crate::types::{InteractionType, Outcome, Pair, Role};

pub const SCHEMA_VERSION: u32 = 1;
/// Intercept plus eleven standardized state variables.
pub const N_SLOTS: usize = 12;
pub const N_TYPES: usize = 3;
/// CC, CD, DC; DD is the zero baseline.
pub const N_OUTCOMES: usize = 3;
pub const N_BETA: usize = 2 * N_TYPES * N_OUTCOMES * N_SLOTS;
pub const N_LAMBDA: usize = 2 * N_TYPES;
pub const N_PARAMS: usize = N_BETA + N_LAMBDA;
pub const NULL_PARAMS: usize = 2 * N_TYPES * N_OUTCOMES;

pub const BETA_BOUND: f64 = 20.0;
pub const LAMBDA_MIN: f64 = 0.01;
pub const LAMBDA_MAX: f64 = 10.0;

pub const BETA_LAYOUT: &str =
    "beta[role][type][outcome][slot]; role = active, passive; type = AV_vs_HDV, HDV_vs_AV, HDV_vs_HDV; \
     outcome = CC, CD, DC; slot 0 = intercept, slots 1..=11 = standardized s1..s11";

pub fn beta_index(role: Role, t: usize, outcome: usize, slot: usize) -> usize {
    ((role.index() * N_TYPES + t) * N_OUTCOMES + outcome) * N_SLOTS + slot
}

pub fn lambda_index(role: Role, t: usize) -> usize {
    N_BETA + role.index() * N_TYPES + t
}

/// One labeled event as seen by the estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub state: [f64; 11],
    pub pair: Pair,
    pub outcome: Outcome,
}

impl Observation {
    /// Fitted type indices for the active and passive vehicle.
    pub fn type_indices(&self) -> Result<(usize, usize)> {
        let ta = self.pair.active_interaction().fitted_index();
        let tp = self.pair.passive_interaction().fitted_index();
        match (ta, tp) {
            (Some(a), Some(p)) => Ok((a, p)),
            _ => Err(Error::Data(format!(
                "pair {} has no fitted utility coefficients",
                self.pair
            ))),
        }
    }

    pub fn from_rows(rows: &[EventRow]) -> Result<Vec<Observation>> {
        rows.iter()
            .map(|r| {
                let outcome = r.outcome.ok_or_else(|| {
                    Error::Data(format!("event {} has no outcome label", r.event.event_id))
                })?;
                if r.event.state.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Data(format!(
                        "event {} has a non-finite state variable",
                        r.event.event_id
                    )));
                }
                Ok(Observation {
                    state: r.event.state,
                    pair: Pair::new(r.event.active_type, r.event.passive_type),
                    outcome,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Full,
    /// Intercepts only, rationality fixed at 1, no penalty.
    Null,
}

impl ModelKind {
    pub fn free_params(self) -> usize {
        match self {
            ModelKind::Full => N_PARAMS,
            ModelKind::Null => NULL_PARAMS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub converged: bool,
    pub message: String,
    pub iterations: usize,
    pub evaluations: usize,
    /// Restarts after rescaling the rationality parameters.
    pub rounds: usize,
    pub objective: f64,
    pub log_likelihood: f64,
    pub projected_grad_norm: f64,
    pub n_events: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilityModel {
    pub kind: ModelKind,
    /// Flat, indexed by [`beta_index`].
    pub beta: Vec<f64>,
    /// Flat, indexed by `role * 3 + type`.
    pub lambda: Vec<f64>,
    pub l1_weight: f64,
    pub standardizer: Standardizer,
    pub diagnostics: Option<FitDiagnostics>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    kind: ModelKind,
    layout: String,
    l1_weight: f64,
    lambda: Vec<Vec<f64>>,
    beta: Vec<Vec<Vec<Vec<f64>>>>,
    standardization: Standardizer,
    #[serde(default)]
    diagnostics: Option<FitDiagnostics>,
}

impl UtilityModel {
    pub fn zeros(kind: ModelKind, standardizer: Standardizer, l1_weight: f64) -> Self {
        UtilityModel {
            kind,
            beta: vec![0.0; N_BETA],
            lambda: vec![1.0; N_LAMBDA],
            l1_weight,
            standardizer,
            diagnostics: None,
        }
    }

    pub fn beta_block(&self, role: Role, t: usize, outcome: usize) -> &[f64] {
        let i = beta_index(role, t, outcome, 0);
        &self.beta[i..i + N_SLOTS]
    }

    pub fn beta_block_mut(&mut self, role: Role, t: usize, outcome: usize) -> &mut [f64] {
        let i = beta_index(role, t, outcome, 0);
        &mut self.beta[i..i + N_SLOTS]
    }

    pub fn lambda(&self, role: Role, t: usize) -> f64 {
        self.lambda[role.index() * N_TYPES + t]
    }

    /// `(U_CC, U_CD, U_DC)` for a role and fitted type at an augmented state.
    pub fn utilities(&self, role: Role, t: usize, s_tilde: &[f64]) -> [f64; 3] {
        [0, 1, 2].map(|o| dot(self.beta_block(role, t, o), s_tilde))
    }

    pub fn augment(&self, state: &[f64]) -> Vec<f64> {
        self.standardizer.transform_augmented(state)
    }

    pub fn params(&self) -> Vec<f64> {
        let mut x = self.beta.clone();
        x.extend_from_slice(&self.lambda);
        x
    }

    pub fn set_params(&mut self, x: &[f64]) {
        self.beta.copy_from_slice(&x[..N_BETA]);
        self.lambda.copy_from_slice(&x[N_BETA..]);
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.len() != N_BETA || self.lambda.len() != N_LAMBDA {
            return Err(Error::ModelInvalid(format!(
                "expected {N_BETA} beta and {N_LAMBDA} lambda entries"
            )));
        }
        if let Some(i) = self.beta.iter().position(|b| !(b.abs() <= BETA_BOUND)) {
            return Err(Error::ModelInvalid(format!(
                "beta[{i}] = {} outside [-{BETA_BOUND}, {BETA_BOUND}]",
                self.beta[i]
            )));
        }
        if let Some(i) = self
            .lambda
            .iter()
            .position(|l| !(*l >= LAMBDA_MIN && *l <= LAMBDA_MAX))
        {
            return Err(Error::ModelInvalid(format!(
                "lambda[{i}] = {} outside [{LAMBDA_MIN}, {LAMBDA_MAX}]",
                self.lambda[i]
            )));
        }
        if !(self.l1_weight >= 0.0 && self.l1_weight.is_finite()) {
            return Err(Error::ModelInvalid("l1_weight must be finite and non-negative".into()));
        }
        let st = &self.standardizer;
        if st.means.len() != STATE_NAMES.len() || st.stds.len() != STATE_NAMES.len() {
            return Err(Error::ModelInvalid("standardization must cover 11 state variables".into()));
        }
        if st.stds.iter().any(|s| !(*s > 0.0 && s.is_finite())) || st.means.iter().any(|m| !m.is_finite()) {
            return Err(Error::ModelInvalid("standardization has invalid means or stds".into()));
        }
        if self.kind == ModelKind::Null {
            let slopes = (0..N_BETA).filter(|i| i % N_SLOTS != 0).any(|i| self.beta[i] != 0.0);
            if slopes || self.lambda.iter().any(|l| *l != 1.0) {
                return Err(Error::ModelInvalid(
                    "null model may only carry intercepts with unit rationality".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let lambda = (0..2).map(|r| self.lambda[r * N_TYPES..(r + 1) * N_TYPES].to_vec()).collect();
        let beta = Role::ALL
            .iter()
            .map(|&role| {
                (0..N_TYPES)
                    .map(|t| (0..N_OUTCOMES).map(|o| self.beta_block(role, t, o).to_vec()).collect())
                    .collect()
            })
            .collect();
        let file = ModelFile {
            schema_version: SCHEMA_VERSION,
            kind: self.kind,
            layout: BETA_LAYOUT.to_string(),
            l1_weight: self.l1_weight,
            lambda,
            beta,
            standardization: self.standardizer.clone(),
            diagnostics: self.diagnostics.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value
            .get("schema_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::ModelInvalid("missing schema_version".into()))?;
        if found != SCHEMA_VERSION as u64 {
            return Err(Error::SchemaVersion {
                found: found.min(u32::MAX as u64) as u32,
                expected: SCHEMA_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_value(value)?;
        let shape_ok = file.lambda.len() == 2
            && file.lambda.iter().all(|r| r.len() == N_TYPES)
            && file.beta.len() == 2
            && file.beta.iter().all(|r| {
                r.len() == N_TYPES
                    && r.iter().all(|t| t.len() == N_OUTCOMES && t.iter().all(|o| o.len() == N_SLOTS))
            });
        if !shape_ok {
            return Err(Error::ModelInvalid(format!(
                "beta must be 2x{N_TYPES}x{N_OUTCOMES}x{N_SLOTS} and lambda 2x{N_TYPES}"
            )));
        }
        let model = UtilityModel {
            kind: file.kind,
            beta: file.beta.into_iter().flatten().flatten().flatten().collect(),
            lambda: file.lambda.into_iter().flatten().collect(),
            l1_weight: file.l1_weight,
            standardizer: file.standardization,
            diagnostics: file.diagnostics,
        };
        model.validate()?;
        Ok(model)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Inner product of a 12-slot coefficient vector with an augmented state.
pub fn utility(beta: &[f64], s_tilde: &[f64]) -> Result<f64> {
    if beta.len() != N_SLOTS || s_tilde.len() != N_SLOTS {
        return Err(Error::Data(format!(
            "utility needs two vectors of length {N_SLOTS}, got {} and {}",
            beta.len(),
            s_tilde.len()
        )));
    }
    Ok(dot(beta, s_tilde))
}

/// `(U^C, U^D)` for `role` given utilities `(U_CC, U_CD, U_DC)` and the
/// opponent's cooperation probability.
pub fn expected_utilities(role: Role, u: [f64; 3], p_other: f64) -> (f64, f64) {
    let [cc, cd, dc] = u;
    match role {
        Role::Active => (p_other * cc + (1.0 - p_other) * cd, p_other * dc),
        Role::Passive => (p_other * cc + (1.0 - p_other) * dc, p_other * cd),
    }
}

/// The vehicle type seen in each fitted slot, for reporting.
pub fn fitted_type(t: usize) -> InteractionType {
    InteractionType::FITTED[t]
}
