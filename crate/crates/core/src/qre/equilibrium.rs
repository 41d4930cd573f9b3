use serde::{Deserialize, Serialize};

use super::model::{expected_utilities, UtilityModel};
use crate::error::{Error, Result};
use crate::numeric::sigmoid;
use crate::types::Role;

pub const DAMPING: f64 = 0.5;
pub const TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub p_active: f64,
    pub p_passive: f64,
    /// Largest change under one undamped update at the returned point.
    pub residual: f64,
    pub iterations: usize,
    /// Whether the bracketing fallback produced the result.
    pub bracketed: bool,
}

/// The two utility triples and rationality parameters of one event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Game {
    /// Active `(U_CC, U_CD, U_DC)`.
    pub active: [f64; 3],
    /// Passive `(U_CC, U_CD, U_DC)`.
    pub passive: [f64; 3],
    pub lambda_active: f64,
    pub lambda_passive: f64,
}

impl Game {
    pub fn from_model(model: &UtilityModel, s_tilde: &[f64], ta: usize, tp: usize) -> Self {
        Game {
            active: model.utilities(Role::Active, ta, s_tilde),
            passive: model.utilities(Role::Passive, tp, s_tilde),
            lambda_active: model.lambda(Role::Active, ta),
            lambda_passive: model.lambda(Role::Passive, tp),
        }
    }

    /// Undamped best-response-in-probability map.
    pub fn update(&self, p: f64, q: f64) -> (f64, f64) {
        (self.respond_active(q), self.respond_passive(p))
    }

    fn respond_active(&self, q: f64) -> f64 {
        let (uc, ud) = expected_utilities(Role::Active, self.active, q);
        sigmoid(self.lambda_active * (uc - ud))
    }

    fn respond_passive(&self, p: f64) -> f64 {
        let (uc, ud) = expected_utilities(Role::Passive, self.passive, p);
        sigmoid(self.lambda_passive * (uc - ud))
    }

    fn residual(&self, p: f64, q: f64) -> f64 {
        let (p1, q1) = self.update(p, q);
        (p1 - p).abs().max((q1 - q).abs())
    }

    /// Damped iteration from (0.5, 0.5); falls back to bisection on the
    /// composed one-dimensional map when the iteration cycles.
    pub fn solve(&self) -> Result<FixedPointResult> {
        let (mut p, mut q) = (0.5, 0.5);
        let mut residual = f64::INFINITY;
        for it in 1..=MAX_ITERATIONS {
            let (p1, q1) = self.update(p, q);
            residual = (p1 - p).abs().max((q1 - q).abs());
            if residual < TOLERANCE {
                return Ok(FixedPointResult {
                    p_active: p,
                    p_passive: q,
                    residual,
                    iterations: it,
                    bracketed: false,
                });
            }
            p += DAMPING * (p1 - p);
            q += DAMPING * (q1 - q);
        }
        self.bisect().ok_or(Error::NoConvergence {
            iterations: MAX_ITERATIONS,
            residual,
        })
    }

    /// Root of `h(p) = p - respond_active(respond_passive(p))`, which is
    /// negative at 0 and positive at 1.
    fn bisect(&self) -> Option<FixedPointResult> {
        let h = |p: f64| p - self.respond_active(self.respond_passive(p));
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut iterations = MAX_ITERATIONS;
        while hi - lo > f64::EPSILON * hi.max(1e-300) && iterations < MAX_ITERATIONS + 1100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if h(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            iterations += 1;
        }
        let mut best: Option<FixedPointResult> = None;
        for p0 in [lo, hi, 0.5 * (lo + hi)] {
            let q = self.respond_passive(p0);
            let p = self.respond_active(q);
            let residual = self.residual(p, q);
            if best.is_none_or(|b| residual < b.residual) {
                best = Some(FixedPointResult {
                    p_active: p,
                    p_passive: q,
                    residual,
                    iterations,
                    bracketed: true,
                });
            }
        }
        best.filter(|b| b.residual < TOLERANCE)
    }
}

pub fn solve_fixed_point(model: &UtilityModel, s_tilde: &[f64], ta: usize, tp: usize) -> Result<FixedPointResult> {
    Game::from_model(model, s_tilde, ta, tp).solve()
}
