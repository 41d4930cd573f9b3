//! Penalized log-likelihood with its analytic gradient.

use rayon::prelude::*;

use super::equilibrium::Game;
use super::model::{beta_index, dot, lambda_index, Observation, N_BETA, N_PARAMS, N_SLOTS};
use crate::error::Result;
use crate::standardize::Standardizer;
use crate::types::Role;

pub const PROB_CLIP: f64 = 1e-12;
pub const L1_SMOOTHING: f64 = 1e-8;
const CHUNK: usize = 1024;

/// Observations in the layout the objective walks over.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub s_tilde: Vec<[f64; N_SLOTS]>,
    pub ta: Vec<usize>,
    pub tp: Vec<usize>,
    pub a: Vec<bool>,
    pub b: Vec<bool>,
}

impl Prepared {
    pub fn new(obs: &[Observation], standardizer: &Standardizer) -> Result<Self> {
        let mut prep = Prepared {
            s_tilde: Vec::with_capacity(obs.len()),
            ta: Vec::with_capacity(obs.len()),
            tp: Vec::with_capacity(obs.len()),
            a: Vec::with_capacity(obs.len()),
            b: Vec::with_capacity(obs.len()),
        };
        for o in obs {
            let (ta, tp) = o.type_indices()?;
            let aug = standardizer.transform_augmented(&o.state);
            let mut s = [0.0; N_SLOTS];
            s.copy_from_slice(&aug);
            prep.s_tilde.push(s);
            prep.ta.push(ta);
            prep.tp.push(tp);
            prep.a.push(o.outcome.active_cooperates());
            prep.b.push(o.outcome.passive_cooperates());
        }
        Ok(prep)
    }

    pub fn len(&self) -> usize {
        self.s_tilde.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_tilde.is_empty()
    }

    fn game(&self, x: &[f64], i: usize) -> Game {
        let s = &self.s_tilde[i];
        let block = |role, t, o| {
            let k = beta_index(role, t, o, 0);
            dot(&x[k..k + N_SLOTS], s)
        };
        let (ta, tp) = (self.ta[i], self.tp[i]);
        Game {
            active: [0, 1, 2].map(|o| block(Role::Active, ta, o)),
            passive: [0, 1, 2].map(|o| block(Role::Passive, tp, o)),
            lambda_active: x[lambda_index(Role::Active, ta)],
            lambda_passive: x[lambda_index(Role::Passive, tp)],
        }
    }
}

fn log_prob(y: bool, p: f64) -> (f64, bool) {
    let clipped = !(PROB_CLIP..=1.0 - PROB_CLIP).contains(&p);
    let pc = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
    (if y { pc.ln() } else { (1.0 - pc).ln() }, clipped)
}

/// Adds one event's log-likelihood gradient into `grad`.
fn accumulate_gradient(prep: &Prepared, i: usize, game: &Game, p: f64, q: f64, clip: (bool, bool), grad: &mut [f64]) {
    let s = &prep.s_tilde[i];
    let (ta, tp) = (prep.ta[i], prep.tp[i]);
    let [acc, acd, adc] = game.active;
    let [bcc, bcd, bdc] = game.passive;
    let (la, lp) = (game.lambda_active, game.lambda_passive);
    let ka = acc - acd - adc;
    let kp = bcc - bdc - bcd;
    let delta_a = acd + q * ka;
    let delta_p = bdc + p * kp;
    let (sp, sq) = (p * (1.0 - p), q * (1.0 - q));
    // d loglik / d logit, zero where the probability was clipped.
    let ga = if clip.0 { 0.0 } else { f64::from(u8::from(prep.a[i])) - p };
    let gb = if clip.1 { 0.0 } else { f64::from(u8::from(prep.b[i])) - q };
    let mut det = 1.0 - (sp * la * ka) * (sq * lp * kp);
    if det.abs() < 1e-12 {
        det = 1e-12f64.copysign(det);
    }
    let wu = (ga + gb * lp * kp * sp) / det;
    let wv = (ga * la * ka * sq + gb) / det;

    let coef_a = [la * q, la * (1.0 - q), -la * q];
    for (o, c) in coef_a.iter().enumerate() {
        let k = beta_index(Role::Active, ta, o, 0);
        let w = wu * c;
        for j in 0..N_SLOTS {
            grad[k + j] += w * s[j];
        }
    }
    grad[lambda_index(Role::Active, ta)] += wu * delta_a;

    // Passive outcome order is CC, CD, DC.
    let coef_p = [lp * p, -lp * p, lp * (1.0 - p)];
    for (o, c) in coef_p.iter().enumerate() {
        let k = beta_index(Role::Passive, tp, o, 0);
        let w = wv * c;
        for j in 0..N_SLOTS {
            grad[k + j] += w * s[j];
        }
    }
    grad[lambda_index(Role::Passive, tp)] += wv * delta_p;
}

/// Unpenalized log-likelihood and optionally its gradient.
pub fn log_likelihood_at(prep: &Prepared, x: &[f64], want_grad: bool) -> Result<(f64, Vec<f64>)> {
    let starts: Vec<usize> = (0..prep.len()).step_by(CHUNK).collect();
    let parts: Vec<(f64, Vec<f64>)> = starts
        .into_par_iter()
        .map(|start| -> Result<(f64, Vec<f64>)> {
            let end = (start + CHUNK).min(prep.len());
            let mut ll = 0.0;
            let mut grad = if want_grad { vec![0.0; N_PARAMS] } else { Vec::new() };
            for i in start..end {
                let game = prep.game(x, i);
                let fp = game.solve()?;
                let (p, q) = (fp.p_active, fp.p_passive);
                let (la, ca) = log_prob(prep.a[i], p);
                let (lb, cb) = log_prob(prep.b[i], q);
                ll += la + lb;
                if want_grad {
                    accumulate_gradient(prep, i, &game, p, q, (ca, cb), &mut grad);
                }
            }
            Ok((ll, grad))
        })
        .collect::<Result<_>>()?;
    let mut ll = 0.0;
    let mut grad = if want_grad { vec![0.0; N_PARAMS] } else { Vec::new() };
    for (l, g) in parts {
        ll += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    Ok((ll, grad))
}

pub fn penalty(x: &[f64], l1_weight: f64) -> f64 {
    if l1_weight == 0.0 {
        return 0.0;
    }
    l1_weight * x[..N_BETA].iter().map(|b| (b * b + L1_SMOOTHING).sqrt()).sum::<f64>()
}

/// Penalized objective `J = LL - penalty` and its gradient.
pub fn objective(prep: &Prepared, x: &[f64], l1_weight: f64) -> Result<(f64, f64, Vec<f64>)> {
    let (ll, mut grad) = log_likelihood_at(prep, x, true)?;
    if l1_weight > 0.0 {
        for (g, b) in grad[..N_BETA].iter_mut().zip(&x[..N_BETA]) {
            *g -= l1_weight * b / (b * b + L1_SMOOTHING).sqrt();
        }
    }
    Ok((ll - penalty(x, l1_weight), ll, grad))
}
