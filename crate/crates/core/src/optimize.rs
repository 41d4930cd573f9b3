//! Box-constrained limited-memory quasi-Newton minimization.
//!
//! Search directions come from the two-loop recursion restricted to the
//! variables that are not held at a bound; steps are projected onto the box
//! and accepted by a backtracking Armijo test.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Options {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when the infinity norm of the projected gradient is below this.
    pub pg_tol: f64,
    /// Stop when the relative objective decrease of an accepted step is below this.
    pub f_tol: f64,
    pub max_backtracks: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            memory: 10,
            max_iterations: 5000,
            pg_tol: 1e-6,
            f_tol: 1e-13,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub pg_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub message: String,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, l), u) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*l, *u);
    }
}

fn projected_gradient(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            if lower[i] == upper[i] || (x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0) {
                0.0
            } else {
                g[i]
            }
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimizes `f` over `lower <= x <= upper`. The callback writes the
/// gradient and returns the value; a non-finite value rejects the point.
pub fn minimize<F>(mut f: F, x0: &[f64], lower: &[f64], upper: &[f64], opts: &Options) -> Result<Minimum>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    if lower.len() != n || upper.len() != n || lower.iter().zip(upper).any(|(l, u)| l > u) {
        return Err(Error::Config("bounds do not match the parameter vector".into()));
    }
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut evaluations = 1;
    if !fx.is_finite() {
        return Err(Error::Optimizer {
            msg: "objective is not finite at the starting point".into(),
            best_objective: fx,
            grad_norm: f64::NAN,
            best_params: x,
        });
    }
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut gt = vec![0.0; n];

    for iteration in 0..opts.max_iterations {
        let pg = projected_gradient(&x, &g, lower, upper);
        let pg_norm = inf_norm(&pg);
        if pg_norm <= opts.pg_tol {
            return Ok(Minimum {
                x,
                f: fx,
                pg_norm,
                iterations: iteration,
                evaluations,
                converged: true,
                message: "projected gradient below tolerance".into(),
            });
        }
        let free: Vec<bool> = pg.iter().map(|v| *v != 0.0).collect();

        let mut attempt = 0;
        loop {
            let mut d = two_loop(&pg, &history);
            for (di, fr) in d.iter_mut().zip(&free) {
                if !fr {
                    *di = 0.0;
                }
            }
            if !(dot(&d, &g) < 0.0) {
                history.clear();
                d = pg.iter().map(|v| -v).collect();
            }
            let mut t = if history.is_empty() {
                (1.0 / dot(&pg, &pg).sqrt()).min(1.0)
            } else {
                1.0
            };
            let mut accepted = None;
            for _ in 0..opts.max_backtracks {
                let mut xt: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                project(&mut xt, lower, upper);
                let decrease: f64 = g.iter().zip(xt.iter().zip(&x)).map(|(gi, (a, b))| gi * (a - b)).sum();
                if decrease < 0.0 {
                    let ft = f(&xt, &mut gt);
                    evaluations += 1;
                    if ft.is_finite() && ft <= fx + 1e-4 * decrease {
                        accepted = Some((xt, ft));
                        break;
                    }
                }
                t *= 0.5;
            }
            match accepted {
                Some((xt, ft)) => {
                    let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
                    let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
                    let sy = dot(&s, &y);
                    if sy > f64::EPSILON * dot(&y, &y) {
                        if history.len() == opts.memory {
                            history.pop_front();
                        }
                        history.push_back((s, y, 1.0 / sy));
                    }
                    let rel = (fx - ft) / fx.abs().max(ft.abs()).max(1.0);
                    x = xt;
                    fx = ft;
                    std::mem::swap(&mut g, &mut gt);
                    if rel <= opts.f_tol {
                        let pg_norm = inf_norm(&projected_gradient(&x, &g, lower, upper));
                        return Ok(Minimum {
                            x,
                            f: fx,
                            pg_norm,
                            iterations: iteration + 1,
                            evaluations,
                            converged: true,
                            message: "relative objective decrease below tolerance".into(),
                        });
                    }
                    break;
                }
                None if attempt == 0 && !history.is_empty() => {
                    history.clear();
                    attempt += 1;
                }
                None => {
                    return Ok(Minimum {
                        x,
                        f: fx,
                        pg_norm,
                        iterations: iteration,
                        evaluations,
                        converged: true,
                        message: "line search cannot decrease the objective further".into(),
                    });
                }
            }
        }
    }
    let pg_norm = inf_norm(&projected_gradient(&x, &g, lower, upper));
    Err(Error::Optimizer {
        msg: format!("no convergence within {} iterations", opts.max_iterations),
        best_objective: fx,
        grad_norm: pg_norm,
        best_params: x,
    })
}

/// `-H g` from the stored curvature pairs.
fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}
