//! Limited-memory BFGS with Armijo backtracking and an optional projection.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::math::{abs, dot, inf_norm, sqrt};

const MEMORY: usize = 8;
const ARMIJO_SLOPE: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
// Consecutive iterations below the relative-decrease threshold before stopping,
// counted only once the gradient has not reached a new minimum for GRAD_PATIENCE steps.
const STALL_LIMIT: usize = 5;
// Energy differences this small relative to |f| are treated as roundoff; the trial
// step is then judged by its directional derivative instead.
const GRAD_PATIENCE: usize = 25;
const MAX_RESTARTS: usize = 3;
const ROUNDOFF: f64 = 1e-13;
const APPROX_SLOPE: f64 = 0.8;

pub(crate) trait Objective {
    /// Value at `x`, gradient written to `g`.
    fn eval(&mut self, x: &[f64], g: &mut [f64]) -> Result<f64>;

    /// Maps a trial point back to the feasible set.
    fn project(&self, _x: &mut [f64]) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Stop {
    Gradient,
    Stalled,
    LineSearch,
    MaxIters,
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub iterations: usize,
    pub trace: Vec<f64>,
    pub stop: Stop,
}

pub(crate) struct Settings {
    pub tol_grad: f64,
    pub tol_energy: f64,
    pub max_iters: usize,
}

/// Minimizes `obj` from `x` in place.
pub(crate) fn minimize(obj: &mut impl Objective, x: &mut Vec<f64>, cfg: &Settings) -> Result<Outcome> {
    let n = x.len();
    obj.project(x);
    let mut g = vec![0.0; n];
    let mut f = obj.eval(x, &mut g)?;
    let mut trace = vec![f];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut alpha_buf = [0.0; MEMORY];
    let mut stalled = 0;
    let mut iterations = 0;
    let mut best_grad = f64::INFINITY;
    let mut since_best = 0;
    let mut restarts = 0;

    let stop = loop {
        let gi = inf_norm(&g);
        if gi <= cfg.tol_grad {
            break Stop::Gradient;
        }
        if iterations >= cfg.max_iters {
            break Stop::MaxIters;
        }

        // Two-loop recursion.
        dir.iter_mut().zip(&g).for_each(|(d, gv)| *d = -gv);
        for (k, (s, y, rho)) in history.iter().enumerate().rev() {
            let a = rho * dot(s, &dir);
            alpha_buf[k] = a;
            dir.iter_mut().zip(y).for_each(|(d, yv)| *d -= a * yv);
        }
        let gamma = match history.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0 / gi,
        };
        dir.iter_mut().for_each(|d| *d *= gamma);
        for (k, (s, y, rho)) in history.iter().enumerate() {
            let b = rho * dot(y, &dir);
            let a = alpha_buf[k];
            dir.iter_mut().zip(s).for_each(|(d, sv)| *d += (a - b) * sv);
        }
        if !(dot(&dir, &g) < 0.0) {
            history.clear();
            dir.iter_mut().zip(&g).for_each(|(d, gv)| *d = -gv / gi);
        }

        let mut accepted = None;
        let mut step = 1.0;
        for _ in 0..MAX_BACKTRACKS {
            trial.iter_mut().zip(x.iter()).zip(&dir).for_each(|((t, xv), d)| *t = xv + step * d);
            obj.project(&mut trial);
            let moved: f64 = g.iter().zip(&trial).zip(x.iter()).map(|((gv, t), xv)| gv * (t - xv)).sum();
            let ft = obj.eval(&trial, &mut g_trial)?;
            let armijo = ft <= f + ARMIJO_SLOPE * moved;
            let approx = ft <= f + ROUNDOFF * abs(f) && {
                let slope: f64 = g_trial.iter().zip(&trial).zip(x.iter()).map(|((gv, t), xv)| gv * (t - xv)).sum();
                slope <= -APPROX_SLOPE * moved
            };
            if ft.is_finite() && moved < 0.0 && (armijo || approx) {
                accepted = Some(ft);
                break;
            }
            step *= BACKTRACK;
        }
        let Some(f_new) = accepted else {
            if history.is_empty() {
                break Stop::LineSearch;
            }
            history.clear();
            continue;
        };

        let s: Vec<f64> = trial.iter().zip(x.iter()).map(|(t, xv)| t - xv).collect();
        let y: Vec<f64> = g_trial.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * sqrt(dot(&s, &s) * dot(&y, &y)) {
            if history.len() == MEMORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let decrease = (f - f_new) / abs(f_new).max(abs(f)).max(f64::MIN_POSITIVE);
        core::mem::swap(x, &mut trial);
        core::mem::swap(&mut g, &mut g_trial);
        f = f_new;
        trace.push(f);
        iterations += 1;
        let gi_new = inf_norm(&g);
        if gi_new < best_grad {
            best_grad = gi_new;
            since_best = 0;
        } else {
            since_best += 1;
        }
        if decrease < cfg.tol_energy && since_best >= GRAD_PATIENCE {
            stalled += 1;
            if stalled >= STALL_LIMIT {
                if restarts == MAX_RESTARTS {
                    break Stop::Stalled;
                }
                // Stale curvature pairs can pin the iterates; retry from steepest descent.
                restarts += 1;
                history.clear();
                stalled = 0;
                since_best = 0;
            }
        } else {
            stalled = 0;
        }
    };
    Ok(Outcome { iterations, trace, stop })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        diag: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn eval(&mut self, x: &[f64], g: &mut [f64]) -> Result<f64> {
            let mut f = 0.0;
            for i in 0..x.len() {
                g[i] = self.diag[i] * (x[i] - 1.0);
                f += 0.5 * self.diag[i] * (x[i] - 1.0) * (x[i] - 1.0);
            }
            Ok(f)
        }
    }

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn eval(&mut self, x: &[f64], g: &mut [f64]) -> Result<f64> {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            Ok((1.0 - a) * (1.0 - a) + 100.0 * (b - a * a) * (b - a * a))
        }
    }

    #[test]
    fn solves_ill_conditioned_quadratic() {
        let mut q = Quadratic { diag: (0..50).map(|i| 1.0 + i as f64 * 20.0).collect() };
        let mut x = vec![0.0; 50];
        let cfg = Settings { tol_grad: 1e-10, tol_energy: 0.0, max_iters: 1000 };
        let out = minimize(&mut q, &mut x, &cfg).unwrap();
        assert_eq!(out.stop, Stop::Gradient);
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-10));
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn solves_rosenbrock() {
        let mut x = vec![-1.2, 1.0];
        let cfg = Settings { tol_grad: 1e-9, tol_energy: 0.0, max_iters: 1000 };
        let out = minimize(&mut Rosenbrock, &mut x, &cfg).unwrap();
        assert_eq!(out.stop, Stop::Gradient);
        assert!((x[0] - 1.0).abs() < 1e-7 && (x[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn reports_max_iters() {
        let mut x = vec![-1.2, 1.0];
        let cfg = Settings { tol_grad: 1e-12, tol_energy: 0.0, max_iters: 3 };
        let out = minimize(&mut Rosenbrock, &mut x, &cfg).unwrap();
        assert_eq!((out.stop, out.iterations), (Stop::MaxIters, 3));
    }
}
