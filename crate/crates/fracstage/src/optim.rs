//! Full-batch optimizers: Adam and L-BFGS with a strong-Wolfe line search.
//!
//! Both operate on a flat parameter vector through an objective closure that
//! returns the loss and fills the gradient.

use crate::{Error, Result};

/// Iteration budgets and optimizer hyperparameters for one training stage.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerBudget {
    pub adam_iters: usize,
    pub adam_lr: f64,
    pub lbfgs_max_iters: usize,
    pub lbfgs_initial_lr: f64,
    pub lbfgs_grad_tol: f64,
    pub lbfgs_memory: usize,
}

impl Default for OptimizerBudget {
    fn default() -> Self {
        Self {
            adam_iters: 1000,
            adam_lr: 1e-3,
            lbfgs_max_iters: 5000,
            lbfgs_initial_lr: 1.0,
            lbfgs_grad_tol: 1e-12,
            lbfgs_memory: 20,
        }
    }
}

impl OptimizerBudget {
    pub fn validate(&self) -> Result<()> {
        let all_positive = self.adam_iters > 0
            && self.adam_lr > 0.0
            && self.lbfgs_max_iters > 0
            && self.lbfgs_initial_lr > 0.0
            && self.lbfgs_grad_tol > 0.0
            && self.lbfgs_memory > 0;
        if !all_positive {
            return Err(Error::InvalidParameter {
                name: "budget",
                msg: format!("all fields must be positive: {self:?}"),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Adam,
    Lbfgs,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Adam => "adam",
            Phase::Lbfgs => "lbfgs",
        }
    }
}

/// One optimizer iteration in a training history.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub phase: Phase,
    pub loss: f64,
    pub grad_inf: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
}

/// Standard Adam (beta1 = 0.9, beta2 = 0.999, eps = 1e-8, bias correction),
/// full-batch. Returns the loss after the final step; a non-finite loss
/// aborts with a diagnostic.
pub fn adam_minimize<F>(
    mut obj: F,
    params: &mut [f64],
    budget: &OptimizerBudget,
    history: &mut Vec<IterRecord>,
) -> Result<f64>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    budget.validate()?;
    let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);
    let n = params.len();
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut loss = f64::NAN;
    for it in 1..=budget.adam_iters {
        g.iter_mut().for_each(|x| *x = 0.0);
        loss = obj(params, &mut g);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(it));
        }
        history.push(IterRecord { iter: it, phase: Phase::Adam, loss, grad_inf: inf_norm(&g) });
        let bc1 = 1.0 - beta1.powi(it as i32);
        let bc2 = 1.0 - beta2.powi(it as i32);
        for i in 0..n {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            params[i] -= budget.adam_lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(loss)
}

/// Outcome of an L-BFGS run.
#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub final_loss: f64,
    pub iterations: usize,
    /// Set when the line search could not make progress; the returned
    /// parameters are the best seen so far, not an error.
    pub line_search_failed: bool,
}

// Strong-Wolfe constants.
const WOLFE_C1: f64 = 1e-4;
const WOLFE_C2: f64 = 0.9;
const MAX_LINE_SEARCH_EVALS: usize = 25;

/// Cubic interpolation of a step location from two (t, f, f') samples,
/// clamped to `bounds` (Nocedal & Wright, eq. 3.59).
fn cubic_interpolate(t1: f64, f1: f64, g1: f64, t2: f64, f2: f64, g2: f64, bounds: (f64, f64)) -> f64 {
    let (lo, hi) = bounds;
    let d1 = g1 + g2 - 3.0 * (f1 - f2) / (t1 - t2);
    let d2_sq = d1 * d1 - g1 * g2;
    if d2_sq >= 0.0 {
        let d2 = d2_sq.sqrt() * (t2 - t1).signum();
        let t = t2 - (t2 - t1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2));
        if t.is_finite() {
            return t.clamp(lo.min(hi), lo.max(hi));
        }
    }
    0.5 * (lo + hi)
}

/// Two-loop-recursion L-BFGS with a strong-Wolfe line search starting at
/// `lbfgs_initial_lr`. Stops at the gradient tolerance or the iteration cap;
/// a line-search failure restores the best parameters and sets the flag.
pub fn lbfgs_minimize<F>(
    mut obj: F,
    params: &mut [f64],
    budget: &OptimizerBudget,
    history: &mut Vec<IterRecord>,
) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    budget.validate()?;
    let n = params.len();
    let mem = budget.lbfgs_memory;

    let mut g = vec![0.0; n];
    let mut f = obj(params, &mut g);
    if !f.is_finite() {
        return Err(Error::NonFiniteLoss(0));
    }

    let mut best_f = f;
    let mut best_x = params.to_vec();

    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    let mut gamma = 1.0_f64;

    let mut iterations = 0;
    let mut line_search_failed = false;

    for it in 1..=budget.lbfgs_max_iters {
        let ginf = inf_norm(&g);
        history.push(IterRecord { iter: it, phase: Phase::Lbfgs, loss: f, grad_inf: ginf });
        if ginf <= budget.lbfgs_grad_tol {
            iterations = it;
            break;
        }

        // two-loop recursion: d = -H g
        let mut d: Vec<f64> = g.iter().map(|&x| -x).collect();
        let k = s_hist.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            let a = rho_hist[i] * dot(&s_hist[i], &d);
            alpha[i] = a;
            axpy(-a, &y_hist[i], &mut d);
        }
        d.iter_mut().for_each(|x| *x *= gamma);
        for i in 0..k {
            let b = rho_hist[i] * dot(&y_hist[i], &d);
            axpy(alpha[i] - b, &s_hist[i], &mut d);
        }

        let mut gtd = dot(&g, &d);
        if gtd >= 0.0 {
            // not a descent direction; restart from steepest descent
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            gamma = 1.0;
            d = g.iter().map(|&x| -x).collect();
            gtd = dot(&g, &d);
        }

        match strong_wolfe(&mut obj, params, f, &g, &d, gtd, budget.lbfgs_initial_lr) {
            Some(accept) => {
                let x_old = params.to_vec();
                let g_old = g.clone();
                for i in 0..n {
                    params[i] = x_old[i] + accept.t * d[i];
                }
                // accept.f_new / g_new were evaluated at exactly this point
                f = accept.f_new;
                g = accept.g_new;
                let s: Vec<f64> = params.iter().zip(&x_old).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = g.iter().zip(&g_old).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > 1e-10 * dot(&y, &y).max(f64::MIN_POSITIVE) {
                    if s_hist.len() == mem {
                        s_hist.remove(0);
                        y_hist.remove(0);
                        rho_hist.remove(0);
                    }
                    gamma = sy / dot(&y, &y);
                    rho_hist.push(1.0 / sy);
                    s_hist.push(s);
                    y_hist.push(y);
                }
                if f < best_f {
                    best_f = f;
                    best_x.copy_from_slice(params);
                }
            }
            None => {
                line_search_failed = true;
                iterations = it;
                break;
            }
        }
        iterations = it;
    }

    if best_f < f {
        params.copy_from_slice(&best_x);
        f = best_f;
    }
    Ok(LbfgsOutcome { final_loss: f, iterations, line_search_failed })
}

struct WolfeAccept {
    t: f64,
    f_new: f64,
    g_new: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Bracket-and-zoom strong-Wolfe search along `d` from `x0`. Returns the
/// accepted step or `None` when no acceptable point was found.
fn strong_wolfe<F>(
    obj: &mut F,
    x0: &[f64],
    f0: f64,
    g0: &[f64],
    d: &[f64],
    gtd0: f64,
    t_init: f64,
) -> Option<WolfeAccept>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = vec![0.0; n];
    let mut evaluate = |t: f64, g_out: &mut Vec<f64>| -> (f64, f64) {
        for i in 0..n {
            x[i] = x0[i] + t * d[i];
        }
        g_out.iter_mut().for_each(|v| *v = 0.0);
        let f = obj(&x, g_out);
        let gtd = dot(g_out, d);
        (f, gtd)
    };

    let mut t = t_init;
    let mut t_prev = 0.0;
    let mut f_prev = f0;
    let mut gtd_prev = gtd0;
    let mut g_new = vec![0.0; n];
    let mut evals = 0;

    // bracketing phase
    let mut bracket: Option<(f64, f64, f64, f64, f64, f64)> = None; // (t_lo, f_lo, g_lo, t_hi, f_hi, g_hi)
    let mut done: Option<(f64, f64)> = None;
    while evals < MAX_LINE_SEARCH_EVALS {
        let (f_new, gtd_new) = evaluate(t, &mut g_new);
        evals += 1;
        if !f_new.is_finite() || f_new > f0 + WOLFE_C1 * t * gtd0 || (evals > 1 && f_new >= f_prev) {
            bracket = Some((t_prev, f_prev, gtd_prev, t, f_new, gtd_new));
            break;
        }
        if gtd_new.abs() <= -WOLFE_C2 * gtd0 {
            done = Some((t, f_new));
            break;
        }
        if gtd_new >= 0.0 {
            bracket = Some((t_prev, f_prev, gtd_prev, t, f_new, gtd_new));
            break;
        }
        let t_next = cubic_interpolate(
            t_prev,
            f_prev,
            gtd_prev,
            t,
            f_new,
            gtd_new,
            (t + 0.01 * (t - t_prev), 10.0 * t),
        );
        t_prev = t;
        f_prev = f_new;
        gtd_prev = gtd_new;
        t = t_next;
    }

    if let Some((t_acc, f_acc)) = done {
        return Some(WolfeAccept { t: t_acc, f_new: f_acc, g_new });
    }
    let (mut t_lo, mut f_lo, mut g_lo, mut t_hi, mut f_hi, mut g_hi) = bracket?;

    // zoom phase
    let mut insufficient = false;
    while evals < MAX_LINE_SEARCH_EVALS {
        if (t_hi - t_lo).abs() * inf_norm(d) < 1e-14 {
            break;
        }
        let mut t_mid = cubic_interpolate(t_lo, f_lo, g_lo, t_hi, f_hi, g_hi, (t_lo.min(t_hi), t_lo.max(t_hi)));
        let span = (t_hi.max(t_lo)) - (t_lo.min(t_hi));
        let margin = 0.1 * span;
        if (t_mid - t_lo.min(t_hi)).min(t_lo.max(t_hi) - t_mid) < margin {
            if insufficient || t_mid <= t_lo.min(t_hi) || t_mid >= t_lo.max(t_hi) {
                t_mid = if (t_mid - t_lo.min(t_hi)).abs() < (t_lo.max(t_hi) - t_mid).abs() {
                    t_lo.min(t_hi) + margin
                } else {
                    t_lo.max(t_hi) - margin
                };
                insufficient = false;
            } else {
                insufficient = true;
            }
        } else {
            insufficient = false;
        }
        let (f_new, gtd_new) = evaluate(t_mid, &mut g_new);
        evals += 1;
        if !f_new.is_finite() || f_new > f0 + WOLFE_C1 * t_mid * gtd0 || f_new >= f_lo {
            t_hi = t_mid;
            f_hi = f_new;
            g_hi = gtd_new;
        } else {
            if gtd_new.abs() <= -WOLFE_C2 * gtd0 {
                return Some(WolfeAccept { t: t_mid, f_new, g_new });
            }
            if gtd_new * (t_hi - t_lo) >= 0.0 {
                t_hi = t_lo;
                f_hi = f_lo;
                g_hi = g_lo;
            }
            t_lo = t_mid;
            f_lo = f_new;
            g_lo = gtd_new;
        }
    }

    // accept the low end of the bracket if it still satisfies Armijo
    if t_lo > 0.0 && f_lo <= f0 + WOLFE_C1 * t_lo * gtd0 && f_lo < f0 {
        let (f_new, _) = {
            let mut gtmp = vec![0.0; n];
            let mut xtmp = vec![0.0; n];
            for i in 0..n {
                xtmp[i] = x0[i] + t_lo * d[i];
            }
            let f = obj(&xtmp, &mut gtmp);
            g_new = gtmp;
            (f, 0.0)
        };
        return Some(WolfeAccept { t: t_lo, f_new, g_new });
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget(adam_iters: usize, adam_lr: f64, lbfgs_max: usize) -> OptimizerBudget {
        OptimizerBudget {
            adam_iters,
            adam_lr,
            lbfgs_max_iters: lbfgs_max,
            lbfgs_initial_lr: 1.0,
            lbfgs_grad_tol: 1e-12,
            lbfgs_memory: 20,
        }
    }

    #[test]
    fn adam_first_step_magnitude() {
        // loss = theta^2 from 1: first Adam step is ~lr (m_hat = g, sqrt(v_hat) = |g|).
        let mut p = vec![1.0];
        let mut hist = Vec::new();
        adam_minimize(
            |x, g| {
                g[0] = 2.0 * x[0];
                x[0] * x[0]
            },
            &mut p,
            &budget(1, 1e-3, 1),
            &mut hist,
        )
        .unwrap();
        assert!((p[0] - 0.999).abs() < 1e-6, "{}", p[0]);
    }

    #[test]
    fn adam_zero_gradient_keeps_parameters() {
        let mut p = vec![0.7, -1.2];
        let mut hist = Vec::new();
        adam_minimize(|_, _| 1.0, &mut p, &budget(10, 0.01, 1), &mut hist).unwrap();
        assert_eq!(p, vec![0.7, -1.2]);
    }

    #[test]
    fn adam_converges_on_scalar_quadratic() {
        let mut p = vec![0.0];
        let mut hist = Vec::new();
        adam_minimize(
            |x, g| {
                g[0] = 2.0 * (x[0] - 3.0);
                (x[0] - 3.0) * (x[0] - 3.0)
            },
            &mut p,
            &budget(5000, 0.01, 1),
            &mut hist,
        )
        .unwrap();
        assert!((p[0] - 3.0).abs() <= 1e-3, "{}", p[0]);
    }

    #[test]
    fn adam_step_size_bound() {
        // every coordinate update is bounded by ~lr under bias correction
        let mut p = vec![5.0, -2.0];
        let budget = budget(50, 0.05, 1);
        let mut prev = p.clone();
        let mut hist = Vec::new();
        for _ in 0..50 {
            adam_minimize(
                |x, g| {
                    g[0] = 4.0 * x[0] + x[1];
                    g[1] = x[0] - 6.0 * x[1];
                    2.0 * x[0] * x[0] + x[0] * x[1] - 3.0 * x[1] * x[1]
                },
                &mut p,
                &OptimizerBudget { adam_iters: 1, ..budget.clone() },
                &mut hist,
            )
            .unwrap();
            for i in 0..2 {
                assert!((p[i] - prev[i]).abs() <= 0.05 * 1.0001);
            }
            prev = p.clone();
        }
    }

    #[test]
    fn adam_rejects_non_finite_loss() {
        let mut p = vec![1.0];
        let mut hist = Vec::new();
        let r = adam_minimize(|_, g| {
            g[0] = 1.0;
            f64::NAN
        }, &mut p, &budget(3, 0.1, 1), &mut hist);
        assert!(matches!(r, Err(Error::NonFiniteLoss(1))));
    }

    #[test]
    fn lbfgs_exact_on_quadratic() {
        let mut p = vec![0.0];
        let mut hist = Vec::new();
        let out = lbfgs_minimize(
            |x, g| {
                g[0] = 2.0 * (x[0] - 2.0);
                (x[0] - 2.0) * (x[0] - 2.0)
            },
            &mut p,
            &budget(1, 1.0, 10),
            &mut hist,
        )
        .unwrap();
        assert!((p[0] - 2.0).abs() < 1e-8);
        assert!(out.iterations <= 5);
        assert!(!out.line_search_failed);
    }

    #[test]
    fn lbfgs_solves_rosenbrock() {
        let mut p = vec![-1.2, 1.0];
        let mut hist = Vec::new();
        let out = lbfgs_minimize(
            |x, g| {
                let (a, b) = (1.0, 100.0);
                g[0] = -2.0 * (a - x[0]) - 4.0 * b * (x[1] - x[0] * x[0]) * x[0];
                g[1] = 2.0 * b * (x[1] - x[0] * x[0]);
                (a - x[0]).powi(2) + b * (x[1] - x[0] * x[0]).powi(2)
            },
            &mut p,
            &budget(1, 1.0, 300),
            &mut hist,
        )
        .unwrap();
        assert!((p[0] - 1.0).abs() < 1e-6 && (p[1] - 1.0).abs() < 1e-6, "{p:?} {out:?}");
    }

    #[test]
    fn lbfgs_iterates_never_increase_loss() {
        // seeded pseudo-random convex-ish landscapes
        for seed in 0..20u64 {
            let a = 0.5 + (seed as f64) * 0.13;
            let mut p = vec![1.0 + a, -0.5 * a, 0.3];
            let mut hist = Vec::new();
            lbfgs_minimize(
                |x, g| {
                    let mut f = 0.0;
                    for i in 0..3 {
                        let c = 1.0 + a * i as f64;
                        f += c * x[i].tanh().powi(2) + 0.1 * x[i] * x[i];
                        let th = x[i].tanh();
                        g[i] = 2.0 * c * th * (1.0 - th * th) + 0.2 * x[i];
                    }
                    f
                },
                &mut p,
                &budget(1, 1.0, 60),
                &mut hist,
            )
            .unwrap();
            let losses: Vec<f64> = hist.iter().map(|h| h.loss).collect();
            for w in losses.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "loss increased: {w:?} (seed {seed})");
            }
        }
    }
}
