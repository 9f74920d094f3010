//! Multi-task baselines.
//!
//! Both models share the datafit `Σ_t (1/2n_t)‖y_t − X_t w_t‖²` over the
//! columns `w_t` of a `p × T` coefficient matrix. The group lasso penalizes
//! row Euclidean norms; the dirty model splits `W = B + S` with row
//! `ℓ∞` norms on `B` and entrywise `ℓ1` on `S`.
//!
//! The group lasso is solved by FISTA with step `1/L`, where `L` is the
//! exact largest per-task curvature `max_t λ_max(X_tᵀX_t)/n_t`. A candidate
//! that would raise the objective is dropped and the momentum restarted, so
//! the recorded objective never increases. The dirty model is solved by
//! cyclic exact minimization over coefficient rows, which is much faster
//! than proximal gradient once many tasks are active.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use super::prox::{prox_linf_row, soft_threshold};
use super::SolverOptions;
use crate::error::{Error, Result};
use crate::linalg::gram_spectral_norm;
use crate::model::{extract_support, SupportSet, TaskData};

#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskResult {
    /// `p × T`; column `t` holds task `t`'s coefficients.
    pub w: Array2<f64>,
    /// Dirty model only: the row-`ℓ∞` penalized shared part.
    pub shared: Option<Array2<f64>>,
    /// Dirty model only: the entrywise-`ℓ1` penalized individual part.
    pub individual: Option<Array2<f64>>,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
}

impl MultiTaskResult {
    pub fn n_tasks(&self) -> usize {
        self.w.ncols()
    }

    pub fn task_weights(&self, t: usize) -> Array1<f64> {
        self.w.column(t).to_owned()
    }

    pub fn task_support(&self, t: usize, zeta: f64) -> SupportSet {
        extract_support(&self.task_weights(t), zeta)
    }

    /// `⋃_t Supp(w_t)`.
    pub fn union_support(&self, zeta: f64) -> SupportSet {
        (0..self.n_tasks()).fold(SupportSet::empty(), |acc, t| acc.union(&self.task_support(t, zeta)))
    }
}

struct Datafit<'a> {
    tasks: &'a [TaskData],
    inv_n: Vec<f64>,
    p: usize,
}

impl<'a> Datafit<'a> {
    fn new(tasks: &'a [TaskData]) -> Result<Self> {
        let first = tasks
            .first()
            .ok_or_else(|| Error::Config("multi-task solvers need at least one task".into()))?;
        let p = first.n_features();
        for t in tasks {
            if t.n_features() != p {
                return Err(Error::Shape(format!(
                    "task {} has {} columns, expected {p}",
                    t.task_id,
                    t.n_features()
                )));
            }
            if t.n_samples() == 0 {
                return Err(Error::Shape(format!("task {} has no samples", t.task_id)));
            }
        }
        Ok(Datafit {
            tasks,
            inv_n: tasks.iter().map(|t| 1.0 / t.n_samples() as f64).collect(),
            p,
        })
    }

    fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    fn lipschitz(&self) -> f64 {
        self.tasks
            .iter()
            .zip(&self.inv_n)
            .map(|(t, inv)| gram_spectral_norm(t.x.view()) * inv)
            .fold(0.0, f64::max)
    }

    fn predict(&self, w: &Array2<f64>) -> Vec<Array1<f64>> {
        self.tasks
            .iter()
            .enumerate()
            .map(|(i, t)| t.x.dot(&w.column(i)))
            .collect()
    }

    fn value(&self, pred: &[Array1<f64>]) -> f64 {
        self.tasks
            .iter()
            .zip(pred)
            .zip(&self.inv_n)
            .map(|((t, yhat), inv)| {
                let ss: f64 = t.y.iter().zip(yhat).map(|(y, f)| (y - f) * (y - f)).sum();
                0.5 * inv * ss
            })
            .sum()
    }

    fn gradient(&self, pred: &[Array1<f64>]) -> Array2<f64> {
        let mut g = Array2::zeros((self.p, self.n_tasks()));
        for (i, ((t, yhat), inv)) in self.tasks.iter().zip(pred).zip(&self.inv_n).enumerate() {
            let r = yhat - &t.y;
            let col = t.x.t().dot(&r) * *inv;
            g.column_mut(i).assign(&col);
        }
        g
    }
}

/// `x + c (a − b)` on per-task prediction vectors.
fn extrapolate(x: &[Array1<f64>], a: &[Array1<f64>], b: &[Array1<f64>], c: f64) -> Vec<Array1<f64>> {
    x.iter()
        .zip(a.iter().zip(b))
        .map(|(x, (a, b))| x + &((a - b) * c))
        .collect()
}

/// The variable is `p × (T·blocks)`; the task coefficients are the sum of
/// the blocks.
struct Composite<'a, P, X, K> {
    fit: Datafit<'a>,
    blocks: usize,
    penalty: P,
    prox: X,
    kkt: K,
}

struct Solution {
    var: Array2<f64>,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
    kkt: f64,
}

impl<'a, P, X, K> Composite<'a, P, X, K>
where
    P: Fn(&Array2<f64>) -> f64,
    X: Fn(&Array2<f64>, f64) -> Array2<f64>,
    K: Fn(&Array2<f64>, &Array2<f64>) -> f64,
{
    fn combine(&self, var: &Array2<f64>) -> Array2<f64> {
        let t = self.fit.n_tasks();
        let mut w = var.slice(s![.., 0..t]).to_owned();
        for b in 1..self.blocks {
            w += &var.slice(s![.., b * t..(b + 1) * t]);
        }
        w
    }

    fn expand(&self, g: &Array2<f64>) -> Array2<f64> {
        if self.blocks == 1 {
            return g.clone();
        }
        let views: Vec<_> = (0..self.blocks).map(|_| g.view()).collect();
        ndarray::concatenate(Axis(1), &views).expect("equal block shapes")
    }

    fn objective(&self, var: &Array2<f64>, pred: &[Array1<f64>]) -> f64 {
        self.fit.value(pred) + (self.penalty)(var)
    }

    fn solve(&self, opts: &SolverOptions) -> Solution {
        let t = self.fit.n_tasks();
        let lip = self.fit.lipschitz() * self.blocks as f64;
        let mut x = Array2::zeros((self.fit.p, t * self.blocks));
        let mut x_pred = self.fit.predict(&self.combine(&x));
        let mut f_x = self.objective(&x, &x_pred);
        let mut trace = vec![f_x];
        if lip == 0.0 {
            // Every design is zero: the zero matrix is optimal.
            let g = self.expand(&self.fit.gradient(&x_pred));
            let kkt = (self.kkt)(&x, &g);
            return Solution { var: x, trace, iterations: 0, converged: kkt <= opts.kkt_tol, kkt };
        }
        let step = 1.0 / lip;

        let mut z = x.clone();
        let mut z_pred = x_pred.clone();
        let mut momentum = 1.0f64;
        let mut kkt = f64::INFINITY;
        for iter in 1..=opts.max_iter {
            let grad = self.expand(&self.fit.gradient(&z_pred));
            let cand = (self.prox)(&(&z - &(grad * step)), step);
            let cand_pred = self.fit.predict(&self.combine(&cand));
            let f_c = self.objective(&cand, &cand_pred);

            let accepted = f_c <= f_x;
            let previous = f_x;
            if accepted {
                let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
                let beta = (momentum - 1.0) / next;
                z = &cand + &((&cand - &x) * beta);
                z_pred = extrapolate(&cand_pred, &cand_pred, &x_pred, beta);
                x = cand;
                x_pred = cand_pred;
                f_x = f_c;
                momentum = next;
            } else {
                momentum = 1.0;
                z = x.clone();
                z_pred = x_pred.clone();
            }
            trace.push(f_x);

            let stalled = accepted && previous - f_x <= opts.tol * f_x.abs().max(f64::MIN_POSITIVE);
            if stalled || !accepted || iter % 25 == 0 || iter == opts.max_iter {
                // Extrapolated predictions drift by rounding; certify on
                // exact ones and carry those forward.
                x_pred = self.fit.predict(&self.combine(&x));
                if !accepted {
                    z_pred = x_pred.clone();
                }
                let g = self.expand(&self.fit.gradient(&x_pred));
                kkt = (self.kkt)(&x, &g);
                if kkt <= opts.kkt_tol {
                    return Solution { var: x, trace, iterations: iter, converged: true, kkt };
                }
            }
        }
        Solution { var: x, trace, iterations: opts.max_iter, converged: false, kkt }
    }
}

fn check_lambda(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
    }
    Ok(())
}

fn row_norm(row: ArrayView1<'_, f64>) -> f64 {
    row.dot(&row).sqrt()
}

/// `Σ_t (1/2n_t)‖y_t − X_t w_t‖² + λ Σ_j ‖W_{j,·}‖₂`.
pub fn group_lasso_objective(tasks: &[TaskData], w: &Array2<f64>, lambda12: f64) -> Result<f64> {
    let fit = Datafit::new(tasks)?;
    let pen: f64 = w.axis_iter(Axis(0)).map(row_norm).sum();
    Ok(fit.value(&fit.predict(w)) + lambda12 * pen)
}

/// `ℓ1,2`-penalized multi-task least squares.
pub fn group_lasso(tasks: &[TaskData], lambda12: f64, opts: &SolverOptions) -> Result<MultiTaskResult> {
    check_lambda("lambda12", lambda12)?;
    opts.validate()?;
    let fit = Datafit::new(tasks)?;
    let problem = Composite {
        fit,
        blocks: 1,
        penalty: |w: &Array2<f64>| lambda12 * w.axis_iter(Axis(0)).map(row_norm).sum::<f64>(),
        prox: |v: &Array2<f64>, step: f64| {
            let tau = lambda12 * step;
            let mut out = v.clone();
            for mut row in out.axis_iter_mut(Axis(0)) {
                let norm = row_norm(row.view());
                let scale = if norm > tau { 1.0 - tau / norm } else { 0.0 };
                row.mapv_inplace(|x| x * scale);
            }
            out
        },
        kkt: |w: &Array2<f64>, g: &Array2<f64>| {
            w.axis_iter(Axis(0))
                .zip(g.axis_iter(Axis(0)))
                .map(|(wr, gr)| {
                    let norm = row_norm(wr);
                    if norm > 0.0 {
                        let r = &gr + &(&wr * (lambda12 / norm));
                        row_norm(r.view())
                    } else {
                        (row_norm(gr) - lambda12).max(0.0)
                    }
                })
                .fold(0.0, f64::max)
        },
    };
    let sol = problem.solve(opts);
    Ok(MultiTaskResult {
        w: sol.var,
        shared: None,
        individual: None,
        objective_trace: sol.trace,
        iterations: sol.iterations,
        converged: sol.converged,
        kkt_residual: sol.kkt,
    })
}

/// `Σ_t (1/2n_t)‖y_t − X_t(b_t + s_t)‖² + λ1∞ Σ_j ‖B_{j,·}‖_∞ + λ1 ‖S‖₁`.
pub fn dirty_objective(
    tasks: &[TaskData],
    shared: &Array2<f64>,
    individual: &Array2<f64>,
    lambda1: f64,
    lambda1inf: f64,
) -> Result<f64> {
    let fit = Datafit::new(tasks)?;
    let w = shared + individual;
    Ok(fit.value(&fit.predict(&w)) + dirty_penalty(shared.view(), individual.view(), lambda1, lambda1inf))
}

fn dirty_penalty(
    shared: ndarray::ArrayView2<'_, f64>,
    individual: ndarray::ArrayView2<'_, f64>,
    lambda1: f64,
    lambda1inf: f64,
) -> f64 {
    let linf: f64 = shared
        .axis_iter(Axis(0))
        .map(|r| r.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .sum();
    let l1: f64 = individual.iter().map(|v| v.abs()).sum();
    lambda1inf * linf + lambda1 * l1
}

/// The `ℓ1 + ℓ1,∞` dirty model, solved by exact cyclic minimization over
/// coefficient rows. The stationarity residual reported is the scaled
/// proximal-gradient mapping `L‖V − prox(V − ∇/L)‖_∞` over both parts.
pub fn dirty_model(
    tasks: &[TaskData],
    lambda1: f64,
    lambda1inf: f64,
    opts: &SolverOptions,
) -> Result<MultiTaskResult> {
    check_lambda("lambda1", lambda1)?;
    check_lambda("lambda1inf", lambda1inf)?;
    opts.validate()?;
    let fit = Datafit::new(tasks)?;
    let lip = fit.lipschitz() * 2.0;
    let sol = dirty_row_descent(&fit, lambda1, lambda1inf, lip, opts);
    Ok(sol.into_result())
}

struct DirtySolution {
    shared: Array2<f64>,
    individual: Array2<f64>,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
    kkt: f64,
}

impl DirtySolution {
    fn into_result(self) -> MultiTaskResult {
        MultiTaskResult {
            w: &self.shared + &self.individual,
            shared: Some(self.shared),
            individual: Some(self.individual),
            objective_trace: self.trace,
            iterations: self.iterations,
            converged: self.converged,
            kkt_residual: self.kkt,
        }
    }
}

fn dirty_prox(v: &Array2<f64>, t: usize, step: f64, lambda1: f64, lambda1inf: f64) -> Array2<f64> {
    let mut out = v.clone();
    let tau_b = lambda1inf * step;
    for mut row in out.slice_mut(s![.., 0..t]).axis_iter_mut(Axis(0)) {
        let shrunk = prox_linf_row(row.view(), tau_b);
        row.assign(&shrunk);
    }
    let tau_s = lambda1 * step;
    out.slice_mut(s![.., t..2 * t]).mapv_inplace(|x| soft_threshold(x, tau_s));
    out
}

fn dirty_kkt(fit: &Datafit<'_>, b: &Array2<f64>, s_mat: &Array2<f64>, lambda1: f64, lambda1inf: f64, lip: f64) -> f64 {
    let t = fit.n_tasks();
    let g = fit.gradient(&fit.predict(&(b + s_mat)));
    if lip == 0.0 {
        return g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    }
    let v = ndarray::concatenate(Axis(1), &[b.view(), s_mat.view()]).expect("equal shapes");
    let grad = ndarray::concatenate(Axis(1), &[g.view(), g.view()]).expect("equal shapes");
    let step = 1.0 / lip;
    let mapped = dirty_prox(&(&v - &(grad * step)), t, step, lambda1, lambda1inf);
    (&v - &mapped).iter().fold(0.0f64, |m, x| m.max(x.abs())) * lip
}

/// Smallest `m ≥ 0` with `Σ_t min(λ1, a_t (|c_t| − m)₊) ≤ λ1∞`.
///
/// The left side is the subgradient balance of the row problem in the
/// common bound `m = ‖b‖_∞`; it is piecewise linear and non-increasing in
/// `m`, so the root is found by walking its breakpoints.
fn row_bound(c: &[f64], a: &[f64], lambda1: f64, lambda1inf: f64) -> f64 {
    let mut konst = 0.0;
    let mut slope = 0.0;
    let mut events: Vec<(f64, f64, f64)> = Vec::with_capacity(2 * c.len());
    for (&ct, &at) in c.iter().zip(a) {
        let mag = ct.abs();
        if at <= 0.0 || mag == 0.0 {
            continue;
        }
        let knee = mag - lambda1 / at;
        if knee > 0.0 {
            konst += lambda1;
            events.push((knee, at * mag - lambda1, -at));
        } else {
            konst += at * mag;
            slope -= at;
        }
        events.push((mag, -at * mag, at));
    }
    if konst <= lambda1inf {
        return 0.0;
    }
    events.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut lo = 0.0;
    for (m, dk, ds) in events {
        if konst + slope * m <= lambda1inf {
            return if slope < 0.0 { ((lambda1inf - konst) / slope).clamp(lo, m) } else { lo };
        }
        konst += dk;
        slope += ds;
        lo = m;
    }
    lo
}

fn dirty_row_descent(fit: &Datafit<'_>, lambda1: f64, lambda1inf: f64, lip: f64, opts: &SolverOptions) -> DirtySolution {
    let (p, t) = (fit.p, fit.n_tasks());
    let mut b = Array2::<f64>::zeros((p, t));
    let mut s_mat = Array2::<f64>::zeros((p, t));
    // Column curvatures `‖X_t e_j‖² / n_t`, row-major in (j, t).
    let curv = Array2::from_shape_fn((p, t), |(j, i)| {
        let col = fit.tasks[i].x.column(j);
        col.dot(&col) * fit.inv_n[i]
    });
    let mut resid: Vec<Array1<f64>> = fit.tasks.iter().map(|task| task.y.clone()).collect();
    let objective = |b: &Array2<f64>, s_mat: &Array2<f64>, resid: &[Array1<f64>]| {
        let fitv: f64 = resid.iter().zip(&fit.inv_n).map(|(r, inv)| 0.5 * inv * r.dot(r)).sum();
        fitv + dirty_penalty(b.view(), s_mat.view(), lambda1, lambda1inf)
    };
    let mut f = objective(&b, &s_mat, &resid);
    let mut trace = vec![f];
    let mut kkt = f64::INFINITY;
    let mut c = vec![0.0; t];
    let mut a = vec![0.0; t];

    for sweep in 1..=opts.max_iter {
        let saved = (b.clone(), s_mat.clone(), resid.clone());
        let mut max_change = 0.0f64;
        let mut max_coef = 0.0f64;
        for j in 0..p {
            for i in 0..t {
                a[i] = curv[[j, i]];
                c[i] = if a[i] > 0.0 {
                    let g = fit.tasks[i].x.column(j).dot(&resid[i]) * fit.inv_n[i];
                    b[[j, i]] + s_mat[[j, i]] + g / a[i]
                } else {
                    0.0
                };
            }
            let m = row_bound(&c, &a, lambda1, lambda1inf);
            for i in 0..t {
                let (nb, ns) = if a[i] > 0.0 {
                    let nb = c[i].clamp(-m, m);
                    (nb, soft_threshold(c[i] - nb, lambda1 / a[i]))
                } else {
                    (0.0, 0.0)
                };
                let delta = nb + ns - b[[j, i]] - s_mat[[j, i]];
                max_change = max_change.max((nb - b[[j, i]]).abs()).max((ns - s_mat[[j, i]]).abs());
                b[[j, i]] = nb;
                s_mat[[j, i]] = ns;
                max_coef = max_coef.max((nb + ns).abs());
                if delta != 0.0 {
                    resid[i].scaled_add(-delta, &fit.tasks[i].x.column(j));
                }
            }
        }
        let f_new = objective(&b, &s_mat, &resid);
        let rose = f_new > f;
        if rose {
            // Exact row minimization cannot raise the objective; a rise is
            // rounding at the floor, so keep the previous sweep.
            (b, s_mat, resid) = saved;
        } else {
            f = f_new;
            trace.push(f);
        }
        let stalled = max_change <= opts.tol * max_coef.max(1.0);
        if rose || stalled || sweep % 20 == 0 || sweep == opts.max_iter {
            for (i, task) in fit.tasks.iter().enumerate() {
                resid[i] = &task.y - &task.x.dot(&(&b.column(i) + &s_mat.column(i)));
            }
            kkt = dirty_kkt(fit, &b, &s_mat, lambda1, lambda1inf, lip);
            if kkt <= opts.kkt_tol {
                return DirtySolution { shared: b, individual: s_mat, trace, iterations: sweep, converged: true, kkt };
            }
            if rose {
                return DirtySolution { shared: b, individual: s_mat, trace, iterations: sweep, converged: false, kkt };
            }
        }
    }
    DirtySolution { shared: b, individual: s_mat, trace, iterations: opts.max_iter, converged: false, kkt }
}

/// Accelerated proximal gradient on the stacked `[B, S]`; kept as an
/// independent check of the row-descent solver.
#[cfg(test)]
fn dirty_model_proximal(
    tasks: &[TaskData],
    lambda1: f64,
    lambda1inf: f64,
    opts: &SolverOptions,
) -> Result<MultiTaskResult> {
    let fit = Datafit::new(tasks)?;
    let t = fit.n_tasks();
    let lip = fit.lipschitz() * 2.0;
    let problem = Composite {
        fit,
        blocks: 2,
        penalty: |v: &Array2<f64>| {
            dirty_penalty(v.slice(s![.., 0..t]), v.slice(s![.., t..2 * t]), lambda1, lambda1inf)
        },
        prox: |v: &Array2<f64>, step: f64| dirty_prox(v, t, step, lambda1, lambda1inf),
        kkt: |v: &Array2<f64>, g: &Array2<f64>| {
            let step = 1.0 / lip;
            let mapped = dirty_prox(&(v - &(g * step)), t, step, lambda1, lambda1inf);
            (v - &mapped).iter().fold(0.0f64, |m, x| m.max(x.abs())) * lip
        },
    };
    let sol = problem.solve(opts);
    Ok(DirtySolution {
        shared: sol.var.slice(s![.., 0..t]).to_owned(),
        individual: sol.var.slice(s![.., t..2 * t]).to_owned(),
        trace: sol.trace,
        iterations: sol.iterations,
        converged: sol.converged,
        kkt: sol.kkt,
    }
    .into_result())
}
