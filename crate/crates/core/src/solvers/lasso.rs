//! Lasso by cyclic coordinate descent on
//! `(1/2n)‖y − Xw‖² + λ‖w‖₁`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::prox::soft_threshold;
use super::SolverOptions;
use crate::error::{Error, Result};
use crate::model::{extract_support, SolverResult, SupportSet};

/// Stationarity violation of a candidate lasso solution.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    pub residual: f64,
    /// `ẑ = −(1/(nλ)) Xᵀ(Xw − y)`; `None` when `λ = 0`.
    pub dual: Option<Array1<f64>>,
}

impl KktReport {
    /// `‖ẑ_{S^c}‖_∞`, the strict dual feasibility margin off `support`.
    pub fn dual_off_support(&self, support: &SupportSet) -> Option<f64> {
        self.dual.as_ref().map(|z| {
            z.iter()
                .enumerate()
                .filter(|(j, _)| !support.contains(*j))
                .map(|(_, v)| v.abs())
                .fold(0.0, f64::max)
        })
    }
}

fn check_inputs(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, lambda: f64) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Shape(format!(
            "X has {} rows but y has {} entries",
            x.nrows(),
            y.len()
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::Shape("no samples".into()));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Config(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("design matrix"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("response vector"));
    }
    Ok(())
}

/// `(1/2n)‖y − Xw‖² + λ‖w‖₁`.
pub fn lasso_objective(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, lambda: f64, w: &Array1<f64>) -> f64 {
    let r = &y - &x.dot(w);
    r.dot(&r) / (2.0 * y.len() as f64) + lambda * w.iter().map(|v| v.abs()).sum::<f64>()
}

/// Largest violation of the lasso optimality conditions at `w`:
/// `|g_j + λ·sign(w_j)|` on nonzeros and `max(|g_j| − λ, 0)` on zeros,
/// with `g = (1/n)Xᵀ(Xw − y)`. For `λ = 0` this is `‖g‖_∞`.
pub fn kkt_residual(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, lambda: f64, w: &Array1<f64>) -> KktReport {
    let n = y.len() as f64;
    let grad = x.t().dot(&(x.dot(w) - y)) / n;
    let residual = grad
        .iter()
        .zip(w.iter())
        .map(|(&g, &wj)| {
            if wj != 0.0 {
                (g + lambda * wj.signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max);
    let dual = (lambda > 0.0).then(|| grad.mapv(|g| -g / lambda));
    KktReport { residual, dual }
}

/// Lasso from a zero start.
pub fn lasso(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, lambda: f64, opts: &SolverOptions) -> Result<SolverResult> {
    lasso_warm(x, y, lambda, None, opts)
}

/// Lasso from an optional warm start.
pub fn lasso_warm(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    lambda: f64,
    init: Option<&Array1<f64>>,
    opts: &SolverOptions,
) -> Result<SolverResult> {
    check_inputs(x, y, lambda)?;
    opts.validate()?;
    if let Some(w0) = init {
        if w0.len() != x.ncols() {
            return Err(Error::Shape(format!("warm start has length {}, expected {}", w0.len(), x.ncols())));
        }
    }
    let (weights, iterations, converged, kkt) = coordinate_descent(x, y, lambda, init, opts, None);
    Ok(SolverResult {
        support: extract_support(&weights, opts.zeta),
        weights,
        iterations,
        converged,
        kkt_residual: kkt,
    })
}

/// Columns of `x` as contiguous rows.
fn column_major(x: ArrayView2<'_, f64>) -> Array2<f64> {
    x.t().as_standard_layout().into_owned()
}

/// Returns `(w, sweeps, converged, kkt_residual)`. Alternates full sweeps
/// with sweeps over the current nonzeros; convergence needs a full sweep
/// whose largest change is below `tol` and a KKT residual within `kkt_tol`.
pub(super) fn coordinate_descent(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    lambda: f64,
    init: Option<&Array1<f64>>,
    opts: &SolverOptions,
    mut trace: Option<&mut Vec<f64>>,
) -> (Array1<f64>, usize, bool, f64) {
    let n = x.nrows();
    let p = x.ncols();
    let inv_n = 1.0 / n as f64;
    let cols = column_major(x);
    let col_sq: Vec<f64> = cols
        .axis_iter(Axis(0))
        .map(|c| c.dot(&c) * inv_n)
        .collect();

    let mut w = init.cloned().unwrap_or_else(|| Array1::zeros(p));
    let mut resid: Vec<f64> = (&y - &x.dot(&w)).to_vec();

    let update = |j: usize, w: &mut Array1<f64>, resid: &mut [f64]| -> f64 {
        let cj = col_sq[j];
        if cj == 0.0 {
            let old = w[j];
            w[j] = 0.0;
            return old.abs();
        }
        let col = cols.row(j);
        let col = col.as_slice().expect("standard layout");
        let dot: f64 = col.iter().zip(resid.iter()).map(|(a, b)| a * b).sum();
        let old = w[j];
        let new = soft_threshold(dot * inv_n + cj * old, lambda) / cj;
        let step = new - old;
        if step != 0.0 {
            for (r, a) in resid.iter_mut().zip(col) {
                *r -= step * a;
            }
            w[j] = new;
        }
        step.abs()
    };

    let objective = |w: &Array1<f64>, resid: &[f64]| -> f64 {
        resid.iter().map(|r| r * r).sum::<f64>() * 0.5 * inv_n
            + lambda * w.iter().map(|v| v.abs()).sum::<f64>()
    };
    if let Some(t) = trace.as_deref_mut() {
        t.push(objective(&w, &resid));
    }

    let mut sweeps = 0usize;
    while sweeps < opts.max_iter {
        let mut max_change = 0.0f64;
        for j in 0..p {
            max_change = max_change.max(update(j, &mut w, &mut resid));
        }
        sweeps += 1;
        if let Some(t) = trace.as_deref_mut() {
            t.push(objective(&w, &resid));
        }
        if max_change < opts.tol {
            let kkt = kkt_residual(x, y, lambda, &w).residual;
            if kkt <= opts.kkt_tol {
                return (w, sweeps, true, kkt);
            }
        }
        let active: Vec<usize> = (0..p).filter(|&j| w[j] != 0.0).collect();
        if active.len() == p || active.is_empty() {
            continue;
        }
        while sweeps < opts.max_iter {
            let mut change = 0.0f64;
            for &j in &active {
                change = change.max(update(j, &mut w, &mut resid));
            }
            sweeps += 1;
            if let Some(t) = trace.as_deref_mut() {
                t.push(objective(&w, &resid));
            }
            if change < opts.tol {
                break;
            }
        }
    }
    let kkt = kkt_residual(x, y, lambda, &w).residual;
    (w, sweeps, false, kkt)
}

/// Lasso over `{w : Supp(w) ⊆ support}`: coordinates outside `support`
/// are exactly zero and the rest solve the lasso on those columns.
pub fn restricted_lasso(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    lambda: f64,
    support: &SupportSet,
    opts: &SolverOptions,
) -> Result<SolverResult> {
    check_inputs(x, y, lambda)?;
    opts.validate()?;
    let p = x.ncols();
    if support.bound() > p {
        return Err(Error::Shape(format!("support exceeds p = {p}")));
    }
    if support.is_empty() {
        return Ok(SolverResult {
            weights: Array1::zeros(p),
            support: SupportSet::empty(),
            iterations: 0,
            converged: true,
            kkt_residual: 0.0,
        });
    }
    let sub = x.select(Axis(1), support.indices());
    let inner = lasso(sub.view(), y, lambda, opts)?;
    let mut weights = Array1::zeros(p);
    for (&j, &v) in support.indices().iter().zip(inner.weights.iter()) {
        weights[j] = v;
    }
    Ok(SolverResult {
        support: extract_support(&weights, opts.zeta),
        weights,
        iterations: inner.iterations,
        converged: inner.converged,
        kkt_residual: inner.kkt_residual,
    })
}
