//! Penalized least-squares solvers and their optimality certificates.

mod lasso;
mod multitask;
mod ols;
mod prox;

pub use lasso::{
    kkt_residual, lasso, lasso_objective, lasso_warm, restricted_lasso, KktReport,
};
pub use multitask::{
    dirty_model, dirty_objective, group_lasso, group_lasso_objective, MultiTaskResult,
};
pub use ols::ols_refit;
pub use prox::{project_l1_ball, prox_linf_row, soft_threshold};

use crate::model::DEFAULT_ZETA;

/// Iteration limits and tolerances shared by all solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Coordinate descent: largest coefficient change in a sweep.
    /// Proximal methods: relative objective decrease that triggers a
    /// stationarity check.
    pub tol: f64,
    pub kkt_tol: f64,
    /// Support extraction threshold applied to the returned weights.
    pub zeta: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 100_000,
            tol: 1e-8,
            kkt_tol: 1e-6,
            zeta: DEFAULT_ZETA,
        }
    }
}

impl SolverOptions {
    /// Defaults for the proximal-gradient multi-task solvers.
    pub fn multitask() -> Self {
        SolverOptions {
            max_iter: 20_000,
            tol: 1e-10,
            kkt_tol: 1e-6,
            zeta: DEFAULT_ZETA,
        }
    }

    pub(crate) fn validate(&self) -> crate::Result<()> {
        if self.max_iter == 0 || !(self.tol > 0.0) || !(self.kkt_tol >= 0.0) || !(self.zeta >= 0.0) {
            return Err(crate::Error::Config(format!("invalid solver options {self:?}")));
        }
        Ok(())
    }
}
