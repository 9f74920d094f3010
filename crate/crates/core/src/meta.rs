//! The two-stage estimator.
//!
//! Stage one pools the samples of all prior tasks and solves a single lasso
//! with `λ = c·√(ln p / (T·l))`; its support is the estimate of the common
//! support. Stage two fits the novel task by a lasso restricted to that
//! support, with `λ' = c'·√(ln max(|Ŝ|, 2) / l_novel)`, optionally refitting
//! the selected coefficients by least squares.

use log::warn;
use ndarray::{concatenate, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    extract_support, linf_distance, support_equal, GroundTruth, MetaDataset, SupportSet, TaskData,
};
use crate::solvers::{kkt_residual, lasso, ols_refit, restricted_lasso, SolverOptions};

/// Default `c` for Gaussian and uniform deviations.
pub const DEFAULT_C: f64 = 1.0;
/// Default `c` when deviations can cancel entries of `w*`.
pub const DEFAULT_C_MIXTURE: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaFitReport {
    pub lambda_used: f64,
    pub pooled_n: usize,
    pub recovered_support: SupportSet,
    pub w_hat: Vec<f64>,
    pub converged: bool,
    pub kkt_residual: f64,
    /// `‖ẑ_{Ŝ^c}‖_∞` for the dual vector of the pooled lasso.
    pub dual_margin: Option<f64>,
    pub exact_recovery: Option<bool>,
    pub linf_error: Option<f64>,
}

impl MetaFitReport {
    /// Scores the fit against the generating parameters.
    pub fn with_truth(mut self, truth: &GroundTruth) -> Self {
        self.exact_recovery = Some(support_equal(&self.recovered_support, &truth.support));
        let w_star = Array1::from(truth.w_star.clone());
        self.linf_error = Some(linf_distance(&Array1::from(self.w_hat.clone()), &w_star));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NovelFitReport {
    pub lambda_used: f64,
    pub w_hat_novel: Vec<f64>,
    pub support_novel: SupportSet,
    /// Whether the least-squares refit was applied.
    pub refit: bool,
    /// Set when the input support was empty and the estimate is zero.
    pub empty_support: bool,
    pub converged: bool,
    pub linf_error: Option<f64>,
}

impl NovelFitReport {
    pub fn with_truth(mut self, truth: &GroundTruth) -> Self {
        let target = truth.novel_weights();
        self.linf_error = Some(linf_distance(&Array1::from(self.w_hat_novel.clone()), &target));
        self
    }

    pub fn weights(&self) -> Array1<f64> {
        Array1::from(self.w_hat_novel.clone())
    }
}

/// Stacks the prior tasks' rows in task order: row `i·l + j` is sample `j`
/// of task `i`.
pub fn pool(dataset: &MetaDataset) -> Result<(Array2<f64>, Array1<f64>)> {
    pool_tasks(&dataset.prior_tasks)
}

pub fn pool_tasks(tasks: &[TaskData]) -> Result<(Array2<f64>, Array1<f64>)> {
    let first = tasks
        .first()
        .ok_or_else(|| Error::Config("no prior tasks to pool".into()))?;
    let p = first.n_features();
    if let Some(bad) = tasks.iter().find(|t| t.n_features() != p) {
        return Err(Error::Shape(format!(
            "task {} has {} columns, expected {p}",
            bad.task_id,
            bad.n_features()
        )));
    }
    let xs: Vec<_> = tasks.iter().map(|t| t.x.view()).collect();
    let ys: Vec<_> = tasks.iter().map(|t| t.y.view()).collect();
    let x = concatenate(Axis(0), &xs).map_err(|e| Error::Shape(e.to_string()))?;
    let y = concatenate(Axis(0), &ys).map_err(|e| Error::Shape(e.to_string()))?;
    Ok((x, y))
}

/// `c·√(ln p / (T·l))`.
pub fn lambda_schedule(p: usize, t: usize, l: usize, c: f64) -> f64 {
    debug_assert!(p >= 2 && t * l >= 1 && c >= 0.0);
    c * ((p as f64).ln() / (t * l) as f64).sqrt()
}

/// `c·√(ln max(k, 2) / l)`, with the selected support size `k` standing in
/// for the unknown number of coordinates the novel task can drop.
pub fn novel_lambda(support_size: usize, l_novel: usize, c: f64) -> f64 {
    c * ((support_size.max(2) as f64).ln() / l_novel as f64).sqrt()
}

/// Pooled lasso over all prior tasks.
pub fn recover_common_support(dataset: &MetaDataset, c_lambda: f64, opts: &SolverOptions) -> Result<MetaFitReport> {
    if !(c_lambda.is_finite() && c_lambda >= 0.0) {
        return Err(Error::Config(format!("lambda constant must be >= 0, got {c_lambda}")));
    }
    let (x, y) = pool(dataset)?;
    let lambda = lambda_schedule(dataset.p.max(2), dataset.n_tasks(), dataset.samples_per_task(), c_lambda);
    let fit = lasso(x.view(), y.view(), lambda, opts)?;
    let dual_margin = kkt_residual(x.view(), y.view(), lambda, &fit.weights).dual_off_support(&fit.support);
    Ok(MetaFitReport {
        lambda_used: lambda,
        pooled_n: x.nrows(),
        recovered_support: extract_support(&fit.weights, opts.zeta),
        w_hat: fit.weights.to_vec(),
        converged: fit.converged,
        kkt_residual: fit.kkt_residual,
        dual_margin,
        exact_recovery: None,
        linf_error: None,
    })
}

/// Fits the novel task restricted to `support`.
pub fn fit_novel_task(
    novel: &TaskData,
    support: &SupportSet,
    c_lambda_novel: f64,
    refit: bool,
    opts: &SolverOptions,
) -> Result<NovelFitReport> {
    let p = novel.n_features();
    if support.bound() > p {
        return Err(Error::Shape(format!("support exceeds p = {p}")));
    }
    if !(c_lambda_novel.is_finite() && c_lambda_novel >= 0.0) {
        return Err(Error::Config(format!("lambda constant must be >= 0, got {c_lambda_novel}")));
    }
    let lambda = novel_lambda(support.len(), novel.n_samples(), c_lambda_novel);
    if support.is_empty() {
        return Ok(NovelFitReport {
            lambda_used: lambda,
            w_hat_novel: vec![0.0; p],
            support_novel: SupportSet::empty(),
            refit: false,
            empty_support: true,
            converged: true,
            linf_error: None,
        });
    }
    let fit = restricted_lasso(novel.x.view(), novel.y.view(), lambda, support, opts)?;
    let mut weights = fit.weights;
    let mut refitted = false;
    if refit && !fit.support.is_empty() {
        match ols_refit(novel.x.view(), novel.y.view(), &fit.support) {
            Ok(w) => {
                weights = w;
                refitted = true;
            }
            Err(e) => warn!(
                "least-squares refit on {} coordinates with {} samples failed ({e}); keeping lasso weights",
                fit.support.len(),
                novel.n_samples()
            ),
        }
    }
    Ok(NovelFitReport {
        lambda_used: lambda,
        w_hat_novel: weights.to_vec(),
        support_novel: fit.support,
        refit: refitted,
        empty_support: false,
        converged: fit.converged,
        linf_error: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, generate_with_novel_samples, GenConfig};

    #[test]
    fn pooling_stacks_in_task_order() {
        let cfg = GenConfig { p: 4, k: 2, l: 3, t: 2, ..GenConfig::default() };
        let (data, _) = generate(&cfg, &cfg.true_weights().unwrap()).unwrap();
        let (x, y) = pool(&data).unwrap();
        assert_eq!(x.dim(), (6, 4));
        assert_eq!(y.len(), 6);
        assert_eq!(x.row(5), data.prior_tasks[1].x.row(2));
        assert_eq!(y[5], data.prior_tasks[1].y[2]);

        let single = pool_tasks(&data.prior_tasks[..1]).unwrap();
        assert_eq!(single.0, data.prior_tasks[0].x);
        assert_eq!(single.1, data.prior_tasks[0].y);
    }

    #[test]
    fn lambda_schedule_values() {
        let base = lambda_schedule(100, 50, 5, 1.0);
        assert!((base - (100f64.ln() / 250.0).sqrt()).abs() < 1e-15);
        assert!((base - 0.135_723).abs() < 1e-6);
        assert!((lambda_schedule(100, 50, 5, 4.0) - 4.0 * base).abs() < 1e-15);
    }

    #[test]
    fn noiseless_recovery_is_exact() {
        let cfg = GenConfig {
            p: 60,
            k: 4,
            l: 5,
            t: 20,
            sigma_eps: 0.0,
            sigma_delta: 0.0,
            seed: 3,
            ..GenConfig::default()
        };
        let (data, truth) = generate(&cfg, &cfg.true_weights().unwrap()).unwrap();
        let report = recover_common_support(&data, 1e-3, &SolverOptions::default())
            .unwrap()
            .with_truth(&truth);
        assert_eq!(report.exact_recovery, Some(true));
        assert!(report.linf_error.unwrap() < 1e-2);
        assert_eq!(report.pooled_n, 100);
    }

    #[test]
    fn novel_fit_with_true_support_interpolates() {
        let cfg = GenConfig {
            p: 30,
            k: 5,
            l: 5,
            t: 2,
            sigma_eps: 0.0,
            seed: 9,
            ..GenConfig::default()
        };
        let (data, truth) = generate_with_novel_samples(&cfg, &cfg.true_weights().unwrap(), 12).unwrap();
        let report = fit_novel_task(&data.novel_task, &truth.support, 0.1, true, &SolverOptions::default())
            .unwrap()
            .with_truth(&truth);
        assert!(report.refit);
        assert_eq!(report.support_novel, truth.support);
        assert!(report.linf_error.unwrap() <= 1e-6, "{:?}", report.linf_error);
        assert!(report.support_novel.is_subset(&truth.support));
    }

    #[test]
    fn empty_support_is_flagged() {
        let cfg = GenConfig { p: 10, k: 2, l: 4, t: 1, ..GenConfig::default() };
        let (data, _) = generate(&cfg, &cfg.true_weights().unwrap()).unwrap();
        let r = fit_novel_task(&data.novel_task, &SupportSet::empty(), 1.0, true, &SolverOptions::default()).unwrap();
        assert!(r.empty_support);
        assert!(r.w_hat_novel.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lasso_is_positively_homogeneous() {
        // Scaling y (and w*) by α with λ scaled by α scales ŵ by α.
        let cfg = GenConfig { p: 40, k: 5, l: 5, t: 30, seed: 4, ..GenConfig::default() };
        let (data, _) = generate(&cfg, &cfg.true_weights().unwrap()).unwrap();
        let opts = SolverOptions::default();
        let base = recover_common_support(&data, 1.0, &opts).unwrap();
        for alpha in [0.5, 2.0, 8.0] {
            let mut scaled = data.clone();
            for t in &mut scaled.prior_tasks {
                t.y.mapv_inplace(|v| v * alpha);
            }
            let r = recover_common_support(&scaled, alpha, &opts).unwrap();
            assert_eq!(r.recovered_support, base.recovered_support);
            for (a, b) in r.w_hat.iter().zip(&base.w_hat) {
                assert!((a - alpha * b).abs() <= 1e-7 * alpha.max(1.0), "{a} vs {}", alpha * b);
            }
        }
    }

    #[test]
    fn dual_certificate_implies_containment() {
        let opts = SolverOptions::default();
        let mut certified = 0;
        for seed in 0..30 {
            let cfg = GenConfig { p: 100, k: 5, l: 5, t: 40, seed, ..GenConfig::default() };
            let (data, truth) = generate(&cfg, &cfg.true_weights().unwrap()).unwrap();
            let r = recover_common_support(&data, 1.0, &opts).unwrap();
            let off_truth = {
                let (x, y) = pool(&data).unwrap();
                kkt_residual(x.view(), y.view(), r.lambda_used, &Array1::from(r.w_hat.clone()))
                    .dual_off_support(&truth.support)
                    .unwrap()
            };
            if r.converged && off_truth < 1.0 {
                certified += 1;
                assert!(r.recovered_support.is_subset(&truth.support), "seed {seed}");
            }
        }
        assert!(certified > 0);
    }
}
