//! Monte-Carlo phase-curve experiments.
//!
//! A sweep is a Cartesian grid over `p`, `l` and either `T` or the rescaled
//! sample size `C = Tl/(k ln(p − k))`. Every repetition draws its data from
//! `substream(master_seed, [grid_index, rep_index])`, so results do not
//! depend on how repetitions are scheduled across workers. In a comparison
//! all methods see the same draws.

mod output;

pub use output::{format_g6, read_csv, write_csv, CSV_HEADER};

use std::fmt;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meta::{lambda_schedule, recover_common_support};
use crate::model::{linf_distance, GroundTruth, MetaDataset};
use crate::rng::derive_seed;
use crate::solvers::{dirty_model, group_lasso, MultiTaskResult, SolverOptions};
use crate::synth::{generate, make_true_weights, GenConfig};

/// Environment variable capping the worker count.
pub const WORKERS_ENV: &str = "METASPARSE_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Meta,
    GroupLasso,
    DirtyModel,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Meta, Method::GroupLasso, Method::DirtyModel];

    pub fn name(self) -> &'static str {
        match self {
            Method::Meta => "meta",
            Method::GroupLasso => "group_lasso",
            Method::DirtyModel => "dirty_model",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Grid axes. Unset axes take their value from the base configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(rename = "T_values", default, skip_serializing_if = "Option::is_none")]
    pub t_values: Option<Vec<usize>>,
    #[serde(rename = "C_values", default, skip_serializing_if = "Option::is_none")]
    pub c_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_values: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_values: Option<Vec<usize>>,
}

/// `λ1∞ = (offset + slope·T)·λ1 / divisor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinfRule {
    pub offset: f64,
    pub slope: f64,
    pub divisor: f64,
}

impl Default for LinfRule {
    fn default() -> Self {
        LinfRule { offset: 1.0, slope: 1.5, divisor: 2.5 }
    }
}

impl LinfRule {
    pub fn apply(&self, t: usize, lambda1: f64) -> f64 {
        (self.offset + self.slope * t as f64) * lambda1 / self.divisor
    }
}

/// Multipliers of `√(ln p/(Tl))` for each method's penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LambdaConstants {
    pub c: f64,
    pub c12: f64,
    pub c1: f64,
    pub c1inf_rule: LinfRule,
}

impl Default for LambdaConstants {
    fn default() -> Self {
        LambdaConstants { c: 1.0, c12: 30.0, c1: 30.0, c1inf_rule: LinfRule::default() }
    }
}

/// Penalty levels used at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalties {
    /// `λ`, `λ12` or `λ1` depending on the method.
    pub primary: f64,
    /// Dirty model only: `λ1∞`.
    pub linf: Option<f64>,
}

impl LambdaConstants {
    pub fn penalties(&self, method: Method, p: usize, t: usize, l: usize) -> Penalties {
        match method {
            Method::Meta => Penalties { primary: lambda_schedule(p, t, l, self.c), linf: None },
            Method::GroupLasso => Penalties { primary: lambda_schedule(p, t, l, self.c12), linf: None },
            Method::DirtyModel => {
                let l1 = lambda_schedule(p, t, l, self.c1);
                Penalties { primary: l1, linf: Some(self.c1inf_rule.apply(t, l1)) }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let r = &self.c1inf_rule;
        let vals = [("c", self.c), ("c12", self.c12), ("c1", self.c1), ("offset", r.offset), ("slope", r.slope)];
        for (name, v) in vals {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("lambda constant {name} must be finite and >= 0, got {v}")));
            }
        }
        if !(r.divisor.is_finite() && r.divisor > 0.0) {
            return Err(Error::Config(format!("c1inf_rule.divisor must be > 0, got {}", r.divisor)));
        }
        Ok(())
    }
}

fn default_reps() -> usize {
    100
}

fn default_method() -> Method {
    Method::Meta
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub base: GenConfig,
    pub sweep: Sweep,
    #[serde(default = "default_reps")]
    pub reps: usize,
    /// Method for [`run_phase`].
    #[serde(default = "default_method")]
    pub method: Method,
    /// Methods for [`run_compare`], in output order.
    #[serde(default = "default_methods")]
    pub compare_methods: Vec<Method>,
    #[serde(default)]
    pub lambda_constants: LambdaConstants,
    #[serde(default)]
    pub master_seed: u64,
}

impl ExperimentSpec {
    pub fn new(base: GenConfig, sweep: Sweep, method: Method) -> Self {
        ExperimentSpec {
            base,
            sweep,
            reps: default_reps(),
            method,
            compare_methods: default_methods(),
            lambda_constants: LambdaConstants::default(),
            master_seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ExperimentSpec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        let s = &self.sweep;
        if s.t_values.is_some() && s.c_values.is_some() {
            return Err(Error::Config("sweep may set T_values or C_values, not both".into()));
        }
        if s.t_values.is_none() && s.c_values.is_none() && s.l_values.is_none() && s.p_values.is_none() {
            return Err(Error::Config("sweep is empty".into()));
        }
        let empty_axis = s.t_values.as_ref().is_some_and(Vec::is_empty)
            || s.c_values.as_ref().is_some_and(Vec::is_empty)
            || s.l_values.as_ref().is_some_and(Vec::is_empty)
            || s.p_values.as_ref().is_some_and(Vec::is_empty);
        if empty_axis {
            return Err(Error::Config("sweep axes must be nonempty".into()));
        }
        if let Some(cs) = &s.c_values {
            if let Some(c) = cs.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
                return Err(Error::Config(format!("C values must be > 0, got {c}")));
            }
        }
        if self.compare_methods.is_empty() {
            return Err(Error::Config("compare_methods is empty".into()));
        }
        self.lambda_constants.validate()?;
        for point in self.grid()? {
            point.config(&self.base, 0).validate()?;
            if point.p <= self.base.k {
                return Err(Error::Config(format!("need p > k, got p = {}, k = {}", point.p, self.base.k)));
            }
        }
        Ok(())
    }

    /// Grid points in output order: `p` outermost, then `l`, then `T`/`C`.
    pub fn grid(&self) -> Result<Vec<GridPoint>> {
        let k = self.base.k;
        let ps = self.sweep.p_values.clone().unwrap_or_else(|| vec![self.base.p]);
        let ls = self.sweep.l_values.clone().unwrap_or_else(|| vec![self.base.l]);
        let mut out = Vec::new();
        for &p in &ps {
            for &l in &ls {
                if l == 0 {
                    return Err(Error::Config("l values must be >= 1".into()));
                }
                match (&self.sweep.t_values, &self.sweep.c_values) {
                    (_, Some(cs)) => {
                        for &c in cs {
                            out.push(GridPoint { p, l, t: t_for_c(c, l, k, p)?, c_target: Some(c) });
                        }
                    }
                    (Some(ts), None) => {
                        out.extend(ts.iter().map(|&t| GridPoint { p, l, t, c_target: None }));
                    }
                    (None, None) => out.push(GridPoint { p, l, t: self.base.t, c_target: None }),
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub p: usize,
    pub l: usize,
    pub t: usize,
    /// The requested `C` when the grid was given in `C`.
    pub c_target: Option<f64>,
}

impl GridPoint {
    fn config(&self, base: &GenConfig, seed: u64) -> GenConfig {
        GenConfig { p: self.p, l: self.l, t: self.t, seed, ..base.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRecord {
    pub method: Method,
    pub p: usize,
    pub k: usize,
    pub l: usize,
    pub t: usize,
    /// The realized `C` of `(T, l, k, p)`.
    pub c: f64,
    /// `λ` (meta), `λ12` (group lasso) or `λ1` (dirty model).
    pub lambda: f64,
    pub reps: usize,
    pub p_exact: f64,
    pub p_std: f64,
    pub err_mean: f64,
    pub err_std: f64,
    pub p_exact_last_task: Option<f64>,
    pub master_seed: u64,
    /// Dirty model `λ1∞`; not written to CSV.
    pub lambda_linf: Option<f64>,
    /// Repetitions whose solver stopped at its iteration cap.
    pub nonconverged: usize,
}

/// `Tl / (k ln(p − k))`.
pub fn rescale_c(t: usize, l: usize, k: usize, p: usize) -> Result<f64> {
    if k == 0 || p <= k {
        return Err(Error::Config(format!("need p > k >= 1, got p = {p}, k = {k}")));
    }
    Ok((t * l) as f64 / (k as f64 * ((p - k) as f64).ln()))
}

/// Smallest `T ≥ 1` with `rescale_c(T, ..) ≥ C`.
pub fn t_for_c(c: f64, l: usize, k: usize, p: usize) -> Result<usize> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Config(format!("C must be > 0, got {c}")));
    }
    if k == 0 || p <= k || l == 0 {
        return Err(Error::Config(format!("need p > k >= 1 and l >= 1, got p = {p}, k = {k}, l = {l}")));
    }
    let t = (c * k as f64 * ((p - k) as f64).ln() / l as f64).ceil();
    Ok((t as usize).max(1))
}

/// Worker count from `METASPARSE_WORKERS`, if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    let raw = std::env::var(WORKERS_ENV).ok()?;
    match raw.trim().parse::<usize>() {
        Ok(n) if n >= 1 => Some(n),
        _ => {
            warn!("ignoring {WORKERS_ENV}={raw:?}: expected a positive integer");
            None
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Outcome {
    success: bool,
    error: f64,
    last_task: Option<bool>,
    converged: bool,
}

fn evaluate(
    method: Method,
    data: &MetaDataset,
    truth: &GroundTruth,
    pen: Penalties,
    c_meta: f64,
    zeta: f64,
) -> Result<Outcome> {
    match method {
        Method::Meta => {
            let opts = SolverOptions { zeta, ..SolverOptions::default() };
            let fit = recover_common_support(data, c_meta, &opts)?.with_truth(truth);
            Ok(Outcome {
                success: fit.converged && fit.exact_recovery == Some(true),
                error: fit.linf_error.unwrap_or(f64::NAN),
                last_task: None,
                converged: fit.converged,
            })
        }
        Method::GroupLasso | Method::DirtyModel => {
            let opts = SolverOptions { zeta, ..SolverOptions::multitask() };
            let fit: MultiTaskResult = if method == Method::GroupLasso {
                group_lasso(&data.prior_tasks, pen.primary, &opts)?
            } else {
                dirty_model(&data.prior_tasks, pen.primary, pen.linf.expect("dirty model has λ1∞"), &opts)?
            };
            let last = data.n_tasks() - 1;
            let union_ok = fit.union_support(zeta) == truth.support;
            let last_ok = fit.task_support(last, zeta) == truth.per_task_supports[last];
            Ok(Outcome {
                success: fit.converged && union_ok,
                error: linf_distance(&fit.task_weights(last), &truth.task_weights(last)),
                last_task: Some(fit.converged && last_ok),
                converged: fit.converged,
            })
        }
    }
}

fn summarize(
    method: Method,
    point: &GridPoint,
    spec: &ExperimentSpec,
    pen: Penalties,
    outcomes: &[Outcome],
) -> Result<PhaseRecord> {
    let reps = outcomes.len();
    let n = reps as f64;
    let successes = outcomes.iter().filter(|o| o.success).count();
    let p_exact = successes as f64 / n;
    let err_mean = outcomes.iter().map(|o| o.error).sum::<f64>() / n;
    let err_std = if reps > 1 {
        (outcomes.iter().map(|o| (o.error - err_mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let p_exact_last_task = match method {
        Method::Meta => None,
        _ => Some(outcomes.iter().filter(|o| o.last_task == Some(true)).count() as f64 / n),
    };
    let nonconverged = outcomes.iter().filter(|o| !o.converged).count();
    if nonconverged > 0 {
        warn!(
            "{method} at p = {}, l = {}, T = {}: {nonconverged}/{reps} repetitions did not converge (counted as failures)",
            point.p, point.l, point.t
        );
    }
    Ok(PhaseRecord {
        method,
        p: point.p,
        k: spec.base.k,
        l: point.l,
        t: point.t,
        c: rescale_c(point.t, point.l, spec.base.k, point.p)?,
        lambda: pen.primary,
        reps,
        p_exact,
        p_std: binomial_std(p_exact, reps),
        err_mean,
        err_std,
        p_exact_last_task,
        master_seed: spec.master_seed,
        lambda_linf: pen.linf,
        nonconverged,
    })
}

/// `√(p(1 − p)/reps)`.
pub fn binomial_std(p_exact: f64, reps: usize) -> f64 {
    (p_exact * (1.0 - p_exact) / reps as f64).sqrt()
}

fn run_methods(spec: &ExperimentSpec, methods: &[Method], workers: Option<usize>) -> Result<Vec<PhaseRecord>> {
    spec.validate()?;
    let grid = spec.grid()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let zeta = crate::model::DEFAULT_ZETA;

    let mut records = Vec::with_capacity(grid.len() * methods.len());
    for (gi, point) in grid.iter().enumerate() {
        let pens: Vec<Penalties> = methods
            .iter()
            .map(|&m| spec.lambda_constants.penalties(m, point.p, point.t, point.l))
            .collect();
        let w_star = make_true_weights(point.p, spec.base.k, spec.base.amplitude)?;
        let per_rep: Vec<Result<Vec<Outcome>>> = pool.install(|| {
            (0..spec.reps)
                .into_par_iter()
                .map(|rep| {
                    let seed = derive_seed(spec.master_seed, &[gi as u64, rep as u64]);
                    let (data, truth) = generate(&point.config(&spec.base, seed), &w_star)?;
                    methods
                        .iter()
                        .zip(&pens)
                        .map(|(&m, &pen)| evaluate(m, &data, &truth, pen, spec.lambda_constants.c, zeta))
                        .collect()
                })
                .collect()
        });
        let per_rep: Vec<Vec<Outcome>> = per_rep.into_iter().collect::<Result<_>>()?;
        for (mi, &method) in methods.iter().enumerate() {
            let outcomes: Vec<Outcome> = per_rep.iter().map(|r| r[mi]).collect();
            let rec = summarize(method, point, spec, pens[mi], &outcomes)?;
            debug!(
                "{method} p={} l={} T={} C={:.3}: p_exact={:.3} err={:.4}",
                rec.p, rec.l, rec.t, rec.c, rec.p_exact, rec.err_mean
            );
            records.push(rec);
        }
    }
    Ok(records)
}

/// Phase curve of `spec.method` over the sweep.
pub fn run_phase(spec: &ExperimentSpec) -> Result<Vec<PhaseRecord>> {
    run_phase_with_workers(spec, workers_from_env())
}

pub fn run_phase_with_workers(spec: &ExperimentSpec, workers: Option<usize>) -> Result<Vec<PhaseRecord>> {
    run_methods(spec, &[spec.method], workers)
}

/// All of `spec.compare_methods` on shared draws; rows in grid order, then
/// method order.
pub fn run_compare(spec: &ExperimentSpec) -> Result<Vec<PhaseRecord>> {
    run_compare_with_workers(spec, workers_from_env())
}

pub fn run_compare_with_workers(spec: &ExperimentSpec, workers: Option<usize>) -> Result<Vec<PhaseRecord>> {
    run_methods(spec, &spec.compare_methods, workers)
}

/// Meta recovery probability on a `(T, l)` curve, interpolated in `C`.
///
/// `curve` must be sorted by `C`; values outside its range are `None`.
pub fn interpolate_curve(curve: &[(f64, f64)], c: f64) -> Option<f64> {
    let first = curve.first()?;
    let last = curve.last()?;
    if c < first.0 || c > last.0 {
        return None;
    }
    for w in curve.windows(2) {
        let (c0, p0) = w[0];
        let (c1, p1) = w[1];
        if c >= c0 && c <= c1 {
            if c1 == c0 {
                return Some(p0);
            }
            return Some(p0 + (p1 - p0) * (c - c0) / (c1 - c0));
        }
    }
    Some(last.1)
}

/// Largest pairwise gap between curves, compared at every grid `C` of each
/// curve that falls inside the other's range.
pub fn max_pairwise_deviation(curves: &[Vec<(f64, f64)>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in curves.iter().enumerate() {
        for (j, b) in curves.iter().enumerate() {
            if i == j {
                continue;
            }
            for &(c, pa) in a {
                if let Some(pb) = interpolate_curve(b, c) {
                    worst = worst.max((pa - pb).abs());
                }
            }
        }
    }
    worst
}

/// Groups meta records into `(C, p_exact)` curves keyed by `key`.
pub fn curves_by<K: PartialEq + Copy>(records: &[PhaseRecord], key: impl Fn(&PhaseRecord) -> K) -> Vec<(K, Vec<(f64, f64)>)> {
    let mut out: Vec<(K, Vec<(f64, f64)>)> = Vec::new();
    for r in records {
        let k = key(r);
        match out.iter_mut().find(|(kk, _)| *kk == k) {
            Some((_, v)) => v.push((r.c, r.p_exact)),
            None => out.push((k, vec![(r.c, r.p_exact)])),
        }
    }
    for (_, v) in &mut out {
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rescaled_sample_size_examples() {
        // l = k·ln(p − k) with T = 1 puts C at exactly one.
        let l = (5.0 * 95f64.ln()) as usize;
        let exact = rescale_c(1, l, 5, 100).unwrap() * 5.0 * 95f64.ln() / l as f64;
        assert!((exact - 1.0).abs() < 1e-12);
        let c = rescale_c(91, 5, 5, 100).unwrap();
        assert!((c - 455.0 / (5.0 * 95f64.ln())).abs() < 1e-12);
        assert!((c - 19.983).abs() < 1e-3);
        assert!(rescale_c(3, 5, 5, 5).is_err());
        let c1 = rescale_c(10, 5, 5, 100).unwrap();
        let c2 = rescale_c(20, 5, 5, 100).unwrap();
        assert!((c2 - 2.0 * c1).abs() < 1e-12);
    }

    #[test]
    fn inverse_rounds_up_with_floor_at_one() {
        assert_eq!(t_for_c(1.0, 5, 5, 100).unwrap(), 5);
        assert_eq!(t_for_c(1e-9, 5, 5, 100).unwrap(), 1);
        for &c in &[0.3, 1.0, 2.5, 7.7, 20.0] {
            for &l in &[3, 5, 7, 10] {
                let t = t_for_c(c, l, 5, 100).unwrap();
                let back = rescale_c(t, l, 5, 100).unwrap();
                let step = l as f64 / (5.0 * 95f64.ln());
                assert!(back >= c - 1e-12 && back <= c + step + 1e-12, "c={c} l={l}");
            }
        }
        assert!(t_for_c(0.0, 5, 5, 100).is_err());
    }

    #[test]
    fn dirty_rule_at_one_task_is_lambda1() {
        let pen = LambdaConstants::default().penalties(Method::DirtyModel, 100, 1, 10);
        assert!((pen.linf.unwrap() - pen.primary).abs() < 1e-15);
    }

    #[test]
    fn binomial_example() {
        assert!((binomial_std(0.5, 100) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn spec_json_is_strict_and_defaults_apply() {
        let spec = ExperimentSpec::from_json(r#"{"sweep": {"T_values": [2, 4]}}"#).unwrap();
        assert_eq!(spec.reps, 100);
        assert_eq!(spec.method, Method::Meta);
        assert_eq!(spec.lambda_constants.c12, 30.0);
        assert!(ExperimentSpec::from_json(r#"{"sweep": {"T_values": [2]}, "bogus": 1}"#).is_err());
        assert!(ExperimentSpec::from_json(r#"{"sweep": {}}"#).is_err());
        assert!(ExperimentSpec::from_json(r#"{"sweep": {"T_values": [2]}, "reps": 0}"#).is_err());
        let back = ExperimentSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn grid_order_is_p_then_l_then_c() {
        let mut spec = ExperimentSpec::new(
            GenConfig::default(),
            Sweep { c_values: Some(vec![1.0, 2.0]), l_values: Some(vec![3, 5]), p_values: Some(vec![50, 100]), ..Sweep::default() },
            Method::Meta,
        );
        spec.reps = 1;
        let g = spec.grid().unwrap();
        assert_eq!(g.len(), 8);
        assert_eq!((g[0].p, g[0].l, g[0].c_target), (50, 3, Some(1.0)));
        assert_eq!((g[1].p, g[1].l, g[1].c_target), (50, 3, Some(2.0)));
        assert_eq!((g[2].p, g[2].l), (50, 5));
        assert_eq!(g[4].p, 100);
    }

    #[test]
    fn small_sweep_is_worker_independent() {
        let mut spec = ExperimentSpec::new(
            GenConfig { p: 20, k: 2, ..GenConfig::default() },
            Sweep { t_values: Some(vec![1, 6]), ..Sweep::default() },
            Method::Meta,
        );
        spec.reps = 8;
        spec.master_seed = 11;
        let a = run_compare_with_workers(&spec, Some(1)).unwrap();
        let b = run_compare_with_workers(&spec, Some(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        assert_eq!(a[0].method, Method::Meta);
        assert_eq!(a[1].method, Method::GroupLasso);
        assert!(a[0].p_exact_last_task.is_none());
        assert!(a[2].p_exact_last_task.is_some());
        for r in &a {
            assert_eq!(r.p_std, binomial_std(r.p_exact, r.reps));
        }
    }

    #[test]
    fn interpolation_and_deviation() {
        let a = vec![(1.0, 0.0), (3.0, 1.0)];
        assert_eq!(interpolate_curve(&a, 2.0), Some(0.5));
        assert_eq!(interpolate_curve(&a, 0.5), None);
        let b = vec![(2.0, 0.7)];
        assert!((max_pairwise_deviation(&[a, b]) - 0.2).abs() < 1e-12);
    }
}
