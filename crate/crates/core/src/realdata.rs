//! Expression tables split into tasks by time-point.
//!
//! Each time-point is a task. The response is one named factor and the
//! covariates are the remaining factors. Cells are shuffled with a single
//! permutation shared by all time-points. The first `l` cells of each
//! time-point are then used for training and the rest for validation.
//!
//! Penalties are searched as multipliers of the method's base rate
//! `√(ln p/(Tl))` (novel task: `√(ln max(|Ŝ|,2)/l)`) by uniform random
//! search over a fixed range.

use std::collections::HashSet;
use std::path::Path;

use log::{debug, warn};
use ndarray::{s, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::{format_g6, Method};
use crate::error::{Error, Result};
use crate::meta::{fit_novel_task, lambda_schedule, recover_common_support};
use crate::model::{MetaDataset, SupportSet, TaskData};
use crate::rng::{substream, StreamRng};
use crate::solvers::{dirty_model, group_lasso, SolverOptions};

/// Cells × factors for every time-point, all of one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionTable {
    values: Vec<Array2<f64>>,
    factor_names: Vec<String>,
    timepoint_labels: Vec<String>,
}

impl ExpressionTable {
    pub fn new(timepoint_labels: Vec<String>, factor_names: Vec<String>, values: Vec<Array2<f64>>) -> Result<Self> {
        if values.is_empty() || values.len() != timepoint_labels.len() {
            return Err(Error::Shape(format!(
                "{} time-point labels for {} value blocks",
                timepoint_labels.len(),
                values.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = factor_names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::Config(format!("duplicate factor name {dup:?}")));
        }
        let shape = (values[0].nrows(), factor_names.len());
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| v.dim() != shape) {
            return Err(Error::Shape(format!(
                "time-point {:?} has shape {:?}, expected {:?}",
                timepoint_labels[i],
                v.dim(),
                shape
            )));
        }
        if values.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite("expression values"));
        }
        Ok(ExpressionTable { values, factor_names, timepoint_labels })
    }

    pub fn timepoint_count(&self) -> usize {
        self.values.len()
    }

    pub fn cells_per_timepoint(&self) -> usize {
        self.values[0].nrows()
    }

    pub fn factor_count(&self) -> usize {
        self.factor_names.len()
    }

    /// `(time-points, cells, factors)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.timepoint_count(), self.cells_per_timepoint(), self.factor_count())
    }

    pub fn factor_names(&self) -> &[String] {
        &self.factor_names
    }

    pub fn timepoint_labels(&self) -> &[String] {
        &self.timepoint_labels
    }

    pub fn values(&self) -> &[Array2<f64>] {
        &self.values
    }

    pub fn factor_index(&self, name: &str) -> Option<usize> {
        self.factor_names.iter().position(|n| n == name)
    }

    /// The first `n` time-points.
    pub fn first_timepoints(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.timepoint_count() {
            return Err(Error::Config(format!(
                "need between 1 and {} time-points, asked for {n}",
                self.timepoint_count()
            )));
        }
        ExpressionTable::new(
            self.timepoint_labels[..n].to_vec(),
            self.factor_names.clone(),
            self.values[..n].to_vec(),
        )
    }

    /// Reorders the factor columns; `order[j]` is the old index of new column `j`.
    pub fn reorder_factors(&self, order: &[usize]) -> Result<Self> {
        check_permutation(order, self.factor_count())?;
        let names = order.iter().map(|&j| self.factor_names[j].clone()).collect();
        let values = self.values.iter().map(|v| v.select(Axis(1), order)).collect();
        ExpressionTable::new(self.timepoint_labels.clone(), names, values)
    }
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n || perm.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
        return Err(Error::Config(format!("not a permutation of 0..{n}")));
    }
    Ok(())
}

/// Reads `timepoint,cell_id,<factors...>`. Rows are grouped by time-point
/// label in order of first appearance; cells keep their file order.
pub fn load_expression_csv(path: &Path, response_name: &str) -> Result<ExpressionTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.len() < 3 || header[0] != "timepoint" || header[1] != "cell_id" {
        return Err(Error::parse(path, "header must start with `timepoint,cell_id` followed by factor names"));
    }
    let factor_names = header[2..].to_vec();
    if !factor_names.iter().any(|n| n == response_name) {
        return Err(Error::Config(format!(
            "response column {response_name:?} not found in {}",
            path.display()
        )));
    }

    let mut labels: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = i + 2;
        let label = rec.get(0).unwrap_or("");
        let group = match labels.iter().position(|l| l == label) {
            Some(g) => g,
            None => {
                labels.push(label.to_owned());
                rows.push(Vec::new());
                labels.len() - 1
            }
        };
        for (j, cell) in rec.iter().enumerate().skip(2) {
            let v: f64 = cell.parse().map_err(|_| {
                Error::parse(path, format!("line {line}, column {:?}: non-numeric value {cell:?}", header[j]))
            })?;
            rows[group].push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::parse(path, "no data rows"));
    }
    let p = factor_names.len();
    let counts: Vec<usize> = rows.iter().map(|r| r.len() / p).collect();
    if counts.iter().any(|&c| c != counts[0]) {
        let detail: Vec<String> = labels.iter().zip(&counts).map(|(l, c)| format!("{l}: {c}")).collect();
        return Err(Error::parse(path, format!("unequal cells per time-point ({})", detail.join(", "))));
    }
    let values = rows
        .into_iter()
        .map(|r| Array2::from_shape_vec((counts[0], p), r).expect("row-major block"))
        .collect();
    ExpressionTable::new(labels, factor_names, values).map_err(|e| Error::parse(path, e.to_string()))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    }
}

/// Writes a table in the layout [`load_expression_csv`] reads.
pub fn write_expression_csv(table: &ExpressionTable, path: &Path) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "timepoint,cell_id,{}", table.factor_names.join(",")).map_err(io)?;
    for (label, block) in table.timepoint_labels.iter().zip(&table.values) {
        for (c, row) in block.rows().into_iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            writeln!(out, "{label},{label}_{c:03},{}", cells.join(",")).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

/// Applies `perm` to the cells of every time-point: new cell `i` is old
/// cell `perm[i]`.
pub fn apply_cell_permutation(table: &ExpressionTable, perm: &[usize]) -> Result<ExpressionTable> {
    check_permutation(perm, table.cells_per_timepoint())?;
    let values = table.values.iter().map(|v| v.select(Axis(0), perm)).collect();
    ExpressionTable::new(table.timepoint_labels.clone(), table.factor_names.clone(), values)
}

/// One uniformly random cell order shared by all time-points.
pub fn permute_cells(table: &ExpressionTable, rng: &mut StreamRng) -> ExpressionTable {
    let mut perm: Vec<usize> = (0..table.cells_per_timepoint()).collect();
    perm.shuffle(rng);
    apply_cell_permutation(table, &perm).expect("shuffle yields a permutation")
}

/// Training tasks, validation cells and the full novel time-point.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSplit {
    /// Prior tasks and the novel task, `l` training cells each.
    pub dataset: MetaDataset,
    /// Remaining cells of every time-point, novel task last.
    pub holdout: Vec<TaskData>,
    /// All cells of the novel time-point.
    pub novel_all: TaskData,
    /// Covariate names in column order.
    pub covariates: Vec<String>,
}

impl TaskSplit {
    /// Z-scores every covariate with the mean and standard deviation of the
    /// pooled prior-task training cells. Constant columns are only centered.
    pub fn standardized(&self) -> Result<TaskSplit> {
        let pooled = ndarray::concatenate(
            Axis(0),
            &self.dataset.prior_tasks.iter().map(|t| t.x.view()).collect::<Vec<_>>(),
        )
        .map_err(|e| Error::Shape(e.to_string()))?;
        let mean = pooled.mean_axis(Axis(0)).expect("nonempty pool");
        let std = pooled.std_axis(Axis(0), 0.0).mapv(|s| if s > 0.0 { s } else { 1.0 });
        let z = |t: &TaskData| TaskData::new(t.task_id, (&t.x - &mean) / &std, t.y.clone());
        Ok(TaskSplit {
            dataset: MetaDataset::new(
                self.dataset.prior_tasks.iter().map(z).collect::<Result<_>>()?,
                z(&self.dataset.novel_task)?,
            )?,
            holdout: self.holdout.iter().map(z).collect::<Result<_>>()?,
            novel_all: z(&self.novel_all)?,
            covariates: self.covariates.clone(),
        })
    }
}

/// All but the last time-point become prior tasks; the last is the novel
/// task. The first `l` cells of each time-point train, the rest validate.
pub fn build_tasks(table: &ExpressionTable, response_name: &str, l: usize) -> Result<TaskSplit> {
    let r = table
        .factor_index(response_name)
        .ok_or_else(|| Error::Config(format!("response column {response_name:?} not in table")))?;
    let cells = table.cells_per_timepoint();
    if l == 0 || l >= cells {
        return Err(Error::Config(format!("need 0 < l < {cells} cells per time-point, got l = {l}")));
    }
    if table.timepoint_count() < 2 {
        return Err(Error::Config("need at least two time-points".into()));
    }
    let covariate_cols: Vec<usize> = (0..table.factor_count()).filter(|&j| j != r).collect();
    let covariates = covariate_cols.iter().map(|&j| table.factor_names[j].clone()).collect();

    let mut train = Vec::new();
    let mut holdout = Vec::new();
    let mut novel_all = None;
    let last = table.timepoint_count() - 1;
    for (t, block) in table.values.iter().enumerate() {
        let x = block.select(Axis(1), &covariate_cols);
        let y = block.column(r).to_owned();
        train.push(TaskData::new(t, x.slice(s![..l, ..]).to_owned(), y.slice(s![..l]).to_owned())?);
        holdout.push(TaskData::new(t, x.slice(s![l.., ..]).to_owned(), y.slice(s![l..]).to_owned())?);
        if t == last {
            novel_all = Some(TaskData::new(t, x, y)?);
        }
    }
    let novel = train.pop().expect("at least two time-points");
    Ok(TaskSplit {
        dataset: MetaDataset::new(train, novel)?,
        holdout,
        novel_all: novel_all.expect("last time-point visited"),
        covariates,
    })
}

/// Outcome of a random search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub best: Vec<f64>,
    pub value: f64,
    /// Every evaluated point with its objective, in sampling order.
    pub trials: Vec<(Vec<f64>, f64)>,
}

/// Smallest sampled value of a non-negative coordinate, relative to its upper bound.
pub const LOG_FLOOR: f64 = 1e-4;

/// Log-uniform on `[max(lo, LOG_FLOOR * hi), hi]` when `0 <= lo`, else uniform.
/// Penalty multipliers matter on a ratio scale, so uniform draws from a wide
/// range would almost never land near the small values that win.
fn sample_coordinate(lo: f64, hi: f64, rng: &mut StreamRng) -> f64 {
    if lo >= 0.0 {
        let floor = lo.max(LOG_FLOOR * hi);
        rng.random_range(floor.ln()..=hi.ln()).exp().clamp(floor, hi)
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Random search over a box, log-uniform along non-negative coordinates.
/// Non-finite objective values are skipped; ties go to the lexicographically
/// smaller point.
pub fn random_search(
    mut objective: impl FnMut(&[f64]) -> f64,
    bounds: &[(f64, f64)],
    evals: usize,
    rng: &mut StreamRng,
) -> Result<SearchResult> {
    if evals == 0 {
        return Err(Error::Config("search needs at least one evaluation".into()));
    }
    if bounds.is_empty() || bounds.iter().any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
        return Err(Error::Config(format!("invalid search bounds {bounds:?}")));
    }
    let mut trials = Vec::with_capacity(evals);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..evals {
        let point: Vec<f64> = bounds.iter().map(|&(lo, hi)| sample_coordinate(lo, hi, rng)).collect();
        let value = objective(&point);
        if value.is_finite() {
            let better = match &best {
                None => true,
                Some((bp, bv)) => value < *bv || (value == *bv && point.as_slice() < bp.as_slice()),
            };
            if better {
                best = Some((point.clone(), value));
            }
        }
        trials.push((point, value));
    }
    let (best, value) = best.ok_or_else(|| {
        Error::Config(format!("objective was non-finite at all {evals} sampled points"))
    })?;
    Ok(SearchResult { best, value, trials })
}

/// One-dimensional [`random_search`]; returns the best sampled value.
pub fn tune_lambda(
    mut objective: impl FnMut(f64) -> f64,
    range: (f64, f64),
    evals: usize,
    rng: &mut StreamRng,
) -> Result<f64> {
    Ok(random_search(|v| objective(v[0]), &[range], evals, rng)?.best[0])
}

/// Mean squared error of a novel-task fit over repeated training draws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NovelEval {
    pub mse_mean: f64,
    pub mse_std: f64,
    pub per_draw: Vec<f64>,
    pub support_sizes: Vec<usize>,
}

fn mse(x: &Array2<f64>, y: &Array1<f64>, w: &Array1<f64>) -> f64 {
    let r = y - &x.dot(w);
    r.dot(&r) / y.len() as f64
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Draws `l` training cells from the novel time-point `novel_rep` times,
/// fits the task on `support` (restricted lasso then least squares) and
/// scores the remaining cells.
pub fn evaluate_novel(
    novel_all: &TaskData,
    support: &SupportSet,
    l: usize,
    novel_rep: usize,
    c_lambda_novel: f64,
    opts: &SolverOptions,
    rng: &mut StreamRng,
) -> Result<NovelEval> {
    let n = novel_all.n_samples();
    if l == 0 || l >= n || novel_rep == 0 {
        return Err(Error::Config(format!(
            "need 0 < l < {n} and at least one draw, got l = {l}, draws = {novel_rep}"
        )));
    }
    if support.len() > l {
        warn!(
            "support of size {} exceeds the {l} novel training cells; least squares may fall back to lasso weights",
            support.len()
        );
    }
    let mut per_draw = Vec::with_capacity(novel_rep);
    let mut support_sizes = Vec::with_capacity(novel_rep);
    for _ in 0..novel_rep {
        let mut idx: Vec<usize> = rand::seq::index::sample(rng, n, l).into_vec();
        idx.sort_unstable();
        let chosen: HashSet<usize> = idx.iter().copied().collect();
        let rest: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
        let train = TaskData::new(
            novel_all.task_id,
            novel_all.x.select(Axis(0), &idx),
            novel_all.y.select(Axis(0), &idx),
        )?;
        let fit = fit_novel_task(&train, support, c_lambda_novel, true, opts)?;
        let x_test = novel_all.x.select(Axis(0), &rest);
        let y_test = novel_all.y.select(Axis(0), &rest);
        per_draw.push(mse(&x_test, &y_test, &fit.weights()));
        support_sizes.push(fit.support_novel.len());
    }
    let (mse_mean, mse_std) = mean_std(&per_draw);
    Ok(NovelEval { mse_mean, mse_std, per_draw, support_sizes })
}

fn default_response() -> String {
    "EGR2".into()
}

/// Pipeline settings; defaults follow the gene-expression protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RealSpec {
    #[serde(default = "default_response")]
    pub response_name: String,
    pub l: usize,
    /// Leading time-points used as prior tasks; the next one is the novel task.
    pub train_tasks: usize,
    pub search_evals: usize,
    pub search_range: (f64, f64),
    pub novel_rep: usize,
    pub outer_reps: usize,
    pub master_seed: u64,
    pub standardize: bool,
}

impl Default for RealSpec {
    fn default() -> Self {
        RealSpec {
            response_name: default_response(),
            l: 5,
            train_tasks: 7,
            search_evals: 30,
            search_range: (0.0, 100.0),
            novel_rep: 6,
            outer_reps: 100,
            master_seed: 0,
            standardize: false,
        }
    }
}

impl RealSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.search_range;
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
            return Err(Error::Config(format!("search_range must satisfy 0 <= lo < hi, got {:?}", self.search_range)));
        }
        if self.l == 0 || self.train_tasks == 0 || self.search_evals == 0 || self.novel_rep == 0 || self.outer_reps == 0 {
            return Err(Error::Config("l, train_tasks, search_evals, novel_rep and outer_reps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Solver settings for the many small fits made while tuning.
fn tuning_options() -> SolverOptions {
    SolverOptions { max_iter: 20_000, ..SolverOptions::default() }
}

fn tuning_multitask_options() -> SolverOptions {
    SolverOptions { max_iter: 5_000, tol: 1e-9, ..SolverOptions::multitask() }
}

/// Common support and per-task weights of one method at given multipliers.
fn fit_support(method: Method, data: &MetaDataset, params: &[f64]) -> Result<(SupportSet, Vec<Array1<f64>>)> {
    let t = data.n_tasks();
    let base = lambda_schedule(data.p.max(2), t, data.samples_per_task(), 1.0);
    match method {
        Method::Meta => {
            let opts = tuning_options();
            let fit = recover_common_support(data, params[0], &opts)?;
            let w = Array1::from(fit.w_hat);
            Ok((fit.recovered_support, vec![w; t]))
        }
        Method::GroupLasso | Method::DirtyModel => {
            let opts = tuning_multitask_options();
            let fit = if method == Method::GroupLasso {
                group_lasso(&data.prior_tasks, params[0] * base, &opts)?
            } else {
                dirty_model(&data.prior_tasks, params[0] * base, params[1] * base, &opts)?
            };
            Ok((fit.union_support(opts.zeta), (0..t).map(|i| fit.task_weights(i)).collect()))
        }
    }
}

/// Validation MSE over the held-out cells of all prior tasks.
fn validation_mse(split: &TaskSplit, weights: &[Array1<f64>]) -> f64 {
    let mut sse = 0.0;
    let mut n = 0usize;
    for (hold, w) in split.holdout.iter().zip(weights) {
        let r = &hold.y - &hold.x.dot(w);
        sse += r.dot(&r);
        n += hold.n_samples();
    }
    sse / n as f64
}

fn search_dims(method: Method) -> usize {
    if method == Method::DirtyModel {
        2
    } else {
        1
    }
}

/// Tuned support-stage multipliers for one method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneReport {
    pub method: Method,
    pub l: usize,
    /// `[c]`, `[c12]` or `[c1, c1inf]`.
    pub hyperparameters: Vec<f64>,
    pub validation_mse: f64,
    pub support: SupportSet,
    pub support_names: Vec<String>,
    pub trials: Vec<(Vec<f64>, f64)>,
}

/// Random search for the support-stage multipliers of `method`, scored by
/// validation MSE on the prior tasks, then a final fit at the optimum.
pub fn tune_support(split: &TaskSplit, method: Method, spec: &RealSpec, rng: &mut StreamRng) -> Result<TuneReport> {
    let bounds = vec![spec.search_range; search_dims(method)];
    let search = random_search(
        |params| match fit_support(method, &split.dataset, params) {
            Ok((_, w)) => validation_mse(split, &w),
            Err(e) => {
                debug!("{method} at {params:?} failed: {e}");
                f64::NAN
            }
        },
        &bounds,
        spec.search_evals,
        rng,
    )?;
    let (support, _) = fit_support(method, &split.dataset, &search.best)?;
    Ok(TuneReport {
        method,
        l: split.dataset.samples_per_task(),
        support_names: support.indices().iter().map(|&j| split.covariates[j].clone()).collect(),
        hyperparameters: search.best,
        validation_mse: search.value,
        support,
        trials: search.trials,
    })
}

/// Tunes the novel-task multiplier on one set of draws and reports the
/// error on a fresh set.
fn novel_stage(split: &TaskSplit, support: &SupportSet, spec: &RealSpec, seed: u64, path: &[u64]) -> Result<NovelEval> {
    let opts = tuning_options();
    let tune_path = [path, &[2]].concat();
    let eval_path = [path, &[3]].concat();
    let c = tune_lambda(
        |c| {
            let mut rng = substream(seed, &tune_path);
            evaluate_novel(&split.novel_all, support, spec.l, spec.novel_rep, c, &opts, &mut rng)
                .map(|e| e.mse_mean)
                .unwrap_or(f64::NAN)
        },
        spec.search_range,
        spec.search_evals,
        &mut substream(seed, &[path, &[1]].concat()),
    )?;
    evaluate_novel(&split.novel_all, support, spec.l, spec.novel_rep, c, &opts, &mut substream(seed, &eval_path))
}

/// Label used for the size-matched random support baseline.
pub const RANDOM_BASELINE: &str = "random";

/// Per-repetition result of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct RepOutcome {
    pub support_size: usize,
    pub mse_mean: f64,
}

/// One output row.
#[derive(Debug, Clone, PartialEq)]
pub struct RealRecord {
    pub method: String,
    pub l: usize,
    pub support_size_mean: f64,
    pub support_size_std: f64,
    pub mse_mean: f64,
    pub mse_std: f64,
    /// Indexed by outer repetition.
    pub per_rep: Vec<RepOutcome>,
}

pub const REAL_CSV_HEADER: &str = "method,l,support_size_mean,support_size_std,mse_mean,mse_std";

fn prepare(table: &ExpressionTable, spec: &RealSpec, rep: u64) -> Result<TaskSplit> {
    let table = table.first_timepoints(spec.train_tasks + 1)?;
    let shuffled = permute_cells(&table, &mut substream(spec.master_seed, &[rep, 0]));
    let split = build_tasks(&shuffled, &spec.response_name, spec.l)?;
    if spec.standardize {
        split.standardized()
    } else {
        Ok(split)
    }
}

fn check_table(table: &ExpressionTable, spec: &RealSpec) -> Result<()> {
    spec.validate()?;
    if table.timepoint_count() < spec.train_tasks + 1 {
        return Err(Error::Config(format!(
            "{} prior tasks need {} time-points, table has {}",
            spec.train_tasks,
            spec.train_tasks + 1,
            table.timepoint_count()
        )));
    }
    if table.factor_index(&spec.response_name).is_none() {
        return Err(Error::Config(format!("response column {:?} not in table", spec.response_name)));
    }
    Ok(())
}

/// Support-stage tuning for a single method on the first outer repetition.
pub fn tune_method(table: &ExpressionTable, spec: &RealSpec, method: Method) -> Result<TuneReport> {
    check_table(table, spec)?;
    let split = prepare(table, spec, 0)?;
    let mi = Method::ALL.iter().position(|&m| m == method).expect("known method") as u64;
    tune_support(&split, method, spec, &mut substream(spec.master_seed, &[0, 1, mi]))
}

/// The full protocol for the three methods plus a random support of the
/// meta method's size, over `outer_reps` shuffles.
pub fn run_realdata(table: &ExpressionTable, spec: &RealSpec, workers: Option<usize>) -> Result<Vec<RealRecord>> {
    check_table(table, spec)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let seed = spec.master_seed;
    let n_arms = Method::ALL.len() + 1;

    let reps: Vec<Result<Vec<RepOutcome>>> = pool.install(|| {
        (0..spec.outer_reps as u64)
            .into_par_iter()
            .map(|r| {
                let split = prepare(table, spec, r)?;
                let mut out = Vec::with_capacity(n_arms);
                let mut meta_size = 0;
                for (mi, &method) in Method::ALL.iter().enumerate() {
                    let mi = mi as u64;
                    let tuned = tune_support(&split, method, spec, &mut substream(seed, &[r, 1, mi]))?;
                    if method == Method::Meta {
                        meta_size = tuned.support.len();
                    }
                    let eval = novel_stage(&split, &tuned.support, spec, seed, &[r, 2, mi])?;
                    out.push(RepOutcome { support_size: tuned.support.len(), mse_mean: eval.mse_mean });
                }
                let p = split.dataset.p;
                let mut cols: Vec<usize> = (0..p).collect();
                cols.shuffle(&mut substream(seed, &[r, 4]));
                let random = SupportSet::new(cols.into_iter().take(meta_size), p)?;
                let eval = novel_stage(&split, &random, spec, seed, &[r, 2, Method::ALL.len() as u64])?;
                out.push(RepOutcome { support_size: random.len(), mse_mean: eval.mse_mean });
                Ok(out)
            })
            .collect()
    });
    let reps: Vec<Vec<RepOutcome>> = reps.into_iter().collect::<Result<_>>()?;

    let names: Vec<String> = Method::ALL.iter().map(|m| m.name().to_owned()).chain([RANDOM_BASELINE.to_owned()]).collect();
    Ok(names
        .into_iter()
        .enumerate()
        .map(|(a, method)| {
            let per_rep: Vec<RepOutcome> = reps.iter().map(|r| r[a].clone()).collect();
            let sizes: Vec<f64> = per_rep.iter().map(|o| o.support_size as f64).collect();
            let mses: Vec<f64> = per_rep.iter().map(|o| o.mse_mean).collect();
            let (support_size_mean, support_size_std) = mean_std(&sizes);
            let (mse_mean, mse_std) = mean_std(&mses);
            RealRecord { method, l: spec.l, support_size_mean, support_size_std, mse_mean, mse_std, per_rep }
        })
        .collect())
}

pub fn write_real_csv(records: &[RealRecord], path: &Path) -> Result<()> {
    let mut text = format!("{REAL_CSV_HEADER}\n");
    for r in records {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.method,
            r.l,
            format_g6(r.support_size_mean),
            format_g6(r.support_size_std),
            format_g6(r.mse_mean),
            format_g6(r.mse_std)
        ));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parameters of the planted-model fixture.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub timepoints: usize,
    pub cells: usize,
    pub factors: usize,
    pub response_name: String,
    /// Covariates (indices among the non-response columns) driving the response.
    pub support: Vec<usize>,
    pub weights: Vec<f64>,
    pub sigma_factor: f64,
    pub sigma_delta: f64,
    pub sigma_noise: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            timepoints: 8,
            cells: 120,
            factors: 45,
            response_name: default_response(),
            support: vec![3, 11, 20],
            weights: vec![1.0, -1.0, 0.8],
            sigma_factor: 1.0,
            sigma_delta: 0.2,
            sigma_noise: 0.3,
            seed: 2024,
        }
    }
}

/// A table whose response is a sparse linear function of the other
/// factors with per-time-point coefficient perturbations. The response is
/// the first column.
pub fn planted_table(cfg: &PlantedConfig) -> Result<ExpressionTable> {
    let p = cfg.factors.checked_sub(1).filter(|&p| p >= 1).ok_or_else(|| Error::Config("need at least two factors".into()))?;
    if cfg.support.len() != cfg.weights.len() || cfg.support.iter().any(|&j| j >= p) {
        return Err(Error::Config("support and weights must match and index covariates".into()));
    }
    let fx = Normal::new(0.0, cfg.sigma_factor).map_err(|e| Error::Config(e.to_string()))?;
    let fd = Normal::new(0.0, cfg.sigma_delta).map_err(|e| Error::Config(e.to_string()))?;
    let fe = Normal::new(0.0, cfg.sigma_noise).map_err(|e| Error::Config(e.to_string()))?;
    let mut values = Vec::with_capacity(cfg.timepoints);
    for t in 0..cfg.timepoints as u64 {
        let mut rng = substream(cfg.seed, &[t]);
        let mut w = Array1::<f64>::zeros(p);
        for (&j, &v) in cfg.support.iter().zip(&cfg.weights) {
            w[j] = v + fd.sample(&mut rng);
        }
        let x = Array2::from_shape_simple_fn((cfg.cells, p), || fx.sample(&mut rng));
        let y = x.dot(&w) + Array1::from_shape_simple_fn(cfg.cells, || fe.sample(&mut rng));
        let mut block = Array2::zeros((cfg.cells, cfg.factors));
        block.column_mut(0).assign(&y);
        block.slice_mut(s![.., 1..]).assign(&x);
        values.push(block);
    }
    let names = std::iter::once(cfg.response_name.clone())
        .chain((1..=p).map(|j| format!("TF{j:02}")))
        .collect();
    let labels = (0..cfg.timepoints).map(|t| format!("t{t}")).collect();
    ExpressionTable::new(labels, names, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn small_csv(dir: &Path) -> std::path::PathBuf {
        let path = dir.join("small.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "timepoint,cell_id,A,B,C").unwrap();
        for t in 0..2 {
            for c in 0..4 {
                writeln!(f, "d{t},c{c},{},{},{}", t * 10 + c, c as f64 * 0.5, -(c as f64)).unwrap();
            }
        }
        path
    }

    #[test]
    fn parses_small_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let table = load_expression_csv(&small_csv(dir.path()), "A").unwrap();
        assert_eq!(table.shape(), (2, 4, 3));
        assert_eq!(table.values()[1][[2, 0]], 12.0);
        assert_eq!(table.timepoint_labels(), ["d0", "d1"]);
    }

    #[test]
    fn missing_response_names_the_column() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_expression_csv(&small_csv(dir.path()), "EGR2").unwrap_err();
        assert!(err.to_string().contains("EGR2"));
    }

    #[test]
    fn ragged_and_non_numeric_inputs_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ragged = dir.path().join("ragged.csv");
        std::fs::write(&ragged, "timepoint,cell_id,A,B\nx,0,1,2\nx,1,1,2\ny,0,3,4\n").unwrap();
        assert!(load_expression_csv(&ragged, "A").unwrap_err().to_string().contains("unequal"));
        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "timepoint,cell_id,A,B\nx,0,1,oops\n").unwrap();
        assert!(load_expression_csv(&bad, "A").unwrap_err().to_string().contains("oops"));
        let dup = dir.path().join("dup.csv");
        std::fs::write(&dup, "timepoint,cell_id,A,A\nx,0,1,2\n").unwrap();
        assert!(load_expression_csv(&dup, "A").is_err());
    }

    #[test]
    fn paper_geometry_gives_44_covariates() {
        let table = planted_table(&PlantedConfig::default()).unwrap();
        assert_eq!(table.shape(), (8, 120, 45));
        let split = build_tasks(&table.first_timepoints(8).unwrap(), "EGR2", 5).unwrap();
        assert_eq!(split.dataset.p, 44);
        assert_eq!(split.dataset.n_tasks(), 7);
        assert_eq!(split.holdout[0].n_samples(), 115);
        assert_eq!(split.dataset.novel_task.task_id, 7);
        assert_eq!(split.novel_all.n_samples(), 120);
    }

    #[test]
    fn split_partitions_each_timepoint() {
        let table = planted_table(&PlantedConfig { cells: 10, ..PlantedConfig::default() }).unwrap();
        let split = build_tasks(&table, "EGR2", 3).unwrap();
        let r = table.factor_index("EGR2").unwrap();
        for t in 0..table.timepoint_count() {
            let train = if t < 7 { &split.dataset.prior_tasks[t] } else { &split.dataset.novel_task };
            let joined = ndarray::concatenate(Axis(0), &[train.y.view(), split.holdout[t].y.view()]).unwrap();
            assert_eq!(joined, table.values()[t].column(r));
        }
        assert!(build_tasks(&table, "EGR2", 10).is_err());
    }

    #[test]
    fn permutation_properties() {
        let table = planted_table(&PlantedConfig { cells: 12, timepoints: 3, ..PlantedConfig::default() }).unwrap();
        let id: Vec<usize> = (0..12).collect();
        assert_eq!(apply_cell_permutation(&table, &id).unwrap(), table);

        let a = permute_cells(&table, &mut substream(5, &[0]));
        let b = permute_cells(&table, &mut substream(5, &[0]));
        assert_eq!(a, b);
        // Permuting twice equals one permutation by the composition.
        let mut p1: Vec<usize> = id.clone();
        p1.shuffle(&mut substream(5, &[1]));
        let mut p2: Vec<usize> = id.clone();
        p2.shuffle(&mut substream(5, &[2]));
        let twice = apply_cell_permutation(&apply_cell_permutation(&table, &p1).unwrap(), &p2).unwrap();
        let composed: Vec<usize> = p2.iter().map(|&i| p1[i]).collect();
        assert_eq!(twice, apply_cell_permutation(&table, &composed).unwrap());
        // Rows move together across columns and time-points.
        for (orig, perm) in table.values().iter().zip(a.values()) {
            let mut x: Vec<Vec<u64>> = orig.rows().into_iter().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
            let mut y: Vec<Vec<u64>> = perm.rows().into_iter().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
            x.sort();
            y.sort();
            assert_eq!(x, y);
        }
    }

    #[test]
    fn search_contracts() {
        let mut rng = substream(1, &[]);
        assert_eq!(tune_lambda(|_| 1.0, (0.0, 100.0), 30, &mut rng.clone()).unwrap(), {
            let r = random_search(|_| 1.0, &[(0.0, 100.0)], 30, &mut rng.clone()).unwrap();
            r.trials.iter().map(|t| t.0[0]).fold(f64::INFINITY, f64::min)
        });
        let r = random_search(|v| (v[0] - 3.0).powi(2), &[(0.0, 100.0)], 30, &mut rng).unwrap();
        assert!(r.trials.iter().any(|t| t.0[0] == r.best[0]));
        assert!(r.trials.iter().all(|t| t.1 >= r.value));
        let a = tune_lambda(|v| (v - 3.0).powi(2), (0.0, 100.0), 30, &mut substream(9, &[])).unwrap();
        let b = tune_lambda(|v| (v - 3.0).powi(2), (0.0, 100.0), 30, &mut substream(9, &[])).unwrap();
        assert_eq!(a, b);
        assert!(tune_lambda(|_| f64::NAN, (0.0, 1.0), 5, &mut substream(0, &[])).is_err());
        assert!(tune_lambda(|v| v, (1.0, 1.0), 5, &mut substream(0, &[])).is_err());
    }

    #[test]
    fn exact_two_factor_model_is_fit_exactly() {
        let mut rng = substream(3, &[]);
        let x = Array2::from_shape_simple_fn((40, 6), || rng.random_range(-2.0..2.0));
        let y = x.column(1).mapv(|v| 2.0 * v) - x.column(4).mapv(|v| 0.5 * v);
        let novel = TaskData::new(0, x, y).unwrap();
        let support = SupportSet::new([1, 4], 6).unwrap();
        let ev = evaluate_novel(&novel, &support, 5, 6, 0.01, &SolverOptions::default(), &mut rng).unwrap();
        assert!(ev.mse_mean <= 1e-10, "{}", ev.mse_mean);
    }

    #[test]
    fn empty_support_scores_the_zero_predictor() {
        let mut rng = substream(4, &[]);
        let x = Array2::from_shape_simple_fn((12, 3), || rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_simple_fn(12, || rng.random_range(-1.0..1.0));
        let novel = TaskData::new(0, x, y.clone()).unwrap();
        let ev = evaluate_novel(&novel, &SupportSet::empty(), 4, 3, 1.0, &SolverOptions::default(), &mut substream(8, &[])).unwrap();
        // Replay the draws to get the held-out cells.
        let mut replay = substream(8, &[]);
        for &got in &ev.per_draw {
            let idx: HashSet<usize> = rand::seq::index::sample(&mut replay, 12, 4).into_iter().collect();
            let rest: Vec<f64> = (0..12).filter(|i| !idx.contains(i)).map(|i| y[i]).collect();
            let want = rest.iter().map(|v| v * v).sum::<f64>() / rest.len() as f64;
            assert!((got - want).abs() < 1e-14);
        }
    }
}
