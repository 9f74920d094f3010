//! Data types shared by the generators, solvers and experiment harness.
//!
//! Every task follows `y = X (w* + delta_t) + eps`, with rows of `X` being
//! samples and columns covariates. Weight vectors are stored densely.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default threshold below which a coefficient is treated as zero.
pub const DEFAULT_ZETA: f64 = 1e-6;

/// One task's samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    pub task_id: usize,
    pub x: Array2<f64>,
    pub y: Array1<f64>,
}

impl TaskData {
    pub fn new(task_id: usize, x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::Shape(format!(
                "task {task_id}: X has {} rows but y has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response vector"));
        }
        Ok(TaskData { task_id, x, y })
    }

    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }
}

/// Prior tasks used for support recovery plus the novel task to be fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaDataset {
    pub prior_tasks: Vec<TaskData>,
    pub novel_task: TaskData,
    pub p: usize,
}

impl MetaDataset {
    pub fn new(prior_tasks: Vec<TaskData>, novel_task: TaskData) -> Result<Self> {
        let p = novel_task.n_features();
        if prior_tasks.is_empty() {
            return Err(Error::Config("at least one prior task is required".into()));
        }
        let l = prior_tasks[0].n_samples();
        for task in &prior_tasks {
            if task.n_features() != p {
                return Err(Error::Shape(format!(
                    "task {} has {} columns, expected {p}",
                    task.task_id,
                    task.n_features()
                )));
            }
            if task.n_samples() != l {
                return Err(Error::Shape(format!(
                    "task {} has {} samples, expected {l}",
                    task.task_id,
                    task.n_samples()
                )));
            }
        }
        Ok(MetaDataset {
            prior_tasks,
            novel_task,
            p,
        })
    }

    /// Number of prior tasks.
    pub fn n_tasks(&self) -> usize {
        self.prior_tasks.len()
    }

    /// Samples per prior task.
    pub fn samples_per_task(&self) -> usize {
        self.prior_tasks[0].n_samples()
    }
}

/// Sorted, deduplicated set of coefficient indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SupportSet {
    indices: Vec<usize>,
}

impl SupportSet {
    pub fn empty() -> Self {
        SupportSet::default()
    }

    /// Builds a support from arbitrary indices, rejecting any `>= p`.
    pub fn new(indices: impl IntoIterator<Item = usize>, p: usize) -> Result<Self> {
        let mut indices: Vec<usize> = indices.into_iter().collect();
        if let Some(&bad) = indices.iter().find(|&&j| j >= p) {
            return Err(Error::Shape(format!("support index {bad} out of range for p = {p}")));
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(SupportSet { indices })
    }

    pub(crate) fn from_sorted(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        SupportSet { indices }
    }

    /// The first `k` coordinates.
    pub fn prefix(k: usize) -> Self {
        SupportSet {
            indices: (0..k).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }

    pub fn is_subset(&self, other: &SupportSet) -> bool {
        self.indices.iter().all(|&j| other.contains(j))
    }

    pub fn union(&self, other: &SupportSet) -> SupportSet {
        let mut merged: Vec<usize> = self.indices.iter().chain(&other.indices).copied().collect();
        merged.sort_unstable();
        merged.dedup();
        SupportSet { indices: merged }
    }

    /// Indices in `[0, p)` not in this set.
    pub fn complement(&self, p: usize) -> SupportSet {
        SupportSet {
            indices: (0..p).filter(|&j| !self.contains(j)).collect(),
        }
    }

    /// Largest index plus one, or zero for the empty set.
    pub fn bound(&self) -> usize {
        self.indices.last().map_or(0, |&j| j + 1)
    }
}

/// The parameters that generated a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub w_star: Vec<f64>,
    /// One deviation per task, novel task last.
    pub deltas: Vec<Vec<f64>>,
    pub support: SupportSet,
    /// `Supp(w* + delta_t)` for each task, novel task last.
    pub per_task_supports: Vec<SupportSet>,
}

impl GroundTruth {
    pub fn task_weights(&self, task: usize) -> Array1<f64> {
        Array1::from_iter(
            self.w_star
                .iter()
                .zip(&self.deltas[task])
                .map(|(w, d)| w + d),
        )
    }

    pub fn novel_weights(&self) -> Array1<f64> {
        self.task_weights(self.deltas.len() - 1)
    }

    pub fn novel_support(&self) -> &SupportSet {
        self.per_task_supports
            .last()
            .expect("ground truth always holds the novel task")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub weights: Array1<f64>,
    pub support: SupportSet,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
}

/// `{j : |w_j| > zeta}`.
pub fn extract_support(w: &Array1<f64>, zeta: f64) -> SupportSet {
    debug_assert!(zeta >= 0.0);
    SupportSet::from_sorted(
        w.iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > zeta)
            .map(|(j, _)| j)
            .collect(),
    )
}

pub fn support_equal(a: &SupportSet, b: &SupportSet) -> bool {
    a == b
}

/// `‖a − b‖_∞`.
pub fn linf_distance(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn extract_support_examples() {
        assert!(extract_support(&array![0.0, 0.0, 0.0], 0.0).is_empty());
        assert_eq!(
            extract_support(&array![1.0, 1e-9, 0.0], 1e-6).indices(),
            &[0]
        );
        assert_eq!(extract_support(&array![0.5, -0.5], 0.0).indices(), &[0, 1]);
    }

    #[test]
    fn support_equality_is_set_equality() {
        let a = SupportSet::new([1, 2], 5).unwrap();
        let b = SupportSet::new([2, 1], 5).unwrap();
        assert!(support_equal(&a, &b));
        let c = SupportSet::new([1], 5).unwrap();
        assert!(!support_equal(&c, &a));
        assert!(support_equal(&SupportSet::empty(), &SupportSet::empty()));
    }

    #[test]
    fn support_rejects_out_of_range() {
        assert!(SupportSet::new([0, 3], 3).is_err());
        let s = SupportSet::new([4, 1, 1], 5).unwrap();
        assert_eq!(s.indices(), &[1, 4]);
        assert_eq!(s.complement(5).indices(), &[0, 2, 3]);
    }

    #[test]
    fn task_data_checks_shape_and_finiteness() {
        let x = Array2::zeros((3, 2));
        assert!(TaskData::new(0, x.clone(), Array1::zeros(2)).is_err());
        assert!(TaskData::new(0, x.clone(), array![0.0, f64::NAN, 1.0]).is_err());
        assert!(TaskData::new(0, x, Array1::zeros(3)).is_ok());
    }

    #[test]
    fn dataset_requires_equal_shapes() {
        let t = |id, n, p| TaskData::new(id, Array2::zeros((n, p)), Array1::zeros(n)).unwrap();
        assert!(MetaDataset::new(vec![t(0, 3, 4), t(1, 3, 4)], t(2, 8, 4)).is_ok());
        assert!(MetaDataset::new(vec![t(0, 3, 4), t(1, 2, 4)], t(2, 3, 4)).is_err());
        assert!(MetaDataset::new(vec![t(0, 3, 4)], t(1, 3, 5)).is_err());
        assert!(MetaDataset::new(vec![], t(1, 3, 5)).is_err());
    }

    proptest! {
        #[test]
        fn extraction_is_monotone_in_threshold(
            w in proptest::collection::vec(-2.0f64..2.0, 1..20),
            a in 0.0f64..1.0,
            b in 0.0f64..1.0,
        ) {
            let w = Array1::from(w);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(extract_support(&w, hi).is_subset(&extract_support(&w, lo)));
        }

        #[test]
        fn zero_threshold_gives_nonzero_pattern(
            w in proptest::collection::vec(prop_oneof![Just(0.0f64), -1.0f64..1.0], 1..20),
        ) {
            let w = Array1::from(w);
            let expect: Vec<usize> = (0..w.len()).filter(|&j| w[j] != 0.0).collect();
            let got = extract_support(&w, 0.0);
            prop_assert_eq!(got.indices(), expect.as_slice());
        }
    }
}
