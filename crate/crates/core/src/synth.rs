//! Seeded synthetic task generation.
//!
//! All scale parameters are standard deviations. Uniform laws with scale
//! `σ` are `Uniform(−σ√3, σ√3)` so they share the variance of the matching
//! Gaussian.
//!
//! Each task draws from its own substreams of the configured seed, one per
//! component (deviation, covariance, covariates, noise), so a dataset is a
//! pure function of `(config, w_star)`.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{extract_support, GroundTruth, MetaDataset, SupportSet, TaskData};
use crate::rng::{substream, StreamRng};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Law of the task deviations on the common support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaKind {
    Gaussian,
    Uniform,
    /// Half the time the deviation cancels the entry of `w*`, otherwise Gaussian.
    DiracMixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Uniform,
}

/// Covariate law. The covariance variants carry the perturbation scale `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XKind {
    /// Independent Gaussian entries.
    Iid,
    /// Independent uniform entries.
    Uniform,
    /// One `Σ = AᵀA`, `A = U0 + U1`, shared by all tasks.
    FixedCovariance(f64),
    /// A fresh `Σ = AᵀA` for every task.
    PerTaskCovariance(f64),
    /// `A = U0 + a·ΔΔᵀ` and rows centred at the task deviation.
    DeltaDependent(f64),
}

impl XKind {
    fn perturbation(&self) -> Option<f64> {
        match *self {
            XKind::Iid | XKind::Uniform => None,
            XKind::FixedCovariance(a) | XKind::PerTaskCovariance(a) | XKind::DeltaDependent(a) => {
                Some(a)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenConfig {
    pub p: usize,
    pub k: usize,
    pub l: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub sigma_eps: f64,
    pub sigma_delta: f64,
    pub sigma_x: f64,
    pub amplitude: f64,
    pub delta_kind: DeltaKind,
    pub noise_kind: NoiseKind,
    pub x_kind: XKind,
    pub seed: u64,
}

impl Default for GenConfig {
    /// The independent Gaussian setting: `σε = 0.1`, `σΔ = 0.2`, `σx = 1`,
    /// five unit entries out of 100.
    fn default() -> Self {
        GenConfig {
            p: 100,
            k: 5,
            l: 5,
            t: 20,
            sigma_eps: 0.1,
            sigma_delta: 0.2,
            sigma_x: 1.0,
            amplitude: 1.0,
            delta_kind: DeltaKind::Gaussian,
            noise_kind: NoiseKind::Gaussian,
            x_kind: XKind::Iid,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.p {
            return Err(Error::Config(format!(
                "need 0 < k <= p, got k = {}, p = {}",
                self.k, self.p
            )));
        }
        if self.l == 0 || self.t == 0 {
            return Err(Error::Config("l and T must be at least 1".into()));
        }
        for (name, v) in [
            ("sigma_eps", self.sigma_eps),
            ("sigma_delta", self.sigma_delta),
            ("sigma_x", self.sigma_x),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !self.amplitude.is_finite() {
            return Err(Error::NonFinite("amplitude"));
        }
        if let Some(a) = self.x_kind.perturbation() {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::Config(format!("perturbation scale must be >= 0, got {a}")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: GenConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("GenConfig serializes")
    }

    pub fn true_weights(&self) -> Result<Array1<f64>> {
        make_true_weights(self.p, self.k, self.amplitude)
    }
}

/// A symmetric positive-definite covariance with its Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpec {
    sigma: Array2<f64>,
    chol_lower: Array2<f64>,
}

impl CovarianceSpec {
    pub fn new(sigma: Array2<f64>) -> Result<Self> {
        let p = sigma.nrows();
        if sigma.ncols() != p {
            return Err(Error::Shape(format!("covariance is {}x{}", p, sigma.ncols())));
        }
        for i in 0..p {
            for j in 0..i {
                if (sigma[[i, j]] - sigma[[j, i]]).abs() > 1e-12 {
                    return Err(Error::Config(format!(
                        "covariance not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let chol_lower = linalg::cholesky_lower(sigma.view())?;
        Ok(CovarianceSpec { sigma, chol_lower })
    }

    pub fn identity(p: usize, scale: f64) -> Self {
        let sigma = Array2::eye(p) * (scale * scale);
        let chol_lower = Array2::eye(p) * scale;
        CovarianceSpec { sigma, chol_lower }
    }

    pub fn sigma(&self) -> &Array2<f64> {
        &self.sigma
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    /// `l` rows from `N(mean, Σ)`.
    fn sample_rows(&self, l: usize, mean: Option<&Array1<f64>>, rng: &mut StreamRng) -> Array2<f64> {
        let p = self.dim();
        let z = Array2::from_shape_simple_fn((l, p), || rng.sample::<f64, _>(rand_distr::StandardNormal));
        let mut x = z.dot(&self.chol_lower.t());
        if let Some(mu) = mean {
            x += mu;
        }
        x
    }
}

/// First `k` entries equal to `amplitude`, the rest zero.
pub fn make_true_weights(p: usize, k: usize, amplitude: f64) -> Result<Array1<f64>> {
    if k == 0 || k > p {
        return Err(Error::Config(format!("need 0 < k <= p, got k = {k}, p = {p}")));
    }
    Ok(Array1::from_shape_fn(p, |j| if j < k { amplitude } else { 0.0 }))
}

fn uniform_sym(half_width: f64) -> Option<Uniform<f64>> {
    (half_width > 0.0).then(|| Uniform::new_inclusive(-half_width, half_width).expect("finite bounds"))
}

/// A task deviation: zero off `support`, independent draws on it.
pub fn sample_delta(
    kind: DeltaKind,
    support: &SupportSet,
    sigma_delta: f64,
    w_star: &Array1<f64>,
    rng: &mut StreamRng,
) -> Array1<f64> {
    let mut delta = Array1::zeros(w_star.len());
    let normal = Normal::new(0.0, sigma_delta).expect("sigma_delta validated");
    match kind {
        DeltaKind::Gaussian => {
            for &m in support.indices() {
                delta[m] = normal.sample(rng);
            }
        }
        DeltaKind::Uniform => {
            if let Some(u) = uniform_sym(sigma_delta * SQRT3) {
                for &m in support.indices() {
                    delta[m] = u.sample(rng);
                }
            }
        }
        DeltaKind::DiracMixture => {
            for &m in support.indices() {
                delta[m] = if rng.random_bool(0.5) {
                    -w_star[m]
                } else {
                    normal.sample(rng)
                };
            }
        }
    }
    delta
}

/// Haar-style random orthogonal matrix: QR of a Gaussian matrix with each
/// column's first nonzero entry made positive.
pub fn random_orthonormal(p: usize, rng: &mut StreamRng) -> Array2<f64> {
    let g = Array2::from_shape_simple_fn((p, p), || rng.sample::<f64, _>(rand_distr::StandardNormal));
    let mut q = linalg::qr_q(g.view());
    for mut col in q.axis_iter_mut(Axis(1)) {
        if let Some(first) = col.iter().copied().find(|v| *v != 0.0) {
            if first < 0.0 {
                col.mapv_inplace(|v| -v);
            }
        }
    }
    q
}

/// Covariance for the given covariate law.
///
/// The `A`-based settings are scaled by `σx²`; with `a = 0` they reduce to
/// `σx²·I` because `U0` is orthogonal.
pub fn build_covariance(
    kind: XKind,
    sigma_x: f64,
    delta: Option<&Array1<f64>>,
    p: usize,
    rng: &mut StreamRng,
) -> Result<CovarianceSpec> {
    let a_scale = match kind.perturbation() {
        None => return Ok(CovarianceSpec::identity(p, sigma_x)),
        Some(a) => a,
    };
    if !(a_scale >= 0.0) {
        return Err(Error::Config(format!("perturbation scale must be >= 0, got {a_scale}")));
    }
    let mut a = random_orthonormal(p, rng);
    match kind {
        XKind::DeltaDependent(_) => {
            let d = delta.ok_or_else(|| {
                Error::Config("delta_dependent covariance needs the task deviation".into())
            })?;
            if d.len() != p {
                return Err(Error::Shape(format!("delta has length {}, expected {p}", d.len())));
            }
            for i in 0..p {
                for j in 0..p {
                    a[[i, j]] += a_scale * d[i] * d[j];
                }
            }
        }
        _ => {
            if let Some(u) = uniform_sym(a_scale) {
                a.mapv_inplace(|v| v + u.sample(rng));
            }
        }
    }
    let ata = a.t().dot(&a);
    let scale = sigma_x * sigma_x;
    let sigma = Array2::from_shape_fn((p, p), |(i, j)| 0.5 * (ata[[i, j]] + ata[[j, i]]) * scale);
    CovarianceSpec::new(sigma)
}

/// `γ = 1 − max_i Σ_j |[Σ_{S^c,S} Σ_{S,S}^{-1}]_{ij}|`.
///
/// Returns 1 when `S` covers every coordinate; may be `<= 0` when the
/// incoherence condition fails.
pub fn mutual_incoherence(sigma: &CovarianceSpec, support: &SupportSet) -> Result<f64> {
    let p = sigma.dim();
    if support.bound() > p {
        return Err(Error::Shape(format!("support exceeds dimension {p}")));
    }
    if support.is_empty() {
        return Err(Error::Config("mutual incoherence needs a nonempty support".into()));
    }
    let s = support.indices();
    let sc = support.complement(p);
    if sc.is_empty() {
        return Ok(1.0);
    }
    let full = sigma.sigma();
    let s_s = full.select(Axis(0), s).select(Axis(1), s);
    let s_cs = full.select(Axis(0), sc.indices()).select(Axis(1), s);
    // Σ_{S^c,S} Σ_{S,S}^{-1} = (Σ_{S,S}^{-1} Σ_{S,S^c})ᵀ by symmetry.
    let m = linalg::solve_spd_multi(s_s.view(), s_cs.t())?;
    let worst = m
        .axis_iter(Axis(1))
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    Ok(1.0 - worst)
}

fn sample_noise(kind: NoiseKind, sigma: f64, n: usize, rng: &mut StreamRng) -> Array1<f64> {
    match kind {
        NoiseKind::Gaussian => {
            let d = Normal::new(0.0, sigma).expect("sigma_eps validated");
            Array1::from_shape_simple_fn(n, || d.sample(rng))
        }
        NoiseKind::Uniform => match uniform_sym(sigma * SQRT3) {
            Some(u) => Array1::from_shape_simple_fn(n, || u.sample(rng)),
            None => Array1::zeros(n),
        },
    }
}

const STREAM_DELTA: u64 = 0;
const STREAM_COV: u64 = 1;
const STREAM_X: u64 = 2;
const STREAM_NOISE: u64 = 3;
const SHARED_COV_TASK: u64 = u64::MAX;

/// `T` prior tasks with `l` samples each plus a novel task with as many.
pub fn generate(config: &GenConfig, w_star: &Array1<f64>) -> Result<(MetaDataset, GroundTruth)> {
    generate_with_novel_samples(config, w_star, config.l)
}

/// As [`generate`], with `l_novel` samples in the novel task.
pub fn generate_with_novel_samples(
    config: &GenConfig,
    w_star: &Array1<f64>,
    l_novel: usize,
) -> Result<(MetaDataset, GroundTruth)> {
    config.validate()?;
    let p = config.p;
    if w_star.len() != p {
        return Err(Error::Shape(format!("w_star has length {}, expected {p}", w_star.len())));
    }
    if w_star.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("w_star"));
    }
    let support = extract_support(w_star, 0.0);
    if support.len() != config.k {
        return Err(Error::Config(format!(
            "w_star has {} nonzeros but k = {}",
            support.len(),
            config.k
        )));
    }
    if l_novel == 0 {
        return Err(Error::Config("novel task needs at least one sample".into()));
    }

    let shared_cov = match config.x_kind {
        XKind::FixedCovariance(_) => {
            let mut rng = substream(config.seed, &[SHARED_COV_TASK, STREAM_COV]);
            Some(build_covariance(config.x_kind, config.sigma_x, None, p, &mut rng)?)
        }
        _ => None,
    };
    let uniform_x = uniform_sym(config.sigma_x * SQRT3);

    let mut tasks = Vec::with_capacity(config.t + 1);
    let mut deltas = Vec::with_capacity(config.t + 1);
    let mut per_task_supports = Vec::with_capacity(config.t + 1);
    for task in 0..=config.t {
        let id = task as u64;
        let n = if task == config.t { l_novel } else { config.l };

        let delta = sample_delta(
            config.delta_kind,
            &support,
            config.sigma_delta,
            w_star,
            &mut substream(config.seed, &[id, STREAM_DELTA]),
        );

        let mut x_rng = substream(config.seed, &[id, STREAM_X]);
        let x = match config.x_kind {
            XKind::Iid => {
                let d = Normal::new(0.0, config.sigma_x).expect("sigma_x validated");
                Array2::from_shape_simple_fn((n, p), || d.sample(&mut x_rng))
            }
            XKind::Uniform => match &uniform_x {
                Some(u) => Array2::from_shape_simple_fn((n, p), || u.sample(&mut x_rng)),
                None => Array2::zeros((n, p)),
            },
            XKind::FixedCovariance(_) => shared_cov
                .as_ref()
                .expect("built above")
                .sample_rows(n, None, &mut x_rng),
            XKind::PerTaskCovariance(_) => {
                let mut cov_rng = substream(config.seed, &[id, STREAM_COV]);
                build_covariance(config.x_kind, config.sigma_x, None, p, &mut cov_rng)?
                    .sample_rows(n, None, &mut x_rng)
            }
            XKind::DeltaDependent(_) => {
                let mut cov_rng = substream(config.seed, &[id, STREAM_COV]);
                build_covariance(config.x_kind, config.sigma_x, Some(&delta), p, &mut cov_rng)?
                    .sample_rows(n, Some(&delta), &mut x_rng)
            }
        };

        let weights = w_star + &delta;
        let noise = sample_noise(
            config.noise_kind,
            config.sigma_eps,
            n,
            &mut substream(config.seed, &[id, STREAM_NOISE]),
        );
        let y = x.dot(&weights) + noise;

        per_task_supports.push(extract_support(&weights, 0.0));
        deltas.push(delta.to_vec());
        tasks.push(TaskData::new(task, x, y)?);
    }

    let novel_task = tasks.pop().expect("T + 1 tasks generated");
    let dataset = MetaDataset::new(tasks, novel_task)?;
    let truth = GroundTruth {
        w_star: w_star.to_vec(),
        deltas,
        support,
        per_task_supports,
    };
    Ok((dataset, truth))
}
