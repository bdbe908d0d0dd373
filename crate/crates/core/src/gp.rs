//! Exact Gaussian-process regression over normalized trait vectors.
//!
//! One [`TraitRewardModel`] is kept per task. The model caches the Cholesky
//! factor `L` of `K + σ²I`, its inverse, and `α = (K + σ²I)⁻¹ (r − μ₀)`, so a
//! prediction costs `O(n)` for the mean and `O(n²)` for the variance. New
//! observations extend the factor by one row; a full refactorization with
//! diagonal jitter is only needed when the appended pivot is not positive.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const JITTER_START: f64 = 1e-8;
const JITTER_GROWTH: f64 = 10.0;
const JITTER_ATTEMPTS: usize = 3;
const PREDICT_BLOCK: usize = 2048;

/// RBF kernel hyperparameters plus observation noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub lengthscale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            lengthscale: 0.2,
            signal_variance: 1.0,
            noise_variance: 0.01,
        }
    }
}

impl KernelConfig {
    pub fn new(lengthscale: f64, signal_variance: f64, noise_variance: f64) -> Result<Self> {
        let cfg = KernelConfig {
            lengthscale,
            signal_variance,
            noise_variance,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lengthscale > 0.0 && self.lengthscale.is_finite()) {
            return Err(Error::Config(format!(
                "kernel lengthscale must be positive, got {}",
                self.lengthscale
            )));
        }
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(Error::Config(format!(
                "kernel signal variance must be positive, got {}",
                self.signal_variance
            )));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::Config(format!(
                "noise variance must be nonnegative, got {}",
                self.noise_variance
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        self.signal_variance * (-d2 / (2.0 * self.lengthscale * self.lengthscale)).exp()
    }
}

/// `σ_f² exp(−‖a − b‖² / 2ℓ²)`.
pub fn kernel_eval(a: &[f64], b: &[f64], cfg: &KernelConfig) -> f64 {
    cfg.eval(a, b)
}

/// Posterior over one task's trait-reward map.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ModelRecord", into = "ModelRecord")]
pub struct TraitRewardModel {
    kernel: KernelConfig,
    dim: usize,
    prior_mean: f64,
    /// Row-major `n x dim`.
    inputs: Vec<f64>,
    targets: Vec<f64>,
    /// Lower Cholesky factor of `K + (σ² + jitter) I`.
    chol: DMatrix<f64>,
    chol_inv: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
}

/// Persisted form of a model: observations only, the factorization is
/// rebuilt on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelRecord {
    pub kernel: KernelConfig,
    pub dim: usize,
    #[serde(default)]
    pub prior_mean: f64,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl TryFrom<ModelRecord> for TraitRewardModel {
    type Error = Error;

    fn try_from(rec: ModelRecord) -> Result<Self> {
        if rec.inputs.len() != rec.targets.len() {
            return Err(Error::Dimension(format!(
                "{} inputs but {} targets",
                rec.inputs.len(),
                rec.targets.len()
            )));
        }
        let mut model = TraitRewardModel::with_prior_mean(rec.kernel, rec.dim, rec.prior_mean)?;
        model.extend(rec.inputs.iter().map(Vec::as_slice).zip(rec.targets.iter().copied()))?;
        Ok(model)
    }
}

impl From<TraitRewardModel> for ModelRecord {
    fn from(model: TraitRewardModel) -> Self {
        ModelRecord {
            kernel: model.kernel,
            dim: model.dim,
            prior_mean: model.prior_mean,
            inputs: model.inputs.chunks(model.dim).map(<[f64]>::to_vec).collect(),
            targets: model.targets,
        }
    }
}

impl TraitRewardModel {
    /// Zero-mean prior over a `dim`-dimensional trait space.
    pub fn new(kernel: KernelConfig, dim: usize) -> Result<Self> {
        Self::with_prior_mean(kernel, dim, 0.0)
    }

    pub fn with_prior_mean(kernel: KernelConfig, dim: usize, prior_mean: f64) -> Result<Self> {
        kernel.validate()?;
        if dim == 0 {
            return Err(Error::Dimension("trait space must have at least one dimension".into()));
        }
        if !prior_mean.is_finite() {
            return Err(Error::InvalidValue("prior mean must be finite".into()));
        }
        Ok(TraitRewardModel {
            kernel,
            dim,
            prior_mean,
            inputs: Vec::new(),
            targets: Vec::new(),
            chol: DMatrix::zeros(0, 0),
            chol_inv: DMatrix::zeros(0, 0),
            alpha: DVector::zeros(0),
            jitter: 0.0,
        })
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_mean
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Lower-triangular factor of the regularized kernel matrix.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// Diagonal jitter added on top of the noise variance (zero unless a
    /// factorization failed).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Conditions the model on one more observation `(y, r)`.
    pub fn observe(&mut self, y: &[f64], r: f64) -> Result<()> {
        if y.len() != self.dim {
            return Err(Error::Dimension(format!(
                "observation has {} traits, model expects {}",
                y.len(),
                self.dim
            )));
        }
        if !r.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(format!("non-finite observation ({y:?}, {r})")));
        }
        self.inputs.extend_from_slice(y);
        self.targets.push(r);
        if !self.append_row() {
            self.refactorize()?;
        } else {
            self.refresh_alpha();
        }
        Ok(())
    }

    /// Folds a batch of observations in order.
    pub fn extend<'a>(&mut self, data: impl IntoIterator<Item = (&'a [f64], f64)>) -> Result<()> {
        for (y, r) in data {
            self.observe(y, r)?;
        }
        Ok(())
    }

    /// Posterior `(mean, variance)` at `y`.
    pub fn predict(&self, y: &[f64]) -> (f64, f64) {
        debug_assert_eq!(y.len(), self.dim);
        let n = self.len();
        if n == 0 {
            return (self.prior_mean, self.kernel.signal_variance);
        }
        let kstar = DVector::from_iterator(n, (0..n).map(|i| self.kernel.eval(self.input(i), y)));
        let mean = self.prior_mean + kstar.dot(&self.alpha);
        let v = &self.chol_inv * &kstar;
        let var = self.kernel.signal_variance - v.norm_squared();
        (mean, var.max(0.0))
    }

    /// Posterior means and variances at many points, given row-major
    /// `points` (`len / dim` rows). Equivalent to calling [`predict`] on each
    /// row, but batched through one matrix product.
    ///
    /// [`predict`]: TraitRewardModel::predict
    pub fn predict_many(&self, points: &[f64]) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(points.len() % self.dim, 0, "points length not a multiple of dim");
        let p = points.len() / self.dim;
        let n = self.len();
        if n == 0 {
            return (
                vec![self.prior_mean; p],
                vec![self.kernel.signal_variance; p],
            );
        }
        let mut means = Vec::with_capacity(p);
        let mut vars = Vec::with_capacity(p);
        // blocks bound the size of the cross-covariance matrix
        for block in points.chunks(PREDICT_BLOCK * self.dim) {
            let cols = block.len() / self.dim;
            let mut kstar = DMatrix::<f64>::zeros(n, cols);
            for (j, q) in block.chunks(self.dim).enumerate() {
                let col = kstar.column_mut(j);
                for (i, k) in col.into_iter().enumerate() {
                    *k = self.kernel.eval(self.input(i), q);
                }
            }
            means.extend(
                kstar
                    .column_iter()
                    .map(|c| self.prior_mean + c.dot(&self.alpha)),
            );
            let v = &self.chol_inv * &kstar;
            vars.extend(
                v.column_iter()
                    .map(|c| (self.kernel.signal_variance - c.norm_squared()).max(0.0)),
            );
        }
        (means, vars)
    }

    /// Analytic gradients of the posterior mean and variance at `y`.
    pub fn predict_gradient(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let mut grad_mean = vec![0.0; self.dim];
        let mut grad_var = vec![0.0; self.dim];
        if n == 0 {
            return (grad_mean, grad_var);
        }
        let l2 = self.kernel.lengthscale * self.kernel.lengthscale;
        let kstar = DVector::from_iterator(n, (0..n).map(|i| self.kernel.eval(self.input(i), y)));
        // (K + σ²I)⁻¹ k*
        let w = self.chol_inv.tr_mul(&(&self.chol_inv * &kstar));
        for i in 0..n {
            let xi = self.input(i);
            for d in 0..self.dim {
                let dk = kstar[i] * (xi[d] - y[d]) / l2;
                grad_mean[d] += self.alpha[i] * dk;
                grad_var[d] -= 2.0 * w[i] * dk;
            }
        }
        (grad_mean, grad_var)
    }

    /// Tries to extend the cached factor by the newest observation. Returns
    /// false when the new pivot is not safely positive.
    fn append_row(&mut self) -> bool {
        let n = self.len() - 1;
        let cfg = self.kernel;
        let y = self.input(n).to_vec();
        let diag = cfg.signal_variance + cfg.noise_variance + self.jitter;
        if n == 0 {
            if diag <= 0.0 {
                return false;
            }
            let d = diag.sqrt();
            self.chol = DMatrix::from_element(1, 1, d);
            self.chol_inv = DMatrix::from_element(1, 1, 1.0 / d);
            return true;
        }
        let k = DVector::from_iterator(n, (0..n).map(|i| cfg.eval(self.input(i), &y)));
        let l = &self.chol_inv * &k;
        let pivot = diag - l.norm_squared();
        if !(pivot > 1e-12 * diag) {
            return false;
        }
        let d = pivot.sqrt();
        // L⁻¹ of the grown factor: last row is -(lᵀ L⁻¹)/d, corner 1/d.
        let tail = self.chol_inv.tr_mul(&l) / -d;

        let mut chol = self.chol.clone().resize(n + 1, n + 1, 0.0);
        let mut inv = self.chol_inv.clone().resize(n + 1, n + 1, 0.0);
        for j in 0..n {
            chol[(n, j)] = l[j];
            inv[(n, j)] = tail[j];
        }
        chol[(n, n)] = d;
        inv[(n, n)] = 1.0 / d;
        self.chol = chol;
        self.chol_inv = inv;
        true
    }

    fn refactorize(&mut self) -> Result<()> {
        let n = self.len();
        let cfg = self.kernel;
        let mut k = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = cfg.eval(self.input(i), self.input(j));
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        let mut jitter = self.jitter;
        for attempt in 0..=JITTER_ATTEMPTS {
            let mut reg = k.clone();
            for i in 0..n {
                reg[(i, i)] += cfg.noise_variance + jitter;
            }
            if let Some(c) = reg.cholesky() {
                let l = c.l();
                let inv = l
                    .solve_lower_triangular(&DMatrix::identity(n, n))
                    .expect("cholesky factor has a positive diagonal");
                self.chol = l;
                self.chol_inv = inv;
                self.jitter = jitter;
                self.refresh_alpha();
                return Ok(());
            }
            if attempt == JITTER_ATTEMPTS {
                break;
            }
            jitter = if jitter == 0.0 {
                JITTER_START
            } else {
                jitter * JITTER_GROWTH
            };
        }
        // leave the model consistent with its previous observations
        self.inputs.truncate((n - 1) * self.dim);
        self.targets.pop();
        Err(Error::Factorization {
            attempts: JITTER_ATTEMPTS + 1,
        })
    }

    fn refresh_alpha(&mut self) {
        let centered = DVector::from_iterator(
            self.len(),
            self.targets.iter().map(|r| r - self.prior_mean),
        );
        self.alpha = self.chol_inv.tr_mul(&(&self.chol_inv * centered));
    }
}

/// Conditions a fresh zero-mean model on demonstration pairs, in order.
pub fn prior_from_demonstrations(
    demos: &[(Vec<f64>, f64)],
    cfg: KernelConfig,
    dim: usize,
) -> Result<TraitRewardModel> {
    let mut model = TraitRewardModel::new(cfg, dim)?;
    model.extend(demos.iter().map(|(y, r)| (y.as_slice(), *r)))?;
    Ok(model)
}
