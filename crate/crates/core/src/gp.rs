//! Exact zero-mean GP posterior inference via a Cholesky factor of
//! `K + σ²I`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::linalg::{cholesky_lower, solve_lower, solve_lower_mat, solve_lower_transpose};
use crate::points::Points;

/// Relative size of the diagonal jitter added when the first factorization fails.
pub const JITTER_SCALE: f64 = 1e-10;
/// `extend` refits from scratch when the new pivot falls below this value.
pub const MIN_EXTEND_PIVOT: f64 = 1e-12;
/// Negative variances larger than this in magnitude are logged before clamping.
const CLAMP_REPORT: f64 = 1e-10;

/// Observed inputs and outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: Points,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Points, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        Ok(Self { x, y })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            x: Points::empty(dim),
            y: Vec::new(),
        }
    }

    pub fn x(&self) -> &Points {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    pub fn push(&mut self, x: &[f64], y: f64) -> Result<()> {
        self.x.push(x)?;
        self.y.push(y);
        Ok(())
    }
}

/// Fitted posterior `p(f | D)`. Immutable; [`GpPosterior::extend`] returns a
/// new value.
#[derive(Clone, Debug)]
pub struct GpPosterior {
    kernel: KernelSpec,
    noise_var: f64,
    data: Dataset,
    chol: DMatrix<f64>,
    /// `L⁻¹ y`, kept so that appending a point costs one extra entry.
    whitened: DVector<f64>,
    weights: DVector<f64>,
    jitter: f64,
}

impl GpPosterior {
    /// Factorizes `K + σ²I`. On failure retries once with
    /// `1e-10 · trace / n` added to the diagonal.
    pub fn fit(kernel: KernelSpec, data: Dataset, noise_var: f64) -> Result<Self> {
        if !(noise_var > 0.0) || !noise_var.is_finite() {
            return Err(Error::Domain(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        if data.dim() != kernel.dim() {
            return Err(Error::DimensionMismatch {
                expected: kernel.dim(),
                got: data.dim(),
            });
        }
        let n = data.len();
        let mut gram = kernel.matrix(data.x())?;
        for i in 0..n {
            gram[(i, i)] += noise_var;
        }
        let (chol, jitter) = match cholesky_lower(gram.clone()) {
            Some(l) => (l, 0.0),
            None => {
                let jitter = JITTER_SCALE * gram.trace() / n as f64;
                log::debug!("Cholesky of K + σ²I failed for n = {n}; retrying with jitter {jitter:e}");
                for i in 0..n {
                    gram[(i, i)] += jitter;
                }
                let l = cholesky_lower(gram).ok_or_else(|| {
                    Error::Factorization(format!(
                        "K + σ²I is not positive definite even with jitter {jitter:e} (n = {n})"
                    ))
                })?;
                (l, jitter)
            }
        };
        let mut whitened = DVector::from_column_slice(data.y());
        solve_lower(&chol, &mut whitened);
        let mut weights = whitened.clone();
        solve_lower_transpose(&chol, &mut weights);
        Ok(Self {
            kernel,
            noise_var,
            data,
            chol,
            whitened,
            weights,
            jitter,
        })
    }

    /// Posterior with no observations (the prior).
    pub fn prior(kernel: KernelSpec, noise_var: f64) -> Result<Self> {
        let dim = kernel.dim();
        Self::fit(kernel, Dataset::empty(dim), noise_var)
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// Lower Cholesky factor of `K + σ²I` (plus jitter, if any).
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// `(K + σ²I)⁻¹ y`.
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// Diagonal jitter applied to make the factorization succeed, if any.
    pub fn jitter(&self) -> Option<f64> {
        (self.jitter > 0.0).then_some(self.jitter)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn kernel_vector(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.data.x().rows().map(|xi| self.kernel.eval_unchecked(xi, x)),
        )
    }

    /// Posterior mean and variance at `x`.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.data.x().check_dim(x)?;
        let prior_var = self.kernel.eval_unchecked(x, x);
        if self.is_empty() {
            return Ok((0.0, prior_var));
        }
        let mut v = self.kernel_vector(x);
        let mean = v.dot(&self.weights);
        solve_lower(&self.chol, &mut v);
        Ok((mean, clamp_variance(prior_var - v.norm_squared())))
    }

    /// Means and variances at every row of `x`.
    pub fn predict_batch(&self, x: &Points) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.dim() != self.kernel.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.kernel.dim(),
                got: x.dim(),
            });
        }
        let prior: Vec<f64> = x.rows().map(|r| self.kernel.eval_unchecked(r, r)).collect();
        if self.is_empty() {
            return Ok((vec![0.0; x.len()], prior));
        }
        let mut cross = self.kernel.cross_matrix(self.data.x(), x)?;
        let means = cross.tr_mul(&self.weights);
        solve_lower_mat(&self.chol, &mut cross);
        let vars = cross
            .column_iter()
            .zip(prior)
            .map(|(v, p)| clamp_variance(p - v.norm_squared()))
            .collect();
        Ok((means.as_slice().to_vec(), vars))
    }

    /// Joint posterior covariance over the rows of `x`.
    pub fn covariance(&self, x: &Points) -> Result<DMatrix<f64>> {
        let mut cov = self.kernel.matrix(x)?;
        if !self.is_empty() {
            let mut v = self.kernel.cross_matrix(self.data.x(), x)?;
            solve_lower_mat(&self.chol, &mut v);
            cov.gemm_tr(-1.0, &v, &v, 1.0);
        }
        Ok(cov)
    }

    /// Posterior after additionally observing `y` at `x`.
    ///
    /// Appends one row to the Cholesky factor; falls back to a full refit
    /// when the new pivot is below [`MIN_EXTEND_PIVOT`].
    pub fn extend(&self, x: &[f64], y: f64) -> Result<Self> {
        self.data.x().check_dim(x)?;
        let mut data = self.data.clone();
        data.push(x, y)?;
        let n = self.len();

        let mut row = self.kernel_vector(x);
        solve_lower(&self.chol, &mut row);
        let pivot_sq =
            self.kernel.eval_unchecked(x, x) + self.noise_var + self.jitter - row.norm_squared();
        let pivot = pivot_sq.sqrt();
        if !(pivot >= MIN_EXTEND_PIVOT) {
            log::debug!("rank-one extension pivot {pivot:e} too small; refitting {} points", n + 1);
            return Self::fit(self.kernel.clone(), data, self.noise_var);
        }

        let mut chol = DMatrix::zeros(n + 1, n + 1);
        chol.view_mut((0, 0), (n, n)).copy_from(&self.chol);
        for j in 0..n {
            chol[(n, j)] = row[j];
        }
        chol[(n, n)] = pivot;

        let mut whitened = self.whitened.clone().push(0.0);
        whitened[n] = (y - row.dot(&self.whitened)) / pivot;
        let mut weights = whitened.clone();
        solve_lower_transpose(&chol, &mut weights);

        Ok(Self {
            kernel: self.kernel.clone(),
            noise_var: self.noise_var,
            data,
            chol,
            whitened,
            weights,
            jitter: self.jitter,
        })
    }
}

fn clamp_variance(var: f64) -> f64 {
    if var < 0.0 {
        if -var > CLAMP_REPORT {
            log::warn!("clamped negative posterior variance {var:e} to zero");
        }
        0.0
    } else {
        var
    }
}

pub fn fit(kernel: KernelSpec, data: Dataset, noise_var: f64) -> Result<GpPosterior> {
    GpPosterior::fit(kernel, data, noise_var)
}
