//! Stationary covariance functions: squared exponential and the
//! half-integer Matérn family, with per-dimension lengthscales.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::points::Points;

/// Smoothness of a Matérn kernel. Only half-integer orders have the closed
/// forms used here.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaternNu {
    #[serde(rename = "1/2")]
    Half,
    #[serde(rename = "3/2")]
    ThreeHalves,
    #[serde(rename = "5/2")]
    FiveHalves,
}

impl MaternNu {
    pub fn value(self) -> f64 {
        match self {
            MaternNu::Half => 0.5,
            MaternNu::ThreeHalves => 1.5,
            MaternNu::FiveHalves => 2.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    SquaredExponential,
    Matern { nu: MaternNu },
}

/// Kernel family, lengthscales and output scale of a zero-mean GP prior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(flatten)]
    family: KernelFamily,
    lengthscales: Vec<f64>,
    #[serde(default = "unit")]
    output_scale: f64,
}

fn unit() -> f64 {
    1.0
}

impl KernelSpec {
    pub fn new(family: KernelFamily, lengthscales: Vec<f64>) -> Result<Self> {
        let spec = Self {
            family,
            lengthscales,
            output_scale: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Same lengthscale in each of `dim` dimensions.
    pub fn isotropic(family: KernelFamily, lengthscale: f64, dim: usize) -> Result<Self> {
        Self::new(family, vec![lengthscale; dim])
    }

    pub fn squared_exponential(lengthscale: f64, dim: usize) -> Result<Self> {
        Self::isotropic(KernelFamily::SquaredExponential, lengthscale, dim)
    }

    pub fn matern(nu: MaternNu, lengthscale: f64, dim: usize) -> Result<Self> {
        Self::isotropic(KernelFamily::Matern { nu }, lengthscale, dim)
    }

    /// Replaces the output scale; must lie in `(0, 1]`.
    pub fn with_output_scale(mut self, output_scale: f64) -> Result<Self> {
        self.output_scale = output_scale;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() {
            return Err(Error::Domain("kernel needs at least one lengthscale".into()));
        }
        if let Some(l) = self.lengthscales.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
            return Err(Error::Domain(format!("lengthscales must be positive, got {l}")));
        }
        if !(self.output_scale > 0.0 && self.output_scale <= 1.0) {
            return Err(Error::Domain(format!(
                "output scale must lie in (0, 1], got {}",
                self.output_scale
            )));
        }
        Ok(())
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn output_scale(&self) -> f64 {
        self.output_scale
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    /// `k(x, x2)`.
    pub fn eval(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        self.check_dim(x2.len())?;
        Ok(self.eval_unchecked(x, x2))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], x2: &[f64]) -> f64 {
        let r2: f64 = x
            .iter()
            .zip(x2)
            .zip(&self.lengthscales)
            .map(|((a, b), l)| {
                let s = (a - b) / l;
                s * s
            })
            .sum();
        self.output_scale * self.profile(r2)
    }

    /// Correlation as a function of the squared scaled distance.
    #[inline]
    fn profile(&self, r2: f64) -> f64 {
        match self.family {
            KernelFamily::SquaredExponential => (-0.5 * r2).exp(),
            KernelFamily::Matern { nu } => {
                let r = r2.sqrt();
                match nu {
                    MaternNu::Half => (-r).exp(),
                    MaternNu::ThreeHalves => {
                        let s = 3f64.sqrt() * r;
                        (1.0 + s) * (-s).exp()
                    }
                    MaternNu::FiveHalves => {
                        let s = 5f64.sqrt() * r;
                        (1.0 + s + 5.0 * r2 / 3.0) * (-s).exp()
                    }
                }
            }
        }
    }

    /// Gram matrix of a point set.
    pub fn matrix(&self, x: &Points) -> Result<DMatrix<f64>> {
        self.check_dim(x.dim())?;
        let n = x.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = self.output_scale;
            for j in 0..i {
                let v = self.eval_unchecked(x.row(i), x.row(j));
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        Ok(k)
    }

    /// `|a| × |b|` cross-covariance matrix.
    pub fn cross_matrix(&self, a: &Points, b: &Points) -> Result<DMatrix<f64>> {
        self.check_dim(a.dim())?;
        self.check_dim(b.dim())?;
        Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| {
            self.eval_unchecked(a.row(i), b.row(j))
        }))
    }

    /// Draws `count` frequency vectors (rows of a `count × d` matrix) from
    /// the kernel's normalized spectral density.
    ///
    /// SE: independent Gaussians with standard deviation `1/ℓ_j`. Matérn-ν:
    /// multivariate Student-t with `2ν` degrees of freedom, scaled by `1/ℓ_j`.
    pub fn spectral_sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> DMatrix<f64> {
        let d = self.dim();
        let mut w = DMatrix::zeros(count, d);
        let chi = match self.family {
            KernelFamily::Matern { nu } => {
                Some(ChiSquared::new(2.0 * nu.value()).expect("positive degrees of freedom"))
            }
            KernelFamily::SquaredExponential => None,
        };
        for i in 0..count {
            let scale = match (&chi, self.family) {
                (Some(chi), KernelFamily::Matern { nu }) => {
                    let dof = 2.0 * nu.value();
                    let u: f64 = chi.sample(rng);
                    (u / dof).sqrt().recip()
                }
                _ => 1.0,
            };
            for j in 0..d {
                let z: f64 = StandardNormal.sample(rng);
                w[(i, j)] = z * scale / self.lengthscales[j];
            }
        }
        w
    }
}

/// `k(x, x2)` for a kernel spec.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], x2: &[f64]) -> Result<f64> {
    spec.eval(x, x2)
}

pub fn kernel_matrix(spec: &KernelSpec, x: &Points) -> Result<DMatrix<f64>> {
    spec.matrix(x)
}

pub fn spectral_sample<R: Rng + ?Sized>(spec: &KernelSpec, count: usize, rng: &mut R) -> DMatrix<f64> {
    spec.spectral_sample(count, rng)
}
