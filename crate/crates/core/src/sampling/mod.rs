//! Posterior sample paths `g ~ p(f | D)` over a finite candidate grid.
//!
//! Two samplers are available. Exact sampling draws the joint Gaussian on
//! the grid from a Cholesky factor of the posterior covariance. Random
//! Fourier feature (RFF) sampling replaces the kernel by a finite
//! trigonometric feature map and draws Bayesian linear-model weights, which
//! yields a path that can be evaluated anywhere at `O(D d)` per point.

mod sobol;

pub use sobol::{snap_to_grid, sobol_init, SobolDesign, MAX_SOBOL_DIM};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::GpPosterior;
use crate::linalg::{cholesky_lower, solve_lower, solve_lower_transpose};
use crate::points::Points;

/// Diagonal jitter added to the grid covariance before exact sampling.
pub const GRID_JITTER: f64 = 1e-10;
/// Largest grid sampled exactly by [`PathSampler::auto`].
pub const EXACT_GRID_LIMIT: usize = 2000;
/// Default number of random Fourier features.
pub const DEFAULT_FEATURES: usize = 1024;

/// A posterior sample path.
#[derive(Clone, Debug, PartialEq)]
pub enum SamplePath {
    /// Values at every grid point, in grid order.
    Table(Vec<f64>),
    Fourier(FourierPath),
}

/// `g(x) = Σ_i w_i · a cos(ω_i·x + b_i)` with `a = sqrt(2 s / D)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierPath {
    pub frequencies: DMatrix<f64>,
    pub phases: Vec<f64>,
    pub weights: Vec<f64>,
    pub amplitude: f64,
}

impl FourierPath {
    pub fn eval(&self, x: &[f64]) -> f64 {
        (0..self.phases.len())
            .map(|i| self.weights[i] * self.feature(i, x))
            .sum()
    }

    #[inline]
    fn feature(&self, i: usize, x: &[f64]) -> f64 {
        let arg: f64 = x
            .iter()
            .enumerate()
            .map(|(j, xj)| self.frequencies[(i, j)] * xj)
            .sum();
        self.amplitude * (arg + self.phases[i]).cos()
    }
}

impl SamplePath {
    /// Path values at every grid point.
    pub fn values_on(&self, grid: &Points) -> Result<Vec<f64>> {
        match self {
            SamplePath::Table(values) => {
                if values.len() != grid.len() {
                    return Err(Error::DimensionMismatch {
                        expected: grid.len(),
                        got: values.len(),
                    });
                }
                Ok(values.clone())
            }
            SamplePath::Fourier(path) => {
                if path.frequencies.ncols() != grid.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: path.frequencies.ncols(),
                        got: grid.dim(),
                    });
                }
                Ok(grid.rows().map(|x| path.eval(x)).collect())
            }
        }
    }
}

/// Maximum of a path over the grid and the (lowest) index attaining it.
pub fn path_max(path: &SamplePath, grid: &Points) -> Result<(f64, usize)> {
    if grid.is_empty() {
        return Err(Error::Domain("path maximum over an empty grid".into()));
    }
    let values = path.values_on(grid)?;
    let i = crate::points::argmax_first(&values);
    Ok((values[i], i))
}

/// Draws `count` independent joint samples of the posterior on `grid`,
/// sharing one factorization of the grid covariance.
pub fn sample_exact_many<R: Rng + ?Sized>(
    post: &GpPosterior,
    grid: &Points,
    count: usize,
    rng: &mut R,
) -> Result<Vec<SamplePath>> {
    if grid.is_empty() {
        return Err(Error::Domain("cannot sample on an empty grid".into()));
    }
    let (means, _) = post.predict_batch(grid)?;
    let mut cov = post.covariance(grid)?;
    for i in 0..grid.len() {
        cov[(i, i)] += GRID_JITTER;
    }
    let chol = cholesky_lower(cov).ok_or_else(|| {
        Error::Factorization(format!(
            "posterior covariance on {} grid points is not positive definite",
            grid.len()
        ))
    })?;
    let mean = DVector::from_vec(means);
    Ok((0..count)
        .map(|_| {
            let z = DVector::from_fn(grid.len(), |_, _| StandardNormal.sample(rng));
            SamplePath::Table((&mean + &chol * z).as_slice().to_vec())
        })
        .collect())
}

/// One exact joint posterior sample on `grid`.
pub fn sample_exact<R: Rng + ?Sized>(post: &GpPosterior, grid: &Points, rng: &mut R) -> Result<SamplePath> {
    Ok(sample_exact_many(post, grid, 1, rng)?.remove(0))
}

/// Draws `count` RFF paths sharing one set of random features.
///
/// Weights follow the Bayesian linear model posterior with prior
/// `N(0, I)`. Each draw updates a prior weight sample through the `t × t`
/// system `(ΦᵀΦ + σ²I) α = y − Φᵀz − ε`, where `Φ` is the `D × t` matrix of
/// training features, so the cost stays `O(D t² + t³)`.
pub fn sample_rff_many<R: Rng + ?Sized>(
    post: &GpPosterior,
    feature_count: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<SamplePath>> {
    if feature_count == 0 {
        return Err(Error::Domain("random Fourier features need D >= 1".into()));
    }
    let kernel = post.kernel();
    let frequencies = kernel.spectral_sample(feature_count, rng);
    let phases: Vec<f64> = (0..feature_count)
        .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
        .collect();
    let template = FourierPath {
        frequencies,
        phases,
        weights: vec![0.0; feature_count],
        amplitude: (2.0 * kernel.output_scale() / feature_count as f64).sqrt(),
    };

    let data = post.data();
    let noise = post.noise_var();
    let noise_sd = noise.sqrt();
    let phi = DMatrix::from_fn(feature_count, data.len(), |i, j| {
        template.feature(i, data.x().row(j))
    });
    let mut gram = phi.transpose() * &phi;
    for i in 0..data.len() {
        gram[(i, i)] += noise;
    }
    let chol = cholesky_lower(gram).ok_or_else(|| {
        Error::Factorization("random-feature Gram matrix is not positive definite".into())
    })?;
    let y = DVector::from_column_slice(data.y());

    Ok((0..count)
        .map(|_| {
            let z: DVector<f64> = DVector::from_fn(feature_count, |_, _| StandardNormal.sample(rng));
            let eps = DVector::from_fn(data.len(), |_, _| {
                let e: f64 = StandardNormal.sample(rng);
                noise_sd * e
            });
            let mut alpha = &y - phi.transpose() * &z - eps;
            solve_lower(&chol, &mut alpha);
            solve_lower_transpose(&chol, &mut alpha);
            let w = z + &phi * alpha;
            SamplePath::Fourier(FourierPath {
                weights: w.as_slice().to_vec(),
                ..template.clone()
            })
        })
        .collect())
}

/// One RFF posterior path.
pub fn sample_rff<R: Rng + ?Sized>(post: &GpPosterior, feature_count: usize, rng: &mut R) -> Result<SamplePath> {
    Ok(sample_rff_many(post, feature_count, 1, rng)?.remove(0))
}

/// How sample paths are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PathSampler {
    Exact,
    Fourier { features: usize },
}

impl PathSampler {
    /// Exact sampling up to [`EXACT_GRID_LIMIT`] points, RFF beyond.
    pub fn auto(grid_len: usize, features: usize) -> Self {
        if grid_len <= EXACT_GRID_LIMIT {
            PathSampler::Exact
        } else {
            PathSampler::Fourier { features }
        }
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        post: &GpPosterior,
        grid: &Points,
        count: usize,
        rng: &mut R,
    ) -> Result<Vec<SamplePath>> {
        match *self {
            PathSampler::Exact => sample_exact_many(post, grid, count, rng),
            PathSampler::Fourier { features } => sample_rff_many(post, features, count, rng),
        }
    }

    /// `count` sampled maxima `(g*, argmax index)` over the grid.
    pub fn sample_maxima<R: Rng + ?Sized>(
        &self,
        post: &GpPosterior,
        grid: &Points,
        count: usize,
        rng: &mut R,
    ) -> Result<Vec<(f64, usize)>> {
        self.sample(post, grid, count, rng)?
            .iter()
            .map(|p| path_max(p, grid))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::Dataset;
    use crate::kernels::KernelSpec;
    use crate::seeds;

    fn se(l: f64, d: usize) -> KernelSpec {
        KernelSpec::squared_exponential(l, d).unwrap()
    }

    #[test]
    fn single_point_grid_is_scalar_gaussian() {
        let data = Dataset::new(Points::from_rows(&[[0.2]]).unwrap(), vec![0.7]).unwrap();
        let post = GpPosterior::fit(se(0.3, 1), data, 0.1).unwrap();
        let grid = Points::from_rows(&[[0.25]]).unwrap();
        let (mu, var) = post.predict(&[0.25]).unwrap();
        let mut rng = seeds::rng(1);
        let draws: Vec<f64> = (0..20_000)
            .map(|_| match sample_exact(&post, &grid, &mut rng).unwrap() {
                SamplePath::Table(v) => v[0],
                _ => unreachable!(),
            })
            .collect();
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let v = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - mu).abs() < 4.0 * (var / n).sqrt());
        assert!((v - var).abs() < 0.05 * var);
    }

    #[test]
    fn distant_points_are_independent() {
        let post = GpPosterior::prior(se(0.1, 1), 0.01).unwrap();
        let grid = Points::from_rows(&[[0.0], [5.0]]).unwrap();
        let mut rng = seeds::rng(2);
        let paths = sample_exact_many(&post, &grid, 100_000, &mut rng).unwrap();
        let pairs: Vec<(f64, f64)> = paths
            .iter()
            .map(|p| match p {
                SamplePath::Table(v) => (v[0], v[1]),
                _ => unreachable!(),
            })
            .collect();
        let n = pairs.len() as f64;
        let (ma, mb) = pairs.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
        let (ma, mb) = (ma / n, mb / n);
        let cov = pairs.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum::<f64>() / n;
        let va = pairs.iter().map(|p| (p.0 - ma).powi(2)).sum::<f64>() / n;
        let vb = pairs.iter().map(|p| (p.1 - mb).powi(2)).sum::<f64>() / n;
        assert!((cov / (va * vb).sqrt()).abs() <= 0.01);
    }

    #[test]
    fn exact_sampling_is_deterministic() {
        let post = GpPosterior::prior(se(0.2, 1), 0.01).unwrap();
        let grid = Points::from_rows(&[[0.0], [0.3], [0.6]]).unwrap();
        let a = sample_exact(&post, &grid, &mut seeds::rng(5)).unwrap();
        let b = sample_exact(&post, &grid, &mut seeds::rng(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rff_prior_moments() {
        let post = GpPosterior::prior(se(0.3, 2), 0.01).unwrap();
        let x = [0.4, 0.7];
        let mut rng = seeds::rng(6);
        let vals: Vec<f64> = (0..10_000)
            .map(|_| match sample_rff(&post, 2048, &mut rng).unwrap() {
                SamplePath::Fourier(p) => p.eval(&x),
                _ => unreachable!(),
            })
            .collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 0.05);
        assert!((var - 1.0).abs() <= 0.05);
    }

    #[test]
    fn rff_posterior_matches_exact_posterior() {
        use rand::Rng as _;
        let mut rng = seeds::rng(7);
        let x = Points::new(2, (0..10).map(|_| rng.random::<f64>()).collect()).unwrap();
        let y = (0..5).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let post = GpPosterior::fit(se(0.4, 2), Dataset::new(x, y).unwrap(), 0.05).unwrap();
        let tests = Points::new(2, (0..40).map(|_| rng.random::<f64>()).collect()).unwrap();
        let draws = 2000;
        let mut sum = vec![0.0; tests.len()];
        let mut sum2 = vec![0.0; tests.len()];
        for _ in 0..draws {
            let path = sample_rff(&post, 4096, &mut rng).unwrap();
            for (i, v) in path.values_on(&tests).unwrap().into_iter().enumerate() {
                sum[i] += v;
                sum2[i] += v * v;
            }
        }
        for (i, row) in tests.rows().enumerate() {
            let (mu, var) = post.predict(row).unwrap();
            let m = sum[i] / draws as f64;
            let v = sum2[i] / draws as f64 - m * m;
            assert!((m - mu).abs() <= 0.05, "mean {m} vs {mu}");
            assert!((v - var).abs() <= 0.05, "var {v} vs {var}");
        }
    }

    #[test]
    fn rff_is_deterministic() {
        let post = GpPosterior::prior(se(0.3, 1), 0.1).unwrap();
        let a = sample_rff(&post, 64, &mut seeds::rng(8)).unwrap();
        let b = sample_rff(&post, 64, &mut seeds::rng(8)).unwrap();
        assert_eq!(a, b);
        let grid = Points::from_rows(&[[0.1], [0.9]]).unwrap();
        assert_eq!(a.values_on(&grid).unwrap(), b.values_on(&grid).unwrap());
        assert!(sample_rff(&post, 0, &mut seeds::rng(8)).is_err());
    }

    #[test]
    fn path_max_contract() {
        let one = Points::from_rows(&[[0.0]]).unwrap();
        assert_eq!(path_max(&SamplePath::Table(vec![-2.5]), &one).unwrap(), (-2.5, 0));

        let grid = Points::from_rows(&[[0.0], [0.5], [1.0]]).unwrap();
        let flat = SamplePath::Fourier(FourierPath {
            frequencies: DMatrix::from_element(3, 1, 1.0),
            phases: vec![0.0; 3],
            weights: vec![0.0; 3],
            amplitude: 1.0,
        });
        assert_eq!(path_max(&flat, &grid).unwrap(), (0.0, 0));

        use rand::Rng as _;
        let mut rng = seeds::rng(9);
        let table: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
        let grid = Points::new(1, (0..100).map(|i| i as f64).collect()).unwrap();
        let (g, i) = path_max(&SamplePath::Table(table.clone()), &grid).unwrap();
        let mut best = 0;
        for j in 1..table.len() {
            if table[j] > table[best] {
                best = j;
            }
        }
        assert_eq!((g, i), (table[best], best));
        assert!(path_max(&SamplePath::Table(vec![]), &Points::empty(1)).is_err());
    }

    #[test]
    fn auto_mode_threshold() {
        assert_eq!(PathSampler::auto(400, 1024), PathSampler::Exact);
        assert_eq!(PathSampler::auto(10_000, 1024), PathSampler::Fourier { features: 1024 });
    }
}
