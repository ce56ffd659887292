//! Synthetic objectives: Cartesian grids and GP prior draws on them.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::driver::{Objective, ObjectiveSampling};
use crate::error::{Error, Result};
use crate::gp::GpPosterior;
use crate::kernels::KernelSpec;
use crate::linalg::cholesky_lower;
use crate::points::Points;
use crate::sampling::{sample_rff_many, GRID_JITTER};

/// Largest grid `make_grid` will materialize.
pub const MAX_GRID_POINTS: usize = 1 << 22;
/// Largest grid on which objectives are drawn exactly.
pub const EXACT_OBJECTIVE_LIMIT: usize = 4096;
/// Feature count of RFF prior draws above the exact limit.
pub const OBJECTIVE_FEATURES: usize = 4096;

/// Per-dimension levels of a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Levels {
    /// `start, start + spacing, ...` with `count` entries.
    Uniform {
        count: usize,
        spacing: f64,
        #[serde(default)]
        start: f64,
    },
    List(Vec<f64>),
}

impl Levels {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Levels::Uniform { count, spacing, start } => {
                (0..*count).map(|i| start + i as f64 * spacing).collect()
            }
            Levels::List(v) => v.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Levels::Uniform { count, .. } => *count,
            Levels::List(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The same levels in every one of `dim` dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub levels: Levels,
}

impl GridSpec {
    pub fn new(dim: usize, levels: Levels) -> Self {
        GridSpec { dim, levels }
    }

    /// `count` equally spaced levels from 0.
    pub fn uniform(dim: usize, count: usize, spacing: f64) -> Self {
        GridSpec::new(dim, Levels::Uniform { count, spacing, start: 0.0 })
    }

    /// Number of grid points, or `None` on overflow.
    pub fn size(&self) -> Option<usize> {
        u32::try_from(self.dim)
            .ok()
            .and_then(|d| self.levels.len().checked_pow(d))
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("grid dimension must be at least 1".into()));
        }
        if self.levels.len() < 2 {
            return Err(Error::Config("a grid needs at least two levels per dimension".into()));
        }
        let values = self.levels.values();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("grid levels must be finite".into()));
        }
        if let Levels::Uniform { spacing, .. } = self.levels {
            if !(spacing > 0.0) {
                return Err(Error::Config("grid spacing must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Cartesian product of the levels, last dimension varying fastest.
pub fn make_grid(spec: &GridSpec) -> Result<Points> {
    spec.validate()?;
    let m = spec
        .size()
        .filter(|&m| m <= MAX_GRID_POINTS)
        .ok_or_else(|| {
            Error::Capacity(format!(
                "{} levels in {} dimensions exceed the {MAX_GRID_POINTS}-point grid cap",
                spec.levels.len(),
                spec.dim
            ))
        })?;
    let levels = spec.levels.values();
    let k = levels.len();
    let mut data = Vec::with_capacity(m * spec.dim);
    for i in 0..m {
        let mut rest = i;
        let start = data.len();
        data.resize(start + spec.dim, 0.0);
        for j in (0..spec.dim).rev() {
            data[start + j] = levels[rest % k];
            rest /= k;
        }
    }
    Points::new(spec.dim, data)
}

/// One GP prior draw on `grid`. Exact below [`EXACT_OBJECTIVE_LIMIT`]
/// points, an RFF prior path above.
pub fn sample_objective<R: Rng + ?Sized>(
    kernel: &KernelSpec,
    grid: &Points,
    rng: &mut R,
) -> Result<Objective> {
    if grid.len() <= EXACT_OBJECTIVE_LIMIT {
        sample_objective_exact(kernel, grid, rng)
    } else {
        sample_objective_rff(kernel, grid, OBJECTIVE_FEATURES, rng)
    }
}

/// Draw from `N(0, K_grid)` via Cholesky with diagonal jitter.
pub fn sample_objective_exact<R: Rng + ?Sized>(
    kernel: &KernelSpec,
    grid: &Points,
    rng: &mut R,
) -> Result<Objective> {
    let mut k = kernel.matrix(grid)?;
    for i in 0..grid.len() {
        k[(i, i)] += GRID_JITTER;
    }
    let chol = cholesky_lower(k).ok_or_else(|| {
        Error::Factorization(format!("prior covariance on {} points", grid.len()))
    })?;
    let z = nalgebra::DVector::from_fn(grid.len(), |_, _| StandardNormal.sample(rng));
    let values = (chol * z).as_slice().to_vec();
    Objective::with_sampling(grid.clone(), values, ObjectiveSampling::Exact)
}

/// Prior draw represented by `features` random Fourier features.
pub fn sample_objective_rff<R: Rng + ?Sized>(
    kernel: &KernelSpec,
    grid: &Points,
    features: usize,
    rng: &mut R,
) -> Result<Objective> {
    let prior = GpPosterior::prior(kernel.clone(), 1.0)?;
    let path = sample_rff_many(&prior, features, 1, rng)?.remove(0);
    let values = path.values_on(grid)?;
    Objective::with_sampling(grid.clone(), values, ObjectiveSampling::Fourier { features })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;

    #[test]
    fn grid_ordering() {
        let g = make_grid(&GridSpec::new(1, Levels::List(vec![0.0, 0.5]))).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 0.5]);

        let g = make_grid(&GridSpec::uniform(2, 10, 0.1)).unwrap();
        assert_eq!(g.len(), 100);
        assert_eq!(g.row(0), &[0.0, 0.0]);
        assert_eq!(g.row(1), &[0.0, 0.1]);
        assert_eq!(g.row(10), &[0.1, 0.0]);

        let g = make_grid(&GridSpec::uniform(4, 10, 0.1)).unwrap();
        assert_eq!(g.len(), 10_000);
        assert!((g.row(9999)[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn grid_errors() {
        assert!(matches!(
            make_grid(&GridSpec::uniform(30, 10, 0.1)),
            Err(Error::Capacity(_))
        ));
        assert!(make_grid(&GridSpec::uniform(2, 1, 0.1)).is_err());
        assert!(make_grid(&GridSpec::uniform(0, 3, 0.1)).is_err());
    }

    #[test]
    fn grid_spec_toml_forms() {
        let a: GridSpec = toml::from_str("dim = 2\nlevels = { count = 20, spacing = 0.05 }").unwrap();
        assert_eq!(a, GridSpec::uniform(2, 20, 0.05));
        let b: GridSpec = toml::from_str("dim = 1\nlevels = [0.0, 0.5]").unwrap();
        assert_eq!(b.levels, Levels::List(vec![0.0, 0.5]));
    }

    #[test]
    fn single_point_objective() {
        let grid = Points::from_rows(&[[0.3]]).unwrap();
        let kernel = KernelSpec::squared_exponential(0.2, 1).unwrap();
        let mut rng = seeds::rng(1);
        let n = 20_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_objective(&kernel, &grid, &mut rng).unwrap().values()[0])
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn distant_points_uncorrelated() {
        let grid = Points::from_rows(&[[0.0], [5.0]]).unwrap();
        let kernel = KernelSpec::squared_exponential(0.1, 1).unwrap();
        let mut rng = seeds::rng(2);
        let n = 100_000;
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let o = sample_objective(&kernel, &grid, &mut rng).unwrap();
                (o.values()[0], o.values()[1])
            })
            .collect();
        let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
        let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
        let cov = pairs.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum::<f64>() / n as f64;
        let va = pairs.iter().map(|p| (p.0 - ma).powi(2)).sum::<f64>() / n as f64;
        let vb = pairs.iter().map(|p| (p.1 - mb).powi(2)).sum::<f64>() / n as f64;
        assert!((cov / (va * vb).sqrt()).abs() <= 0.01);
    }

    #[test]
    fn expected_max_bound() {
        let kernel = KernelSpec::squared_exponential(0.2, 2).unwrap();
        for (k, n) in [(2usize, 10_000usize), (4, 10_000), (16, 500)] {
            let grid = make_grid(&GridSpec::uniform(2, k, 1.0 / k as f64)).unwrap();
            let size = grid.len() as f64;
            let bound = (2.0 * (size / 2.0).ln() + 2.0).sqrt();
            let mut rng = seeds::rng(3);
            let mean_max = (0..n)
                .map(|_| sample_objective(&kernel, &grid, &mut rng).unwrap().f_star())
                .sum::<f64>()
                / n as f64;
            assert!(mean_max <= bound, "|X| = {size}: {mean_max} > {bound}");
        }
        assert!(((2.0 * 8f64.ln() + 2.0).sqrt() - 2.482).abs() < 1e-3);
    }

    #[test]
    fn rff_objective_is_flagged() {
        let grid = make_grid(&GridSpec::uniform(1, 5, 0.2)).unwrap();
        let kernel = KernelSpec::squared_exponential(0.2, 1).unwrap();
        let o = sample_objective_rff(&kernel, &grid, 256, &mut seeds::rng(4)).unwrap();
        assert_eq!(o.sampling(), ObjectiveSampling::Fourier { features: 256 });
        let e = sample_objective(&kernel, &grid, &mut seeds::rng(4)).unwrap();
        assert_eq!(e.sampling(), ObjectiveSampling::Exact);
        assert_eq!(e, sample_objective(&kernel, &grid, &mut seeds::rng(4)).unwrap());
    }
}
