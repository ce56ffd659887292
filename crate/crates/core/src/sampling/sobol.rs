//! Sobol low-discrepancy designs (Joe–Kuo direction numbers) with an
//! optional random digital shift, and snapping of designs onto a finite grid.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use sobol::params::JoeKuoD6;
use sobol::Sobol;

use crate::error::{Error, Result};
use crate::points::{sq_dist, Points};
use crate::seeds;

/// Highest dimension covered by the bundled direction numbers.
pub const MAX_SOBOL_DIM: usize = 21_201;

const STANDARD_DIMS: usize = 1_000;

fn params_for(dim: usize) -> &'static JoeKuoD6 {
    static STANDARD: OnceLock<JoeKuoD6> = OnceLock::new();
    static EXTENDED: OnceLock<JoeKuoD6> = OnceLock::new();
    if dim <= STANDARD_DIMS {
        STANDARD.get_or_init(JoeKuoD6::standard)
    } else {
        EXTENDED.get_or_init(JoeKuoD6::extended)
    }
}

/// First `n` points of a Sobol sequence in `[0, 1)^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct SobolDesign {
    pub points: Points,
    /// Seed of the digital shift, `None` for the raw sequence.
    pub scramble_seed: Option<u64>,
}

/// First `n` points of the `d`-dimensional Sobol sequence. With a seed, every
/// coordinate is XOR-shifted by a random 32-bit word (a digital shift), which
/// preserves the net structure of the sequence.
pub fn sobol_init(d: usize, n: usize, scramble_seed: Option<u64>) -> Result<SobolDesign> {
    if d == 0 || n == 0 {
        return Err(Error::Domain(format!(
            "Sobol design needs d >= 1 and n >= 1, got d = {d}, n = {n}"
        )));
    }
    if d > MAX_SOBOL_DIM {
        return Err(Error::UnsupportedDimension {
            requested: d,
            max: MAX_SOBOL_DIM,
        });
    }
    let shifts: Vec<u32> = match scramble_seed {
        Some(seed) => {
            let mut rng = seeds::Rng::seed_from_u64(seed);
            (0..d).map(|_| rng.random::<u32>()).collect()
        }
        None => vec![0; d],
    };
    let seq = Sobol::<u32>::new(d, params_for(d));
    let mut data = Vec::with_capacity(n * d);
    for point in seq.take(n) {
        data.extend(
            point
                .iter()
                .zip(&shifts)
                .map(|(v, s)| f64::from(v ^ s) / 4_294_967_296.0),
        );
    }
    Ok(SobolDesign {
        points: Points::new(d, data)?,
        scramble_seed,
    })
}

/// Maps each design point to the nearest unused grid point (L2, greedy in
/// design order, ties to the lowest grid index). Returns grid indices.
pub fn snap_to_grid(design: &SobolDesign, grid: &Points) -> Result<Vec<usize>> {
    snap_points(&design.points, grid)
}

pub(crate) fn snap_points(points: &Points, grid: &Points) -> Result<Vec<usize>> {
    if points.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: points.dim(),
        });
    }
    if points.len() > grid.len() {
        return Err(Error::Capacity(format!(
            "cannot place {} distinct design points on a grid of {}",
            points.len(),
            grid.len()
        )));
    }
    let mut used = vec![false; grid.len()];
    let mut out = Vec::with_capacity(points.len());
    for p in points.rows() {
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for (i, g) in grid.rows().enumerate() {
            if used[i] {
                continue;
            }
            let d = sq_dist(p, g);
            if d < best_d {
                best_d = d;
                best = Some(i);
            }
        }
        let i = best.expect("grid has an unused point");
        used[i] = true;
        out.push(i);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_dimension_is_van_der_corput() {
        let d = sobol_init(1, 2, None).unwrap();
        assert_eq!(d.points.as_slice(), &[0.0, 0.5]);
        let d = sobol_init(1, 4, None).unwrap();
        assert_eq!(d.points.as_slice(), &[0.0, 0.5, 0.75, 0.25]);
    }

    fn elementary_intervals_hold(points: &Points, k: u32) -> bool {
        // Each of the 2^k cells of every dyadic box shape with total volume 2^-k
        // contains exactly one point, for every split of k over the dimensions.
        let d = points.dim();
        let mut shapes = vec![vec![]];
        for _ in 0..d {
            shapes = shapes
                .into_iter()
                .flat_map(|s: Vec<u32>| (0..=k).map(move |e| [s.clone(), vec![e]].concat()))
                .collect();
        }
        shapes
            .into_iter()
            .filter(|s| s.iter().sum::<u32>() == k)
            .all(|shape| {
                let mut counts = std::collections::HashMap::new();
                for p in points.rows() {
                    let cell: Vec<u64> = p
                        .iter()
                        .zip(&shape)
                        .map(|(x, e)| (x * f64::from(1u32 << e)).floor() as u64)
                        .collect();
                    *counts.entry(cell).or_insert(0) += 1;
                }
                counts.len() == 1 << k && counts.values().all(|&c| c == 1)
            })
    }

    #[test]
    fn nets_fill_dyadic_boxes() {
        // The first 2^k points of the first two Sobol coordinates form a (0, k, 2)-net.
        for k in 1..=6 {
            let n = 1usize << k;
            let raw = sobol_init(2, n, None).unwrap();
            assert!(elementary_intervals_hold(&raw.points, k), "raw k={k}");
            let shifted = sobol_init(2, n, Some(99)).unwrap();
            assert!(elementary_intervals_hold(&shifted.points, k), "shifted k={k}");
        }
        // Higher dimensions: each single coordinate is still stratified.
        let d4 = sobol_init(4, 16, Some(5)).unwrap();
        for j in 0..4 {
            let mut cells: Vec<usize> = d4.points.rows().map(|p| (p[j] * 16.0) as usize).collect();
            cells.sort_unstable();
            assert_eq!(cells, (0..16).collect::<Vec<_>>());
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = sobol_init(3, 8, Some(1)).unwrap();
        assert_eq!(a, sobol_init(3, 8, Some(1)).unwrap());
        assert_ne!(a.points, sobol_init(3, 8, Some(2)).unwrap().points);
        assert!(a.points.as_slice().iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn dimension_limit() {
        assert!(matches!(
            sobol_init(MAX_SOBOL_DIM + 1, 2, None),
            Err(Error::UnsupportedDimension { .. })
        ));
        assert!(sobol_init(0, 2, None).is_err());
    }

    #[test]
    fn snapping_contract() {
        let grid = Points::from_rows(&[[0.0], [0.5], [1.0]]).unwrap();
        let on_node = SobolDesign {
            points: Points::from_rows(&[[0.5]]).unwrap(),
            scramble_seed: None,
        };
        assert_eq!(snap_to_grid(&on_node, &grid).unwrap(), vec![1]);
        let clash = SobolDesign {
            points: Points::from_rows(&[[0.45], [0.55]]).unwrap(),
            scramble_seed: None,
        };
        // Second point's nearest node is taken; its next-nearest is 1.0.
        assert_eq!(snap_to_grid(&clash, &grid).unwrap(), vec![1, 2]);
    }

    #[test]
    fn snapping_is_greedy_nearest_unused() {
        use rand::Rng as _;
        let mut rng = seeds::rng(3);
        let grid = Points::new(2, (0..2 * 60).map(|_| rng.random::<f64>()).collect()).unwrap();
        let design = sobol_init(2, 32, Some(4)).unwrap();
        let picked = snap_to_grid(&design, &grid).unwrap();
        let mut used = std::collections::HashSet::new();
        for (p, &i) in design.points.rows().zip(&picked) {
            let best = (0..grid.len())
                .filter(|j| !used.contains(j))
                .map(|j| sq_dist(p, grid.row(j)))
                .fold(f64::INFINITY, f64::min);
            assert_eq!(sq_dist(p, grid.row(i)), best);
            assert!(used.insert(i));
        }
    }
}
