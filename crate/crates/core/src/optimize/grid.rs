use serde::Serialize;

use crate::analysis::total_aoi;
use crate::error::{Error, Result};
use crate::model::SystemConfig;

pub const DEFAULT_GRID_BUDGET: u64 = 20_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    pub p_best: Vec<f64>,
    pub objective: f64,
    pub points: u64,
}

pub fn grid_oracle(config: &SystemConfig, resolution: f64) -> Result<GridResult> {
    grid_oracle_with_budget(config, resolution, DEFAULT_GRID_BUDGET)
}

/// Exhaustive minimum of the total age over the grid `{min(k r, 1)}^N`,
/// `k = 0..=ceil(1/r)`. Halving `r` yields a superset of points. Ties keep
/// the first point in lexicographic order.
pub fn grid_oracle_with_budget(
    config: &SystemConfig,
    resolution: f64,
    budget: u64,
) -> Result<GridResult> {
    if !(resolution > 0.0 && resolution <= 0.5) {
        return Err(Error::InvalidResolution(resolution));
    }
    let n = config.n_sensors();
    let steps = (1.0 / resolution - 1e-9).ceil() as usize;
    let axis: Vec<f64> = (0..=steps)
        .map(|k| (k as f64 * resolution).min(1.0))
        .collect();
    let points = (axis.len() as f64).powi(n as i32);
    if points > budget as f64 {
        return Err(Error::BudgetExceeded { points, budget });
    }

    let mut index = vec![0usize; n];
    let mut p = vec![0.0; n];
    let mut best = f64::INFINITY;
    let mut p_best = p.clone();
    let mut visited = 0u64;
    loop {
        for (x, &k) in p.iter_mut().zip(&index) {
            *x = axis[k];
        }
        let value = total_aoi(config, &p);
        visited += 1;
        if value < best {
            best = value;
            p_best.copy_from_slice(&p);
        }
        // odometer increment, last coordinate fastest
        let mut d = n;
        loop {
            if d == 0 {
                return Ok(GridResult {
                    p_best,
                    objective: best,
                    points: visited,
                });
            }
            d -= 1;
            index[d] += 1;
            if index[d] < axis.len() {
                break;
            }
            index[d] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_case() {
        let c = SystemConfig::from_rows(vec![1.0], 1.0, vec![vec![1.0]]).unwrap();
        let g = grid_oracle(&c, 0.1).unwrap();
        assert_eq!(g.p_best, vec![1.0]);
        assert_eq!(g.objective, 2.0);
        assert_eq!(g.points, 11);
    }

    #[test]
    fn refinement_never_worse() {
        let c =
            SystemConfig::from_rows(vec![1.0, 4.0], 2.0, vec![vec![1.0, 0.05], vec![0.05, 1.0]])
                .unwrap();
        let mut last = f64::INFINITY;
        for r in [0.5, 0.25, 0.125, 0.0625, 0.03125] {
            let g = grid_oracle(&c, r).unwrap();
            assert!(g.objective <= last);
            last = g.objective;
        }
        // non-dyadic resolutions still nest under halving
        let a = grid_oracle(&c, 0.3).unwrap();
        let b = grid_oracle(&c, 0.15).unwrap();
        assert!(b.objective <= a.objective);
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = SystemConfig::from_rows(vec![1.0; 4], 1.0, vec![vec![1.0]; 4]).unwrap();
        assert!(matches!(
            grid_oracle(&c, 0.0),
            Err(Error::InvalidResolution(_))
        ));
        assert!(matches!(
            grid_oracle(&c, 0.6),
            Err(Error::InvalidResolution(_))
        ));
        assert!(matches!(
            grid_oracle_with_budget(&c, 0.01, 1000),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
