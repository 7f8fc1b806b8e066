//! Optimal preemption probabilities.
//!
//! The total age is a sum of `M` ratios of functions affine in `p`,
//! `sum_j (g_j . p + g_j0) / (f_j . p + f_j0)`, minimized over the unit box.
//! [`branch_and_bound`] certifies a global `epsilon`-optimum by branching on
//! the denominator values; [`grid_oracle`] is an exhaustive check for small `N`.

mod bnb;
mod grid;
pub mod lp;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::SystemConfig;

pub use bnb::{branch_and_bound, branch_and_bound_with, BnbOptions, BnbResult, Termination};
pub use grid::{grid_oracle, grid_oracle_with_budget, GridResult, DEFAULT_GRID_BUDGET};

/// One term `(g . p + g0) / (f . p + f0)` of the objective.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearRatio {
    pub g0: f64,
    pub g: Vec<f64>,
    pub f0: f64,
    pub f: Vec<f64>,
}

impl LinearRatio {
    pub fn numerator(&self, p: &[f64]) -> f64 {
        self.g0 + self.g.iter().zip(p).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn denominator(&self, p: &[f64]) -> f64 {
        self.f0 + self.f.iter().zip(p).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        self.numerator(p) / self.denominator(p)
    }

    /// Range of the numerator over the unit box.
    pub fn numerator_range(&self) -> (f64, f64) {
        box_range(self.g0, &self.g)
    }

    pub fn denominator_range(&self) -> (f64, f64) {
        box_range(self.f0, &self.f)
    }
}

fn box_range(constant: f64, coeffs: &[f64]) -> (f64, f64) {
    let lo = constant + coeffs.iter().map(|c| c.min(0.0)).sum::<f64>();
    let hi = constant + coeffs.iter().map(|c| c.max(0.0)).sum::<f64>();
    (lo, hi)
}

/// Sum-of-linear-ratios objective over `p in [0, 1]^N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FractionalProgram {
    pub n_vars: usize,
    pub ratios: Vec<LinearRatio>,
}

impl FractionalProgram {
    pub fn eval(&self, p: &[f64]) -> f64 {
        self.ratios.iter().map(|r| r.eval(p)).sum()
    }

    pub fn n_ratios(&self) -> usize {
        self.ratios.len()
    }

    /// Upper bound on the Euclidean gradient norm of the objective over the box.
    pub fn lipschitz_bound(&self) -> f64 {
        self.ratios
            .iter()
            .map(|r| {
                let (_, num_hi) = r.numerator_range();
                let (den_lo, _) = r.denominator_range();
                let g = r.g.iter().map(|v| v * v).sum::<f64>().sqrt();
                let f = r.f.iter().map(|v| v * v).sum::<f64>().sqrt();
                g / den_lo + num_hi.abs() * f / (den_lo * den_lo)
            })
            .sum()
    }

    fn validate(&self) -> Result<()> {
        for (j, r) in self.ratios.iter().enumerate() {
            if r.g.len() != self.n_vars || r.f.len() != self.n_vars {
                return Err(Error::DimensionMismatch {
                    what: "ratio coefficients",
                    expected: self.n_vars,
                    actual: r.g.len().min(r.f.len()),
                });
            }
            let (den_lo, _) = r.denominator_range();
            if den_lo.is_nan() || den_lo <= 0.0 {
                return Err(Error::NonPositiveRate {
                    what: format!("denominator of ratio {j} over the box"),
                    value: den_lo,
                });
            }
        }
        Ok(())
    }
}

/// Numerator and denominator coefficients of every process's age:
///
/// * `g_j0 = mu (mu + lc)^2 + sum_i lambda_i mu lc c_ij`
/// * `g_ji = ((mu + lc)^2 - mu lc c_ij) lambda_i`
/// * `f_j0 = (mu + lc) mu^2 sum_i c_ij lambda_i`
/// * `f_ji = lc mu (mu + lc) c_ij lambda_i`
pub fn build_fractional_program(config: &SystemConfig) -> Result<FractionalProgram> {
    let mu = config.service_rate();
    let lc = config.total_rate();
    let s = mu + lc;
    let n = config.n_sensors();
    let lambda = config.arrival_rates();
    let ratios = (0..config.n_processes())
        .map(|j| {
            let informative = config.informative_rate(j);
            if informative <= 0.0 {
                return Err(Error::UncoveredProcess { process: j });
            }
            let col = |i: usize| config.correlation(i, j);
            Ok(LinearRatio {
                g0: mu * s * s + (0..n).map(|i| lambda[i] * mu * lc * col(i)).sum::<f64>(),
                g: (0..n)
                    .map(|i| (s * s - mu * lc * col(i)) * lambda[i])
                    .collect(),
                f0: s * mu * mu * informative,
                f: (0..n).map(|i| lc * mu * s * col(i) * lambda[i]).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FractionalProgram { n_vars: n, ratios })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioBounds {
    pub num_min: f64,
    pub num_max: f64,
    pub den_min: f64,
    pub den_max: f64,
}

/// Box bounds on every numerator and denominator; they span the rectangle
/// the branch-and-bound search lives in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpBounds {
    pub per_process: Vec<RatioBounds>,
}

impl EpBounds {
    /// Longest denominator interval.
    pub fn diameter(&self) -> f64 {
        self.per_process
            .iter()
            .map(|b| b.den_max - b.den_min)
            .fold(0.0, f64::max)
    }
}

/// Numerators and denominators are nondecreasing in every `p_i`, so their
/// extremes sit at `p = 0` and `p = 1`.
pub fn ep_bounds(fp: &FractionalProgram, config: &SystemConfig) -> Result<EpBounds> {
    for (j, r) in fp.ratios.iter().enumerate() {
        for (i, (&g, &f)) in r.g.iter().zip(&r.f).enumerate() {
            if g < 0.0 {
                return Err(Error::MonotonicityViolated {
                    process: j,
                    sensor: i,
                    value: g,
                });
            }
            if f < 0.0 {
                return Err(Error::MonotonicityViolated {
                    process: j,
                    sensor: i,
                    value: f,
                });
            }
        }
    }
    let zeros = vec![0.0; fp.n_vars];
    let ones = vec![1.0; fp.n_vars];
    let per_process: Vec<RatioBounds> = fp
        .ratios
        .iter()
        .map(|r| RatioBounds {
            num_min: r.numerator(&zeros),
            num_max: r.numerator(&ones),
            den_min: r.denominator(&zeros),
            den_max: r.denominator(&ones),
        })
        .collect();

    let mu = config.service_rate();
    let s = mu + config.total_rate();
    for (j, b) in per_process.iter().enumerate() {
        let inf = config.informative_rate(j);
        debug_assert!((b.num_max - s.powi(3)).abs() <= 1e-9 * s.powi(3));
        debug_assert!((b.den_min - mu * mu * s * inf).abs() <= 1e-9 * b.den_min);
        debug_assert!((b.den_max - mu * s * s * inf).abs() <= 1e-9 * b.den_max);
    }
    Ok(EpBounds { per_process })
}

/// Worst-case iteration count of an outer-space branch-and-bound run:
/// `M * ceil(log2(4 M (mu+lc)^2 lc^2 / (eps mu^3 lmin^2)))`, with
/// `lmin = min_j sum_i lambda_i c_ij`. Clamped at zero when the logarithm is negative.
pub fn iteration_upper_bound(config: &SystemConfig, epsilon: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    if let Some(j) = (0..config.n_processes()).find(|&j| !config.is_covered(j)) {
        return Err(Error::UncoveredProcess { process: j });
    }
    let m = config.n_processes() as f64;
    let mu = config.service_rate();
    let lc = config.total_rate();
    let lmin = config.min_informative_rate();
    let arg = 4.0 * m * (mu + lc).powi(2) * lc * lc / (epsilon * mu.powi(3) * lmin * lmin);
    let steps = arg.log2().ceil().max(0.0);
    Ok(config.n_processes() as u64 * steps as u64)
}
