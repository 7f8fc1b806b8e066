//! Closed-form average age of information.
//!
//! Every process `j` sees the channel as a two-source M/M/1/1 system: an
//! informative stream (split into packets that may preempt and packets that
//! may not) and an uninformative residual. The server occupancy is a
//! three-state chain (idle, busy-informative, busy-uninformative) whose
//! stationary law and age average are evaluated here in closed form.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{informative_rates, Coverage, PreemptionPolicy, SystemConfig};

/// Long-run probabilities of idle (`pi0`), busy with a packet informative for
/// the process (`pi1`) and busy with an uninformative packet (`pi2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryDistribution {
    pub pi0: f64,
    pub pi1: f64,
    pub pi2: f64,
}

impl StationaryDistribution {
    pub fn as_array(&self) -> [f64; 3] {
        [self.pi0, self.pi1, self.pi2]
    }
}

/// Per-process average ages and their sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AoiReport {
    pub per_process: Vec<f64>,
    pub total: f64,
}

fn uncovered(config: &SystemConfig, process: usize) -> Result<f64> {
    match config.coverage() {
        Coverage::AnalysisOnly => Ok(f64::INFINITY),
        Coverage::Strict => Err(Error::UncoveredProcess { process }),
    }
}

pub fn stationary_distribution(
    config: &SystemConfig,
    policy: &PreemptionPolicy,
    process: usize,
) -> Result<StationaryDistribution> {
    config.check_process(process)?;
    let rates = informative_rates(config, policy)?.process(process);
    let mu = config.service_rate();
    let lc = rates.channel_total;
    let pi0 = mu / (lc + mu);
    let pi1 = (lc * rates.preempting + rates.nonpreempting * mu + rates.preempting * mu)
        / ((lc + mu) * (rates.channel_preempting + mu));
    // Complement keeps the three terms summing to one in floating point.
    let pi2 = (1.0 - pi0 - pi1).max(0.0);
    Ok(StationaryDistribution { pi0, pi1, pi2 })
}

/// Average age of process `j` under policy `p`.
///
/// Evaluated term by term over sensors:
///
/// ```text
///        mu (mu+lc)^2 + sum_i (mu lc c_ij (1-p_i) + (mu+lc)^2 p_i) lambda_i
/// D_j = -------------------------------------------------------------------
///              mu sum_i (mu+lc) (lc p_i + mu) c_ij lambda_i
/// ```
pub fn aoi_process(
    config: &SystemConfig,
    policy: &PreemptionPolicy,
    process: usize,
) -> Result<f64> {
    config.check_process(process)?;
    policy.check_len(config)?;
    let value = age_ratio(config, policy.probs(), process);
    if value.is_finite() {
        Ok(value)
    } else {
        uncovered(config, process)
    }
}

#[inline]
fn age_ratio(config: &SystemConfig, probs: &[f64], process: usize) -> f64 {
    let mu = config.service_rate();
    let lc = config.total_rate();
    let s2 = (mu + lc) * (mu + lc);
    let mut num = mu * s2;
    let mut den = 0.0;
    for (i, (&lambda, &p)) in config.arrival_rates().iter().zip(probs).enumerate() {
        let c = config.correlation(i, process);
        num += (mu * lc * c * (1.0 - p) + s2 * p) * lambda;
        den += (mu + lc) * (lc * p + mu) * c * lambda;
    }
    den *= mu;
    if den > 0.0 {
        num / den
    } else {
        f64::INFINITY
    }
}

/// Sum of per-process ages; `+inf` when any process is uncovered.
///
/// Allocation-free; intended for exhaustive searches over `p`.
pub fn total_aoi(config: &SystemConfig, probs: &[f64]) -> f64 {
    (0..config.n_processes())
        .map(|j| age_ratio(config, probs, j))
        .sum()
}

pub fn aoi_sum(config: &SystemConfig, policy: &PreemptionPolicy) -> Result<AoiReport> {
    let per_process = (0..config.n_processes())
        .map(|j| aoi_process(config, policy, j))
        .collect::<Result<Vec<_>>>()?;
    let total = per_process.iter().sum();
    Ok(AoiReport { per_process, total })
}

/// Age of process `j` when every arrival preempts: `(lc + mu) / (mu * S_j)`.
pub fn aoi_full_preemption(config: &SystemConfig, process: usize) -> Result<f64> {
    config.check_process(process)?;
    let s = config.informative_rate(process);
    if s <= 0.0 {
        return uncovered(config, process);
    }
    let mu = config.service_rate();
    Ok((config.total_rate() + mu) / (mu * s))
}

/// Age of process `j` when no arrival preempts.
pub fn aoi_no_preemption(config: &SystemConfig, process: usize) -> Result<f64> {
    config.check_process(process)?;
    let s = config.informative_rate(process);
    if s <= 0.0 {
        return uncovered(config, process);
    }
    let mu = config.service_rate();
    let lc = config.total_rate();
    Ok(lc / (mu * (lc + mu)) + (lc + mu) / (mu * s))
}

/// Constant separating the no-preemption and full-preemption ages of every
/// process: `lc / (mu (lc + mu))`.
pub fn preemption_gap(config: &SystemConfig) -> f64 {
    let mu = config.service_rate();
    let lc = config.total_rate();
    lc / (mu * (lc + mu))
}

/// Same age as [`aoi_process`], written as a polynomial ratio in the two-source
/// rates (channel totals and the process's preempting/non-preempting
/// informative rates) instead of a sum over sensors.
pub fn aoi_two_source_form(
    config: &SystemConfig,
    policy: &PreemptionPolicy,
    process: usize,
) -> Result<f64> {
    config.check_process(process)?;
    let r = informative_rates(config, policy)?.process(process);
    if r.informative() <= 0.0 {
        return uncovered(config, process);
    }
    let mu = config.service_rate();
    let lc = r.channel_total;
    let ltc = r.channel_preempting;
    let lt = r.preempting;
    let ld = r.nonpreempting;
    let num = lc * lc * ltc
        + lc * lc * mu
        + lc * ld * mu
        + 2.0 * lc * ltc * mu
        + 2.0 * lc * mu * mu
        + ltc * mu * mu
        + mu * mu * mu;
    let den = mu * (lc * lc * lt + lc * ld * mu + 2.0 * lc * lt * mu + ld * mu * mu + lt * mu * mu);
    Ok(num / den)
}
