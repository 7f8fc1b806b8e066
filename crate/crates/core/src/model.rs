//! System description: sensors, processes, arrival and service rates, the
//! sensor/process correlation matrix and per-sensor preemption probabilities.

use serde::Serialize;

use crate::error::{Error, Result};

/// How validation treats processes that no sensor ever reports on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Coverage {
    /// Reject configs with an uncovered process.
    #[default]
    Strict,
    /// Accept them; the age of an uncovered process evaluates to `+inf`.
    AnalysisOnly,
}

/// A validated multi-sensor, multi-process system.
///
/// The correlation matrix is stored row-major: entry `(i, j)` is the
/// probability that a packet from sensor `i` carries the state of process `j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemConfig {
    n_sensors: usize,
    n_processes: usize,
    arrival_rates: Vec<f64>,
    service_rate: f64,
    correlation: Vec<f64>,
    coverage: Coverage,
}

impl SystemConfig {
    /// Validates and builds a config in [`Coverage::Strict`] mode.
    pub fn new(
        n_sensors: usize,
        n_processes: usize,
        arrival_rates: Vec<f64>,
        service_rate: f64,
        correlation: Vec<Vec<f64>>,
    ) -> Result<Self> {
        Self::with_coverage(
            n_sensors,
            n_processes,
            arrival_rates,
            service_rate,
            correlation,
            Coverage::Strict,
        )
    }

    /// Shape-inferring constructor: `N` from the rate vector, `M` from the first row.
    pub fn from_rows(
        arrival_rates: Vec<f64>,
        service_rate: f64,
        correlation: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = arrival_rates.len();
        let m = correlation.first().map_or(0, Vec::len);
        Self::new(n, m, arrival_rates, service_rate, correlation)
    }

    pub fn with_coverage(
        n_sensors: usize,
        n_processes: usize,
        arrival_rates: Vec<f64>,
        service_rate: f64,
        correlation: Vec<Vec<f64>>,
        coverage: Coverage,
    ) -> Result<Self> {
        if n_sensors == 0 {
            return Err(Error::DimensionMismatch {
                what: "sensor count",
                expected: 1,
                actual: 0,
            });
        }
        if n_processes == 0 {
            return Err(Error::DimensionMismatch {
                what: "process count",
                expected: 1,
                actual: 0,
            });
        }
        if arrival_rates.len() != n_sensors {
            return Err(Error::DimensionMismatch {
                what: "arrival rate vector",
                expected: n_sensors,
                actual: arrival_rates.len(),
            });
        }
        if correlation.len() != n_sensors {
            return Err(Error::DimensionMismatch {
                what: "correlation rows",
                expected: n_sensors,
                actual: correlation.len(),
            });
        }
        for row in &correlation {
            if row.len() != n_processes {
                return Err(Error::DimensionMismatch {
                    what: "correlation columns",
                    expected: n_processes,
                    actual: row.len(),
                });
            }
        }
        for (i, &rate) in arrival_rates.iter().enumerate() {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::NonPositiveRate {
                    what: format!("arrival rate lambda[{i}]"),
                    value: rate,
                });
            }
        }
        if !(service_rate > 0.0 && service_rate.is_finite()) {
            return Err(Error::NonPositiveRate {
                what: "service rate mu".to_string(),
                value: service_rate,
            });
        }
        for (i, row) in correlation.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&c) {
                    return Err(Error::CorrelationOutOfRange {
                        sensor: i,
                        process: j,
                        value: c,
                    });
                }
            }
        }

        let config = SystemConfig {
            n_sensors,
            n_processes,
            arrival_rates,
            service_rate,
            correlation: correlation.into_iter().flatten().collect(),
            coverage,
        };
        if coverage == Coverage::Strict {
            if let Some(j) = (0..n_processes).find(|&j| !config.is_covered(j)) {
                return Err(Error::UncoveredProcess { process: j });
            }
        }
        Ok(config)
    }

    pub fn n_sensors(&self) -> usize {
        self.n_sensors
    }

    pub fn n_processes(&self) -> usize {
        self.n_processes
    }

    pub fn arrival_rates(&self) -> &[f64] {
        &self.arrival_rates
    }

    pub fn service_rate(&self) -> f64 {
        self.service_rate
    }

    pub fn coverage(&self) -> Coverage {
        self.coverage
    }

    #[inline]
    pub fn correlation(&self, sensor: usize, process: usize) -> f64 {
        self.correlation[sensor * self.n_processes + process]
    }

    pub fn correlation_row(&self, sensor: usize) -> &[f64] {
        let start = sensor * self.n_processes;
        &self.correlation[start..start + self.n_processes]
    }

    pub fn correlation_rows(&self) -> Vec<Vec<f64>> {
        self.correlation
            .chunks(self.n_processes)
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// Aggregate channel arrival rate `sum_i lambda_i`.
    pub fn total_rate(&self) -> f64 {
        self.arrival_rates.iter().sum()
    }

    /// Total informative rate for process `j`, `sum_i c_ij lambda_i`.
    pub fn informative_rate(&self, process: usize) -> f64 {
        (0..self.n_sensors)
            .map(|i| self.correlation(i, process) * self.arrival_rates[i])
            .sum()
    }

    pub fn is_covered(&self, process: usize) -> bool {
        self.informative_rate(process) > 0.0
    }

    /// Smallest total informative rate over all processes.
    pub fn min_informative_rate(&self) -> f64 {
        (0..self.n_processes)
            .map(|j| self.informative_rate(j))
            .fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn check_process(&self, process: usize) -> Result<()> {
        if process >= self.n_processes {
            return Err(Error::IndexOutOfRange {
                index: process,
                len: self.n_processes,
            });
        }
        Ok(())
    }

    /// Multiplies the service rate and every arrival rate by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::with_coverage(
            self.n_sensors,
            self.n_processes,
            self.arrival_rates.iter().map(|r| r * factor).collect(),
            self.service_rate * factor,
            self.correlation_rows(),
            self.coverage,
        )
    }

    /// Copy with one arrival rate replaced.
    pub fn with_arrival_rate(&self, sensor: usize, rate: f64) -> Result<Self> {
        let mut rates = self.arrival_rates.clone();
        if sensor >= rates.len() {
            return Err(Error::DimensionMismatch {
                what: "sensor index",
                expected: rates.len(),
                actual: sensor,
            });
        }
        rates[sensor] = rate;
        Self::with_coverage(
            self.n_sensors,
            self.n_processes,
            rates,
            self.service_rate,
            self.correlation_rows(),
            self.coverage,
        )
    }

    pub fn with_service_rate(&self, rate: f64) -> Result<Self> {
        Self::with_coverage(
            self.n_sensors,
            self.n_processes,
            self.arrival_rates.clone(),
            rate,
            self.correlation_rows(),
            self.coverage,
        )
    }

    pub fn with_correlation(&self, correlation: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_coverage(
            self.n_sensors,
            self.n_processes,
            self.arrival_rates.clone(),
            self.service_rate,
            correlation,
            self.coverage,
        )
    }
}

/// Per-sensor preemption probabilities `p_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PreemptionPolicy {
    probs: Vec<f64>,
}

impl PreemptionPolicy {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        for (i, &p) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::ProbabilityOutOfRange {
                    sensor: i,
                    value: p,
                });
            }
        }
        Ok(PreemptionPolicy { probs })
    }

    pub fn uniform(n_sensors: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; n_sensors])
    }

    /// Every arrival preempts (`p = 1`).
    pub fn full(n_sensors: usize) -> Self {
        PreemptionPolicy {
            probs: vec![1.0; n_sensors],
        }
    }

    /// No arrival preempts (`p = 0`).
    pub fn none(n_sensors: usize) -> Self {
        PreemptionPolicy {
            probs: vec![0.0; n_sensors],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub(crate) fn check_len(&self, config: &SystemConfig) -> Result<()> {
        if self.probs.len() != config.n_sensors() {
            return Err(Error::DimensionMismatch {
                what: "preemption vector",
                expected: config.n_sensors(),
                actual: self.probs.len(),
            });
        }
        Ok(())
    }
}

/// Informative and channel arrival rates split by preemption capability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSummary {
    /// Informative rate of packets that may preempt, per process.
    pub informative_preempting: Vec<f64>,
    /// Informative rate of packets that never preempt, per process.
    pub informative_nonpreempting: Vec<f64>,
    pub channel_total: f64,
    pub channel_preempting: f64,
    pub channel_nonpreempting: f64,
}

/// Rates seen by a single process in its equivalent two-source system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessRates {
    pub preempting: f64,
    pub nonpreempting: f64,
    pub channel_total: f64,
    pub channel_preempting: f64,
    pub channel_nonpreempting: f64,
}

impl ProcessRates {
    pub fn informative(&self) -> f64 {
        self.preempting + self.nonpreempting
    }
}

impl RateSummary {
    pub fn process(&self, j: usize) -> ProcessRates {
        ProcessRates {
            preempting: self.informative_preempting[j],
            nonpreempting: self.informative_nonpreempting[j],
            channel_total: self.channel_total,
            channel_preempting: self.channel_preempting,
            channel_nonpreempting: self.channel_nonpreempting,
        }
    }
}

/// `(lambda ⊙ p)^T C`, `(lambda ⊙ (1 - p))^T C` and the channel aggregates.
pub fn informative_rates(config: &SystemConfig, policy: &PreemptionPolicy) -> Result<RateSummary> {
    policy.check_len(config)?;
    let m = config.n_processes();
    let mut preempting = vec![0.0; m];
    let mut nonpreempting = vec![0.0; m];
    let mut channel_preempting = 0.0;
    let mut channel_nonpreempting = 0.0;
    for (i, (&rate, &p)) in config
        .arrival_rates()
        .iter()
        .zip(policy.probs())
        .enumerate()
    {
        let pre = rate * p;
        let non = rate * (1.0 - p);
        channel_preempting += pre;
        channel_nonpreempting += non;
        for (j, &c) in config.correlation_row(i).iter().enumerate() {
            preempting[j] += pre * c;
            nonpreempting[j] += non * c;
        }
    }
    Ok(RateSummary {
        informative_preempting: preempting,
        informative_nonpreempting: nonpreempting,
        channel_total: channel_preempting + channel_nonpreempting,
        channel_preempting,
        channel_nonpreempting,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig3a(lambda1: f64) -> SystemConfig {
        SystemConfig::from_rows(
            vec![lambda1, 1.0],
            2.0,
            vec![vec![1.0, 0.5], vec![0.5, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn accepts_fig3a_config() {
        let c = fig3a(1.0);
        assert_eq!(c.n_sensors(), 2);
        assert_eq!(c.n_processes(), 2);
        assert_eq!(c.total_rate(), 2.0);
    }

    #[test]
    fn rejects_uncovered_process() {
        let err = SystemConfig::new(1, 1, vec![1.0], 1.0, vec![vec![0.0]]).unwrap_err();
        assert_eq!(err, Error::UncoveredProcess { process: 0 });
        let ok = SystemConfig::with_coverage(
            1,
            1,
            vec![1.0],
            1.0,
            vec![vec![0.0]],
            Coverage::AnalysisOnly,
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn rejects_negative_rate() {
        let err =
            SystemConfig::new(2, 1, vec![1.0, -1.0], 1.0, vec![vec![1.0], vec![1.0]]).unwrap_err();
        assert!(matches!(err, Error::NonPositiveRate { .. }));
        let err = SystemConfig::new(1, 1, vec![1.0], 0.0, vec![vec![1.0]]).unwrap_err();
        assert!(matches!(err, Error::NonPositiveRate { .. }));
        let err = SystemConfig::new(1, 1, vec![f64::NAN], 1.0, vec![vec![1.0]]).unwrap_err();
        assert!(matches!(err, Error::NonPositiveRate { .. }));
    }

    #[test]
    fn rejects_bad_shapes_and_entries() {
        let err = SystemConfig::new(2, 2, vec![1.0], 1.0, vec![vec![1.0, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
        let err = SystemConfig::new(2, 2, vec![1.0, 1.0], 1.0, vec![vec![1.0, 1.0], vec![1.0]])
            .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
        let err = SystemConfig::new(1, 1, vec![1.0], 1.0, vec![vec![1.5]]).unwrap_err();
        assert!(matches!(
            err,
            Error::CorrelationOutOfRange {
                sensor: 0,
                process: 0,
                ..
            }
        ));
        assert!(PreemptionPolicy::new(vec![0.5, -0.1]).is_err());
        assert!(PreemptionPolicy::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn rates_full_preemption() {
        let c = fig3a(1.0);
        let r = informative_rates(&c, &PreemptionPolicy::full(2)).unwrap();
        assert_eq!(r.informative_preempting, vec![1.5, 1.5]);
        assert_eq!(r.informative_nonpreempting, vec![0.0, 0.0]);
        assert_eq!(r.channel_total, 2.0);
        assert_eq!(r.channel_nonpreempting, 0.0);
    }

    #[test]
    fn rates_no_preemption() {
        let c = SystemConfig::from_rows(vec![1.0, 6.0], 2.0, vec![vec![1.0, 0.5], vec![0.5, 1.0]])
            .unwrap();
        let r = informative_rates(&c, &PreemptionPolicy::none(2)).unwrap();
        assert_eq!(r.informative_nonpreempting, vec![4.0, 6.5]);
        assert_eq!(r.informative_preempting, vec![0.0, 0.0]);
        assert_eq!(r.channel_total, 7.0);
        assert_eq!(r.channel_preempting, 0.0);
    }

    /// Scalar double loop over (j, i), independent of the row-wise accumulation.
    #[allow(clippy::needless_range_loop)]
    fn rates_oracle(lambda: &[f64], p: &[f64], c: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let m = c[0].len();
        let mut pre = Vec::new();
        let mut non = Vec::new();
        for j in 0..m {
            let mut a = 0.0;
            let mut b = 0.0;
            for i in 0..lambda.len() {
                a += lambda[i] * p[i] * c[i][j];
                b += lambda[i] * (1.0 - p[i]) * c[i][j];
            }
            pre.push(a);
            non.push(b);
        }
        (pre, non)
    }

    #[test]
    fn rates_partial_preemption() {
        let corr = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let c = SystemConfig::from_rows(vec![2.0, 3.0], 1.0, corr.clone()).unwrap();
        let p = PreemptionPolicy::new(vec![0.5, 0.2]).unwrap();
        let r = informative_rates(&c, &p).unwrap();
        let (pre, non) = rates_oracle(&[2.0, 3.0], &[0.5, 0.2], &corr);
        for j in 0..2 {
            assert!((r.informative_preempting[j] - pre[j]).abs() < 1e-15);
            assert!((r.informative_nonpreempting[j] - non[j]).abs() < 1e-15);
        }
        assert!((r.informative_preempting[0] - 1.0).abs() < 1e-15);
        assert!((r.informative_preempting[1] - 0.6).abs() < 1e-15);
        assert!((r.informative_nonpreempting[0] - 1.0).abs() < 1e-15);
        assert!((r.informative_nonpreempting[1] - 2.4).abs() < 1e-15);
        assert!((r.channel_preempting - 1.6).abs() < 1e-15);
        assert!((r.channel_nonpreempting - 3.4).abs() < 1e-15);
    }

    #[test]
    fn policy_length_checked() {
        let c = fig3a(1.0);
        let err = informative_rates(&c, &PreemptionPolicy::full(3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn config_and_policy() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
            (1usize..5, 1usize..5).prop_flat_map(|(n, m)| {
                (
                    prop::collection::vec(0.1f64..10.0, n),
                    prop::collection::vec(prop::collection::vec(0.05f64..=1.0, m), n),
                    prop::collection::vec(0.0f64..=1.0, n),
                )
            })
        }

        proptest! {
            #[test]
            fn conservation_linearity_bounds((lambda, corr, p) in config_and_policy()) {
                let c = SystemConfig::from_rows(lambda.clone(), 1.0, corr).unwrap();
                let pol = PreemptionPolicy::new(p).unwrap();
                let r = informative_rates(&c, &pol).unwrap();
                let tol = 1e-12 * c.total_rate().max(1.0);
                for j in 0..c.n_processes() {
                    let total = c.informative_rate(j);
                    prop_assert!((r.informative_preempting[j] + r.informative_nonpreempting[j] - total).abs() <= tol);
                    prop_assert!(r.informative_preempting[j] <= r.channel_preempting + tol);
                    prop_assert!(r.informative_nonpreempting[j] <= r.channel_nonpreempting + tol);
                }
                prop_assert!((r.channel_preempting + r.channel_nonpreempting - c.total_rate()).abs() <= tol);

                let doubled = c.scaled(2.0).unwrap();
                let r2 = informative_rates(&doubled, &pol).unwrap();
                for j in 0..c.n_processes() {
                    prop_assert!((r2.informative_preempting[j] - 2.0 * r.informative_preempting[j]).abs() <= 2.0 * tol);
                    prop_assert!((r2.informative_nonpreempting[j] - 2.0 * r.informative_nonpreempting[j]).abs() <= 2.0 * tol);
                }
                prop_assert!((r2.channel_total - 2.0 * r.channel_total).abs() <= 2.0 * tol);
            }

            #[test]
            fn endpoint_policies_zero_out((lambda, corr, _p) in config_and_policy()) {
                let c = SystemConfig::from_rows(lambda, 1.0, corr).unwrap();
                let n = c.n_sensors();
                let full = informative_rates(&c, &PreemptionPolicy::full(n)).unwrap();
                prop_assert!(full.informative_nonpreempting.iter().all(|&x| x == 0.0));
                prop_assert_eq!(full.channel_nonpreempting, 0.0);
                let none = informative_rates(&c, &PreemptionPolicy::none(n)).unwrap();
                prop_assert!(none.informative_preempting.iter().all(|&x| x == 0.0));
                prop_assert_eq!(none.channel_preempting, 0.0);
            }
        }
    }
}
