//! Continuous-time discrete-event simulation of the shared zero-buffer server.
//!
//! Each sensor emits a Poisson stream. A packet from sensor `i` carries the
//! state of process `j` with probability `c_ij`, sampled independently per
//! process when the packet is generated. An arrival to an idle server starts
//! service (exponential with rate `mu`); an arrival to a busy server replaces
//! the packet in service with probability `p_i` of its own source and is
//! dropped otherwise. Delivering a packet informative for `j` resets the age
//! of `j` to the packet's age; ages are integrated exactly over the sawtooth.
//!
//! Replication `r` draws from ChaCha8 seeded with `seed` on stream `r`, so
//! replications are independent and every run is reproducible bit for bit.

mod engine;
mod stats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{stationary_distribution, StationaryDistribution};
use crate::error::{Error, Result};
use crate::model::{informative_rates, PreemptionPolicy, SystemConfig};
use engine::{run_replication, StreamSet};

pub use stats::{mean_and_halfwidth, student_t_quantile};

/// Run length, discarded warmup, base seed and replication count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub horizon: f64,
    pub warmup: f64,
    pub seed: u64,
    pub replications: u32,
}

pub const DEFAULT_HORIZON: f64 = 1e6;

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig::new(DEFAULT_HORIZON, 0, 1)
    }
}

impl SimConfig {
    /// Warmup defaults to 1% of the horizon.
    pub fn new(horizon: f64, seed: u64, replications: u32) -> Self {
        SimConfig {
            horizon,
            warmup: 0.01 * horizon,
            seed,
            replications,
        }
    }

    pub fn with_warmup(mut self, warmup: f64) -> Self {
        self.warmup = warmup;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.horizon.is_finite()
            && self.horizon > 0.0
            && self.warmup >= 0.0
            && self.warmup < self.horizon;
        if !ok {
            return Err(Error::InvalidHorizon {
                horizon: self.horizon,
                warmup: self.warmup,
            });
        }
        if self.replications == 0 {
            return Err(Error::InvalidReplications);
        }
        Ok(())
    }
}

/// A status update as generated by a sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub source: usize,
    pub generated_at: f64,
    pub informative_for: Vec<bool>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub arrivals: u64,
    pub preemptions: u64,
    pub drops: u64,
    pub completions: u64,
    pub in_service_at_horizon: u64,
}

impl EventCounts {
    /// Every arrival is either preempted later, dropped, completed or still in service.
    pub fn is_conserved(&self) -> bool {
        self.arrivals
            == self.preemptions + self.drops + self.completions + self.in_service_at_horizon
    }

    fn add(&mut self, other: &EventCounts) {
        self.arrivals += other.arrivals;
        self.preemptions += other.preemptions;
        self.drops += other.drops;
        self.completions += other.completions;
        self.in_service_at_horizon += other.in_service_at_horizon;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub replication: u64,
    /// Time-average age per process over the measurement window.
    pub aoi: Vec<f64>,
    /// Fraction of the window spent idle / busy-informative / busy-uninformative, per process.
    pub occupancy: Vec<[f64; 3]>,
    pub counts: EventCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub aoi_mean: Vec<f64>,
    /// Half-width of the 95% Student-t interval over replication means
    /// (infinite with a single replication).
    pub aoi_ci_halfwidth: Vec<f64>,
    /// Summed over replications.
    pub counts: EventCounts,
    /// Averaged over replications.
    pub occupancy: Vec<[f64; 3]>,
    pub replications: Vec<ReplicationResult>,
}

impl SimResult {
    /// One CSV row per process per replication.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "replication,process,aoi,pi0,pi1,pi2,arrivals,preemptions,drops,completions,in_service\n",
        );
        for rep in &self.replications {
            for (j, (aoi, occ)) in rep.aoi.iter().zip(&rep.occupancy).enumerate() {
                let c = rep.counts;
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{}\n",
                    rep.replication,
                    j,
                    aoi,
                    occ[0],
                    occ[1],
                    occ[2],
                    c.arrivals,
                    c.preemptions,
                    c.drops,
                    c.completions,
                    c.in_service_at_horizon
                ));
            }
        }
        out
    }
}

fn aggregate(replications: Vec<ReplicationResult>, n_processes: usize) -> SimResult {
    let r = replications.len() as f64;
    let mut aoi_mean = Vec::with_capacity(n_processes);
    let mut aoi_ci_halfwidth = Vec::with_capacity(n_processes);
    for j in 0..n_processes {
        let samples: Vec<f64> = replications.iter().map(|rep| rep.aoi[j]).collect();
        let (mean, half) = mean_and_halfwidth(&samples, 0.95);
        aoi_mean.push(mean);
        aoi_ci_halfwidth.push(half);
    }
    let mut counts = EventCounts::default();
    let mut occupancy = vec![[0.0; 3]; n_processes];
    for rep in &replications {
        counts.add(&rep.counts);
        for (acc, occ) in occupancy.iter_mut().zip(&rep.occupancy) {
            for k in 0..3 {
                acc[k] += occ[k];
            }
        }
    }
    for occ in &mut occupancy {
        for v in occ.iter_mut() {
            *v /= r;
        }
    }
    SimResult {
        aoi_mean,
        aoi_ci_halfwidth,
        counts,
        occupancy,
        replications,
    }
}

fn run(streams: &StreamSet, sim: &SimConfig) -> Result<SimResult> {
    sim.validate()?;
    let reps: Vec<ReplicationResult> = (0..u64::from(sim.replications))
        .into_par_iter()
        .map(|r| run_replication(streams, sim, r))
        .collect();
    Ok(aggregate(reps, streams.n_processes))
}

/// Simulates the full multi-sensor system.
pub fn simulate(
    config: &SystemConfig,
    policy: &PreemptionPolicy,
    sim: &SimConfig,
) -> Result<SimResult> {
    policy.check_len(config)?;
    let streams = StreamSet {
        rates: config.arrival_rates().to_vec(),
        preempt: policy.probs().to_vec(),
        informative: (0..config.n_sensors())
            .flat_map(|i| config.correlation_row(i).to_vec())
            .collect(),
        n_processes: config.n_processes(),
        service_rate: config.service_rate(),
    };
    run(&streams, sim)
}

/// Simulates process `j`'s equivalent system: four Poisson streams
/// (informative preempting, informative non-preempting, uninformative
/// preempting, uninformative non-preempting) built from the split rates.
/// The result has a single process.
pub fn simulate_reduced(
    config: &SystemConfig,
    policy: &PreemptionPolicy,
    process: usize,
    sim: &SimConfig,
) -> Result<SimResult> {
    config.check_process(process)?;
    let rates = informative_rates(config, policy)?.process(process);
    if rates.informative() <= 0.0 {
        return Err(Error::UncoveredProcess { process });
    }
    let streams = StreamSet {
        rates: vec![
            rates.preempting,
            rates.nonpreempting,
            (rates.channel_preempting - rates.preempting).max(0.0),
            (rates.channel_nonpreempting - rates.nonpreempting).max(0.0),
        ],
        preempt: vec![1.0, 0.0, 1.0, 0.0],
        informative: vec![1.0, 1.0, 0.0, 0.0],
        n_processes: 1,
        service_rate: config.service_rate(),
    };
    run(&streams, sim)
}

/// Empirical against predicted occupancy for one process.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupancyReport {
    pub empirical: [f64; 3],
    pub predicted: StationaryDistribution,
    pub max_deviation: f64,
}

/// Compares simulated state-occupancy fractions with the stationary distribution.
///
/// `sim_process` selects the column of `result` (0 for reduced runs);
/// `process` selects the process of `config` the prediction is made for.
pub fn occupancy_check_at(
    result: &SimResult,
    sim_process: usize,
    config: &SystemConfig,
    policy: &PreemptionPolicy,
    process: usize,
) -> Result<OccupancyReport> {
    let predicted = stationary_distribution(config, policy, process)?;
    let empirical = *result
        .occupancy
        .get(sim_process)
        .ok_or(Error::IndexOutOfRange {
            index: sim_process,
            len: result.occupancy.len(),
        })?;
    let max_deviation = empirical
        .iter()
        .zip(predicted.as_array())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(OccupancyReport {
        empirical,
        predicted,
        max_deviation,
    })
}

pub fn occupancy_check(
    result: &SimResult,
    config: &SystemConfig,
    policy: &PreemptionPolicy,
    process: usize,
) -> Result<OccupancyReport> {
    occupancy_check_at(result, process, config, policy, process)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::aoi_process;

    fn unit() -> SystemConfig {
        SystemConfig::from_rows(vec![1.0], 1.0, vec![vec![1.0]]).unwrap()
    }

    fn fig3a(lambda1: f64) -> SystemConfig {
        SystemConfig::from_rows(
            vec![lambda1, 1.0],
            2.0,
            vec![vec![1.0, 0.5], vec![0.5, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn invalid_horizon_rejected() {
        let bad = SimConfig::new(100.0, 0, 1).with_warmup(100.0);
        let err = simulate(&unit(), &PreemptionPolicy::full(1), &bad).unwrap_err();
        assert!(matches!(err, Error::InvalidHorizon { .. }));
        let bad = SimConfig::new(-1.0, 0, 1);
        assert!(simulate(&unit(), &PreemptionPolicy::full(1), &bad).is_err());
        let bad = SimConfig::new(10.0, 0, 0);
        assert_eq!(
            simulate(&unit(), &PreemptionPolicy::full(1), &bad).unwrap_err(),
            Error::InvalidReplications
        );
    }

    #[test]
    fn no_preemption_never_preempts() {
        let sim = SimConfig::new(2e4, 3, 2);
        let r = simulate(&fig3a(2.0), &PreemptionPolicy::none(2), &sim).unwrap();
        assert_eq!(r.counts.preemptions, 0);
        assert!(r.counts.drops > 0);
        assert!(r.counts.is_conserved());
    }

    #[test]
    fn counts_conserved_every_replication() {
        let sim = SimConfig::new(5e3, 11, 4);
        let pol = PreemptionPolicy::new(vec![0.3, 0.9]).unwrap();
        let r = simulate(&fig3a(1.0), &pol, &sim).unwrap();
        for rep in &r.replications {
            assert!(rep.counts.is_conserved());
            assert!(rep.counts.in_service_at_horizon <= 1);
            for occ in &rep.occupancy {
                assert!((occ.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
        assert!(r.counts.is_conserved());
        assert!(r.counts.preemptions > 0);
    }

    #[test]
    fn deterministic_under_seed() {
        let sim = SimConfig::new(1e4, 42, 3);
        let pol = PreemptionPolicy::new(vec![0.5, 0.5]).unwrap();
        let a = simulate(&fig3a(1.0), &pol, &sim).unwrap();
        let b = simulate(&fig3a(1.0), &pol, &sim).unwrap();
        assert_eq!(a, b);
        let c = simulate(&fig3a(1.0), &pol, &SimConfig { seed: 43, ..sim }).unwrap();
        assert_ne!(a.aoi_mean, c.aoi_mean);
        // replications draw from distinct streams
        assert_ne!(a.replications[0].aoi, a.replications[1].aoi);
    }

    #[test]
    fn reduced_unit_case_is_identical() {
        let sim = SimConfig::new(2e4, 7, 3);
        for pol in [PreemptionPolicy::full(1), PreemptionPolicy::none(1)] {
            let full = simulate(&unit(), &pol, &sim).unwrap();
            let reduced = simulate_reduced(&unit(), &pol, 0, &sim).unwrap();
            assert_eq!(full.aoi_mean, reduced.aoi_mean);
            assert_eq!(full.counts, reduced.counts);
        }
    }

    #[test]
    fn reduced_without_preemption_has_no_preemptions() {
        let sim = SimConfig::new(1e4, 1, 2);
        let r = simulate_reduced(&fig3a(1.0), &PreemptionPolicy::none(2), 1, &sim).unwrap();
        assert_eq!(r.counts.preemptions, 0);
        assert_eq!(r.aoi_mean.len(), 1);
    }

    #[test]
    fn unit_case_close_to_closed_form() {
        let sim = SimConfig::new(2e5, 5, 4);
        let r = simulate(&unit(), &PreemptionPolicy::full(1), &sim).unwrap();
        assert!((r.aoi_mean[0] - 2.0).abs() < 0.03, "{:?}", r.aoi_mean);
    }

    #[test]
    fn all_informative_without_preemption_never_uninformative() {
        let c = SystemConfig::from_rows(vec![1.0, 2.0], 1.5, vec![vec![1.0, 1.0], vec![1.0, 1.0]])
            .unwrap();
        let pol = PreemptionPolicy::none(2);
        let r = simulate(&c, &pol, &SimConfig::new(2e4, 2, 1)).unwrap();
        for j in 0..2 {
            let rep = occupancy_check(&r, &c, &pol, j).unwrap();
            assert_eq!(rep.empirical[2], 0.0);
        }
    }

    #[test]
    fn balanced_load_idles_half_the_time() {
        let c = SystemConfig::from_rows(vec![0.5, 1.5], 2.0, vec![vec![1.0], vec![0.3]]).unwrap();
        let pol = PreemptionPolicy::new(vec![0.2, 0.7]).unwrap();
        let r = simulate(&c, &pol, &SimConfig::new(1e5, 9, 2)).unwrap();
        let rep = occupancy_check(&r, &c, &pol, 0).unwrap();
        assert!((rep.empirical[0] - 0.5).abs() < 0.01);
        assert!(rep.max_deviation < 0.01);
    }

    #[test]
    fn csv_has_row_per_process_and_replication() {
        let r = simulate(
            &fig3a(1.0),
            &PreemptionPolicy::full(2),
            &SimConfig::new(1e3, 0, 3),
        )
        .unwrap();
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 1 + 3 * 2);
        let row: Vec<f64> = csv
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .map(|v| v.parse().unwrap())
            .collect();
        assert_eq!(row[2], r.replications[0].aoi[0]);
    }

    #[test]
    fn fig3a_point_short_run() {
        let c = fig3a(1.0);
        let pol = PreemptionPolicy::new(vec![0.5, 0.5]).unwrap();
        let r = simulate(&c, &pol, &SimConfig::new(2e5, 17, 2)).unwrap();
        for j in 0..2 {
            let d = aoi_process(&c, &pol, j).unwrap();
            assert!((r.aoi_mean[j] - d).abs() / d < 0.02);
        }
    }
}
