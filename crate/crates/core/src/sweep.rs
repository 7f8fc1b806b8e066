//! Parameter sweeps over the analysis, simulation and optimization engines.
//!
//! A sweep varies one parameter of a base config and produces one
//! [`SweepRow`] per `(value, policy)` pair, in sweep order. Rows are computed
//! in parallel on the current rayon pool.
//!
//! CSV columns, in order, for `N` sensors and `M` processes (groups appear
//! only when the matching output is requested):
//!
//! | group        | columns                                                         |
//! |--------------|-----------------------------------------------------------------|
//! | always       | `value`, `p_1..p_N`                                             |
//! | `analysis`   | `delta_theory_1..M`, `delta_theory_sum`, `sum_at_p0`, `sum_at_p1` |
//! | `simulation` | `delta_sim_1..M`, `ci_1..M`, `occupancy_dev_1..M`               |
//! | `optimum`    | `p_star_1..N`, `sum_at_p_star`, `lower_bound`, `certified`, `sum_at_p0`, `sum_at_p1` |
//! | `bounds`     | `theorem2_bound`                                                |
//!
//! `sum_at_p0` and `sum_at_p1` are emitted once even when both `analysis`
//! and `optimum` are requested. Numbers use Rust's shortest round-trip
//! formatting, so every cell parses back to the exact `f64`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{aoi_sum, total_aoi};
use crate::document::{ConfigDocument, SimBlock};
use crate::error::{Error, Result};
use crate::model::{Coverage, PreemptionPolicy, SystemConfig};
use crate::optimize::{branch_and_bound, build_fractional_program, iteration_upper_bound};
use crate::sim::{occupancy_check, simulate, SimConfig};

pub const DEFAULT_EPSILON: f64 = 0.01;

/// The swept quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SweepParameter {
    /// Arrival rate of one sensor, written `lambda_1`, `lambda_2`, ... (1-based).
    Lambda(usize),
    Mu,
    /// The same preemption probability for every sensor.
    PUniform,
    /// Off-diagonal entry of a symmetric two-sensor, two-process correlation matrix.
    Theta,
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepParameter::Lambda(i) => write!(f, "lambda_{}", i + 1),
            SweepParameter::Mu => f.write_str("mu"),
            SweepParameter::PUniform => f.write_str("p_uniform"),
            SweepParameter::Theta => f.write_str("theta"),
        }
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mu" => Ok(SweepParameter::Mu),
            "p_uniform" => Ok(SweepParameter::PUniform),
            "theta" => Ok(SweepParameter::Theta),
            _ => s
                .strip_prefix("lambda_")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k >= 1)
                .map(|k| SweepParameter::Lambda(k - 1))
                .ok_or_else(|| Error::InvalidSweepParameter(format!("unknown parameter `{s}`"))),
        }
    }
}

impl TryFrom<String> for SweepParameter {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SweepParameter> for String {
    fn from(p: SweepParameter) -> String {
        p.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOutput {
    Analysis,
    Simulation,
    Optimum,
    Bounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Base config; its `preemption` entry is the default policy.
    pub base: ConfigDocument,
    /// Policies evaluated at every value. Defaults to the base policy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policies: Option<Vec<Vec<f64>>>,
    pub outputs: Vec<SweepOutput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Set on presets whose parameters are representative rather than published.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub illustration: bool,
}

/// One evaluated point. Optional fields are present exactly when the matching output was requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub policy: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_theory: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_theory_sum: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_sim: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_halfwidth: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupancy_deviation: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_star: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sum_at_p_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certified: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sum_at_p0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sum_at_p1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem2_bound: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub parameter: SweepParameter,
    pub n_sensors: usize,
    pub n_processes: usize,
    pub outputs: Vec<SweepOutput>,
    pub rows: Vec<SweepRow>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidSweepParameter(msg.into())
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SweepSpec =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep spec serializes")
    }

    pub fn wants(&self, output: SweepOutput) -> bool {
        self.outputs.contains(&output)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(DEFAULT_EPSILON)
    }

    pub fn sim_config(&self) -> SimConfig {
        self.sim.or(self.base.sim).unwrap_or_default().resolve()
    }

    fn base_config(&self) -> Result<SystemConfig> {
        self.base.system_config(Coverage::Strict)
    }

    /// Policies applied at each value; for `p_uniform` the value itself is the policy.
    fn policies(&self, n: usize) -> Result<Vec<PreemptionPolicy>> {
        if self.parameter == SweepParameter::PUniform {
            if self.policies.is_some() {
                return Err(invalid("p_uniform sweeps take no policy list"));
            }
            return Ok(Vec::new());
        }
        let list = match &self.policies {
            Some(list) if list.is_empty() => return Err(invalid("policy list is empty")),
            Some(list) => list
                .iter()
                .map(|p| PreemptionPolicy::new(p.clone()))
                .collect::<Result<Vec<_>>>()?,
            None => vec![self.base.policy()?],
        };
        for p in &list {
            if p.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "sweep policy",
                    expected: n,
                    actual: p.len(),
                });
            }
        }
        Ok(list)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(invalid("values must be nonempty"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("values must be finite"));
        }
        if self.values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("values must be strictly increasing"));
        }
        if self.outputs.is_empty() {
            return Err(invalid("outputs must be nonempty"));
        }
        let eps = self.epsilon();
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidEpsilon(eps));
        }
        let base = self.base_config()?;
        self.policies(base.n_sensors())?;
        if self.wants(SweepOutput::Simulation) {
            self.sim_config().validate()?;
        }
        for &v in &self.values {
            self.config_at(&base, v)?;
            if self.parameter == SweepParameter::PUniform {
                PreemptionPolicy::uniform(base.n_sensors(), v)?;
            }
        }
        Ok(())
    }

    fn config_at(&self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        match self.parameter {
            SweepParameter::Lambda(i) => {
                if i >= base.n_sensors() {
                    return Err(invalid(format!(
                        "{} but the config has {} sensors",
                        self.parameter,
                        base.n_sensors()
                    )));
                }
                base.with_arrival_rate(i, value)
            }
            SweepParameter::Mu => base.with_service_rate(value),
            SweepParameter::PUniform => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(invalid(format!(
                        "p_uniform value {value} is outside [0, 1]"
                    )));
                }
                Ok(base.clone())
            }
            SweepParameter::Theta => {
                let symmetric_pair = base.n_sensors() == 2
                    && base.n_processes() == 2
                    && base.correlation(0, 0) == 1.0
                    && base.correlation(1, 1) == 1.0
                    && base.correlation(0, 1) == base.correlation(1, 0);
                if !symmetric_pair {
                    return Err(invalid(
                        "theta requires a 2x2 config with C = [[1, t], [t, 1]]",
                    ));
                }
                if !(0.0..=1.0).contains(&value) {
                    return Err(invalid(format!("theta value {value} is outside [0, 1]")));
                }
                base.with_correlation(vec![vec![1.0, value], vec![value, 1.0]])
            }
        }
    }
}

struct Job {
    index: usize,
    value: f64,
    policy: PreemptionPolicy,
}

/// Runs a sweep. Simulation seeds are `sim.seed + row index`, so every row
/// draws from its own generator and the table does not depend on scheduling.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    spec.validate()?;
    let base = spec.base_config()?;
    let n = base.n_sensors();
    let policies = spec.policies(n)?;
    let mut jobs = Vec::new();
    for &value in &spec.values {
        let at_value = if spec.parameter == SweepParameter::PUniform {
            vec![PreemptionPolicy::uniform(n, value)?]
        } else {
            policies.clone()
        };
        for policy in at_value {
            jobs.push(Job {
                index: jobs.len(),
                value,
                policy,
            });
        }
    }

    // The optimum does not depend on the policy; solve it once per value.
    let optima: Vec<Option<(Vec<f64>, f64, bool)>> = spec
        .values
        .par_iter()
        .map(|&value| -> Result<_> {
            if !spec.wants(SweepOutput::Optimum) {
                return Ok(None);
            }
            let config = spec.config_at(&base, value)?;
            let fp = build_fractional_program(&config)?;
            let r = branch_and_bound(&fp, spec.epsilon())?;
            Ok(Some((r.p_star, r.lower_bound, r.certified)))
        })
        .collect::<Result<_>>()?;

    let sim = spec.sim_config();
    let rows = jobs
        .par_iter()
        .map(|job| {
            let value_index = spec
                .values
                .iter()
                .position(|&v| v == job.value)
                .expect("job value comes from the spec");
            evaluate(spec, &base, job, &sim, optima[value_index].as_ref())
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SweepTable {
        parameter: spec.parameter,
        n_sensors: n,
        n_processes: base.n_processes(),
        outputs: spec.outputs.clone(),
        rows,
    })
}

fn evaluate(
    spec: &SweepSpec,
    base: &SystemConfig,
    job: &Job,
    sim: &SimConfig,
    optimum: Option<&(Vec<f64>, f64, bool)>,
) -> Result<SweepRow> {
    let config = spec.config_at(base, job.value)?;
    let n = config.n_sensors();
    let m = config.n_processes();
    let mut row = SweepRow {
        value: job.value,
        policy: job.policy.probs().to_vec(),
        delta_theory: None,
        delta_theory_sum: None,
        delta_sim: None,
        ci_halfwidth: None,
        occupancy_deviation: None,
        p_star: None,
        sum_at_p_star: None,
        lower_bound: None,
        certified: None,
        sum_at_p0: None,
        sum_at_p1: None,
        theorem2_bound: None,
    };
    if spec.wants(SweepOutput::Analysis) || spec.wants(SweepOutput::Optimum) {
        row.sum_at_p0 = Some(total_aoi(&config, &vec![0.0; n]));
        row.sum_at_p1 = Some(total_aoi(&config, &vec![1.0; n]));
    }
    if spec.wants(SweepOutput::Analysis) {
        let report = aoi_sum(&config, &job.policy)?;
        row.delta_theory = Some(report.per_process);
        row.delta_theory_sum = Some(report.total);
    }
    if spec.wants(SweepOutput::Simulation) {
        let mut sim = *sim;
        sim.seed = sim.seed.wrapping_add(job.index as u64);
        let result = simulate(&config, &job.policy, &sim)?;
        let deviation = (0..m)
            .map(|j| occupancy_check(&result, &config, &job.policy, j).map(|r| r.max_deviation))
            .collect::<Result<Vec<_>>>()?;
        row.delta_sim = Some(result.aoi_mean);
        row.ci_halfwidth = Some(result.aoi_ci_halfwidth);
        row.occupancy_deviation = Some(deviation);
    }
    if let Some((p_star, lower_bound, certified)) = optimum {
        row.p_star = Some(p_star.clone());
        row.sum_at_p_star = Some(total_aoi(&config, p_star));
        row.lower_bound = Some(*lower_bound);
        row.certified = Some(*certified);
    }
    if spec.wants(SweepOutput::Bounds) {
        row.theorem2_bound = Some(iteration_upper_bound(&config, spec.epsilon())?);
    }
    Ok(row)
}

fn push_indexed(header: &mut Vec<String>, stem: &str, count: usize) {
    header.extend((1..=count).map(|k| format!("{stem}_{k}")));
}

impl SweepTable {
    fn wants(&self, output: SweepOutput) -> bool {
        self.outputs.contains(&output)
    }

    fn baselines(&self) -> bool {
        self.wants(SweepOutput::Analysis) || self.wants(SweepOutput::Optimum)
    }

    pub fn header(&self) -> Vec<String> {
        let (n, m) = (self.n_sensors, self.n_processes);
        let mut h = vec!["value".to_string()];
        push_indexed(&mut h, "p", n);
        if self.wants(SweepOutput::Analysis) {
            push_indexed(&mut h, "delta_theory", m);
            h.push("delta_theory_sum".into());
        }
        if self.wants(SweepOutput::Simulation) {
            push_indexed(&mut h, "delta_sim", m);
            push_indexed(&mut h, "ci", m);
            push_indexed(&mut h, "occupancy_dev", m);
        }
        if self.wants(SweepOutput::Optimum) {
            push_indexed(&mut h, "p_star", n);
            h.extend(["sum_at_p_star", "lower_bound", "certified"].map(String::from));
        }
        if self.baselines() {
            h.extend(["sum_at_p0", "sum_at_p1"].map(String::from));
        }
        if self.wants(SweepOutput::Bounds) {
            h.push("theorem2_bound".into());
        }
        h
    }

    pub fn to_csv(&self) -> String {
        fn cells<T: ToString>(out: &mut Vec<String>, v: &Option<Vec<T>>) {
            out.extend(v.iter().flatten().map(ToString::to_string));
        }
        fn cell<T: ToString>(out: &mut Vec<String>, v: &Option<T>) {
            out.extend(v.iter().map(ToString::to_string));
        }

        let mut text = self.header().join(",");
        text.push('\n');
        for row in &self.rows {
            let mut c = vec![row.value.to_string()];
            c.extend(row.policy.iter().map(f64::to_string));
            if self.wants(SweepOutput::Analysis) {
                cells(&mut c, &row.delta_theory);
                cell(&mut c, &row.delta_theory_sum);
            }
            if self.wants(SweepOutput::Simulation) {
                cells(&mut c, &row.delta_sim);
                cells(&mut c, &row.ci_halfwidth);
                cells(&mut c, &row.occupancy_deviation);
            }
            if self.wants(SweepOutput::Optimum) {
                cells(&mut c, &row.p_star);
                cell(&mut c, &row.sum_at_p_star);
                cell(&mut c, &row.lower_bound);
                cell(&mut c, &row.certified);
            }
            if self.baselines() {
                cell(&mut c, &row.sum_at_p0);
                cell(&mut c, &row.sum_at_p1);
            }
            if self.wants(SweepOutput::Bounds) {
                cell(&mut c, &row.theorem2_bound);
            }
            text.push_str(&c.join(","));
            text.push('\n');
        }
        text
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep table serializes")
    }

    /// A gnuplot script plotting the table written to `csv_path`.
    pub fn gnuplot_script(&self, csv_path: &str) -> String {
        let header = self.header();
        let col = |name: &str| header.iter().position(|h| h == name).map(|k| k + 1);
        let mut plots = Vec::new();
        for j in 1..=self.n_processes {
            if let Some(c) = col(&format!("delta_theory_{j}")) {
                plots.push(format!(
                    "'{csv_path}' using 1:{c} with linespoints title 'theory {j}'"
                ));
            }
            if let (Some(c), Some(e)) = (col(&format!("delta_sim_{j}")), col(&format!("ci_{j}"))) {
                plots.push(format!(
                    "'{csv_path}' using 1:{c}:{e} with yerrorbars title 'simulation {j}'"
                ));
            }
        }
        for i in 1..=self.n_sensors {
            if let Some(c) = col(&format!("p_star_{i}")) {
                plots.push(format!(
                    "'{csv_path}' using 1:{c} with linespoints axes x1y2 title 'p* {i}'"
                ));
            }
        }
        for name in ["sum_at_p_star", "sum_at_p0", "sum_at_p1"] {
            if let Some(c) = col(name) {
                plots.push(format!(
                    "'{csv_path}' using 1:{c} with lines title '{name}'"
                ));
            }
        }
        let mut script = String::from("set datafile separator ','\nset key autotitle columnhead\n");
        script.push_str(&format!(
            "set xlabel '{}'\nset ylabel 'average age'\n",
            self.parameter
        ));
        if col("p_star_1").is_some() {
            script
                .push_str("set y2label 'preemption probability'\nset y2range [0:1]\nset y2tics\n");
        }
        if plots.is_empty() {
            script.push_str("# no plottable columns\n");
        } else {
            script.push_str("plot ");
            script.push_str(&plots.join(", \\\n     "));
            script.push('\n');
        }
        script
    }
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 6] = ["fig3a", "fig3b", "fig5a", "fig5b", "fig6a", "fig6b"];

fn doc(lambda: Vec<f64>, mu: f64, correlation: Vec<Vec<f64>>) -> ConfigDocument {
    ConfigDocument {
        sensors: lambda.len(),
        processes: correlation[0].len(),
        lambda,
        mu,
        correlation,
        preemption: None,
        sim: None,
    }
}

fn fig3_policies() -> Option<Vec<Vec<f64>>> {
    Some(vec![vec![0.0, 0.0], vec![0.5, 0.5], vec![1.0, 1.0]])
}

fn fig3_sim() -> Option<SimBlock> {
    Some(SimBlock {
        horizon: Some(1e6),
        warmup: None,
        seed: Some(2024),
        replications: Some(10),
    })
}

/// Built-in sweeps.
///
/// * `fig3a`: `mu = 2`, `lambda_2 = 1`, `C = [[1, .5], [.5, 1]]`, `p in {0, .5, 1}`, `lambda_1` swept.
/// * `fig3b`: `lambda = [1, 6]`, same `C` and policies, `mu` swept.
/// * `fig5a`: identity `C`, `lambda_2 = 1`, `mu = 2`, `lambda_1` swept.
/// * `fig6a`: `C = [[1, t], [t, 1]]`, `lambda = [1, 4]`, `mu = 2`, `t` swept over `[0, 1]`.
/// * `fig5b`, `fig6b`: illustrations only; a sensor that sees both processes
///   against one that sees a single process, and a diversity sweep.
pub fn preset(name: &str) -> Result<SweepSpec> {
    let half = vec![vec![1.0, 0.5], vec![0.5, 1.0]];
    let identity = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let spec = match name {
        "fig3a" => SweepSpec {
            name: Some(name.into()),
            parameter: SweepParameter::Lambda(0),
            values: vec![0.5, 1.0, 2.0, 4.0, 8.0],
            base: doc(vec![1.0, 1.0], 2.0, half),
            policies: fig3_policies(),
            outputs: vec![SweepOutput::Analysis, SweepOutput::Simulation],
            sim: fig3_sim(),
            epsilon: None,
            illustration: false,
        },
        "fig3b" => SweepSpec {
            name: Some(name.into()),
            parameter: SweepParameter::Mu,
            values: vec![1.0, 2.0, 4.0, 8.0],
            base: doc(vec![1.0, 6.0], 2.0, half),
            policies: fig3_policies(),
            outputs: vec![SweepOutput::Analysis, SweepOutput::Simulation],
            sim: fig3_sim(),
            epsilon: None,
            illustration: false,
        },
        "fig5a" => SweepSpec {
            name: Some(name.into()),
            parameter: SweepParameter::Lambda(0),
            values: vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0],
            base: doc(vec![1.0, 1.0], 2.0, identity),
            policies: None,
            outputs: vec![SweepOutput::Optimum, SweepOutput::Bounds],
            sim: None,
            epsilon: Some(DEFAULT_EPSILON),
            illustration: false,
        },
        "fig5b" => SweepSpec {
            name: Some(name.into()),
            parameter: SweepParameter::Lambda(0),
            values: vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0],
            base: doc(vec![1.0, 1.0], 2.0, vec![vec![1.0, 1.0], vec![0.0, 1.0]]),
            policies: None,
            outputs: vec![SweepOutput::Optimum, SweepOutput::Bounds],
            sim: None,
            epsilon: Some(DEFAULT_EPSILON),
            illustration: true,
        },
        "fig6a" => SweepSpec {
            name: Some(name.into()),
            parameter: SweepParameter::Theta,
            values: (0..=10).map(|k| k as f64 / 10.0).collect(),
            base: doc(vec![1.0, 4.0], 2.0, identity),
            policies: None,
            outputs: vec![SweepOutput::Optimum, SweepOutput::Bounds],
            sim: None,
            epsilon: Some(DEFAULT_EPSILON),
            illustration: false,
        },
        "fig6b" => SweepSpec {
            name: Some(name.into()),
            parameter: SweepParameter::Theta,
            values: (0..=10).map(|k| k as f64 / 10.0).collect(),
            base: doc(vec![4.0, 1.0], 2.0, identity),
            policies: None,
            outputs: vec![SweepOutput::Optimum, SweepOutput::Bounds],
            sim: None,
            epsilon: Some(DEFAULT_EPSILON),
            illustration: true,
        },
        _ => {
            return Err(invalid(format!(
                "unknown preset `{name}` (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(spec)
}
