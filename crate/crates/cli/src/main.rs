use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aoi_core::analysis::aoi_sum;
use aoi_core::document::ConfigDocument;
use aoi_core::optimize::{
    branch_and_bound_with, build_fractional_program, iteration_upper_bound, BnbOptions,
};
use aoi_core::sim::simulate;
use aoi_core::sweep::{preset, run_sweep, SweepSpec, PRESETS};
use aoi_core::{Coverage, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Age-of-information analysis, simulation and optimal preemption.
#[derive(Parser, Debug)]
#[command(name = "aoi-bench", version, about)]
struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Write output here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form average age per process
    Analyze {
        config: PathBuf,
        /// Report uncovered processes as infinite age instead of failing
        #[arg(long)]
        allow_uncovered: bool,
    },
    /// Discrete-event simulation
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        sim: SimFlags,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Globally optimal preemption probabilities
    Optimize {
        config: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        /// Stop after this many branchings with an uncertified result
        #[arg(long)]
        max_iterations: Option<u64>,
    },
    /// Worst-case branch-and-bound iteration count
    Bound {
        config: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
    },
    /// Parameter sweep producing a CSV table
    Sweep {
        /// Built-in sweep
        #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
        preset: Option<String>,
        /// Sweep spec JSON file
        #[arg(long)]
        spec: Option<PathBuf>,
        #[command(flatten)]
        sim: SimFlags,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Also write a gnuplot script for the table
        #[arg(long)]
        gnuplot: Option<PathBuf>,
        /// Print the resolved spec as JSON and exit
        #[arg(long)]
        print_spec: bool,
    },
}

#[derive(Args, Debug, Default)]
struct SimFlags {
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<u32>,
    #[arg(long)]
    warmup: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

enum Failure {
    Input(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::SingularSystem { .. }
            | Error::NegativeTransitionRate { .. }
            | Error::InfeasibleBox
            | Error::BudgetExceeded { .. } => Failure::Runtime(msg),
            _ => Failure::Input(msg),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<ConfigDocument, Failure> {
    ConfigDocument::from_json(&read(path)?)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => {
            fs::write(p, text).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn apply_sim_flags(
    block: Option<aoi_core::document::SimBlock>,
    flags: &SimFlags,
) -> aoi_core::document::SimBlock {
    let mut b = block.unwrap_or_default();
    if flags.horizon.is_some() {
        b.horizon = flags.horizon;
        // a new horizon resets the default warmup unless one is given
        if flags.warmup.is_none() {
            b.warmup = None;
        }
    }
    b.seed = flags.seed.or(b.seed);
    b.replications = flags.reps.or(b.replications);
    b.warmup = flags.warmup.or(b.warmup);
    b
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::Input("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    let out = cli.out.as_deref();

    match cli.command {
        Command::Analyze {
            config,
            allow_uncovered,
        } => {
            let doc = load(&config)?;
            let coverage = if allow_uncovered {
                Coverage::AnalysisOnly
            } else {
                Coverage::Strict
            };
            let report = aoi_sum(&doc.system_config(coverage)?, &doc.policy()?)?;
            write(out, &json(&report))
        }
        Command::Simulate {
            config,
            sim,
            format,
        } => {
            let mut doc = load(&config)?;
            doc.sim = Some(apply_sim_flags(doc.sim, &sim));
            let result = simulate(
                &doc.system_config(Coverage::Strict)?,
                &doc.policy()?,
                &doc.sim_config(),
            )?;
            match format {
                Format::Json => write(out, &json(&result)),
                Format::Csv => write(out, &result.to_csv()),
            }
        }
        Command::Optimize {
            config,
            epsilon,
            max_iterations,
        } => {
            let doc = load(&config)?;
            let system = doc.system_config(Coverage::Strict)?;
            let mut options = BnbOptions::new(epsilon);
            if let Some(cap) = max_iterations {
                options.max_iterations = cap;
            }
            let result = branch_and_bound_with(&build_fractional_program(&system)?, &options)?;
            let bound = iteration_upper_bound(&system, epsilon)?;
            if result.iterations > bound {
                eprintln!(
                    "warning: {} iterations exceed the worst-case bound of {bound}",
                    result.iterations
                );
            }
            let value = serde_json::json!({
                "p_star": result.p_star,
                "objective": result.objective,
                "lower_bound": result.lower_bound,
                "gap": result.gap,
                "iterations": result.iterations,
                "nodes": result.nodes_explored,
                "certified": result.certified,
                "theorem2_bound": bound,
            });
            write(out, &json(&value))
        }
        Command::Bound { config, epsilon } => {
            let doc = load(&config)?;
            let bound = iteration_upper_bound(&doc.system_config(Coverage::Strict)?, epsilon)?;
            let value = serde_json::json!({ "epsilon": epsilon, "theorem2_bound": bound });
            write(out, &json(&value))
        }
        Command::Sweep {
            preset: name,
            spec,
            sim,
            epsilon,
            format,
            gnuplot,
            print_spec,
        } => {
            let mut spec = match (name, spec) {
                (Some(name), _) => preset(&name)
                    .map_err(|e| Failure::Input(format!("{e}; presets: {}", PRESETS.join(", "))))?,
                (None, Some(path)) => SweepSpec::from_json(&read(&path)?)
                    .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?,
                (None, None) => unreachable!("clap requires one of --preset/--spec"),
            };
            spec.sim = Some(apply_sim_flags(spec.sim.or(spec.base.sim), &sim));
            if epsilon.is_some() {
                spec.epsilon = epsilon;
            }
            spec.validate()?;
            if print_spec {
                return write(out, &format!("{}\n", spec.to_json()));
            }
            if spec.illustration {
                eprintln!("note: this preset is an illustration with representative parameters");
            }
            let table = run_sweep(&spec)?;
            match format {
                Format::Csv => write(out, &table.to_csv())?,
                Format::Json => write(out, &json(&table))?,
            }
            if let Some(script) = gnuplot {
                let csv = match (format, out) {
                    (Format::Csv, Some(p)) => p.display().to_string(),
                    _ => "sweep.csv".to_string(),
                };
                write(Some(&script), &table.gnuplot_script(&csv))?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
