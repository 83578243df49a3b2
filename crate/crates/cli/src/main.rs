use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lanexit_core::sim::trace::ScenarioTrace;
use lanexit_core::sim::Scenario;
use lanexit_core::{par, run_scenario, tables, DepthErrorModel, DepthStream, Error, SamplingPlan, ScenarioConfig};

const EXIT_IO: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_PARSE: u8 = 3;
const EXIT_TIMEOUT: u8 = 4;

/// Lane-exit planning tools: depth bands, sampling plans, closing speeds
/// and full intersection scenarios.
#[derive(Debug, Parser)]
#[command(name = "lanexit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Directory for output files (tables go to stdout when omitted).
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Seed override for the measurement noise.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Scenario file. Table commands take model and epsilon from it.
    #[arg(long, global = true)]
    config: Vec<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Error polynomial and depth bounds over computed depth.
    DepthProfile {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        range: ProfileRange,
    },
    /// Sampling distance from the adaptive rule, per epsilon and depth.
    SamplingPlan {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated relative deviation thresholds.
        #[arg(long, value_delimiter = ',')]
        epsilon: Vec<f64>,
        #[command(flatten)]
        range: PlanRange,
    },
    /// Closing-speed estimates from a measured-depth stream.
    ClosingSpeed {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        epsilon: Option<f64>,
        /// CSV with header `t_s,x_m_m`.
        #[arg(long)]
        stream: PathBuf,
    },
    /// Run one or more scenarios and write their traces.
    Simulate {
        /// Scenarios run concurrently (one output directory each).
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long, allow_hyphen_values = true)]
    beta1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta3: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    r_squared: Option<f64>,
}

/// Depth grid for the profile table.
#[derive(Debug, Args)]
struct ProfileRange {
    /// First depth, m.
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    x_min: f64,
    /// Last depth, m.
    #[arg(long, allow_hyphen_values = true, default_value_t = 100.0)]
    x_max: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
    step: f64,
}

/// Depth grid for the sampling plan. Starts above the range where the
/// lower bound is still zero.
#[derive(Debug, Args)]
struct PlanRange {
    /// First depth, m.
    #[arg(long, allow_hyphen_values = true, default_value_t = 10.0)]
    x_min: f64,
    /// Last depth, m.
    #[arg(long, allow_hyphen_values = true, default_value_t = 100.0)]
    x_max: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
    step: f64,
}

const DEFAULT_MODEL: [f64; 4] = [0.002797, -0.004249, 0.007311, 0.9];
const DEFAULT_EPSILON: f64 = 0.2;

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) => EXIT_IO,
            Error::Parse { .. } | Error::NonMonotoneTime(_) => EXIT_PARSE,
            _ => EXIT_VALIDATION,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::DepthProfile { model, range } => {
            let m = resolve_model(cli, model)?;
            let xs = tables::grid(range.x_min, range.x_max, range.step)?;
            emit(cli, "depth_profile.csv", &tables::depth_profile(&m, &xs)?)?;
        }
        Command::SamplingPlan {
            model,
            epsilon,
            range,
        } => {
            let m = resolve_model(cli, model)?;
            let eps = if epsilon.is_empty() {
                vec![config_epsilon(cli)?.unwrap_or(DEFAULT_EPSILON)]
            } else {
                epsilon.clone()
            };
            let xs = tables::grid(range.x_min, range.x_max, range.step)?;
            emit(cli, "sampling_plan.csv", &tables::sampling_plan(&m, &eps, &xs)?)?;
        }
        Command::ClosingSpeed {
            model,
            epsilon,
            stream,
        } => {
            let m = resolve_model(cli, model)?;
            let eps = match epsilon {
                Some(e) => *e,
                None => config_epsilon(cli)?.unwrap_or(DEFAULT_EPSILON),
            };
            let plan = SamplingPlan::new(eps, m).map_err(|e| Failure {
                code: EXIT_VALIDATION,
                message: format!("epsilon: {e}"),
            })?;
            let file = fs::File::open(stream).map_err(|e| io_failure(stream, e))?;
            let stream = DepthStream::from_csv(file)?;
            emit(cli, "closing_speed.csv", &tables::closing_speed(&plan, &stream)?)?;
        }
        Command::Simulate { jobs } => return simulate(cli, *jobs),
    }
    Ok(0)
}

fn load_config(path: &Path) -> Result<ScenarioConfig, Failure> {
    ScenarioConfig::from_file(path).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

fn first_config(cli: &Cli) -> Result<Option<ScenarioConfig>, Failure> {
    cli.config.first().map(|p| load_config(p)).transpose()
}

fn config_epsilon(cli: &Cli) -> Result<Option<f64>, Failure> {
    Ok(first_config(cli)?.map(|c| c.epsilon))
}

fn resolve_model(cli: &Cli, args: &ModelArgs) -> Result<DepthErrorModel, Failure> {
    let base = match first_config(cli)? {
        Some(c) => [c.model.beta1, c.model.beta2, c.model.beta3, c.model.r_squared],
        None => DEFAULT_MODEL,
    };
    let m = DepthErrorModel::new(
        args.beta1.unwrap_or(base[0]),
        args.beta2.unwrap_or(base[1]),
        args.beta3.unwrap_or(base[2]),
        args.r_squared.unwrap_or(base[3]),
    )?;
    Ok(m)
}

/// Write a table to `--output/<name>` or stdout.
fn emit(cli: &Cli, name: &str, body: &str) -> Result<(), Failure> {
    match &cli.output {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| io_failure(&path, e))
        }
        None => std::io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| io_failure(Path::new("<stdout>"), e)),
    }
}

fn simulate(cli: &Cli, jobs: usize) -> Result<u8, Failure> {
    if cli.config.is_empty() {
        return Err(Failure {
            code: EXIT_VALIDATION,
            message: "simulate needs at least one --config".into(),
        });
    }
    if jobs == 0 {
        return Err(Failure {
            code: EXIT_VALIDATION,
            message: "--jobs must be at least 1".into(),
        });
    }
    let out_root = cli.output.clone().unwrap_or_else(|| PathBuf::from("trace"));

    // validate everything before running anything
    let mut scenarios = Vec::with_capacity(cli.config.len());
    for path in &cli.config {
        let mut cfg = load_config(path)?;
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        let s = Scenario::from_config(cfg, path.parent()).map_err(|e| {
            let mut f = Failure::from(e);
            f.message = format!("{}: {}", path.display(), f.message);
            f
        })?;
        let dir = if cli.config.len() == 1 {
            out_root.clone()
        } else {
            out_root.join(run_name(path))
        };
        scenarios.push((path.clone(), dir, s));
    }
    let names: Vec<_> = cli.config.iter().map(|p| run_name(p)).collect();
    if cli.config.len() > 1 {
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Failure {
                    code: EXIT_VALIDATION,
                    message: format!("two configs share the output name {n:?}"),
                });
            }
        }
    }

    let traces: Vec<ScenarioTrace> =
        par::with_jobs(jobs, || par::map(&scenarios, |(_, _, s)| run_scenario(s)));

    let mut code = 0;
    for ((path, dir, _), trace) in scenarios.iter().zip(&traces) {
        trace.write_dir(dir)?;
        let s = &trace.summary;
        let min = s
            .min_separation_m
            .map_or("n/a".to_string(), |m| format!("{m:.3} m"));
        let status = if s.completed { "completed" } else { "timed out" };
        println!(
            "{}: {status} at {} s, total wait {:.2} s, min separation {min}, traces in {}",
            path.display(),
            s.end_time_s,
            s.total_wait_s,
            dir.display()
        );
        if !s.completed {
            code = EXIT_TIMEOUT;
        }
    }
    Ok(code)
}

fn run_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}
