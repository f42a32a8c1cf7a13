use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use merge_sim::config::{ConfigError, SimConfig};
use merge_sim::metrics::{self, aggressiveness_sweep, parse_grid, MetricsError};
use merge_sim::perception::VehicleId;
use merge_sim::plot::render_svg;
use merge_sim::sim::{
    run_scenario, LogParseError, RunOutcome, ScenarioDef, ScenarioError, SimError, Termination,
    TrajectoryLog, VehicleKind,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_COLLISION: u8 = 3;
const EXIT_FORCED_STOP: u8 = 4;
const SEED_ENV: &str = "MERGE_SIM_SEED";

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Log {
        path: PathBuf,
        #[source]
        source: LogParseError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("--q {0:?}: expected name=value")]
    QOverride(String),
    #[error("{SEED_ENV}={0:?} is not an unsigned integer")]
    SeedEnv(String),
    #[error("summary: {0}")]
    Summary(#[from] toml::ser::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Parser)]
#[command(name = "merge-sim", version, about = "Game-theoretic highway merging simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its trajectory and summary.
    Run(RunArgs),
    /// Sweep merging and mainline aggressiveness and write the disturbance grid.
    Sweep(SweepArgs),
    /// Render a trajectory file as SVG.
    Plot(PlotArgs),
    /// Print the effective configuration as TOML.
    DumpConfig(CommonArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Built-in scenario name (scenario1, scenario2) or a scenario TOML file.
    #[arg(long, default_value = "scenario1")]
    scenario: String,
    /// Configuration TOML; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Aggressiveness override for a decision vehicle, by name or id.
    #[arg(long = "q", value_name = "NAME=VALUE")]
    q: Vec<String>,
    /// Integration step (s).
    #[arg(long)]
    dt: Option<f64>,
    /// Decision period (s); a whole multiple of dt.
    #[arg(long)]
    epoch: Option<f64>,
    /// Simulated time limit (s).
    #[arg(long)]
    t_max: Option<f64>,
    /// Falls back to MERGE_SIM_SEED, then to the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Enable gap perception noise.
    #[arg(long)]
    noise: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Directory receiving trajectory.csv and summary.toml.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Print the effective configuration and exit without simulating.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Merging-vehicle aggressiveness values as start:stop:step.
    #[arg(long, default_value = "0:1:0.1")]
    grid: String,
    /// Mainline-vehicle values; defaults to --grid.
    #[arg(long)]
    grid_mainline: Option<String>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value = "grid.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Trajectory CSV written by `run`.
    trajectory: PathBuf,
    /// Scenario supplying the lane geometry.
    #[arg(long, default_value = "scenario1")]
    scenario: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_scenario(name: &str) -> Result<ScenarioDef, CliError> {
    match ScenarioDef::builtin(name) {
        Ok(s) => Ok(s),
        Err(ScenarioError::UnknownBuiltin(_)) if Path::new(name).exists() => {
            let path = Path::new(name);
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            Ok(ScenarioDef::from_toml(&text)?)
        }
        Err(e) => Err(e.into()),
    }
}

fn resolve(common: &CommonArgs) -> Result<(ScenarioDef, SimConfig), CliError> {
    let mut config = match &common.config {
        Some(path) => SimConfig::from_toml(&fs::read_to_string(path).map_err(io_err(path))?)?,
        None => SimConfig::default(),
    };
    if let Some(dt) = common.dt {
        config.dt = dt;
    }
    if let Some(epoch) = common.epoch {
        config.epoch = epoch;
    }
    if let Some(t_max) = common.t_max {
        config.t_max = t_max;
    }
    if common.noise {
        config.perception.noise = true;
    }
    config.seed = match (common.seed, std::env::var(SEED_ENV)) {
        (Some(seed), _) => seed,
        (None, Ok(text)) => text.trim().parse().map_err(|_| CliError::SeedEnv(text))?,
        (None, Err(_)) => config.seed,
    };
    config.validate()?;

    let mut scenario = load_scenario(&common.scenario)?;
    for spec in &common.q {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| CliError::QOverride(spec.clone()))?;
        let q: f64 = value.trim().parse().map_err(|_| CliError::QOverride(spec.clone()))?;
        scenario.set_q(key.trim(), q)?;
    }
    Ok((scenario, config))
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never observe a partial file.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(contents).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

#[derive(Serialize)]
struct Summary {
    scenario: String,
    seed: u64,
    termination: String,
    end_time_s: f64,
    collision: bool,
    forced_stop: bool,
    vehicles: Vec<VehicleSummary>,
}

#[derive(Serialize)]
struct VehicleSummary {
    id: u32,
    name: String,
    q: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    merge_time_s: Option<f64>,
    /// Vehicle directly behind after the merge.
    #[serde(skip_serializing_if = "Option::is_none")]
    merged_ahead_of: Option<u32>,
    /// Vehicle directly ahead after the merge.
    #[serde(skip_serializing_if = "Option::is_none")]
    merged_behind: Option<u32>,
    final_lane: usize,
    lane_changes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_gap_m: Option<f64>,
    d_long_m: f64,
    d_lat_m: f64,
}

fn round(x: f64, places: i32) -> f64 {
    let k = 10f64.powi(places);
    (x * k).round() / k
}

fn summarize(name: &str, scenario: &ScenarioDef, config: &SimConfig, outcome: &RunOutcome) -> Summary {
    let termination = match outcome.termination {
        Termination::TimeLimit => "time_limit".to_string(),
        Termination::Settled => "settled".to_string(),
        Termination::Empty => "empty".to_string(),
        Termination::Collision { a, b, t } => format!("collision {} {} at {t:.2}", a.0, b.0),
    };
    let vehicles = scenario
        .vehicles
        .iter()
        .filter(|v| v.kind == VehicleKind::Decision)
        .map(|v| {
            let id = VehicleId(v.id);
            let merge = outcome.merge_event(id);
            let final_lane = outcome
                .log
                .rows_for(id)
                .last()
                .map_or(0, |r| r.lane.number());
            let lateral = metrics::lateral_disturbance(&outcome.log, id, &scenario.geometry).unwrap_or_default();
            VehicleSummary {
                id: v.id,
                name: v.label(),
                q: v.q_or_nominal(),
                merge_time_s: outcome.merge_time(id).map(|t| round(t, 2)),
                merged_ahead_of: merge.and_then(|e| e.follower_after).map(|f| f.0),
                merged_behind: merge.and_then(|e| e.leader_after).map(|l| l.0),
                final_lane,
                lane_changes: lateral.completed,
                min_gap_m: metrics::min_gap(&outcome.log, id, config.vehicle.length)
                    .map(|g| round(g, 3)),
                d_long_m: round(
                    outcome
                        .preset_speed(id)
                        .and_then(|v0| metrics::longitudinal_disturbance(&outcome.log, id, v0).ok())
                        .unwrap_or(0.0),
                    4,
                ),
                d_lat_m: round(lateral.d_lat, 4),
            }
        })
        .collect();
    Summary {
        scenario: name.to_string(),
        seed: config.seed,
        termination,
        end_time_s: round(outcome.end_time, 2),
        collision: outcome.collided(),
        forced_stop: outcome.forced_stop,
        vehicles,
    }
}

fn cmd_run(args: &RunArgs) -> Result<ExitCode, CliError> {
    let (scenario, config) = resolve(&args.common)?;
    if args.dump_config {
        print!("{}", config.to_toml()?);
        return Ok(ExitCode::SUCCESS);
    }
    let outcome = run_scenario(&scenario, &config)?;
    let summary = summarize(&args.common.scenario, &scenario, &config, &outcome);
    let summary_text = toml::to_string(&summary)?;
    write_atomic(&args.out.join("trajectory.csv"), outcome.log.to_csv().as_bytes())?;
    write_atomic(&args.out.join("summary.toml"), summary_text.as_bytes())?;
    print!("{summary_text}");
    Ok(if outcome.collided() {
        ExitCode::from(EXIT_COLLISION)
    } else if outcome.forced_stop {
        ExitCode::from(EXIT_FORCED_STOP)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_sweep(args: &SweepArgs) -> Result<ExitCode, CliError> {
    let (scenario, config) = resolve(&args.common)?;
    let q_merge = parse_grid(&args.grid)?;
    let q_mainline = match &args.grid_mainline {
        Some(spec) => parse_grid(spec)?,
        None => q_merge.clone(),
    };
    let grid = aggressiveness_sweep(&scenario, &q_merge, &q_mainline, &config, args.jobs)?;
    write_atomic(&args.out, grid.to_csv().as_bytes())?;
    let collisions = grid.cells.iter().filter(|c| c.collision).count();
    eprintln!(
        "{} cells written to {} ({collisions} with collisions)",
        grid.cells.len(),
        args.out.display()
    );
    Ok(if collisions > 0 {
        ExitCode::from(EXIT_COLLISION)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_plot(args: &PlotArgs) -> Result<ExitCode, CliError> {
    let text = fs::read_to_string(&args.trajectory).map_err(io_err(&args.trajectory))?;
    let log = TrajectoryLog::from_csv(&text).map_err(|source| CliError::Log {
        path: args.trajectory.clone(),
        source,
    })?;
    let scenario = load_scenario(&args.scenario)?;
    let svg = render_svg(&log, &scenario.geometry);
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.trajectory.with_extension("svg"));
    write_atomic(&out, svg.as_bytes())?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Plot(args) => cmd_plot(args),
        Command::DumpConfig(common) => resolve(common).and_then(|(_, config)| {
            print!("{}", config.to_toml()?);
            Ok(ExitCode::SUCCESS)
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_CONFIG)
    })
}
