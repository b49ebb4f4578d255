//! `mkv`: simulate interacting particle systems and estimate their drift.
//!
//! Exit codes: 0 success, 2 invalid input, 3 divergence or exclusion cap,
//! 1 anything else (I/O, degenerate data, optimizer failure).

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use mkv::harness::{export, run_experiment, sidecar_timing, ExportFormat};
use mkv::io::{read_trajectory_csv, write_history_csv, write_residuals_csv, write_surface_csv, write_trajectory_csv};
use mkv::offline::{mle_linear_closed_form, mle_numeric, normality_sample, MleOptions};
use mkv::online::{run_online, run_online_replay, EstimatorMode, InitSpec, LearningRate, OnlineConfig};
use mkv::simulate::simulate_ips;
use mkv::surface::surface_grid;
use mkv::{Error, ExperimentConfig, InitialCondition, ModelKind, ModelSpec, SimConfig, Theta};
use serde_json::json;

#[derive(Parser)]
#[command(name = "mkv", version, about = "McKean-Vlasov particle simulation and drift estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ModelArgs {
    /// Built-in model: linear or opinion.
    #[arg(long, default_value = "linear")]
    model: String,
    /// Diffusion coefficient.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
}

impl ModelArgs {
    fn spec(&self) -> mkv::Result<ModelSpec> {
        ModelSpec::from_name(&self.model)?.with_sigma(self.sigma)
    }
}

#[derive(clap::Args)]
struct SimArgs {
    /// Number of particles.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
    /// Horizon; must be a multiple of dt.
    #[arg(long = "T")]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial particle law: `normal:mean,std` or `point:x0`.
    #[arg(long = "x-init", default_value = "normal:1,1")]
    x_init: String,
}

impl SimArgs {
    fn config(&self) -> mkv::Result<SimConfig> {
        Ok(SimConfig::new(self.n, self.dt, self.horizon, self.seed).with_init(InitialCondition::parse(&self.x_init)?))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Closed,
    Numeric,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Averaged,
    PerParticle,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the particle system and write a trajectory CSV.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// True parameter, comma separated.
        #[arg(long)]
        theta: String,
        #[command(flatten)]
        sim: SimArgs,
        /// Also store the Brownian increments.
        #[arg(long)]
        record_noise: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Offline maximum likelihood on a stored trajectory, or a normality
    /// study of the closed-form estimator (`--normality`).
    Offline {
        /// Trajectory CSV written by `simulate`.
        #[arg(long, required_unless_present = "normality")]
        traj: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "closed")]
        method: Method,
        /// Starting point for the numeric optimizer (defaults to the
        /// closed-form estimate for the linear model).
        #[arg(long)]
        init: Option<String>,
        /// Observation window `start,end`.
        #[arg(long)]
        window: Option<String>,
        /// Run independent trials and write the residual table to `--out`.
        #[arg(long)]
        normality: bool,
        #[arg(long)]
        theta_true: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Online stochastic gradient estimation; writes the estimate history.
    Online {
        #[command(flatten)]
        model: ModelArgs,
        /// Replay a stored trajectory instead of simulating.
        #[arg(long, conflicts_with = "theta_true")]
        traj: Option<PathBuf>,
        #[arg(long, required_unless_present = "traj")]
        theta_true: Option<String>,
        #[arg(long, value_enum, default_value = "averaged")]
        mode: Mode,
        /// Per-coordinate schedules, e.g. `powmin:0.05,0.51;powmin:0.30,0.51`.
        #[arg(long)]
        lr: String,
        /// Per-coordinate initial estimate, e.g. `uniform:-1,2;fixed:0.1`.
        #[arg(long)]
        init: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0.1)]
        dt: f64,
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "x-init", default_value = "normal:1,1")]
        x_init: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte-Carlo experiment from a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output path.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Tabulate the asymptotic likelihood surfaces of the linear model.
    Surface {
        #[arg(long, default_value = "linear")]
        model: String,
        #[arg(long)]
        theta0: String,
        #[arg(long)]
        n: usize,
        /// `θ1:low:high:points,θ2:low:high:points`.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn parse_pair(s: &str, what: &str) -> mkv::Result<(f64, f64)> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Error::InvalidConfig(format!("cannot parse {what} '{s}'")))?;
    match v.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(Error::InvalidConfig(format!("{what} needs two values, got '{s}'"))),
    }
}

fn parse_axis(s: &str) -> mkv::Result<(f64, f64, usize)> {
    let bad = || Error::InvalidConfig(format!("cannot parse grid axis '{s}'"));
    let parts: Vec<&str> = s.split(':').collect();
    let [_, lo, hi, m] = parts.as_slice() else {
        return Err(bad());
    };
    Ok((
        lo.trim().parse().map_err(|_| bad())?,
        hi.trim().parse().map_err(|_| bad())?,
        m.trim().parse().map_err(|_| bad())?,
    ))
}

fn required<T>(v: Option<T>, flag: &str) -> mkv::Result<T> {
    v.ok_or_else(|| Error::InvalidConfig(format!("missing --{flag}")))
}

/// Prints a JSON report; a closed stdout (e.g. piped into `head`) is not an error.
fn print(value: serde_json::Value) {
    let text = serde_json::to_string_pretty(&value).expect("serializable");
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn simulate(model: &ModelArgs, theta: &str, sim: &SimArgs, record_noise: bool, out: &Path) -> mkv::Result<()> {
    let spec = model.spec()?;
    let theta = Theta::parse(theta)?;
    let cfg = sim.config()?.with_noise(record_noise);
    let traj = simulate_ips(&spec, &theta, &cfg)?;
    let files = write_trajectory_csv(&traj, out)?;
    print(json!({ "steps": traj.steps(), "files": files }));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn offline(
    traj: Option<&Path>,
    method: Method,
    init: Option<&str>,
    window: Option<&str>,
    normality: bool,
    theta_true: Option<&str>,
    n: Option<usize>,
    dt: f64,
    horizon: Option<f64>,
    trials: usize,
    seed: u64,
    out: Option<&Path>,
) -> mkv::Result<()> {
    if normality {
        let theta0 = Theta::parse(required(theta_true, "theta-true")?)?;
        let cfg = SimConfig::new(required(n, "n")?, dt, required(horizon, "T")?, seed);
        let sample = normality_sample(&ModelSpec::linear(), &theta0, &cfg, trials)?;
        if let Some(out) = out {
            write_residuals_csv(&sample, out)?;
        }
        let cov = sample.covariance();
        print(json!({
            "trials": sample.trials,
            "dropped": sample.dropped,
            "mean": sample.mean(),
            "covariance": [[cov[(0, 0)], cov[(0, 1)]], [cov[(1, 0)], cov[(1, 1)]]],
        }));
        return Ok(());
    }
    let traj = read_trajectory_csv(required(traj, "traj")?)?;
    let spec = ModelSpec::from_name(&traj.model_id)?.with_sigma(traj.sigma)?;
    let window = window.map(|w| parse_pair(w, "window")).transpose()?;
    let result = match method {
        Method::Closed => {
            let th = mle_linear_closed_form(&traj, window)?;
            json!({ "method": "closed", "theta": th })
        }
        Method::Numeric => {
            let start = match init {
                Some(s) => Theta::parse(s)?,
                None if spec.kind() == ModelKind::LinearMeanField => mle_linear_closed_form(&traj, window)?,
                None => return Err(Error::InvalidConfig("--init is required for this model".into())),
            };
            let opts = MleOptions { window, ..MleOptions::default() };
            let outcome = mle_numeric(&spec, &traj, &start, &opts)?;
            json!({
                "method": "numeric",
                "theta": outcome.theta,
                "loglik": outcome.value,
                "grad_norm": outcome.grad_norm,
                "iterations": outcome.iterations,
                "line_search_stalled": outcome.line_search_stalled,
            })
        }
    };
    print(result);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn online(
    model: &ModelArgs,
    traj: Option<&Path>,
    theta_true: Option<&str>,
    mode: Mode,
    lr: &str,
    init: &str,
    n: Option<usize>,
    dt: f64,
    horizon: Option<f64>,
    seed: u64,
    x_init: &str,
    out: &Path,
) -> mkv::Result<()> {
    let mode = match mode {
        Mode::Averaged => EstimatorMode::Averaged,
        Mode::PerParticle => EstimatorMode::PerParticle,
    };
    let oc = OnlineConfig::new(LearningRate::parse(lr)?, InitSpec::parse(init)?, mode);
    let run = match traj {
        Some(path) => {
            let traj = read_trajectory_csv(path)?;
            let spec = ModelSpec::from_name(&traj.model_id)?.with_sigma(traj.sigma)?;
            run_online_replay(&spec, &traj, &oc, seed, horizon)?
        }
        None => {
            let spec = model.spec()?;
            let theta = Theta::parse(required(theta_true, "theta-true")?)?;
            let cfg = SimConfig::new(required(n, "n")?, dt, required(horizon, "T")?, seed)
                .with_init(InitialCondition::parse(x_init)?);
            run_online(&spec, &theta, &cfg, &oc)?
        }
    };
    write_history_csv(&run.history, out)?;
    print(json!({
        "mode": mode.to_string(),
        "initial": run.initial,
        "final_mean": run.final_mean(),
        "history_points": run.history.len(),
    }));
    Ok(())
}

fn experiment(config: &Path, out: Option<PathBuf>, format: Format) -> mkv::Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let format = match format {
        Format::Csv => ExportFormat::Csv,
        Format::Json => ExportFormat::Json,
    };
    let out = out
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| Error::InvalidConfig("no output path in config or --out".into()))?;
    let start = Instant::now();
    let outcome = run_experiment(&cfg);
    let wall = start.elapsed().as_secs_f64();
    let result = match &outcome {
        Ok(r) => r.clone(),
        Err(Error::ExclusionCap { result, .. }) => (**result).clone(),
        Err(_) => return outcome.map(|_| ()),
    };
    let files = export(&result, &out, format)?;
    sidecar_timing(&out, wall)?;
    outcome?;
    print(json!({
        "rows": result.rows.len(),
        "excluded": result.exclusions.len(),
        "wall_seconds": wall,
        "files": files,
    }));
    Ok(())
}

fn surface(model: &str, theta0: &str, n: usize, grid: &str, out: &Path) -> mkv::Result<()> {
    if model != "linear" {
        return Err(Error::InvalidConfig("surfaces are available for the linear model only".into()));
    }
    let theta0 = Theta::parse(theta0)?;
    let axes: Vec<&str> = grid.split(',').collect();
    let [a1, a2] = axes.as_slice() else {
        return Err(Error::InvalidConfig(format!("grid needs two axes, got '{grid}'")));
    };
    let points = surface_grid(&theta0, n, parse_axis(a1)?, parse_axis(a2)?)?;
    write_surface_csv(&points, out)?;
    print(json!({ "points": points.len(), "file": out }));
    Ok(())
}

fn run(cli: Cli) -> mkv::Result<()> {
    match cli.command {
        Command::Simulate {
            model,
            theta,
            sim,
            record_noise,
            out,
        } => simulate(&model, &theta, &sim, record_noise, &out),
        Command::Offline {
            traj,
            method,
            init,
            window,
            normality,
            theta_true,
            n,
            dt,
            horizon,
            trials,
            seed,
            out,
        } => offline(
            traj.as_deref(),
            method,
            init.as_deref(),
            window.as_deref(),
            normality,
            theta_true.as_deref(),
            n,
            dt,
            horizon,
            trials,
            seed,
            out.as_deref(),
        ),
        Command::Online {
            model,
            traj,
            theta_true,
            mode,
            lr,
            init,
            n,
            dt,
            horizon,
            seed,
            x_init,
            out,
        } => online(
            &model,
            traj.as_deref(),
            theta_true.as_deref(),
            mode,
            &lr,
            &init,
            n,
            dt,
            horizon,
            seed,
            &x_init,
            &out,
        ),
        Command::Experiment { config, out, format } => experiment(&config, out, format),
        Command::Surface {
            model,
            theta0,
            n,
            grid,
            out,
        } => surface(&model, &theta0, n, &grid, &out),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        _ if e.is_validation() => 2,
        Error::SimulationDiverged { .. } | Error::EstimatorDiverged { .. } | Error::ExclusionCap { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
