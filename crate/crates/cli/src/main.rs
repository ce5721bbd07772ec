use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use oprange_core::calibration::{
    fit_ancillary, fit_battery_decay, fit_maneuvering_efficiency, read_log, DecayObservation,
    LoadedRun, PowerSample, WheelsUpRun,
};
use oprange_core::config::{load_json, ProfileDocument};
use oprange_core::simulator::simulate;
use oprange_core::telemetry::{
    build_report, read_telemetry, read_trials, replay, write_plot_data, write_telemetry,
};
use oprange_core::{
    estimate_range_offline, max_range, solve_range_implicit, AncillaryPowerModel, BatteryModel,
    OnlineConfig, OnlineEstimatorState, Pace, RangeEstimate, RobotParams, Scenario,
    SimplifiedMission,
};

/// Operational range estimation for battery-powered mobile robots.
///
/// Set ORANGE_LOG_LEVEL (error, warn, info, debug, trace) for diagnostics.
#[derive(Parser)]
#[command(name = "oprange", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form range on a constant grade.
    EstimateSimple(MissionArgs),
    /// Range from a force profile, using the profile's supervisor mean force.
    EstimateOffline(ProfileArgs),
    /// Range from a force profile by solving the energy balance numerically.
    SolveImplicit(ProfileArgs),
    /// Run the simulator and write ground truth plus telemetry.
    Simulate(SimulateArgs),
    /// Fit model parameters from calibration logs.
    Calibrate(CalibrateArgs),
    /// Feed a telemetry log through the online estimator.
    Replay(ReplayArgs),
    /// Error statistics over a CSV of trials.
    Report(ReportArgs),
}

#[derive(Args)]
struct Output {
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MissionArgs {
    #[arg(long)]
    robot: PathBuf,
    #[arg(long)]
    battery: PathBuf,
    #[arg(long)]
    ancillary: PathBuf,
    #[arg(long)]
    mission: PathBuf,
    /// Overrides the mission velocity (m/s), including the operating velocity.
    #[arg(long)]
    velocity: Option<f64>,
    /// Overrides the mission duty cycle.
    #[arg(long)]
    duty: Option<f64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ProfileArgs {
    #[command(flatten)]
    mission: MissionArgs,
    #[arg(long)]
    profile: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Telemetry CSV to write.
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum CalibrationKind {
    /// Ancillary power against sensor frequency; `--log` has f_s_hz,power_w.
    Ancillary,
    /// Battery decay; `--log` has cycles,age_days,measured_energy_j and
    /// `--battery` supplies the rated energy.
    Battery,
    /// Drivetrain efficiency from `--wheels-up` (commanded_v_mps,mean_power_w)
    /// and `--loaded` (commanded_v_mps,mean_power_w,mean_traction_n) logs;
    /// `--ancillary` supplies the ancillary draw.
    Efficiency,
}

#[derive(Args)]
struct CalibrateArgs {
    kind: CalibrationKind,
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    battery: Option<PathBuf>,
    #[arg(long)]
    ancillary: Option<PathBuf>,
    #[arg(long)]
    wheels_up: Option<PathBuf>,
    #[arg(long)]
    loaded: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ReplayArgs {
    /// Telemetry CSV.
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    battery: PathBuf,
    /// Fixed estimator window (m); grows with distance travelled when absent.
    #[arg(long)]
    window_m: Option<f64>,
    /// Plot-data CSV (t_s, estimate_m, true_range_m) to write.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// True range to include in the plot data.
    #[arg(long)]
    true_range_m: Option<f64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ReportArgs {
    /// Trials CSV with id,label,d_true_m,d_est_m.
    #[arg(long)]
    log: PathBuf,
    #[command(flatten)]
    output: Output,
}

/// A failure mapped to a process exit status.
#[derive(Debug)]
struct Failure {
    code: u8,
    category: &'static str,
}

fn classify(err: &anyhow::Error) -> Failure {
    use oprange_core::Error as E;
    let (code, category) = match err.downcast_ref::<E>() {
        Some(e) if e.is_io() => (4, "io"),
        Some(E::Underdetermined(_) | E::InconsistentData(_) | E::NonTerminating(_)) => {
            (3, "numerical")
        }
        Some(_) => (2, "validation"),
        None if err.downcast_ref::<io::Error>().is_some() => (4, "io"),
        None => (2, "validation"),
    };
    Failure { code, category }
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    let f = File::open(path)
        .map_err(oprange_core::Error::from)
        .with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn load<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    load_json(path).with_context(|| format!("loading {}", path.display()))
}

fn sink(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p)
                .map_err(oprange_core::Error::from)
                .with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json<T: Serialize>(out: &Output, value: &T) -> anyhow::Result<()> {
    let mut w = sink(out.out.as_deref())?;
    serde_json::to_writer(&mut w, value).map_err(oprange_core::Error::from)?;
    writeln!(w).and_then(|_| w.flush()).map_err(oprange_core::Error::from)?;
    Ok(())
}

struct Inputs {
    robot: RobotParams,
    battery: BatteryModel,
    ancillary: AncillaryPowerModel,
    mission: SimplifiedMission,
}

fn load_mission(args: &MissionArgs) -> anyhow::Result<Inputs> {
    let robot: RobotParams = load(&args.robot)?;
    let battery: BatteryModel = load(&args.battery)?;
    let ancillary: AncillaryPowerModel = load(&args.ancillary)?;
    let mut mission: SimplifiedMission = load(&args.mission)?;
    if let Some(v) = args.velocity {
        mission.velocity_mps = v;
        mission.v_opt_mps = v;
    }
    if let Some(d) = args.duty {
        mission.duty_cycle = d;
    }
    robot.validate()?;
    battery.validate()?;
    ancillary.validate()?;
    mission.validate()?;
    Ok(Inputs {
        robot,
        battery,
        ancillary,
        mission,
    })
}

/// Outcome of a subcommand that ran to completion.
enum Done {
    Ok(String),
    /// Output was written, but the result is not a finite range.
    NoFiniteRange(String),
}

fn finish_range(out: &Output, estimate: RangeEstimate) -> anyhow::Result<Done> {
    emit_json(out, &estimate)?;
    Ok(match estimate {
        RangeEstimate::Bounded { d_max_m } => Done::Ok(format!("range {d_max_m} m")),
        RangeEstimate::Unbounded => Done::NoFiniteRange("range is unbounded".into()),
        RangeEstimate::UnboundedWithinProfile { domain_limit_m } => Done::NoFiniteRange(format!(
            "battery outlasts the force profile, which ends at {domain_limit_m} m"
        )),
    })
}

fn estimate_simple(args: &MissionArgs) -> anyhow::Result<Done> {
    let i = load_mission(args)?;
    let estimate = max_range(&i.robot, &i.battery, &i.ancillary, &i.mission)?;
    finish_range(&args.output, estimate)
}

fn estimate_profile(args: &ProfileArgs, implicit: bool) -> anyhow::Result<Done> {
    let i = load_mission(&args.mission)?;
    let doc: ProfileDocument = load(&args.profile)?;
    let profile = doc.force_profile(i.robot.drag_coeff);
    profile.validate()?;
    let pace = Pace::new(i.mission.velocity_mps, i.mission.duty_cycle)?;
    let estimate = if implicit {
        solve_range_implicit(&i.robot, &i.battery, &i.ancillary, &profile, pace)?
    } else {
        let Some(approx) = doc.offline else {
            bail!(
                "{} has no `offline` mean force for the offline estimator",
                args.profile.display()
            );
        };
        estimate_range_offline(&i.robot, &i.battery, &i.ancillary, &profile, &approx, pace)?
    };
    finish_range(&args.mission.output, estimate)
}

#[derive(Serialize)]
struct SimulationSummary {
    true_range_m: f64,
    duration_s: f64,
    energy_breakdown: oprange_core::simulator::EnergyBreakdown,
    samples: usize,
}

fn run_simulation(args: &SimulateArgs) -> anyhow::Result<Done> {
    let mut scenario: Scenario = load(&args.scenario)?;
    if let Some(dt) = args.dt {
        scenario.dt_s = dt;
    }
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    scenario.validate()?;
    let result = simulate(&scenario)?;
    if let Some(path) = &args.log {
        let mut w = sink(Some(path))?;
        write_telemetry(&mut w, &result.telemetry)?;
    }
    emit_json(
        &args.output,
        &SimulationSummary {
            true_range_m: result.true_range_m,
            duration_s: result.duration_s,
            energy_breakdown: result.energy_breakdown,
            samples: result.telemetry.len(),
        },
    )?;
    Ok(Done::Ok(format!(
        "battery exhausted after {} m in {} s",
        result.true_range_m, result.duration_s
    )))
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> anyhow::Result<&'a Path> {
    match path {
        Some(p) => Ok(p),
        None => bail!("this calibration needs --{flag}"),
    }
}

fn calibrate(args: &CalibrateArgs) -> anyhow::Result<Done> {
    let (fragment, summary) = match args.kind {
        CalibrationKind::Ancillary => {
            let samples: Vec<PowerSample> = read_log(open(required(&args.log, "log")?)?)?;
            let fit = fit_ancillary(&samples)?;
            let summary = format!(
                "ancillary s0 {} W, s1 {} W/Hz, rms residual {} W",
                fit.s0_w, fit.s1_w_per_hz, fit.residual
            );
            (fit.config_fragment(), summary)
        }
        CalibrationKind::Battery => {
            let battery: BatteryModel = load(required(&args.battery, "battery")?)?;
            battery.validate()?;
            let obs: Vec<DecayObservation> = read_log(open(required(&args.log, "log")?)?)?;
            let fit = fit_battery_decay(&obs, battery.rated_energy_j)?;
            let summary = format!(
                "battery k1 {} per cycle, k2 {} per day, rms residual {}",
                fit.k1, fit.k2, fit.residual
            );
            (fit.config_fragment(), summary)
        }
        CalibrationKind::Efficiency => {
            let ancillary: AncillaryPowerModel = load(required(&args.ancillary, "ancillary")?)?;
            let wheels_up: Vec<WheelsUpRun> =
                read_log(open(required(&args.wheels_up, "wheels-up")?)?)?;
            let loaded: Vec<LoadedRun> = read_log(open(required(&args.loaded, "loaded")?)?)?;
            let fit = fit_maneuvering_efficiency(&wheels_up, &loaded, ancillary.power()?)?;
            let summary = format!(
                "maneuvering efficiency {} (spread {}) over {} velocities",
                fit.omega_man,
                fit.residual,
                fit.per_velocity.len()
            );
            (fit.config_fragment(), summary)
        }
    };
    emit_json(&args.output, &fragment)?;
    Ok(Done::Ok(summary))
}

fn run_replay(args: &ReplayArgs) -> anyhow::Result<Done> {
    let battery: BatteryModel = load(&args.battery)?;
    battery.validate()?;
    let config = match args.window_m {
        Some(w) if w.is_finite() && w > 0.0 => OnlineConfig::fixed(w),
        Some(w) => bail!("--window-m must be finite and > 0, got {w}"),
        None => OnlineConfig::default(),
    };
    let rows = read_telemetry(open(&args.log)?)?;
    let (trace, _) = replay(rows, OnlineEstimatorState::new(config), &battery)?;
    if let Some(path) = &args.plot {
        write_plot_data(sink(Some(path))?, &trace, args.true_range_m)?;
    }
    emit_json(&args.output, &trace)?;
    Ok(match trace.final_estimate() {
        Some(d) => Done::Ok(format!(
            "final estimate {d} m from {} samples ({} skipped)",
            trace.points.len(),
            trace.skipped
        )),
        None => Done::NoFiniteRange("the robot never moved; no estimate".into()),
    })
}

fn run_report(args: &ReportArgs) -> anyhow::Result<Done> {
    let trials = read_trials(open(&args.log)?)?;
    let report = build_report(&trials);
    report.write_csv(sink(args.output.out.as_deref())?)?;
    eprint!("{}", report.summary_text());
    Ok(Done::Ok(format!(
        "{} trials reported, {} rejected",
        report.rows.len(),
        report.rejected.len()
    )))
}

fn dispatch(cli: &Cli) -> anyhow::Result<Done> {
    match &cli.command {
        Command::EstimateSimple(a) => estimate_simple(a),
        Command::EstimateOffline(a) => estimate_profile(a, false),
        Command::SolveImplicit(a) => estimate_profile(a, true),
        Command::Simulate(a) => run_simulation(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Replay(a) => run_replay(a),
        Command::Report(a) => run_report(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ORANGE_LOG_LEVEL", "warn"))
        .init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(Done::Ok(summary)) => {
            eprintln!("{summary}");
            ExitCode::SUCCESS
        }
        Ok(Done::NoFiniteRange(summary)) => {
            eprintln!("{summary}");
            ExitCode::from(3)
        }
        Err(err) => {
            let f = classify(&err);
            let payload = serde_json::json!({
                "error": f.category,
                "message": format!("{err:#}"),
            });
            eprintln!("{payload}");
            ExitCode::from(f.code)
        }
    }
}
