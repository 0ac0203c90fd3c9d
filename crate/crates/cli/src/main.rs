//! `fieldnet`: run deployment simulations, serve the cloud API, and operate
//! a live deployment.
//!
//! Exit status: 0 on success, 1 for invalid input or a report that fails
//! its own invariants, 2 for runtime failures.

use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use fieldnet_client::{Client, ClientError};
use fieldnet_core::analysis::{average_current, battery_life, fit_calibration, LifetimePlan, SeriesPoint};
use fieldnet_core::deployment::run_scenario;
use fieldnet_core::error::RunError;
use fieldnet_core::faults::FaultKind;
use fieldnet_core::fieldnode::power::{DutyCycle, PowerProfile};
use fieldnet_core::report::RunReport;
use fieldnet_core::scenario::Scenario;
use fieldnet_core::wire;
use fieldnet_server::{Server, ServerConfig};

#[derive(Parser)]
#[command(
    name = "fieldnet",
    version,
    about = "Environmental sensor deployment simulator and services"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario to completion and report on it.
    Simulate(SimulateArgs),
    /// Serve the cloud API, optionally with a live simulated deployment.
    Serve(ServeArgs),
    /// Battery lifetime planning from a duty cycle.
    Plan(PlanArgs),
    /// Fit a cheap sensor against a reference from two exported series.
    Calibrate(CalibrateArgs),
    /// Schedule a fault in the live deployment of a running server.
    Inject(InjectArgs),
    /// Show the live deployment of a running server.
    Status(ServerArg),
    /// Recompute the run report from a store directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file; the built-in default deployment when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override the deployment duration, e.g. `36h` or `14days`.
    #[arg(long, value_parser = humantime::parse_duration)]
    until: Option<Duration>,
    /// Directory for the cloud store and queue logs; must be empty.
    #[arg(long)]
    store: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    /// Store directory, created if missing. In-memory when omitted.
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    /// Run this scenario live against the served cloud, paced by its
    /// `time_compression`.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Static console assets to serve next to the API.
    #[arg(long)]
    assets: Option<PathBuf>,
    /// Silence threshold in missed periods, when no scenario sets it.
    #[arg(long)]
    silence_threshold: Option<f64>,
}

#[derive(Args)]
struct PlanArgs {
    /// Total bank capacity in mAh.
    #[arg(long, default_value_t = 7800.0)]
    capacity: f64,
    #[arg(long, default_value_t = 130.0)]
    active_ma: f64,
    #[arg(long, default_value_t = 45.0)]
    sleep_ma: f64,
    #[arg(long, default_value_t = 5)]
    awake_s: u64,
    #[arg(long, default_value_t = 300)]
    sleep_s: u64,
    #[arg(long, default_value_t = fieldnet_core::analysis::DEFAULT_DERATING)]
    derating: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Cheap-sensor series, one `{"t":..,"value":..}` record per line as
    /// returned by `GET /series`.
    #[arg(long)]
    cheap: PathBuf,
    /// Reference series in the same format.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Pairing tolerance in seconds; half the cheap series' period by default.
    #[arg(long)]
    tolerance: Option<u64>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ServerArg {
    #[arg(long, default_value = "http://127.0.0.1:8080")]
    server: String,
}

#[derive(Args)]
struct InjectArgs {
    /// Simulated time to fire at, in seconds or as a duration like `2h`.
    /// Now when omitted.
    #[arg(long)]
    at: Option<String>,
    /// Node id, `relay`, `gateway`, or a link name.
    #[arg(long)]
    node: String,
    /// Fault name such as `radio_hang`, or a JSON object with parameters,
    /// e.g. `{"kind":"extra_load","ma":150}`.
    #[arg(long)]
    fault: String,
    #[command(flatten)]
    server: ServerArg,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    store: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure and the exit status it maps to.
enum Failure {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Scenario(_) | RunError::StoreInUse(_) => Failure::Invalid(e.into()),
            e => Failure::Runtime(e.into()),
        }
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        match &e {
            ClientError::Api { status, .. } if status.is_client_error() => Failure::Invalid(e.into()),
            _ => Failure::Runtime(e.into()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Invalid(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Cmd::Simulate(a) => simulate(a),
        Cmd::Serve(a) => serve(a),
        Cmd::Plan(a) => plan(a),
        Cmd::Calibrate(a) => calibrate(a),
        Cmd::Inject(a) => inject(a),
        Cmd::Status(a) => status(a),
        Cmd::Report(a) => report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_scenario(path: Option<&Path>) -> Result<Scenario, Failure> {
    match path {
        Some(p) => Scenario::load(p).map_err(invalid),
        None => Ok(Scenario::default_deployment()),
    }
}

fn write_report(report: &RunReport, out: Option<&Path>) -> Outcome {
    let json = report.to_json();
    match out {
        Some(p) => std::fs::write(p, json)
            .with_context(|| format!("writing {}", p.display()))
            .map_err(runtime),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn simulate(a: SimulateArgs) -> Outcome {
    let mut scenario = load_scenario(a.scenario.as_deref())?;
    if let Some(seed) = a.seed {
        scenario.seed = seed;
    }
    if let Some(until) = a.until {
        scenario.duration_s = until.as_secs();
    }
    scenario.validate().map_err(invalid)?;
    let out = run_scenario(&scenario, a.store.as_deref())?;
    write_report(&out.report, a.report.as_deref())?;
    eprintln!("{}", out.report.summary());
    if !out.report.closure_holds() {
        return Err(invalid(anyhow!("packet accounting does not close")));
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Outcome {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let scenario = a
        .scenario
        .as_deref()
        .map(|p| Scenario::load(p).map_err(invalid))
        .transpose()?;
    let mut cloud = scenario.as_ref().map(|s| s.cloud_config()).unwrap_or_default();
    if let Some(k) = a.silence_threshold {
        if !(k > 0.0) {
            return Err(invalid(anyhow!("--silence-threshold must be positive")));
        }
        cloud.silence_threshold = k;
    }
    let config = ServerConfig {
        store: a.store,
        cloud,
        scenario,
        assets: a.assets,
    };
    let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
    rt.block_on(async {
        let server = Server::bind(SocketAddr::new(a.host, a.port), &config)
            .await
            .map_err(|e| match e {
                fieldnet_server::ServeError::Run(RunError::Scenario(_) | RunError::StoreInUse(_)) => invalid(e),
                e => runtime(e),
            })?;
        eprintln!("listening on http://{}", server.local_addr().map_err(runtime)?);
        server
            .run(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(runtime)
    })
}

fn plan(a: PlanArgs) -> Outcome {
    let profile = PowerProfile {
        active_ma: a.active_ma,
        sleep_ma: a.sleep_ma,
        ..PowerProfile::soil_default()
    };
    let duty = DutyCycle {
        sleep_s: a.sleep_s,
        awake_s: a.awake_s,
    };
    profile.validate().map_err(|e| invalid(anyhow!(e)))?;
    duty.validate().map_err(|e| invalid(anyhow!(e)))?;
    let avg = average_current(&profile, &duty);
    let hours = battery_life(a.capacity, avg, a.derating).map_err(invalid)?;
    let p = LifetimePlan {
        capacity_mah: a.capacity,
        avg_ma: avg,
        derating: a.derating,
        hours,
    };
    if a.json {
        println!("{}", serde_json::to_string(&p).map_err(runtime)?);
    } else {
        println!("average current  {:.2} mA", p.avg_ma);
        println!("lifetime         {:.1} h ({:.1} days)", p.hours, p.days());
    }
    Ok(())
}

fn read_series(path: &Path) -> Result<Vec<SeriesPoint>, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(invalid)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let p: wire::SeriesPoint = serde_json::from_str(line)
            .with_context(|| format!("{}:{}", path.display(), i + 1))
            .map_err(invalid)?;
        let value = p
            .value
            .as_f64()
            .ok_or_else(|| invalid(anyhow!("{}:{}: value is not numeric", path.display(), i + 1)))?;
        out.push(SeriesPoint { t: p.t, value });
    }
    Ok(out)
}

fn calibrate(a: CalibrateArgs) -> Outcome {
    let cheap = read_series(&a.cheap)?;
    let reference = read_series(&a.reference)?;
    let fit = fit_calibration(&cheap, &reference, a.tolerance).map_err(invalid)?;
    if a.json {
        println!("{}", serde_json::to_string(&fit).map_err(runtime)?);
    } else {
        println!("reference = {:.6} * cheap + {:.6}", fit.slope, fit.intercept);
        println!("r^2 {:.4} over {} pairs", fit.r_squared, fit.n_points);
    }
    Ok(())
}

fn parse_fault(s: &str) -> Result<FaultKind, Failure> {
    if s.trim_start().starts_with('{') {
        serde_json::from_str(s).map_err(|e| invalid(anyhow!("bad fault object: {e}")))
    } else {
        s.parse().map_err(invalid)
    }
}

fn parse_at(s: &str) -> Result<u64, Failure> {
    if let Ok(secs) = s.parse() {
        return Ok(secs);
    }
    humantime::parse_duration(s)
        .map(|d| d.as_secs())
        .map_err(|e| invalid(anyhow!("bad --at `{s}`: {e}")))
}

fn client_runtime() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(runtime)
}

fn inject(a: InjectArgs) -> Outcome {
    let fault = parse_fault(&a.fault)?;
    let at = a.at.as_deref().map(parse_at).transpose()?;
    let client = Client::new(a.server.server);
    let done = client_runtime()?.block_on(client.inject(at, &a.node, fault))?;
    println!("{} on {} at t={} s", done.fault, done.target, done.at_s);
    Ok(())
}

fn status(a: ServerArg) -> Outcome {
    let client = Client::new(a.server);
    let s = client_runtime()?.block_on(client.sim_status())?;
    println!("{}", serde_json::to_string_pretty(&s).map_err(runtime)?);
    Ok(())
}

fn report(a: ReportArgs) -> Outcome {
    if !a.store.is_dir() {
        return Err(invalid(anyhow!("store {} does not exist", a.store.display())));
    }
    let r = RunReport::from_store(&a.store).map_err(runtime)?;
    write_report(&r, a.out.as_deref())?;
    eprintln!("{}", r.summary());
    Ok(())
}
