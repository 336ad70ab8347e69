//! Operator commands behind the `mmsim` binary.
//!
//! Machine-readable summaries go to stdout as one JSON object; diagnostics go
//! to stderr. Exit codes:
//!
//! | code | meaning |
//! |---|---|
//! | 0 | success |
//! | 2 | invalid configuration or arguments |
//! | 3 | cannot bind the listen address |
//! | 4 | file not found or other i/o failure |
//! | 5 | corrupt log |
//! | 6 | unsupported log format version |
//! | 7 | replay diverged from the log |
//! | 8 | trace cannot be parsed |

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::calibration::CalibrationProfile;
use crate::config::{ConfigError, SimConfig};
use crate::course::CourseSpec;
use crate::live::{self, LiveError, LiveOptions};
use crate::telemetry::{latency_stats, replay, LogError, LogWriter, RunLog};
use crate::trace::{
    centerline_trace, off_corridor_trace, run_script, RiderSpec, ScriptedTrace, TraceError,
};
use crate::vehicle::Vehicle;

#[derive(Debug, Parser)]
#[command(
    name = "mmsim",
    version,
    about = "Deterministic micromobility simulation engine"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a live session on a socket.
    Run {
        #[command(flatten)]
        sim: SimArgs,
        /// Address for both WebSocket and newline-delimited TCP clients.
        #[arg(long, default_value = "127.0.0.1:7878")]
        listen: SocketAddr,
        /// Write a session log here.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Re-run a session log without pacing.
    Replay {
        /// Session log written by `run` or `script`.
        log: PathBuf,
        /// Compare every replayed state and event with the log.
        #[arg(long)]
        verify: bool,
        /// Refuse to replay unless the log was made with this configuration.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run a trace file as the only input.
    Script {
        /// One `{"tick":N,"msg":{...}}` object per line.
        trace: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
        /// Write a session log here.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Write the bundled centerline trace for a route.
    Trace {
        #[command(flatten)]
        sim: SimArgs,
        /// Drive off the corridor at full lock instead of following the route.
        #[arg(long)]
        off_corridor: bool,
        /// Output file; stdout when absent.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Print a course's centerline and coin positions.
    Course {
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Receipt-to-state latency statistics of a session log.
    Latency { log: PathBuf },
}

#[derive(Debug, Args, Default)]
pub struct SimArgs {
    /// escooter, segway, unicycle or skateboard.
    #[arg(long)]
    pub vehicle: Option<String>,
    /// Built-in route 1-4.
    #[arg(long)]
    pub route: Option<u8>,
    /// Configuration file (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Calibration profile (JSON), replaces the one in the configuration.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Ticks per second.
    #[arg(long)]
    pub tick_rate: Option<u32>,
    /// Stop after this many ticks.
    #[arg(long)]
    pub max_ticks: Option<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Bind(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Log(LogError),
    #[error("divergent at tick {0}")]
    Divergence(u64),
    #[error(transparent)]
    Trace(TraceError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Bind(_) => 3,
            CliError::Io(_) => 4,
            CliError::Log(LogError::IoFailure(_)) => 4,
            CliError::Log(LogError::ConfigMismatch { .. }) => 2,
            CliError::Log(LogError::VersionMismatch { .. }) => 6,
            CliError::Log(_) => 5,
            CliError::Divergence(_) => 7,
            CliError::Trace(TraceError::Io(_)) => 4,
            CliError::Trace(TraceError::Log(e)) => CliError::Log(e.clone()).exit_code(),
            CliError::Trace(TraceError::Generate(_)) => 2,
            CliError::Trace(_) => 8,
        }
    }
}

impl From<LogError> for CliError {
    fn from(e: LogError) -> Self {
        CliError::Log(e)
    }
}

impl From<TraceError> for CliError {
    fn from(e: TraceError) -> Self {
        CliError::Trace(e)
    }
}

impl From<LiveError> for CliError {
    fn from(e: LiveError) -> Self {
        match e {
            LiveError::Config(c) => CliError::Config(c),
            LiveError::BindFailure { .. } => CliError::Bind(e.to_string()),
            LiveError::Io(m) => CliError::Io(m),
            LiveError::Log(l) => CliError::Log(l),
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

impl SimArgs {
    /// Defaults, then `--config`, then the individual flags.
    pub fn to_config(&self) -> Result<SimConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => SimConfig::from_json(&read_file(p)?)
                .map_err(|e| ConfigError(format!("{}: {}", p.display(), e.0)))?,
            None => SimConfig::default(),
        };
        if let Some(p) = &self.calibration {
            cfg.calibration = CalibrationProfile::from_json(&read_file(p)?)
                .map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
        }
        if let Some(v) = &self.vehicle {
            cfg.vehicle = Some(
                v.parse::<Vehicle>()
                    .map_err(|e| ConfigError(e.to_string()))?,
            );
        }
        if let Some(r) = self.route {
            cfg.course = CourseSpec {
                route: Some(r),
                points: None,
                ..cfg.course
            };
        }
        if let Some(t) = self.tick_rate {
            cfg.tick_rate = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn emit(out: &mut dyn Write, value: serde_json::Value) -> Result<(), CliError> {
    match writeln!(out, "{value}") {
        // the reader went away (`| head`); nothing left to say
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => r.map_err(|e| CliError::Io(e.to_string())),
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Run { sim, listen, log } => {
            let config = sim.to_config()?;
            let mut opts = LiveOptions::new(listen);
            opts.log = log;
            opts.max_ticks = sim.max_ticks;
            opts.handle_ctrl_c = true;
            let handle = live::start(config, opts)?;
            eprintln!("listening on {}", handle.local_addr());
            let r = handle.join()?;
            emit(
                out,
                json!({
                    "ticks": r.ticks,
                    "clients": r.clients_connected,
                    "clients_dropped": r.clients_dropped,
                    "inbound": r.inbound,
                    "phase": r.phase,
                    "coins_collected": r.coins_collected,
                    "coins_total": r.coins_total,
                }),
            )
        }
        Command::Replay {
            log,
            verify,
            config,
        } => {
            let run = RunLog::read_path(&log)?;
            let expected = config
                .map(|p| SimConfig::from_json(&read_file(&p)?).map_err(CliError::from))
                .transpose()?;
            let r = replay(&run, expected.as_ref(), verify)?;
            let verdict = match (&r.divergence, verify) {
                (Some(_), _) => "divergent",
                (None, true) => "identical",
                (None, false) => "replayed",
            };
            emit(
                out,
                json!({
                    "verdict": verdict,
                    "divergent_tick": r.divergence.as_ref().map(|d| d.tick),
                    "ticks": r.ticks,
                    "inbound": r.inbound,
                    "phase": r.phase,
                    "coins_collected": r.coins_collected,
                    "coins_total": r.coins_total,
                    "x": r.state.x,
                    "y": r.state.y,
                    "heading": r.state.heading,
                    "speed": r.state.speed,
                }),
            )?;
            match r.divergence {
                Some(d) => {
                    eprintln!("logged:   {}\nreplayed: {}", d.logged, d.replayed);
                    Err(CliError::Divergence(d.tick))
                }
                None => Ok(()),
            }
        }
        Command::Script { trace, sim, log } => {
            let config = sim.to_config()?;
            let trace = ScriptedTrace::load(&trace)?;
            let max_ticks = sim
                .max_ticks
                .unwrap_or(trace.last_tick() + 60 * u64::from(config.tick_rate));
            let writer = log
                .as_deref()
                .map(|p| LogWriter::create(p, &config))
                .transpose()?;
            let (summary, _) = run_script(config, &trace, max_ticks, writer)?;
            emit(
                out,
                serde_json::to_value(&summary).expect("summary serializes"),
            )
        }
        Command::Trace {
            sim,
            off_corridor,
            out: path,
        } => {
            let config = sim.to_config()?;
            let trace = if off_corridor {
                off_corridor_trace(
                    &config,
                    sim.max_ticks.unwrap_or(30 * u64::from(config.tick_rate)),
                )?
            } else {
                let route = config
                    .course
                    .route
                    .ok_or_else(|| ConfigError("centerline traces need a built-in route".into()))?;
                let mut rider = RiderSpec::bundled(route)?;
                if let Some(v) = config.vehicle {
                    rider.vehicle = v;
                }
                if let Some(m) = sim.max_ticks {
                    rider.max_ticks = m;
                }
                centerline_trace(&config, &rider)?
            };
            match path {
                Some(p) => {
                    trace.save(&p)?;
                    emit(
                        out,
                        json!({ "trace": p, "entries": trace.len(), "last_tick": trace.last_tick() }),
                    )
                }
                None => trace.write_to(out).map_err(CliError::from),
            }
        }
        Command::Course { sim } => {
            let config = sim.to_config()?;
            let (course, coins) = config
                .course
                .build()
                .map_err(|e| ConfigError(e.to_string()))?;
            emit(
                out,
                json!({
                    "total_length": course.total_length(),
                    "half_width": course.half_width(),
                    "spacing": coins.spacing,
                    "pickup_radius": coins.pickup_radius,
                    "points": course.points(),
                    "coins": coins.coins.iter().map(|c| json!({"arc": c.arc, "x": c.position[0], "y": c.position[1]})).collect::<Vec<_>>(),
                }),
            )
        }
        Command::Latency { log } => {
            let run = RunLog::read_path(&log)?;
            let tick_ms = 1000.0 / f64::from(run.header.config.tick_rate);
            let value = match latency_stats(&run) {
                Some(s) => json!({
                    "samples": s.samples,
                    "median_ms": s.median_ms,
                    "p95_ms": s.p95_ms,
                    "max_ms": s.max_ms,
                    "tick_ms": tick_ms,
                    "median_below_tick": s.median_ms < tick_ms,
                    "histogram": s.histogram.iter().map(|(b, n)| json!({"from_ms": b, "count": n})).collect::<Vec<_>>(),
                }),
                None => json!({ "samples": 0, "tick_ms": tick_ms }),
            };
            emit(out, value)
        }
    }
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match execute(cli, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
