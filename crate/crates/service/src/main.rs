use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use teleop_core::dtmf::{self, DetectorConfig};
use teleop_core::progmem::workload::{parse_trace, render_trace, replay, zipf_trace};
use teleop_core::progmem::{EvictionPolicy, StoreConfig};
use teleop_core::scenario::{Scenario, MIN_TICK_MS};
use teleop_service::headless::{run_script, RunOptions};
use teleop_service::script::Script;
use teleop_service::server::{ServeOptions, Server, StopReason};
use teleop_service::session::Engine;
use teleop_service::wav;

const EXIT_CONFIG: u8 = 1;
const EXIT_ASSERTION: u8 = 2;

#[derive(Parser)]
#[command(
    name = "teleop",
    version,
    about = "Teleoperated robot simulation service and codec tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulation live and accept operator sessions over WebSocket.
    Serve {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: String,
        /// Stop after this many ticks.
        #[arg(long)]
        ticks: Option<u64>,
    },
    /// Run a headless script and write its telemetry transcript.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        script: PathBuf,
        /// Transcript destination; stdout when omitted.
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Pad the run with idle ticks up to this count.
        #[arg(long, default_value_t = 0)]
        ticks: u64,
    },
    /// Keypad tone tools.
    #[command(subcommand)]
    Dtmf(DtmfCommand),
    /// Progressive memory tools.
    #[command(subcommand)]
    Progmem(ProgmemCommand),
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tick_ms: Option<u32>,
}

#[derive(Subcommand)]
enum DtmfCommand {
    /// Print the digits found in a WAV file, one JSON object per line.
    Decode { wav: PathBuf },
    /// Write keypad tones for `digits` to a WAV file.
    Encode {
        digits: String,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 100)]
        tone_ms: u32,
        #[arg(long, default_value_t = 60)]
        gap_ms: u32,
        /// Peak amplitude of each of the two tones.
        #[arg(long, default_value_t = 0.4)]
        amplitude: f64,
        #[arg(long, default_value_t = dtmf::DEFAULT_SAMPLE_RATE)]
        sample_rate: u32,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Progressive,
    Fifo,
}

#[derive(Subcommand)]
enum ProgmemCommand {
    /// Replay an access trace and print hit-rate figures as JSON.
    Bench {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum, default_value_t = Policy::Progressive)]
        policy: Policy,
        #[arg(long)]
        active_capacity: Option<usize>,
        #[arg(long)]
        server_capacity: Option<usize>,
        #[arg(long)]
        pin_duration: Option<u64>,
        #[arg(long)]
        uplink_latency: Option<u64>,
        #[arg(long)]
        uplink_failure_rate: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate a Zipf-distributed read trace.
    Trace {
        #[arg(long, default_value_t = 1000)]
        keys: u64,
        #[arg(long, default_value_t = 20_000)]
        gets: usize,
        #[arg(long, default_value_t = 1.0)]
        exponent: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

/// Failure with the exit status it maps to.
struct Failure(u8, String);

fn config<E: std::fmt::Display>(context: impl std::fmt::Display) -> impl FnOnce(E) -> Failure {
    move |e| Failure(EXIT_CONFIG, format!("{context}: {e}"))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(config(path.display()))
}

fn load_scenario(args: &ScenarioArgs) -> Result<Scenario, Failure> {
    let path = args.scenario.display();
    let mut scenario = Scenario::parse(&read_text(&args.scenario)?).map_err(config(&path))?;
    if let Some(seed) = args.seed {
        scenario.set_seed(seed);
    }
    if let Some(ms) = args.tick_ms {
        if ms < MIN_TICK_MS {
            return Err(Failure(
                EXIT_CONFIG,
                format!("--tick-ms must be at least {MIN_TICK_MS}"),
            ));
        }
        scenario.tick_ms = ms;
    }
    Ok(scenario)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(config(p.display())),
        None => io::stdout().write_all(text.as_bytes()).map_err(config("stdout")),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Serve {
            scenario,
            listen,
            ticks,
        } => {
            let s = load_scenario(&scenario)?;
            let engine = Engine::from_scenario(&s).map_err(config("scenario"))?;
            let options = ServeOptions {
                listen,
                max_ticks: ticks,
                ..ServeOptions::default()
            };
            let server = Server::start(engine, options).map_err(config("listen"))?;
            eprintln!("teleop: serving on ws://{}", server.local_addr());
            let summary = server.join().map_err(config("simulation"))?;
            let why = match summary.reason {
                StopReason::Shutdown => "shutdown requested",
                StopReason::Fallen => "robot fell",
                StopReason::TickLimit => "tick limit reached",
                StopReason::Stopped => "stopped",
            };
            eprintln!("teleop: {why} after {} ticks", summary.ticks);
            Ok(())
        }
        Command::Run {
            scenario,
            script,
            transcript,
            ticks,
        } => {
            let s = load_scenario(&scenario)?;
            let script_text = read_text(&script)?;
            let parsed = Script::parse(&script_text).map_err(config(script.display()))?;
            let options = RunOptions {
                min_ticks: ticks,
                ..RunOptions::default()
            };
            let outcome = run_script(&s, &parsed, &options).map_err(config(script.display()))?;
            write_output(transcript.as_deref(), &outcome.transcript)?;
            for f in &outcome.failures {
                let actual = f
                    .actual
                    .as_ref()
                    .map_or("no telemetry yet".to_string(), |v| v.to_string());
                eprintln!(
                    "{}:{}: expect {} {} {} failed, actual {actual}",
                    script.display(),
                    f.line,
                    f.expectation.field,
                    f.expectation.op,
                    f.expectation.value
                );
            }
            eprintln!(
                "teleop: {} ticks, {} digits decoded, {}/{} expectations held{}",
                outcome.records.len(),
                outcome.digits.len(),
                outcome.expectations - outcome.failures.len(),
                outcome.expectations,
                if outcome.fallen { ", robot fell" } else { "" }
            );
            if outcome.passed() {
                Ok(())
            } else {
                Err(Failure(EXIT_ASSERTION, "script expectations failed".into()))
            }
        }
        Command::Dtmf(DtmfCommand::Decode { wav: path }) => {
            let (samples, rate) = wav::read(&path).map_err(config(path.display()))?;
            let events =
                dtmf::decode_stream(&samples, rate, &DetectorConfig::default()).map_err(config(path.display()))?;
            let mut out = String::new();
            for e in &events {
                out.push_str(&serde_json::to_string(e).expect("digit events serialize"));
                out.push('\n');
            }
            write_output(None, &out)
        }
        Command::Dtmf(DtmfCommand::Encode {
            digits,
            output,
            tone_ms,
            gap_ms,
            amplitude,
            sample_rate,
        }) => {
            let samples =
                dtmf::encode_sequence(&digits, tone_ms, gap_ms, sample_rate, amplitude).map_err(config("encode"))?;
            wav::write(&output, &samples, sample_rate).map_err(config(output.display()))
        }
        Command::Progmem(ProgmemCommand::Bench {
            trace,
            policy,
            active_capacity,
            server_capacity,
            pin_duration,
            uplink_latency,
            uplink_failure_rate,
            seed,
        }) => {
            let ops = parse_trace(&read_text(&trace)?).map_err(config(trace.display()))?;
            let d = StoreConfig::default();
            let server_capacity = server_capacity.unwrap_or(d.server_capacity);
            let store = StoreConfig {
                active_capacity: active_capacity.unwrap_or(d.active_capacity),
                server_capacity,
                server_hard_limit: d.server_hard_limit.max(server_capacity),
                pin_duration: pin_duration.unwrap_or(d.pin_duration),
                uplink_latency: uplink_latency.unwrap_or(d.uplink_latency),
                uplink_failure_rate: uplink_failure_rate.unwrap_or(d.uplink_failure_rate),
                seed: seed.unwrap_or(d.seed),
                policy: match policy {
                    Policy::Progressive => EvictionPolicy::Progressive,
                    Policy::Fifo => EvictionPolicy::Fifo,
                },
                ..d
            };
            let report = replay(&ops, store).map_err(config("bench"))?;
            let json = serde_json::to_string_pretty(&report).expect("reports serialize");
            write_output(None, &format!("{json}\n"))
        }
        Command::Progmem(ProgmemCommand::Trace {
            keys,
            gets,
            exponent,
            seed,
            output,
        }) => {
            if keys == 0 || exponent.is_nan() || exponent < 0.0 {
                return Err(Failure(
                    EXIT_CONFIG,
                    "need at least one key and a non-negative exponent".into(),
                ));
            }
            write_output(
                output.as_deref(),
                &render_trace(&zipf_trace(keys, exponent, gets, seed)),
            )
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TELEOP_LOG", "warn")).init();
    // usage errors are configuration errors; 2 is reserved for failed expectations
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, message)) => {
            eprintln!("teleop: {message}");
            ExitCode::from(code)
        }
    }
}
