//! `rimdiag`: simulate a rotary indexing machine, diagnose Not-OK product
//! traces, validate process descriptions and reproduce the fault-matrix
//! evaluation.
//!
//! Exit codes: 0 success, 1 unreadable or invalid inputs, 2 invalid fault
//! arguments, 3 trace/config sensor mismatch, 4 evaluation matrix deviation.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use rim_core::config::load_machine_definition;
use rim_core::diagnosis::{
    diagnose_multistep, diagnose_stepwise, render_report, DiagnosisError, DiagnosisReport,
};
use rim_core::sim::log::{default_log_base, machine_log_human, machine_log_jsonl};
use rim_core::sim::{
    simulate_machine_seeded, simulate_product_run, FaultKind, FaultSpec, MachineConfig, SimError,
};
use rim_core::trace::{read_trace, trace_to_jsonl, Trace};
use rim_core::MachineDefinition;

use rim_cli::evaluate;

const EXIT_INPUT: u8 = 1;
const EXIT_FAULT: u8 = 2;
const EXIT_MISMATCH: u8 = 3;
const EXIT_MATRIX: u8 = 4;

#[derive(Parser)]
#[command(
    name = "rimdiag",
    version,
    about = "Product-perspective simulation and root-cause diagnosis for rotary indexing machines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate product runs, optionally injecting a fault
    Simulate {
        /// Process-description JSON file
        #[arg(long)]
        config: PathBuf,
        /// Fault class to inject
        #[arg(long, value_enum, default_value_t = FaultArg::None)]
        fault: FaultArg,
        /// Seed for the benign in-tolerance jitter
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trace output file (JSON lines)
        #[arg(long)]
        out: PathBuf,
        /// Number of products fed through the whole-machine model
        #[arg(long, default_value_t = 1)]
        products: u64,
        /// Product ordinal the fault strikes
        #[arg(long, default_value_t = 1)]
        target: u64,
        /// Fault magnitude (meaning depends on the fault class)
        #[arg(long)]
        magnitude: Option<f64>,
        /// Also write the merged machine log here (plus a .jsonl twin)
        #[arg(long)]
        machine_log: Option<PathBuf>,
    },
    /// Diagnose a product trace against the process description
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        /// Trace file produced by `simulate`
        #[arg(long)]
        trace: PathBuf,
        /// Which diagnosis algorithm to run
        #[arg(long, value_enum)]
        algorithm: AlgorithmArg,
        /// Write the JSON report here as well
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
    },
    /// Run all five fault scenarios through both algorithms
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = FormatArg::Text)]
        format: FormatArg,
    },
    /// Check a process description for invariant violations
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FaultArg {
    None,
    TimingJackCylinder,
    PartWrongPosition,
    PressureSensorBroken,
    JackCylinderBroken,
    PartBroken,
}

impl From<FaultArg> for FaultKind {
    fn from(arg: FaultArg) -> FaultKind {
        match arg {
            FaultArg::None => FaultKind::None,
            FaultArg::TimingJackCylinder => FaultKind::TimingJackCylinder,
            FaultArg::PartWrongPosition => FaultKind::PartWrongPosition,
            FaultArg::PressureSensorBroken => FaultKind::PressureSensorBroken,
            FaultArg::JackCylinderBroken => FaultKind::JackCylinderBroken,
            FaultArg::PartBroken => FaultKind::PartBroken,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgorithmArg {
    Stepwise,
    Multistep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Text,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Simulate {
            config,
            fault,
            seed,
            out,
            products,
            target,
            magnitude,
            machine_log,
        } => cmd_simulate(&config, fault, seed, &out, products, target, magnitude, machine_log),
        Command::Diagnose { config, trace, algorithm, out, format } => {
            cmd_diagnose(&config, &trace, algorithm, out, format)
        }
        Command::Evaluate { config, seed, format } => cmd_evaluate(&config, seed, format),
        Command::Validate { config } => cmd_validate(&config),
    };
    match code {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn load_definition(path: &Path) -> Result<MachineDefinition> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    load_machine_definition(&text).with_context(|| format!("config {} rejected", path.display()))
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    config: &Path,
    fault: FaultArg,
    seed: u64,
    out: &Path,
    products: u64,
    target: u64,
    magnitude: Option<f64>,
    machine_log: Option<PathBuf>,
) -> Result<u8> {
    let definition = load_definition(config)?;
    let cfg = MachineConfig::new(definition).context("config does not simulate")?;

    let mut spec = FaultSpec::new(fault.into()).with_target(target);
    spec.magnitude = magnitude;
    if spec.kind != FaultKind::None && (target < 1 || target > products) {
        eprintln!("error: invalid fault: target product {target} outside 1..={products}");
        return Ok(EXIT_FAULT);
    }
    if target < 1 || target > products {
        eprintln!("error: no product {target} in a {products}-product run");
        return Ok(EXIT_INPUT);
    }

    let (trace, log) = if products == 1 && machine_log.is_none() {
        match simulate_product_run(&cfg, &spec, seed) {
            Ok(trace) => (trace, None),
            Err(SimError::InvalidFault(message)) => {
                eprintln!("error: invalid fault: {message}");
                return Ok(EXIT_FAULT);
            }
            Err(err) => return Err(err.into()),
        }
    } else {
        match simulate_machine_seeded(&cfg, products, &[spec], seed) {
            Ok((traces, log)) => {
                let trace = traces
                    .into_iter()
                    .find(|t| t.product_id == target)
                    .ok_or_else(|| anyhow!("no trace for product {target}"))?;
                (trace, Some(log))
            }
            Err(SimError::InvalidFault(message)) => {
                eprintln!("error: invalid fault: {message}");
                return Ok(EXIT_FAULT);
            }
            Err(err) => return Err(err.into()),
        }
    };

    write_atomically(out, trace_to_jsonl(&trace).as_bytes())
        .with_context(|| format!("cannot write trace {}", out.display()))?;
    if let Some(log_path) = machine_log {
        let log = log.expect("whole-machine model ran");
        write_atomically(&log_path, machine_log_human(&log, default_log_base()).as_bytes())
            .with_context(|| format!("cannot write machine log {}", log_path.display()))?;
        let twin = jsonl_twin_path(&log_path);
        write_atomically(&twin, machine_log_jsonl(&log).as_bytes())
            .with_context(|| format!("cannot write machine log twin {}", twin.display()))?;
    }

    let verdict = match trace.verdict {
        rim_core::Verdict::Ok => "OK".to_string(),
        rim_core::Verdict::NotOk { detected_by } => format!("Not-OK, detected at station {detected_by}"),
    };
    println!("wrote trace of product {} ({}) to {}", trace.product_id, verdict, out.display());
    Ok(0)
}

fn jsonl_twin_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".jsonl");
    PathBuf::from(name)
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(bytes)?;
    Ok(())
}

fn cmd_diagnose(
    config: &Path,
    trace_path: &Path,
    algorithm: AlgorithmArg,
    out: Option<PathBuf>,
    format: FormatArg,
) -> Result<u8> {
    let definition = load_definition(config)?;
    let file = fs::File::open(trace_path)
        .with_context(|| format!("cannot read trace {}", trace_path.display()))?;
    let trace: Trace = read_trace(std::io::BufReader::new(file))
        .with_context(|| format!("trace {} rejected", trace_path.display()))?;

    if trace.verdict.is_ok() {
        println!("product OK - diagnosis not triggered");
        return Ok(0);
    }
    let trigger = definition
        .process
        .eject_not_ok_station()
        .ok_or_else(|| anyhow!("config has no eject-not-ok station to report Not-OK products"))?;

    let result = match algorithm {
        AlgorithmArg::Stepwise => {
            diagnose_stepwise(&definition.process, &definition.expected, &trace, trigger)
        }
        AlgorithmArg::Multistep => {
            diagnose_multistep(&definition.process, &definition.expected, &trace, trigger)
        }
    };
    let report: DiagnosisReport = match result {
        Ok(report) => report,
        Err(err @ (DiagnosisError::UnknownSensorInTrace(_) | DiagnosisError::TraceIncomplete(_))) => {
            eprintln!("error: trace does not match config: {err}");
            return Ok(EXIT_MISMATCH);
        }
        Err(err) => return Err(err.into()),
    };

    match format {
        FormatArg::Text => print!("{}", render_report(&report)),
        FormatArg::Json => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    if let Some(out) = out {
        write_atomically(&out, serde_json::to_string_pretty(&report)?.as_bytes())
            .with_context(|| format!("cannot write report {}", out.display()))?;
    }
    Ok(0)
}

fn cmd_evaluate(config: &Path, seed: u64, format: FormatArg) -> Result<u8> {
    let definition = load_definition(config)?;
    let matrix = evaluate::run_evaluation(&definition, seed)?;

    match format {
        FormatArg::Text => print!("{}", evaluate::render_matrix(&matrix)),
        FormatArg::Json => println!("{}", serde_json::to_string_pretty(&matrix)?),
    }

    if matrix.matches_expected {
        if format == FormatArg::Text {
            println!("matrix matches the expected pattern");
        }
        Ok(0)
    } else {
        for diff in evaluate::diff_against_expected(&matrix) {
            eprintln!("deviation: {diff}");
        }
        Ok(EXIT_MATRIX)
    }
}

fn cmd_validate(config: &Path) -> Result<u8> {
    let text = fs::read_to_string(config)
        .with_context(|| format!("cannot read config {}", config.display()))?;
    match load_machine_definition(&text) {
        Ok(definition) => {
            let issues = rim_core::validate::validate(&definition);
            if issues.is_empty() {
                println!("config is valid: {definition}");
                Ok(0)
            } else {
                for issue in issues {
                    println!("issue: {issue}");
                }
                Ok(EXIT_INPUT)
            }
        }
        Err(err) => {
            for issue in err.issues() {
                println!("issue: {issue}");
            }
            eprintln!("error: {err}");
            Ok(EXIT_INPUT)
        }
    }
}
