use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use kinewave::engine::{run, SimError};
use kinewave::io::scenario::OutputKind;
use kinewave::io::{emit_outputs, parse_scenario, Scenario};
use kinewave::oracles::{compare_curves, ctm_run, front_track, CtmConfig, OracleReport};

/// Exit status for scenario or configuration problems.
const EXIT_INVALID: u8 = 2;
/// Exit status for failures during the run itself.
const EXIT_RUNTIME: u8 = 3;

/// Samples per horizon when comparing curves against an oracle.
const COMPARE_SAMPLES: usize = 4000;

#[derive(Parser)]
#[command(name = "kinewave", version, about = "Continuous-time link transmission model for traffic networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the result files.
    Run(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Time step override (hour).
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon override (hour).
    #[arg(long)]
    horizon: Option<f64>,
    /// Seed override for random demand.
    #[arg(long)]
    seed: Option<u64>,
    /// Extra outputs to write.
    #[arg(long, value_enum)]
    emit: Vec<Emit>,
    /// Cross-check the run against an independent solver.
    #[arg(long, value_enum)]
    oracle: Option<Oracle>,
    /// Cell length for the CTM oracle (mile).
    #[arg(long, default_value_t = 0.05)]
    ctm_dx: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Moskowitz,
}

#[derive(Clone, Copy, ValueEnum)]
enum Oracle {
    Ctm,
    Fronttrack,
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run(args) = cli.command;
    match run_command(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn load(args: &RunArgs) -> Result<Scenario, Failure> {
    let mut scenario = parse_scenario(&args.scenario).map_err(|e| Failure::Invalid(e.to_string()))?;
    if let Some(dt) = args.dt {
        scenario.config.dt = dt;
    }
    if let Some(horizon) = args.horizon {
        scenario.config.horizon = horizon;
    }
    if let Some(seed) = args.seed {
        scenario.override_seed(seed);
    }
    for Emit::Moskowitz in &args.emit {
        if !scenario.outputs.contains(&OutputKind::Moskowitz) {
            scenario.outputs.push(OutputKind::Moskowitz);
        }
    }
    scenario.config.validate(&scenario.network).map_err(|e| Failure::Invalid(e.to_string()))?;
    Ok(scenario)
}

fn classify(err: SimError) -> Failure {
    match err {
        SimError::BadStep(_)
        | SimError::StepTooLong { .. }
        | SimError::BadHorizon { .. }
        | SimError::MissingProfile { .. }
        | SimError::VirtualLinkOverflow { .. } => Failure::Invalid(err.to_string()),
        _ => Failure::Runtime(err.to_string()),
    }
}

fn run_command(args: &RunArgs) -> Result<(), Failure> {
    let scenario = load(args)?;
    let profiles = scenario.profiles();
    let output = run(&scenario.network, &profiles, scenario.config.clone()).map_err(classify)?;
    let written = emit_outputs(&output, &scenario.outputs, &args.out).map_err(|e| Failure::Runtime(e.to_string()))?;

    if let Some(oracle) = args.oracle {
        let horizon = scenario.config.horizon;
        let report: OracleReport = match oracle {
            Oracle::Ctm => {
                let dx = args.ctm_dx;
                let fastest = scenario.network.links().iter().map(|l| l.params.k.max(l.params.w)).fold(0.0, f64::max);
                // Twice as many substeps as the CFL bound requires, so the CTM step divides the engine step.
                let substeps = 2.0 * (scenario.config.dt * fastest / dx).ceil();
                let config = CtmConfig { dx, dt: scenario.config.dt / substeps, horizon };
                let ctm = ctm_run(&scenario.network, &profiles, config).map_err(|e| Failure::Invalid(e.to_string()))?;
                compare_curves(&output, "ctm", &ctm.up, &ctm.down, &ctm.spillback_onset, COMPARE_SAMPLES)
            }
            Oracle::Fronttrack => {
                let ft = front_track(&scenario.network, &profiles, &[], horizon)
                    .map_err(|e| Failure::Runtime(e.to_string()))?;
                let onset: Vec<_> = scenario.network.link_ids().map(|id| ft.spillback_onset(id)).collect();
                compare_curves(&output, "fronttrack", &ft.up, &ft.down, &onset, COMPARE_SAMPLES)
            }
        };
        let path = args.out.join(format!("oracle_{}.json", report.oracle));
        let body = serde_json::to_string_pretty(&report).expect("report serialises");
        std::fs::write(&path, body).map_err(|e| Failure::Runtime(format!("cannot write `{}`: {e}", path.display())))?;
        println!("{} max |dN| = {:.6}", report.oracle, report.max_abs_error());
    }

    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}
