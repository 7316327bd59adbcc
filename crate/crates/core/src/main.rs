use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use asim::harness::{self, ExperimentConfig, LoadError};
use asim::scenario;

const OK: u8 = 0;
const VALIDATION: u8 = 1;
const RUNTIME: u8 = 2;
const DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "asim",
    version,
    about = "Seeded simulator of energy-limited agents that learn where to feed"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to `output.dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replications: Option<u32>,
    },
    /// Re-run an experiment and compare its report with a previous one.
    Replay {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        reference: PathBuf,
    },
    /// Scenario text tools.
    Scenario {
        #[command(subcommand)]
        command: ScenarioCommand,
    },
    /// Check a config file and report every problem.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Compile a scenario file and print its decision graph.
    Compile { file: PathBuf },
}

fn load(path: &std::path::Path) -> Result<ExperimentConfig, u8> {
    harness::load_config(path).map_err(|e| {
        match &e {
            LoadError::Io { .. } => eprintln!("{e}"),
            LoadError::Invalid(errors) => {
                for err in errors {
                    eprintln!("{}:{err}", path.display());
                }
            }
        }
        VALIDATION
    })
}

fn run(cmd: Command) -> Result<(), u8> {
    match cmd {
        Command::Run {
            config,
            out,
            seed,
            replications,
        } => {
            let mut cfg = load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = replications {
                if r == 0 {
                    eprintln!("--replications must be at least 1");
                    return Err(VALIDATION);
                }
                cfg.replications = r;
            }
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            info!(
                "running {} replication(s) of {} ticks, seed {}",
                cfg.replications, cfg.ticks, cfg.seed
            );
            let report = harness::run_experiment(&cfg).map_err(|e| {
                error!("{e}");
                eprintln!("{e}");
                RUNTIME
            })?;
            let files = harness::emit_report(&report, &dir).map_err(|e| {
                eprintln!("{e}");
                RUNTIME
            })?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::Replay { config, reference } => {
            let cfg = load(&config)?;
            let report = harness::run_experiment(&cfg).map_err(|e| {
                eprintln!("{e}");
                RUNTIME
            })?;
            match harness::compare_with_reference(&report, &reference) {
                Ok(None) => {
                    println!("replay matches {}", reference.display());
                    Ok(())
                }
                Ok(Some(d)) => {
                    eprintln!("{}", d);
                    Err(DIVERGED)
                }
                Err(e @ harness::ReplayError::MissingReference(_)) => {
                    eprintln!("{e}");
                    Err(VALIDATION)
                }
                Err(e) => {
                    eprintln!("{e}");
                    Err(RUNTIME)
                }
            }
        }
        Command::Scenario {
            command: ScenarioCommand::Compile { file },
        } => {
            let bytes = std::fs::read(&file).map_err(|e| {
                eprintln!("{}: {e}", file.display());
                VALIDATION
            })?;
            let name = file.display().to_string();
            let text = scenario::decode(&bytes).map_err(|d| {
                d.iter().for_each(|d| eprintln!("{}", d.render(&name)));
                VALIDATION
            })?;
            let ast = scenario::tokenize(text)
                .and_then(|t| scenario::parse(&t))
                .map_err(|d| {
                    d.iter().for_each(|d| eprintln!("{}", d.render(&name)));
                    VALIDATION
                })?;
            for w in &ast.warnings {
                eprintln!("{}", w.render(&name));
            }
            let graph = scenario::compile(&ast).map_err(|d| {
                eprintln!("{}", d.render(&name));
                VALIDATION
            })?;
            print!("{}", scenario::render(&graph));
            Ok(())
        }
        Command::Validate { config } => {
            load(&config)?;
            println!("{}: ok", config.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ASIM_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { VALIDATION } else { OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::from(OK),
        Err(code) => ExitCode::from(code),
    }
}
