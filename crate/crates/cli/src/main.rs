use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dads_core::harness::{self, format_report};
use dads_core::scenario::{bundled, bundled_names};
use dads_core::{DadsError, Parallelism};

const EXIT_VERDICT: u8 = 1;
const EXIT_INPUT: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "dads",
    version,
    about = "Distributed approximate dual subgradient runs and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write trace, summary, verdicts and plot data.
    Run {
        /// Bundled scenario name or path to a scenario file.
        scenario: String,
        #[arg(long)]
        rounds: Option<usize>,
        /// Gossip seed; ignored by fixed networks.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to the number of agents.
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, short, env = "DADS_OUTPUT_DIR", default_value = "dads-out")]
        output: PathBuf,
    },
    /// Re-evaluate verdicts on the last rows of a recorded trace.
    Verify {
        scenario: String,
        trace: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        /// Where to write verify.json; defaults to the trace's directory.
        #[arg(long, short, env = "DADS_OUTPUT_DIR")]
        output: Option<PathBuf>,
    },
    /// Check a scenario's standing assumptions without running it.
    Validate { scenario: String },
    /// Print the bundled scenario names.
    ListScenarios,
}

fn parallelism(threads: Option<usize>, n_agents: usize) -> Parallelism {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    Parallelism::from_threads(threads.unwrap_or(n_agents.min(available)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn dispatch(command: Command) -> Result<u8, DadsError> {
    match command {
        Command::Run {
            scenario,
            rounds,
            seed,
            threads,
            output,
        } => {
            let loaded = harness::prepare(&scenario, rounds, seed)?;
            let threads = threads.or(loaded.scenario.engine.threads);
            let out = harness::execute(&loaded, parallelism(threads, loaded.spec.n_agents()))?;
            let files = harness::write_outputs(&output, &loaded, &out)?;
            println!(
                "{}: {} rounds, objective {}",
                loaded.scenario.name,
                out.summary.rounds_run,
                out.summary.objective.map_or("n/a".into(), |v| format!("{v:.6}"))
            );
            print!("{}", format_report(&out.report));
            println!("wrote {}", files.trace.parent().unwrap_or(Path::new(".")).display());
            Ok(if out.report.all_asserted_pass() {
                0
            } else {
                EXIT_VERDICT
            })
        }
        Command::Verify {
            scenario,
            trace,
            seed,
            threads,
            output,
        } => {
            let loaded = harness::prepare(&scenario, None, seed)?;
            let text = std::fs::read_to_string(&trace)?;
            let report = harness::verify_trace(&loaded, &text, parallelism(threads, loaded.spec.n_agents()))?;
            let dir = output.unwrap_or_else(|| trace.parent().map(Path::to_path_buf).unwrap_or_default());
            std::fs::create_dir_all(&dir)?;
            harness::write_verdicts(&dir.join("verify.json"), &report)?;
            print!("{}", format_report(&report));
            Ok(if report.all_asserted_pass() { 0 } else { EXIT_VERDICT })
        }
        Command::Validate { scenario } => {
            let loaded = harness::prepare(&scenario, None, None)?;
            println!(
                "{}: ok ({} agents, dimension {}, {} constraints, {} weight matrices)",
                loaded.scenario.name,
                loaded.spec.n_agents(),
                loaded.spec.dim(),
                loaded.spec.constraint_dim(),
                loaded.schedule.matrices().len()
            );
            Ok(0)
        }
        Command::ListScenarios => {
            for name in bundled_names() {
                let s = bundled(name)?;
                println!("{name:<18} {}", s.description);
            }
            Ok(0)
        }
    }
}
