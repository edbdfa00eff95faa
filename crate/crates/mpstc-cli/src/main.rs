//! `mpstc`: command-line front-end for the session-type toolkit.
//!
//! Exit codes: 0 when the command succeeds or its answer is "true", 1 when
//! the answer is "false" (not a subtype, ill-typed, stuck, not bisimilar),
//! 2 on usage, I/O, or parse errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mpstc_core::{DEFAULT_FUEL, DEFAULT_MAX_STEPS};

#[derive(Parser, Debug)]
#[command(name = "mpstc", version)]
#[command(about = "Asynchronous multiparty session types: subtyping, projection, typing, simulation and denotation")]
struct Cli {
    /// Emit a single JSON object instead of text.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the commands that observe computation trees.
#[derive(clap::Args, Debug, Clone)]
struct ProbeArgs {
    /// Number of visible steps observed.
    #[arg(long, default_value_t = mpstc_core::DEFAULT_DEPTH)]
    depth: usize,

    /// Integer payloads tried at integer receives (comma-separated).
    #[arg(long, default_value = "-1,0,1,2", allow_hyphen_values = true)]
    int_probes: String,

    /// Fuel for reduct searches.
    #[arg(long, default_value_t = DEFAULT_FUEL)]
    fuel: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Type-check every participant of a session file.
    Check {
        /// Session file.
        file: PathBuf,
        /// Fuel for reduct searches.
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: usize,
    },
    /// Decide (up to fuel) whether T is an asynchronous subtype of U.
    Subtype {
        /// Candidate subtype.
        sub: String,
        /// Candidate supertype.
        sup: String,
        /// Fuel for reduct searches.
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: usize,
        /// Bound on the number of explored pairs.
        #[arg(long, default_value_t = mpstc_core::DEFAULT_MAX_PAIRS)]
        max_pairs: usize,
        /// Also run the brute-force oracle (recursion-free types only).
        #[arg(long)]
        oracle: bool,
        /// Print the pre-simulation or the failing clause.
        #[arg(long)]
        explain: bool,
    },
    /// Project a global type onto a role.
    Project {
        /// Session file.
        file: PathBuf,
        /// Role to project onto.
        #[arg(long)]
        role: String,
        /// Name of the global type (defaults to the only one, or the one the
        /// role is declared against).
        #[arg(long)]
        global: Option<String>,
    },
    /// Simulate a session.
    Run {
        /// Session file.
        file: PathBuf,
        /// Scheduling policy.
        #[arg(long, value_enum, default_value_t = SchedulerArg::Roundrobin)]
        scheduler: SchedulerArg,
        /// Seed of the random scheduler.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Step bound.
        #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
        max_steps: usize,
        /// Write the trace as JSON lines to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Print the truncated denotation of a participant at its declared type.
    Denote {
        /// Session file.
        file: PathBuf,
        /// Participant to interpret.
        #[arg(long)]
        role: String,
        #[command(flatten)]
        probes: ProbeArgs,
    },
    /// Bounded typed bisimilarity of two participants at a common type.
    Bisim {
        /// First session file.
        file_a: PathBuf,
        /// Participant of the first file.
        role_a: String,
        /// Second session file.
        file_b: PathBuf,
        /// Participant of the second file.
        role_b: String,
        /// The common session type.
        #[arg(long)]
        at: String,
        #[command(flatten)]
        probes: ProbeArgs,
    },
    /// Compare denotational equality with bisimilarity at a common type.
    Equiv {
        /// First session file.
        file_a: PathBuf,
        /// Participant of the first file.
        role_a: String,
        /// Second session file.
        file_b: PathBuf,
        /// Participant of the second file.
        role_b: String,
        /// The common session type.
        #[arg(long)]
        at: String,
        #[command(flatten)]
        probes: ProbeArgs,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum SchedulerArg {
    Roundrobin,
    Random,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check { file, fuel } => commands::check(&file, fuel),
        Command::Subtype { sub, sup, fuel, max_pairs, oracle, explain } => commands::subtype(&sub, &sup, fuel, max_pairs, oracle, explain),
        Command::Project { file, role, global } => commands::project_file(&file, &role, global.as_deref()),
        Command::Run { file, scheduler, seed, max_steps, trace } => {
            let scheduler = match scheduler {
                SchedulerArg::Roundrobin => mpstc_core::Scheduler::RoundRobin,
                SchedulerArg::Random => mpstc_core::Scheduler::Random(seed),
            };
            commands::run(&file, scheduler, max_steps, trace.as_deref())
        }
        Command::Denote { file, role, probes } => {
            commands::probe_config(&probes.int_probes, probes.depth).and_then(|p| commands::denote(&file, &role, &p, probes.fuel))
        }
        Command::Bisim { file_a, role_a, file_b, role_b, at, probes } => commands::probe_config(&probes.int_probes, probes.depth)
            .and_then(|p| commands::bisim(&file_a, &role_a, &file_b, &role_b, &at, &p, probes.fuel)),
        Command::Equiv { file_a, role_a, file_b, role_b, at, probes } => commands::probe_config(&probes.int_probes, probes.depth)
            .and_then(|p| commands::equiv(&file_a, &role_a, &file_b, &role_b, &at, &p, probes.fuel)),
    };
    match result {
        Ok(report) => {
            if cli.json {
                println!("{}", report.json);
            } else {
                print!("{}", report.text);
            }
            ExitCode::from(if report.ok { 0 } else { 1 })
        }
        Err(e) => {
            if cli.json {
                println!("{}", serde_json::json!({ "error": e.to_string() }));
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(2)
        }
    }
}
