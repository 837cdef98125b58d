use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};
use l0lms::sim::ExperimentId;
use l0lms_cli::{run, Outcome, RunRequest};

#[derive(Parser)]
#[command(
    name = "l0lms",
    version,
    about = "Sparse system identification with l0-norm constrained LMS"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a reference experiment or a configuration file.
    #[command(group(ArgGroup::new("source").required(true).args(["preset", "config"])))]
    Run {
        /// Reference experiment.
        #[arg(long, value_parser = parse_preset)]
        preset: Option<ExperimentId>,
        /// Experiment description file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the number of Monte-Carlo runs.
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write linear MSD instead of dB.
        #[arg(long)]
        linear: bool,
        /// Also write the true systems as CSV.
        #[arg(long)]
        systems: bool,
    },
}

fn parse_preset(s: &str) -> Result<ExperimentId, String> {
    s.parse().map_err(|e: l0lms::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run {
        preset,
        config,
        out,
        runs,
        seed,
        linear,
        systems,
    } = cli.command;

    let report = RunRequest::new(preset, config, out).and_then(|mut req| {
        req.runs_override = runs;
        req.seed = seed;
        req.linear = linear;
        req.dump_systems = systems;
        run(&req)
    });
    let report = match report {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    println!("{} (steady-state window {})", report.name, report.window);
    for r in &report.results {
        match &r.outcome {
            Outcome::Done { stats, .. } => {
                for s in stats {
                    let reach = s
                        .reach_iteration
                        .map_or_else(|| "not reached".to_string(), |n| n.to_string());
                    println!(
                        "  {:<16} from {:>6}: level {:>9.3} dB, steady at {reach}",
                        r.label, s.segment_start, s.level_db
                    );
                }
            }
            Outcome::Failed(msg) => println!("  {:<16} FAILED: {msg}", r.label),
        }
    }
    if report.failures() > 0 {
        eprintln!("error: {} configuration(s) failed", report.failures());
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
