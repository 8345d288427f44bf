use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mosrs::space::{Algorithm, SearchSpace};
use mosrs_cli::{cmd_front, cmd_run, cmd_sample, CliError, RunManifest, RunOptions};

#[derive(Parser)]
#[command(name = "mosrs", version, about = "Two-objective surrogate-assisted optimizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the optimizer described by a manifest.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory (overrides the manifest's `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `run.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `run.budget`.
        #[arg(long)]
        budget: Option<usize>,
        /// Run K times with seeds seed..seed+K-1 into repeat_<i> subdirectories.
        #[arg(long, value_name = "K")]
        repeats: Option<usize>,
    },
    /// Recompute the Pareto front of a history file.
    Front {
        #[arg(long)]
        history: PathBuf,
        /// Output directory (default: next to the history file).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a Latin hypercube design in native units.
    Sample {
        #[command(flatten)]
        space: SpaceArg,
        #[arg(long)]
        n0: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "design.csv")]
        out: PathBuf,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct SpaceArg {
    /// Built-in space: ga, sa, ls or hb.
    #[arg(long)]
    space: Option<Algorithm>,
    /// Take the space from a run manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            manifest,
            out,
            seed,
            budget,
            repeats,
        } => {
            let reports = cmd_run(&RunOptions {
                manifest,
                out,
                seed,
                budget,
                repeats,
            })?;
            for r in reports {
                let best = |e: &Option<mosrs_cli::SummaryEntry>| {
                    e.as_ref()
                        .map(|e| format!("({}, {})", e.f1, e.f2))
                        .unwrap_or_else(|| "-".into())
                };
                println!(
                    "{}: seed {}, {} evaluations, {} failures, archive {}, best f1 {}, best f2 {}",
                    r.out.display(),
                    r.seed,
                    r.summary.evaluations,
                    r.summary.failures,
                    r.summary.archive_size,
                    best(&r.summary.best_f1),
                    best(&r.summary.best_f2),
                );
            }
        }
        Command::Front { history, out } => {
            let rows = cmd_front(&history, out.as_deref())?;
            println!("{} nondominated points", rows.len());
        }
        Command::Sample {
            space,
            n0,
            seed,
            out,
        } => {
            let space = match (space.space, space.manifest) {
                (Some(a), _) => SearchSpace::builtin(a),
                (None, Some(path)) => RunManifest::load(&path)?.space.resolve()?,
                (None, None) => unreachable!("clap requires one of the two"),
            };
            cmd_sample(&space, n0, seed, &out)?;
            println!("{} rows written to {}", n0, out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("mosrs: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
