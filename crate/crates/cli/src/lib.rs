//! Library side of the `mosrs` command-line tool.
//!
//! The binary is a thin argument parser over [`cmd_run`], [`cmd_front`] and
//! [`cmd_sample`]. Every command reports errors as [`CliError`], whose
//! [`CliError::exit_code`] is what the process exits with.

pub mod manifest;
mod output;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mosrs::optimizer::{run_observed, TraceRecord};
use mosrs::sampling::lhs;
use mosrs::space::SearchSpace;
use mosrs::{pareto_front, RunError};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use manifest::{RunManifest, SpaceDef, ValidatedRun};
pub use output::{archive_csv, front_dat, FrontRow, Summary, SummaryEntry};

pub const HISTORY_FILE: &str = "history.jsonl";
pub const ARCHIVE_FILE: &str = "archive.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const FRONT_FILE: &str = "front.dat";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("evaluator aborted the run: {0}")]
    Evaluator(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Manifest(_) | CliError::Input(_) => 2,
            CliError::Evaluator(_) => 3,
            CliError::Internal(_) | CliError::Io { .. } => 1,
        }
    }

    fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}

/// Options for [`cmd_run`]. The `Option` fields override the manifest.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub manifest: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub repeats: Option<usize>,
}

/// What one run left on disk.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub out: PathBuf,
    pub seed: u64,
    pub summary: Summary,
}

/// Loads, overrides and validates a manifest without running anything.
pub fn prepare(opts: &RunOptions) -> Result<ValidatedRun, CliError> {
    let mut manifest = RunManifest::load(&opts.manifest)?;
    if let Some(seed) = opts.seed {
        manifest.run.seed = seed;
    }
    if let Some(budget) = opts.budget {
        manifest.run.budget = budget;
    }
    let base = opts
        .manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let mut validated = manifest.validate(&base)?;
    if let Some(out) = &opts.out {
        validated.out = out.clone();
    }
    Ok(validated)
}

/// Runs the manifest once, or `repeats` times with seeds `seed + i` into
/// `repeat_<i>` subdirectories. Repeats run in order; the first failing
/// repeat stops the batch.
pub fn cmd_run(opts: &RunOptions) -> Result<Vec<RunReport>, CliError> {
    let validated = prepare(opts)?;
    match opts.repeats {
        None => Ok(vec![run_once(&validated, validated.resolved.seed, &validated.out)?]),
        Some(0) => Err(CliError::Input("--repeats must be at least 1".into())),
        Some(k) => {
            let base_seed = validated.resolved.seed;
            (0..k)
                .map(|i| {
                    let seed = base_seed.checked_add(i as u64).ok_or_else(|| {
                        CliError::Input(format!("seed {base_seed} + {i} overflows"))
                    })?;
                    run_once(&validated, seed, &validated.out.join(format!("repeat_{i}")))
                })
                .collect()
        }
    }
}

fn run_once(v: &ValidatedRun, seed: u64, out: &Path) -> Result<RunReport, CliError> {
    fs::create_dir_all(out).map_err(CliError::io(format!("creating {}", out.display())))?;
    let mut config = v.config.clone();
    config.seed = seed;

    let mut evaluator = v
        .evaluator
        .build(&v.space)
        .map_err(|e| CliError::Evaluator(e.to_string()))?;

    let history_path = out.join(HISTORY_FILE);
    let file = File::create(&history_path)
        .map_err(CliError::io(format!("creating {}", history_path.display())))?;
    let mut history = BufWriter::new(file);
    let names = v.space.names();
    let mut write_error = None;
    let outcome = run_observed(&v.space, &mut *evaluator, &config, |e| {
        if write_error.is_some() {
            return;
        }
        let line = TraceRecord::from_evaluation(e, &names).to_json_line();
        if let Err(err) = writeln!(history, "{line}").and_then(|_| history.flush()) {
            write_error = Some(err);
        }
    });
    if let Some(err) = write_error {
        return Err(CliError::io(format!("writing {}", history_path.display()))(err));
    }
    history
        .flush()
        .map_err(CliError::io(format!("writing {}", history_path.display())))?;

    let (result, failure) = match outcome {
        Ok(result) => (result, None),
        Err(err) => {
            let failure = match &err {
                RunError::Evaluator { .. } | RunError::NoSuccessfulEvaluation { .. } => {
                    CliError::Evaluator(err.to_string())
                }
                RunError::Config(_) | RunError::Inconsistent(_) => {
                    CliError::Manifest(err.to_string())
                }
                RunError::Surrogate { .. } => CliError::Internal(err.to_string()),
            };
            match err.partial() {
                Some(partial) => (partial.clone(), Some(failure)),
                None => return Err(failure),
            }
        }
    };

    let rows: Vec<FrontRow> = result
        .archive
        .entries()
        .iter()
        .map(|a| FrontRow {
            eval_index: a.eval_index,
            params: result.history[a.eval_index].native.clone(),
            objectives: a.objectives,
        })
        .collect();
    write_file(&out.join(ARCHIVE_FILE), &archive_csv(&names, rows.clone())?)?;

    let summary = Summary::new(
        &result,
        &rows,
        &names,
        failure.as_ref().map(|e| e.to_string()),
    );
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    write_file(&out.join(SUMMARY_FILE), &format!("{json}\n"))?;

    match failure {
        Some(err) => Err(err),
        None => Ok(RunReport {
            out: out.to_path_buf(),
            seed,
            summary,
        }),
    }
}

/// Reads a history file back into trace records.
pub fn read_history(path: &Path) -> Result<Vec<TraceRecord>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(CliError::io(format!("reading {}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(n, line)| {
            serde_json::from_str(line)
                .map_err(|e| CliError::Input(format!("{}:{}: {e}", path.display(), n + 1)))
        })
        .collect()
}

/// Recomputes the nondominated set of a history and writes `archive.csv` and
/// `front.dat` into `out` (default: the history's directory).
pub fn cmd_front(history: &Path, out: Option<&Path>) -> Result<Vec<FrontRow>, CliError> {
    let records = read_history(history)?;
    if records.is_empty() {
        return Err(CliError::Input(format!("{} is empty", history.display())));
    }
    let names: Vec<String> = records[0].params.keys().cloned().collect();
    let mut ok = Vec::new();
    for r in &records {
        let Some(y) = r.objectives() else { continue };
        let params = names
            .iter()
            .map(|n| r.params.get(n).and_then(|v| v.as_f64()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| {
                CliError::Input(format!("record {} has missing or non-numeric params", r.index))
            })?;
        ok.push(FrontRow {
            eval_index: r.index,
            params,
            objectives: y,
        });
    }
    let objectives: Vec<_> = ok.iter().map(|r| r.objectives).collect();
    let front = pareto_front(&objectives).ok_or_else(|| {
        CliError::Input(format!("{} has no successful evaluation", history.display()))
    })?;
    let rows: Vec<FrontRow> = front.into_iter().map(|i| ok[i].clone()).collect();

    let dir = match out {
        Some(dir) => dir.to_path_buf(),
        None => history.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    fs::create_dir_all(&dir).map_err(CliError::io(format!("creating {}", dir.display())))?;
    write_file(&dir.join(ARCHIVE_FILE), &archive_csv(&names, rows.clone())?)?;
    write_file(&dir.join(FRONT_FILE), &front_dat(rows.clone()))?;
    Ok(output::sorted(rows))
}

/// Writes an `n0`-point Latin hypercube design in native units as CSV.
pub fn cmd_sample(
    space: &SearchSpace,
    n0: usize,
    seed: u64,
    out: &Path,
) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let design = lhs(n0, space.dim(), &mut rng).map_err(|e| CliError::Input(e.to_string()))?;
    let rows = design
        .rows()
        .iter()
        .map(|u| space.denormalize(u))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Internal(e.to_string());
    w.write_record(space.names()).map_err(io)?;
    for row in &rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(CliError::io(format!("creating {}", dir.display())))?;
    }
    fs::write(out, bytes).map_err(CliError::io(format!("writing {}", out.display())))?;
    Ok(rows)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(CliError::io(format!("writing {}", path.display())))
}
