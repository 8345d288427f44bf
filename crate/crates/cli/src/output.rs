use mosrs::optimizer::RunResult;
use mosrs::ObjectivePair;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

/// One archive row in native units.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontRow {
    pub eval_index: usize,
    pub params: Vec<f64>,
    pub objectives: ObjectivePair,
}

pub(crate) fn sorted(mut rows: Vec<FrontRow>) -> Vec<FrontRow> {
    rows.sort_by(|a, b| {
        a.objectives
            .f1
            .total_cmp(&b.objectives.f1)
            .then(a.objectives.f2.total_cmp(&b.objectives.f2))
            .then(a.eval_index.cmp(&b.eval_index))
    });
    rows
}

/// `eval_index,<param names...>,f1,f2`, one row per entry, ascending in f1.
pub fn archive_csv(names: &[String], rows: Vec<FrontRow>) -> Result<String, CliError> {
    let err = |e: csv::Error| CliError::Internal(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["eval_index".to_string()];
    header.extend(names.iter().cloned());
    header.extend(["f1".to_string(), "f2".to_string()]);
    w.write_record(&header).map_err(err)?;
    for row in sorted(rows) {
        let mut fields = vec![row.eval_index.to_string()];
        fields.extend(row.params.iter().map(|v| v.to_string()));
        fields.push(row.objectives.f1.to_string());
        fields.push(row.objectives.f2.to_string());
        w.write_record(&fields).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Internal(e.to_string()))
}

/// Whitespace-separated `f1 f2` columns for plotting tools.
pub fn front_dat(rows: Vec<FrontRow>) -> String {
    let mut s = String::from("# f1 f2\n");
    for row in sorted(rows) {
        s.push_str(&format!("{} {}\n", row.objectives.f1, row.objectives.f2));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub eval_index: usize,
    pub params: Map<String, Value>,
    pub f1: f64,
    pub f2: f64,
}

impl SummaryEntry {
    fn new(row: &FrontRow, names: &[String]) -> Self {
        Self {
            eval_index: row.eval_index,
            params: names
                .iter()
                .zip(&row.params)
                .map(|(n, v)| (n.clone(), Value::from(*v)))
                .collect(),
            f1: row.objectives.f1,
            f2: row.objectives.f2,
        }
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// `complete` or `aborted`.
    pub status: String,
    pub seed: u64,
    pub budget: usize,
    pub evaluations: usize,
    pub failures: usize,
    pub archive_size: usize,
    /// Archive entry with the smallest f1 (ties broken by f2).
    pub best_f1: Option<SummaryEntry>,
    /// Archive entry with the smallest f2 (ties broken by f1).
    pub best_f2: Option<SummaryEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: mosrs::optimizer::ResolvedConfig,
}

impl Summary {
    pub(crate) fn new(
        result: &RunResult,
        rows: &[FrontRow],
        names: &[String],
        error: Option<String>,
    ) -> Self {
        let best_f1 = rows.iter().min_by(|a, b| {
            a.objectives
                .f1
                .total_cmp(&b.objectives.f1)
                .then(a.objectives.f2.total_cmp(&b.objectives.f2))
        });
        let best_f2 = rows.iter().min_by(|a, b| {
            a.objectives
                .f2
                .total_cmp(&b.objectives.f2)
                .then(a.objectives.f1.total_cmp(&b.objectives.f1))
        });
        let status = if error.is_none() && result.is_complete() {
            "complete"
        } else {
            "aborted"
        };
        Self {
            status: status.to_string(),
            seed: result.config.seed,
            budget: result.config.budget,
            evaluations: result.history.len(),
            failures: result.failures(),
            archive_size: result.archive.len(),
            best_f1: best_f1.map(|r| SummaryEntry::new(r, names)),
            best_f2: best_f2.map(|r| SummaryEntry::new(r, names)),
            error,
            config: result.config.clone(),
        }
    }
}
