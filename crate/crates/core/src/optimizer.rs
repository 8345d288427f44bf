//! The main loop.
//!
//! ```text
//! LHS(n0) -> evaluate all -> archive
//! repeat until budget:
//!     x_best  <- hypercube roulette over the archive
//!     fit f1_hat, f2_hat on all successful evaluations
//!     N candidates around x_best, clipped to the unit cube
//!     x_next  <- hypercube roulette over the predicted front
//!     evaluate x_next, update data and archive, adapt gamma
//! ```
//!
//! A single ChaCha8 stream drives every random decision. Its state is
//! checkpointed in [`RunResult`] after each recorded evaluation, which is what
//! makes [`resume`] replay-exact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::evaluator::{EvalError, Evaluator, FailureKind};
use crate::pareto::{ObjectivePair, ParetoArchive, DEFAULT_DIVISIONS};
use crate::proposal::{self, SrsState};
use crate::sampling::{default_initial_size, lhs};
use crate::space::SearchSpace;
use crate::surrogate::{Dataset, RbfModel, SurrogateError};

pub const DEFAULT_BUDGET: usize = 100;

/// User-facing run settings. `None` fields take dimension-dependent defaults
/// when resolved against a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Total true evaluations, initial design included.
    pub budget: usize,
    /// Initial design size; default `2(m + 1)` capped at `budget / 2`.
    pub n0: Option<usize>,
    /// Candidates per iteration; default `100 m`.
    pub candidates: Option<usize>,
    pub divisions: usize,
    pub seed: u64,
    pub gamma_init: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub success_threshold: u32,
    pub failure_threshold: u32,
    /// Per-coordinate perturbation probability; default `min(1, 20 / m)`.
    pub perturb_prob: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            n0: None,
            candidates: None,
            divisions: DEFAULT_DIVISIONS,
            seed: 0,
            gamma_init: proposal::DEFAULT_GAMMA,
            gamma_min: proposal::DEFAULT_GAMMA_MIN,
            gamma_max: proposal::DEFAULT_GAMMA_MAX,
            success_threshold: proposal::DEFAULT_SUCCESS_THRESHOLD,
            failure_threshold: proposal::DEFAULT_FAILURE_THRESHOLD,
            perturb_prob: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid run configuration: {0}")]
pub struct ConfigError(pub String);

/// A [`RunConfig`] with every default filled in for a given dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub budget: usize,
    pub n0: usize,
    pub candidates: usize,
    pub divisions: usize,
    pub seed: u64,
    pub gamma_init: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub success_threshold: u32,
    pub failure_threshold: u32,
    pub perturb_prob: f64,
}

impl ResolvedConfig {
    fn same_run_as(&self, other: &ResolvedConfig) -> bool {
        let mut a = self.clone();
        a.budget = other.budget;
        a == *other
    }
}

impl RunConfig {
    pub fn resolve(&self, dims: usize) -> Result<ResolvedConfig, ConfigError> {
        let err = |s: String| Err(ConfigError(s));
        if dims == 0 {
            return err("search space has no dimensions".into());
        }
        let n0 = self
            .n0
            .unwrap_or_else(|| default_initial_size(dims, self.budget));
        if n0 == 0 {
            return err("n0 must be positive".into());
        }
        if n0 >= self.budget {
            return err(format!("n0 ({n0}) must be smaller than budget ({})", self.budget));
        }
        let candidates = self
            .candidates
            .unwrap_or_else(|| proposal::default_candidates(dims));
        if candidates == 0 {
            return err("candidates must be positive".into());
        }
        if self.divisions == 0 {
            return err("divisions must be positive".into());
        }
        let (lo, init, hi) = (self.gamma_min, self.gamma_init, self.gamma_max);
        if !(lo > 0.0 && lo <= init && init <= hi && hi.is_finite()) {
            return err(format!(
                "need 0 < gamma_min <= gamma_init <= gamma_max, got {lo}, {init}, {hi}"
            ));
        }
        if self.success_threshold == 0 || self.failure_threshold == 0 {
            return err("gamma thresholds must be positive".into());
        }
        let perturb_prob = self
            .perturb_prob
            .unwrap_or_else(|| proposal::default_perturb_prob(dims));
        if !(perturb_prob > 0.0 && perturb_prob <= 1.0) {
            return err(format!("perturb_prob must lie in (0, 1], got {perturb_prob}"));
        }
        Ok(ResolvedConfig {
            budget: self.budget,
            n0,
            candidates,
            divisions: self.divisions,
            seed: self.seed,
            gamma_init: init,
            gamma_min: lo,
            gamma_max: hi,
            success_threshold: self.success_threshold,
            failure_threshold: self.failure_threshold,
            perturb_prob,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Initial,
    Loop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Success(ObjectivePair),
    Failure { kind: FailureKind, message: String },
}

impl Outcome {
    pub fn objectives(&self) -> Option<ObjectivePair> {
        match self {
            Outcome::Success(y) => Some(*y),
            Outcome::Failure { .. } => None,
        }
    }
}

/// One true evaluation and the loop state around it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub index: usize,
    pub phase: Phase,
    /// Search point in the unit cube (relaxed, before rounding).
    pub unit: Vec<f64>,
    /// Values actually sent to the evaluator.
    pub native: Vec<f64>,
    pub outcome: Outcome,
    /// Leader the candidates were generated around (loop phase only).
    pub leader: Option<Vec<f64>>,
    /// Step scale used to generate this point.
    pub gamma: f64,
    /// Whether the point entered the archive.
    pub improved: bool,
    /// Archive size after processing this evaluation.
    pub archive_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub config: ResolvedConfig,
    pub param_names: Vec<String>,
    pub initial_design: Vec<Vec<f64>>,
    pub history: Vec<Evaluation>,
    pub archive: ParetoArchive,
    pub srs: SrsState,
    /// Generator state after the last recorded evaluation.
    pub rng: ChaCha8Rng,
}

impl RunResult {
    pub fn is_complete(&self) -> bool {
        self.history.len() >= self.config.budget
    }

    pub fn successes(&self) -> impl Iterator<Item = (&Evaluation, ObjectivePair)> {
        self.history
            .iter()
            .filter_map(|e| e.outcome.objectives().map(|y| (e, y)))
    }

    pub fn failures(&self) -> usize {
        self.history.len() - self.successes().count()
    }

    /// One trace record per evaluation, in order.
    pub fn trace(&self) -> Vec<TraceRecord> {
        self.history
            .iter()
            .map(|e| TraceRecord::from_evaluation(e, &self.param_names))
            .collect()
    }
}

/// Flat, serializable view of an [`Evaluation`]; one JSON line per record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub index: usize,
    pub phase: Phase,
    /// `ok` or a failure class.
    pub status: String,
    pub params: Map<String, Value>,
    pub f1: Option<f64>,
    pub f2: Option<f64>,
    pub gamma: f64,
    pub archive_size: usize,
    pub improved: bool,
    pub unit: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leader: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TraceRecord {
    pub fn from_evaluation(e: &Evaluation, names: &[String]) -> Self {
        let params = names
            .iter()
            .zip(&e.native)
            .map(|(n, v)| (n.clone(), Value::from(*v)))
            .collect();
        let (status, f1, f2, error) = match &e.outcome {
            Outcome::Success(y) => ("ok".to_string(), Some(y.f1), Some(y.f2), None),
            Outcome::Failure { kind, message } => {
                (kind.to_string(), None, None, Some(message.clone()))
            }
        };
        Self {
            index: e.index,
            phase: e.phase,
            status,
            params,
            f1,
            f2,
            gamma: e.gamma,
            archive_size: e.archive_size,
            improved: e.improved,
            unit: e.unit.clone(),
            leader: e.leader.clone(),
            error,
        }
    }

    pub fn objectives(&self) -> Option<ObjectivePair> {
        match (self.status.as_str(), self.f1, self.f2) {
            ("ok", Some(f1), Some(f2)) => Some(ObjectivePair::new(f1, f2)),
            _ => None,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trace records always serialize")
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot resume: {0}")]
    Inconsistent(String),
    #[error("evaluation {index} aborted the run: {message}")]
    Evaluator {
        index: usize,
        message: String,
        partial: Box<RunResult>,
    },
    #[error("no successful evaluation among the {evaluated} so far; cannot select a leader")]
    NoSuccessfulEvaluation {
        evaluated: usize,
        partial: Box<RunResult>,
    },
    #[error("surrogate for f{objective} could not be fitted at evaluation {index}: {source}")]
    Surrogate {
        objective: u8,
        index: usize,
        source: SurrogateError,
        partial: Box<RunResult>,
    },
}

impl RunError {
    /// History recorded before the abort, if the run got that far.
    pub fn partial(&self) -> Option<&RunResult> {
        match self {
            RunError::Config(_) | RunError::Inconsistent(_) => None,
            RunError::Evaluator { partial, .. }
            | RunError::NoSuccessfulEvaluation { partial, .. }
            | RunError::Surrogate { partial, .. } => Some(partial),
        }
    }
}

/// Runs the optimizer to completion.
pub fn run<E: Evaluator + ?Sized>(
    space: &SearchSpace,
    evaluator: &mut E,
    config: &RunConfig,
) -> Result<RunResult, RunError> {
    run_observed(space, evaluator, config, |_| {})
}

/// [`run`], calling `observe` after each recorded evaluation.
pub fn run_observed<E, F>(
    space: &SearchSpace,
    evaluator: &mut E,
    config: &RunConfig,
    observe: F,
) -> Result<RunResult, RunError>
where
    E: Evaluator + ?Sized,
    F: FnMut(&Evaluation),
{
    let resolved = config.resolve(space.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(resolved.seed);
    let design = lhs(resolved.n0, space.dim(), &mut rng)
        .expect("resolved sizes are positive")
        .into_rows();
    let srs = SrsState {
        gamma: resolved.gamma_init,
        gamma_min: resolved.gamma_min,
        gamma_max: resolved.gamma_max,
        success_threshold: resolved.success_threshold,
        failure_threshold: resolved.failure_threshold,
        consec_success: 0,
        consec_fail: 0,
        candidates: resolved.candidates,
        perturb_prob: resolved.perturb_prob,
    };
    let state = RunResult {
        config: resolved,
        param_names: space.names(),
        initial_design: design,
        history: Vec::new(),
        archive: ParetoArchive::new(),
        srs,
        rng,
    };
    drive(state, space, evaluator, observe)
}

/// Continues a partial run up to `config.budget`. Everything but the budget
/// must match the recorded run. A complete run comes back unchanged.
pub fn resume<E: Evaluator + ?Sized>(
    partial: RunResult,
    space: &SearchSpace,
    evaluator: &mut E,
    config: &RunConfig,
) -> Result<RunResult, RunError> {
    resume_observed(partial, space, evaluator, config, |_| {})
}

pub fn resume_observed<E, F>(
    mut partial: RunResult,
    space: &SearchSpace,
    evaluator: &mut E,
    config: &RunConfig,
    observe: F,
) -> Result<RunResult, RunError>
where
    E: Evaluator + ?Sized,
    F: FnMut(&Evaluation),
{
    if partial.param_names != space.names() {
        return Err(RunError::Inconsistent(
            "parameter names differ from the recorded run".into(),
        ));
    }
    if partial.history.is_empty() {
        return Err(RunError::Inconsistent("recorded history is empty".into()));
    }
    let resolved = config.resolve(space.dim())?;
    if !partial.config.same_run_as(&resolved) {
        return Err(RunError::Inconsistent(
            "run configuration differs from the recorded run (only budget may change)".into(),
        ));
    }
    if resolved.budget <= partial.history.len() {
        return Ok(partial);
    }
    partial.config.budget = resolved.budget;
    drive(partial, space, evaluator, observe)
}

fn drive<E, F>(
    mut state: RunResult,
    space: &SearchSpace,
    evaluator: &mut E,
    mut observe: F,
) -> Result<RunResult, RunError>
where
    E: Evaluator + ?Sized,
    F: FnMut(&Evaluation),
{
    let dims = space.dim();
    let mut data_f1 = Dataset::new(dims);
    let mut data_f2 = Dataset::new(dims);
    for e in &state.history {
        if let Some(y) = e.outcome.objectives() {
            data_f1.push(e.unit.clone(), y.f1).expect("recorded data is finite");
            data_f2.push(e.unit.clone(), y.f2).expect("recorded data is finite");
        }
    }
    let mut rng = state.rng.clone();

    while state.history.len() < state.config.budget {
        let index = state.history.len();
        let gamma = state.srs.gamma;
        let (phase, unit, leader) = if index < state.config.n0 {
            (Phase::Initial, state.initial_design[index].clone(), None)
        } else {
            if state.archive.is_empty() {
                return Err(RunError::NoSuccessfulEvaluation {
                    evaluated: index,
                    partial: Box::new(state),
                });
            }
            let grid = state.archive.build_grid(state.config.divisions);
            let leader = state
                .archive
                .select_leader(&grid, &mut rng)
                .expect("archive is nonempty")
                .point
                .clone();
            let candidates = state.srs.generate_candidates(&leader, &mut rng);
            let chosen = match (RbfModel::fit(&data_f1), RbfModel::fit(&data_f2)) {
                (Ok(model_f1), Ok(model_f2)) => match proposal::select_next(
                    &candidates,
                    &model_f1,
                    &model_f2,
                    state.config.divisions,
                    &mut rng,
                ) {
                    Ok(k) => k.expect("at least one candidate"),
                    Err(source) => return Err(surrogate_abort(state, 1, index, source)),
                },
                // too few successful points to pin down the linear tail
                (Err(SurrogateError::Degenerate { .. }), _)
                | (_, Err(SurrogateError::Degenerate { .. })) => {
                    rng.random_range(0..candidates.len())
                }
                (Err(source), _) => return Err(surrogate_abort(state, 1, index, source)),
                (_, Err(source)) => return Err(surrogate_abort(state, 2, index, source)),
            };
            (Phase::Loop, candidates[chosen].clone(), Some(leader))
        };

        let native = space
            .denormalize(&unit)
            .expect("search points stay in the unit cube");
        let outcome = match evaluator.evaluate(&native) {
            Ok(y) => Outcome::Success(y),
            Err(EvalError::Failed { kind, message }) => Outcome::Failure { kind, message },
            Err(EvalError::Fatal(message)) => {
                return Err(RunError::Evaluator {
                    index,
                    message,
                    partial: Box::new(state),
                })
            }
        };

        let improved = match outcome.objectives() {
            Some(y) if y.is_finite() => {
                data_f1.push(unit.clone(), y.f1).expect("finite");
                data_f2.push(unit.clone(), y.f2).expect("finite");
                state.archive.insert(unit.clone(), y, index)
            }
            _ => false,
        };
        if phase == Phase::Loop {
            state.srs.adapt(improved);
        }

        let record = Evaluation {
            index,
            phase,
            unit,
            native,
            outcome,
            leader,
            gamma,
            improved,
            archive_size: state.archive.len(),
        };
        observe(&record);
        state.history.push(record);
        state.rng = rng.clone();
    }
    Ok(state)
}

fn surrogate_abort(state: RunResult, objective: u8, index: usize, source: SurrogateError) -> RunError {
    RunError::Surrogate {
        objective,
        index,
        source,
        partial: Box::new(state),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::zdt1;
    use crate::space::{Algorithm, SearchSpace};

    fn zdt(x: &[f64]) -> Result<ObjectivePair, EvalError> {
        Ok(zdt1(x).unwrap())
    }

    #[test]
    fn resolve_defaults() {
        let c = RunConfig::default().resolve(5).unwrap();
        assert_eq!(c.budget, 100);
        assert_eq!(c.n0, 12);
        assert_eq!(c.candidates, 500);
        assert_eq!(c.divisions, 10);
        assert_eq!(c.perturb_prob, 1.0);
        assert_eq!(RunConfig::default().resolve(40).unwrap().perturb_prob, 0.5);
    }

    #[test]
    fn sparse_successes_fall_back_to_a_random_candidate() {
        let space = SearchSpace::unit_box(3, 0.0, 1.0).unwrap();
        let mut calls = 0;
        // only every sixth call succeeds, so the surrogates stay underdetermined for a while
        let mut sparse = |x: &[f64]| {
            calls += 1;
            if calls % 6 == 1 {
                zdt(x)
            } else {
                Err(EvalError::Failed {
                    kind: FailureKind::Malformed,
                    message: "no objectives".into(),
                })
            }
        };
        let cfg = RunConfig {
            budget: 40,
            n0: Some(6),
            seed: 8,
            ..Default::default()
        };
        let result = run(&space, &mut sparse, &cfg).unwrap();
        assert_eq!(result.history.len(), 40);
        assert_eq!(result.successes().count(), 7);
    }

    #[test]
    fn resolve_rejects_bad_settings() {
        let bad = |c: RunConfig| c.resolve(3).is_err();
        assert!(bad(RunConfig { n0: Some(100), ..Default::default() }));
        assert!(bad(RunConfig { n0: Some(0), ..Default::default() }));
        assert!(bad(RunConfig { divisions: 0, ..Default::default() }));
        assert!(bad(RunConfig { candidates: Some(0), ..Default::default() }));
        assert!(bad(RunConfig { gamma_init: 0.5, ..Default::default() }));
        assert!(bad(RunConfig { perturb_prob: Some(0.0), ..Default::default() }));
        assert!(bad(RunConfig { success_threshold: 0, ..Default::default() }));
        assert!(RunConfig::default().resolve(0).is_err());
    }

    #[test]
    fn budget_split_and_tags() {
        let space = SearchSpace::unit_box(4, 0.0, 1.0).unwrap();
        let config = RunConfig {
            budget: 40,
            n0: Some(10),
            seed: 3,
            ..Default::default()
        };
        let result = run(&space, &mut zdt, &config).unwrap();
        assert_eq!(result.history.len(), 40);
        assert_eq!(
            result.history.iter().filter(|e| e.phase == Phase::Initial).count(),
            10
        );
        assert!(result.history[10..].iter().all(|e| e.leader.is_some()));
        assert!(result.archive.is_mutually_nondominated());
    }

    #[test]
    fn fatal_evaluator_returns_partial_history() {
        let space = SearchSpace::builtin(Algorithm::Ls);
        let mut calls = 0;
        let mut eval = |_: &[f64]| {
            calls += 1;
            if calls > 5 {
                Err(EvalError::Fatal("gone".into()))
            } else {
                Ok(ObjectivePair::new(calls as f64, -(calls as f64)))
            }
        };
        let err = run(&space, &mut eval, &RunConfig::default()).unwrap_err();
        assert!(matches!(err, RunError::Evaluator { index: 5, .. }));
        assert_eq!(err.partial().unwrap().history.len(), 5);
    }

    #[test]
    fn all_failures_abort_after_initial_design() {
        let space = SearchSpace::builtin(Algorithm::Ls);
        let mut eval = |_: &[f64]| {
            Err(EvalError::Failed {
                kind: FailureKind::Timeout,
                message: "slow".into(),
            })
        };
        let err = run(&space, &mut eval, &RunConfig::default()).unwrap_err();
        match err {
            RunError::NoSuccessfulEvaluation { evaluated, partial } => {
                assert_eq!(evaluated, 10);
                assert_eq!(partial.failures(), 10);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn resume_rejects_changed_settings() {
        let space = SearchSpace::unit_box(3, 0.0, 1.0).unwrap();
        let config = RunConfig {
            budget: 20,
            n0: Some(8),
            seed: 1,
            ..Default::default()
        };
        let partial = run(&space, &mut zdt, &config).unwrap();
        let changed = RunConfig {
            budget: 30,
            seed: 2,
            ..config.clone()
        };
        assert!(matches!(
            resume(partial.clone(), &space, &mut zdt, &changed),
            Err(RunError::Inconsistent(_))
        ));
        let other_space = SearchSpace::unit_box(3, 0.0, 2.0).unwrap();
        let renamed = SearchSpace::new(
            other_space
                .params()
                .iter()
                .map(|p| {
                    let mut p = p.clone();
                    p.name.push('_');
                    p
                })
                .collect(),
        )
        .unwrap();
        assert!(matches!(
            resume(partial.clone(), &renamed, &mut zdt, &config),
            Err(RunError::Inconsistent(_))
        ));
        let same = resume(partial.clone(), &space, &mut zdt, &config).unwrap();
        assert_eq!(same, partial);
    }

    #[test]
    fn trace_record_round_trips() {
        let space = SearchSpace::builtin(Algorithm::Ga);
        let config = RunConfig {
            budget: 15,
            ..Default::default()
        };
        let mut eval = crate::evaluator::BuiltinEvaluator::new(
            crate::evaluator::Builtin::MockDocking,
            space.clone(),
        );
        let result = run(&space, &mut eval, &config).unwrap();
        for rec in result.trace() {
            let line = rec.to_json_line();
            let back: TraceRecord = serde_json::from_str(&line).unwrap();
            assert_eq!(back, rec);
            assert_eq!(
                back.params.keys().cloned().collect::<Vec<_>>(),
                space.names()
            );
        }
    }
}
