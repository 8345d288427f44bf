//! Two-objective surrogate-assisted black-box optimization.
//!
//! The optimizer pairs a stochastic response surface search with a Pareto
//! archive. Each objective gets its own cubic RBF surrogate, candidates are
//! generated around a leader drawn from the archive by hypercube roulette,
//! and the surrogates pick exactly one candidate per iteration for a true
//! evaluation. It is built for expensive evaluators with small budgets, such
//! as tuning the search settings of a docking engine against binding energy
//! and RMSD.
//!
//! ```no_run
//! use mosrs::evaluator::{Builtin, BuiltinEvaluator};
//! use mosrs::optimizer::{run, RunConfig};
//! use mosrs::space::{Algorithm, SearchSpace};
//!
//! let space = SearchSpace::builtin(Algorithm::Ga);
//! let mut eval = BuiltinEvaluator::new(Builtin::MockDocking, space.clone());
//! let result = run(&space, &mut eval, &RunConfig { seed: 7, ..Default::default() }).unwrap();
//! println!("{} nondominated configurations", result.archive.len());
//! ```

pub mod evaluator;
pub mod optimizer;
pub mod pareto;
pub mod proposal;
pub mod sampling;
pub mod space;
pub mod surrogate;

pub use evaluator::{EvalError, Evaluator, EvaluatorSpec, FailureKind};
pub use optimizer::{resume, run, RunConfig, RunError, RunResult};
pub use pareto::{dominates, pareto_front, ObjectivePair, ParetoArchive};
pub use space::{Algorithm, ParamKind, ParamSpec, SearchSpace};
