//! Typed, bounded hyperparameter spaces and the mapping to the unit cube.
//!
//! The optimizer never sees native values. Every point it manipulates lives in
//! `[0, 1]^m`; [`SearchSpace::denormalize`] is applied only when a point is
//! handed to an evaluator. Integer and binary parameters are relaxed to
//! continuous coordinates during search and rounded on the way out.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("search space must define at least one parameter")]
    Empty,
    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),
    #[error("parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },
    #[error("expected {expected} coordinates, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("parameter `{name}` value {value} outside [{lower}, {upper}]")]
    OutOfBounds {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("unit coordinate {index} = {value} outside [0, 1]")]
    OutsideUnitCube { index: usize, value: f64 },
    #[error("unknown built-in space `{0}` (expected ga, sa, ls or hb)")]
    UnknownBuiltin(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Continuous,
    Integer,
    Binary,
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParamKind::Continuous => "continuous",
            ParamKind::Integer => "integer",
            ParamKind::Binary => "binary",
        };
        f.write_str(s)
    }
}

/// One tunable parameter.
///
/// `default` is stored verbatim and may lie outside `[lower, upper]`; the
/// optimizer never uses it as a search anchor. `None` stands for a default
/// that is not a number (the "Random" seed default of the AutoDock tables).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    #[serde(default)]
    pub lower: f64,
    #[serde(default = "one")]
    pub upper: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl ParamSpec {
    pub fn continuous(name: &str, lower: f64, upper: f64, default: Option<f64>) -> Self {
        Self {
            name: name.to_string(),
            kind: ParamKind::Continuous,
            lower,
            upper,
            default,
        }
    }

    pub fn integer(name: &str, lower: f64, upper: f64, default: Option<f64>) -> Self {
        Self {
            name: name.to_string(),
            kind: ParamKind::Integer,
            lower,
            upper,
            default,
        }
    }

    pub fn binary(name: &str, default: Option<f64>) -> Self {
        Self {
            name: name.to_string(),
            kind: ParamKind::Binary,
            lower: 0.0,
            upper: 1.0,
            default,
        }
    }

    fn validate(&self) -> Result<(), SpaceError> {
        let bad = |reason: &str| SpaceError::InvalidParam {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        if self.name.trim().is_empty() {
            return Err(bad("empty name"));
        }
        if !self.lower.is_finite() || !self.upper.is_finite() {
            return Err(bad("bounds must be finite"));
        }
        match self.kind {
            ParamKind::Binary => {
                if self.lower != 0.0 || self.upper != 1.0 {
                    return Err(bad("binary parameters have bounds [0, 1]"));
                }
            }
            ParamKind::Continuous | ParamKind::Integer => {
                if self.lower >= self.upper {
                    return Err(bad("lower bound must be below upper bound"));
                }
                if self.kind == ParamKind::Integer
                    && (self.lower.fract() != 0.0 || self.upper.fract() != 0.0)
                {
                    return Err(bad("integer parameters need integral bounds"));
                }
            }
        }
        if let Some(d) = self.default {
            if !d.is_finite() {
                return Err(bad("default must be finite"));
            }
        }
        Ok(())
    }

    fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn normalize(&self, value: f64) -> Result<f64, SpaceError> {
        if !(value >= self.lower && value <= self.upper) {
            return Err(SpaceError::OutOfBounds {
                name: self.name.clone(),
                value,
                lower: self.lower,
                upper: self.upper,
            });
        }
        Ok((value - self.lower) / self.width())
    }

    /// Maps a unit coordinate back to native units. The caller guarantees
    /// `u` is in `[0, 1]`.
    pub fn denormalize(&self, u: f64) -> f64 {
        match self.kind {
            ParamKind::Continuous => (self.lower + u * self.width()).clamp(self.lower, self.upper),
            ParamKind::Integer => {
                // round half up
                let v = (self.lower + u * self.width() + 0.5).floor();
                v.clamp(self.lower, self.upper)
            }
            ParamKind::Binary => {
                if u >= 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Built-in AutoDock search spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Lamarckian genetic algorithm.
    Ga,
    /// Simulated annealing.
    Sa,
    /// Pseudo-Solis-Wets local search.
    Ls,
    /// GA combined with LS.
    Hb,
}

impl std::str::FromStr for Algorithm {
    type Err = SpaceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ga" => Ok(Algorithm::Ga),
            "sa" => Ok(Algorithm::Sa),
            "ls" => Ok(Algorithm::Ls),
            "hb" => Ok(Algorithm::Hb),
            _ => Err(SpaceError::UnknownBuiltin(s.to_string())),
        }
    }
}

const SEED_MAX: f64 = 10_000_000.0;

fn seed_param() -> ParamSpec {
    ParamSpec::integer("seed", 0.0, SEED_MAX, None)
}

fn ga_params() -> Vec<ParamSpec> {
    vec![
        seed_param(),
        ParamSpec::integer("ga_pop_size", 50.0, 500.0, Some(150.0)),
        ParamSpec::binary("ga_elitism", Some(1.0)),
        ParamSpec::continuous("ga_mutation_rate", 0.2, 0.99, Some(0.02)),
        ParamSpec::continuous("ga_crossover_rate", 0.2, 0.99, Some(0.80)),
    ]
}

fn sa_params() -> Vec<ParamSpec> {
    vec![
        seed_param(),
        ParamSpec::continuous("tstep", -2.0, 2.0, Some(2.0)),
        ParamSpec::continuous("qstep", -5.0, 5.0, Some(2.0)),
        ParamSpec::continuous("dstep", -5.0, 5.0, Some(2.0)),
        ParamSpec::continuous("rtrf", 0.0001, 0.99, Some(0.80)),
        ParamSpec::continuous("trnrf", 0.0001, 0.99, Some(1.0)),
        ParamSpec::continuous("quarf", 0.0001, 0.99, Some(1.0)),
        ParamSpec::continuous("dihrf", 0.0001, 0.99, Some(1.0)),
        ParamSpec::integer("accs", 100.0, 30000.0, Some(30000.0)),
        ParamSpec::integer("rejs", 100.0, 30000.0, Some(30000.0)),
        ParamSpec::binary("linear_schedule", Some(1.0)),
    ]
}

fn ls_params() -> Vec<ParamSpec> {
    vec![
        seed_param(),
        ParamSpec::integer("sw_max_its", 100.0, 1000.0, Some(300.0)),
        ParamSpec::integer("sw_max_succ", 2.0, 10.0, Some(4.0)),
        ParamSpec::integer("sw_max_fail", 2.0, 10.0, Some(4.0)),
    ]
}

/// Ordered, validated list of parameters. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ParamSpec>", into = "Vec<ParamSpec>")]
pub struct SearchSpace {
    params: Vec<ParamSpec>,
}

impl TryFrom<Vec<ParamSpec>> for SearchSpace {
    type Error = SpaceError;

    fn try_from(params: Vec<ParamSpec>) -> Result<Self, Self::Error> {
        SearchSpace::new(params)
    }
}

impl From<SearchSpace> for Vec<ParamSpec> {
    fn from(space: SearchSpace) -> Self {
        space.params
    }
}

impl SearchSpace {
    pub fn new(params: Vec<ParamSpec>) -> Result<Self, SpaceError> {
        if params.is_empty() {
            return Err(SpaceError::Empty);
        }
        let mut seen = HashSet::new();
        for p in &params {
            p.validate()?;
            if !seen.insert(p.name.as_str()) {
                return Err(SpaceError::DuplicateName(p.name.clone()));
            }
        }
        Ok(Self { params })
    }

    /// The space of one of the tuned AutoDock search methods. `Hb` is the
    /// GA parameters followed by the LS parameters, with the shared `seed`
    /// kept once.
    pub fn builtin(algorithm: Algorithm) -> Self {
        let params = match algorithm {
            Algorithm::Ga => ga_params(),
            Algorithm::Sa => sa_params(),
            Algorithm::Ls => ls_params(),
            Algorithm::Hb => {
                let mut params = ga_params();
                for p in ls_params() {
                    if !params.iter().any(|q| q.name == p.name) {
                        params.push(p);
                    }
                }
                params
            }
        };
        Self { params }
    }

    /// A continuous `[lower, upper]^m` box with generated names `x1..xm`.
    pub fn unit_box(dim: usize, lower: f64, upper: f64) -> Result<Self, SpaceError> {
        Self::new(
            (1..=dim)
                .map(|i| ParamSpec::continuous(&format!("x{i}"), lower, upper, None))
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    fn check_len(&self, len: usize) -> Result<(), SpaceError> {
        if len != self.dim() {
            return Err(SpaceError::LengthMismatch {
                expected: self.dim(),
                actual: len,
            });
        }
        Ok(())
    }

    pub fn normalize(&self, native: &[f64]) -> Result<Vec<f64>, SpaceError> {
        self.check_len(native.len())?;
        self.params
            .iter()
            .zip(native)
            .map(|(p, &v)| p.normalize(v))
            .collect()
    }

    pub fn denormalize(&self, unit: &[f64]) -> Result<Vec<f64>, SpaceError> {
        self.check_len(unit.len())?;
        unit.iter()
            .enumerate()
            .map(|(index, &u)| {
                if !(0.0..=1.0).contains(&u) {
                    return Err(SpaceError::OutsideUnitCube { index, value: u });
                }
                Ok(self.params[index].denormalize(u))
            })
            .collect()
    }
}
