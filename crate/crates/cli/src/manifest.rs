//! Run manifests.
//!
//! A manifest is a TOML file naming the search space, the evaluator, the run
//! settings and where results go:
//!
//! ```toml
//! out = "runs/ls"            # relative to the manifest's directory
//!
//! [space]
//! builtin = "ls"             # ga | sa | ls | hb, or list [[space.params]]
//!
//! [evaluator]
//! kind = "builtin"           # or "external"
//! name = "mock_docking"      # zdt1 | schaffer_n1 | mock_docking
//!
//! [run]
//! budget = 100
//! seed = 7
//! ```
//!
//! An inline space replaces `builtin` with a list of parameters:
//!
//! ```toml
//! [[space.params]]
//! name = "ga_pop_size"
//! kind = "integer"
//! lower = 50
//! upper = 500
//! default = 150
//! ```

use std::path::{Path, PathBuf};

use mosrs::evaluator::Builtin;
use mosrs::optimizer::{ResolvedConfig, RunConfig};
use mosrs::space::{Algorithm, ParamKind, SearchSpace};
use mosrs::EvaluatorSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<Algorithm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<SearchSpace>,
}

impl SpaceDef {
    pub fn resolve(&self) -> Result<SearchSpace, CliError> {
        match (self.builtin, &self.params) {
            (Some(a), None) => Ok(SearchSpace::builtin(a)),
            (None, Some(space)) => Ok(space.clone()),
            _ => Err(CliError::Manifest(
                "[space] needs exactly one of `builtin` or `params`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub space: SpaceDef,
    pub evaluator: EvaluatorSpec,
    #[serde(default)]
    pub run: RunConfig,
}

/// A manifest checked for consistency, with paths made absolute.
#[derive(Debug, Clone)]
pub struct ValidatedRun {
    pub space: SearchSpace,
    pub evaluator: EvaluatorSpec,
    pub config: RunConfig,
    pub resolved: ResolvedConfig,
    pub out: PathBuf,
}

impl RunManifest {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Manifest(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Manifest(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Validates the (space, evaluator, config) triple. Relative paths are
    /// taken relative to `base`.
    pub fn validate(&self, base: &Path) -> Result<ValidatedRun, CliError> {
        let space = self.space.resolve()?;
        self.evaluator.validate().map_err(CliError::Manifest)?;
        check_builtin_domain(&self.evaluator, &space)?;
        let resolved = self
            .run
            .resolve(space.dim())
            .map_err(|e| CliError::Manifest(e.to_string()))?;

        let mut evaluator = self.evaluator.clone();
        if let EvaluatorSpec::External {
            workdir: Some(dir), ..
        } = &mut evaluator
        {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        let out = match &self.out {
            Some(p) if p.is_relative() => base.join(p),
            Some(p) => p.clone(),
            None => base.join("mosrs-out"),
        };
        Ok(ValidatedRun {
            space,
            evaluator,
            config: self.run.clone(),
            resolved,
            out,
        })
    }
}

fn check_builtin_domain(spec: &EvaluatorSpec, space: &SearchSpace) -> Result<(), CliError> {
    let EvaluatorSpec::Builtin { name } = spec else {
        return Ok(());
    };
    let bad = |msg: String| Err(CliError::Manifest(format!("{name}: {msg}")));
    match name {
        Builtin::Zdt1 => {
            if space.dim() < 2 {
                return bad("needs at least two parameters".into());
            }
            for p in space.params() {
                if p.kind != ParamKind::Continuous || p.lower < 0.0 || p.upper > 1.0 {
                    return bad(format!(
                        "parameter `{}` must be continuous within [0, 1]",
                        p.name
                    ));
                }
            }
        }
        Builtin::SchafferN1 => {
            if space.dim() != 1 {
                return bad(format!("needs exactly one parameter, space has {}", space.dim()));
            }
        }
        Builtin::MockDocking => {}
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const LS_MOCK: &str = r#"
        out = "runs/ls"
        [space]
        builtin = "ls"
        [evaluator]
        kind = "builtin"
        name = "mock_docking"
        [run]
        budget = 100
        seed = 7
    "#;

    #[test]
    fn parses_builtin_manifest() {
        let m = RunManifest::from_toml(LS_MOCK).unwrap();
        let v = m.validate(Path::new("/tmp/base")).unwrap();
        assert_eq!(v.space.dim(), 4);
        assert_eq!(v.resolved.budget, 100);
        assert_eq!(v.resolved.seed, 7);
        assert_eq!(v.resolved.n0, 10);
        assert_eq!(v.out, Path::new("/tmp/base/runs/ls"));
    }

    #[test]
    fn parses_inline_space_and_external_evaluator() {
        let text = r#"
            [[space.params]]
            name = "x"
            kind = "continuous"
            lower = -1.5
            upper = 2.5
            [[space.params]]
            name = "flag"
            kind = "binary"
            [evaluator]
            kind = "external"
            command = ["python3", "adapter.py"]
            timeout_secs = 30
            workdir = "work"
        "#;
        let m = RunManifest::from_toml(text).unwrap();
        let v = m.validate(Path::new("/data")).unwrap();
        assert_eq!(v.space.names(), vec!["x", "flag"]);
        match v.evaluator {
            EvaluatorSpec::External {
                timeout_secs,
                workdir,
                ..
            } => {
                assert_eq!(timeout_secs, 30.0);
                assert_eq!(workdir.unwrap(), Path::new("/data/work"));
            }
            _ => panic!("expected external"),
        }
        assert_eq!(v.resolved.budget, 100);
    }

    #[test]
    fn rejects_inconsistent_manifests() {
        let cases = [
            // both space forms
            r#"[space]
               builtin = "ga"
               [[space.params]]
               name = "x"
               kind = "binary"
               [evaluator]
               kind = "builtin"
               name = "mock_docking""#,
            // zdt1 on a docking space
            r#"[space]
               builtin = "ga"
               [evaluator]
               kind = "builtin"
               name = "zdt1""#,
            // n0 not below budget
            r#"[space]
               builtin = "ga"
               [evaluator]
               kind = "builtin"
               name = "mock_docking"
               [run]
               budget = 10
               n0 = 10"#,
            // empty command
            r#"[space]
               builtin = "ga"
               [evaluator]
               kind = "external"
               command = []"#,
            // unknown key
            r#"[space]
               builtin = "ga"
               [evaluator]
               kind = "builtin"
               name = "mock_docking"
               [run]
               budgte = 10"#,
        ];
        for text in cases {
            let result = RunManifest::from_toml(text).and_then(|m| m.validate(Path::new(".")));
            assert!(matches!(result, Err(CliError::Manifest(_))), "{text}");
        }
    }
}
