//! Optional `key = value` run configuration.
//!
//! Each non-blank line sets one field by its dotted path, for example
//! `training.batch = 64` or `architecture.transformer.heads = 2`. Text after
//! `#` is a comment. Values are JSON scalars; bare words are strings.
//! Unknown keys are rejected with their line number.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::architectures::ArchitectureConfig;
use crate::bench::SyntheticSpec;
use crate::error::{Error, Result};
use crate::training::TrainConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub architecture: ArchitectureConfig,
    pub training: TrainConfig,
    pub synthetic: SyntheticSpec,
}

/// One `path = value` assignment and the line it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub line: usize,
    pub path: String,
    pub value: Value,
}

fn scalar(text: &str) -> Value {
    match serde_json::from_str::<Value>(text) {
        Ok(v @ (Value::Number(_) | Value::Bool(_) | Value::String(_) | Value::Null)) => v,
        _ => Value::String(text.to_owned()),
    }
}

pub fn parse_assignments(text: &str, origin: &Path) -> Result<Vec<Assignment>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(parse_err(format!("malformed key `{key}`")));
        }
        out.push(Assignment {
            line: i + 1,
            path: key.to_owned(),
            value: scalar(value.trim()),
        });
    }
    Ok(out)
}

/// Applies assignments on top of `base`; later lines win.
pub fn apply_assignments<S>(base: &S, assignments: &[Assignment], origin: &Path) -> Result<S>
where
    S: Serialize + DeserializeOwned,
{
    let mut tree = serde_json::to_value(base).map_err(|e| Error::Config(e.to_string()))?;
    for a in assignments {
        let err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: a.line,
            message,
        };
        let mut node = &mut tree;
        for part in a.path.split('.') {
            node = node
                .as_object_mut()
                .and_then(|o| o.get_mut(part))
                .ok_or_else(|| err(format!("unknown key `{}`", a.path)))?;
        }
        if node.is_object() {
            return Err(err(format!("`{}` is a section, not a value", a.path)));
        }
        *node = a.value.clone();
    }
    serde_json::from_value(tree).map_err(|e| Error::Config(format!("{}: {e}", origin.display())))
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        apply_assignments(
            &RunConfig::default(),
            &parse_assignments(text, origin)?,
            origin,
        )
    }

    pub fn load(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::parse(&text, &path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::parse(text, Path::new("run.conf"))
    }

    #[test]
    fn empty_file_is_default() {
        assert_eq!(parse("# nothing\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn nested_fields_are_set() {
        let c = parse(
            "training.batch = 64\ntraining.adam.lr = 1e-3 # faster\n\
             architecture.transformer.heads = 4\ntraining.shuffle = false\n",
        )
        .unwrap();
        assert_eq!(c.training.batch, 64);
        assert_eq!(c.training.adam.lr, 1e-3);
        assert_eq!(c.architecture.transformer.heads, 4);
        assert!(!c.training.shuffle);
    }

    #[test]
    fn unknown_key_names_its_line() {
        match parse("training.batch = 8\ntraining.bach = 8\n") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("training.bach"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_lines_and_types_are_rejected() {
        assert!(matches!(
            parse("training.batch 8"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(parse("training = 8"), Err(Error::Parse { .. })));
        assert!(matches!(
            parse("training.batch = lots"),
            Err(Error::Config(_))
        ));
    }
}
