use serde::Serialize;

use super::builders::{ModelKind, CHAR_BRANCH, WORD_BRANCH};
use super::graph::ModelGraph;
use crate::error::{Error, Result};

/// Published parameter counts for one network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReferenceCounts {
    pub model: ModelKind,
    /// `(layer name, parameter count)` for each layer with a stated count.
    pub layers: Vec<(String, u64)>,
    /// `(branch name, parameter count)`.
    pub branches: Vec<(String, u64)>,
    pub total: u64,
    pub trainable: u64,
}

const CHAR_STACK: [(&str, u64); 7] = [
    ("embedding", 4_830),
    ("conv1d_1", 123_904),
    ("conv1d_2", 459_008),
    ("conv1d_3", 196_864),
    ("conv1d_4", 196_864),
    ("conv1d_5", 196_864),
    ("conv1d_6", 196_864),
];

fn owned(prefix: &str, rows: &[(&str, u64)]) -> Vec<(String, u64)> {
    rows.iter()
        .map(|&(n, c)| (format!("{prefix}{n}"), c))
        .collect()
}

impl ReferenceCounts {
    pub fn for_model(model: ModelKind) -> Self {
        match model {
            ModelKind::CharCnn => {
                let mut layers = owned("", &CHAR_STACK);
                layers.extend(owned(
                    "",
                    &[
                        ("dense_1", 8_913_920),
                        ("dense_2", 1_049_600),
                        ("dense_3", 32_800),
                        ("dense_4", 165),
                    ],
                ));
                ReferenceCounts {
                    model,
                    layers,
                    branches: Vec::new(),
                    total: 11_371_683,
                    trainable: 11_371_683,
                }
            }
            ModelKind::GloveBilstm => ReferenceCounts {
                model,
                layers: owned(
                    "",
                    &[
                        ("embedding", 2_887_000),
                        ("bidirectional", 2_510_848),
                        ("dense_1", 32_800),
                        ("dense_2", 165),
                    ],
                ),
                branches: Vec::new(),
                total: 5_430_813,
                trainable: 2_543_813,
            },
            ModelKind::ResCnnBilstm => {
                let mut layers = owned("char_", &CHAR_STACK);
                layers.extend(owned(
                    "char_",
                    &[
                        ("bidirectional_1", 3_149_824),
                        ("bidirectional_2", 6_295_552),
                        ("bidirectional_3", 6_295_552),
                        ("bidirectional_4", 6_295_552),
                        ("bidirectional_5", 557_568),
                    ],
                ));
                layers.extend(owned(
                    "word_",
                    &[
                        ("embedding", 2_887_000),
                        ("bidirectional_1", 2_510_848),
                        ("bidirectional_2", 6_295_552),
                        ("bidirectional_3", 6_295_552),
                        ("bidirectional_4", 6_295_552),
                        ("bidirectional_5", 557_568),
                    ],
                ));
                // Head widths follow from the grand total minus both branches.
                layers.extend(owned("", &[("dense_1", 8_224), ("dense_2", 165)]));
                ReferenceCounts {
                    model,
                    layers,
                    branches: vec![
                        (CHAR_BRANCH.to_owned(), 23_969_246),
                        (WORD_BRANCH.to_owned(), 24_842_072),
                    ],
                    total: 48_819_707,
                    trainable: 45_932_707,
                }
            }
            ModelKind::Transformer => ReferenceCounts {
                model,
                layers: owned(
                    "",
                    &[
                        ("token_and_position_embedding", 643_200),
                        ("transformer_block", 10_656),
                        ("dense_1", 660),
                        ("dense_2", 420),
                        ("dense_3", 105),
                    ],
                ),
                branches: Vec::new(),
                total: 655_041,
                trainable: 655_041,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CountCheck {
    pub item: String,
    pub expected: u64,
    /// `None` when the layer is missing from the model.
    pub actual: Option<u64>,
}

impl CountCheck {
    pub fn passed(&self) -> bool {
        self.actual == Some(self.expected)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub model: ModelKind,
    pub checks: Vec<CountCheck>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CountCheck::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CountCheck> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

/// Exact integer comparison of every reference count against `model`.
pub fn verify_reference_counts(
    model: &ModelGraph,
    reference: &ReferenceCounts,
) -> Result<VerificationReport> {
    let kind: ModelKind = model.name().parse()?;
    if kind != reference.model {
        return Err(Error::UnknownModel(format!(
            "{} has no reference entry for {}",
            reference.model,
            model.name()
        )));
    }
    let mut checks = Vec::new();
    for (name, expected) in &reference.layers {
        checks.push(CountCheck {
            item: name.clone(),
            expected: *expected,
            actual: model
                .find(name)
                .map(|id| model.node(id).params.count().total),
        });
    }
    for (branch, expected) in &reference.branches {
        checks.push(CountCheck {
            item: format!("branch {branch}"),
            expected: *expected,
            actual: Some(model.branch_counts(branch).total),
        });
    }
    let counts = model.counts();
    checks.push(CountCheck {
        item: "total".into(),
        expected: reference.total,
        actual: Some(counts.total),
    });
    checks.push(CountCheck {
        item: "trainable".into(),
        expected: reference.trainable,
        actual: Some(counts.trainable),
    });
    checks.push(CountCheck {
        item: "non-trainable".into(),
        expected: reference.total - reference.trainable,
        actual: Some(counts.non_trainable),
    });
    Ok(VerificationReport {
        model: kind,
        checks,
    })
}
