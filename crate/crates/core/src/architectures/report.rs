use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::graph::ModelGraph;
use crate::layers::{LayerKind, ParamCount};

/// Formats an integer with comma thousands separators.
pub fn group_thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerRow {
    pub name: String,
    pub kind: String,
    pub output_shape: Vec<usize>,
    pub params: u64,
    pub trainable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerReport {
    pub model: String,
    pub rows: Vec<LayerRow>,
    pub total: u64,
    pub trainable: u64,
    pub non_trainable: u64,
}

/// One row per non-input layer, plus totals.
pub fn describe_model(model: &ModelGraph) -> LayerReport {
    let mut sum = ParamCount::default();
    let rows = model
        .nodes()
        .iter()
        .filter(|n| !matches!(n.spec.kind, LayerKind::Input { .. }))
        .map(|n| {
            let count = n.params.count();
            sum += count;
            LayerRow {
                name: n.spec.name.clone(),
                kind: n.spec.kind.type_name().to_owned(),
                output_shape: n.output_shape.clone(),
                params: count.total,
                trainable: count.non_trainable == 0,
                branch: n.branch.clone(),
            }
        })
        .collect();
    LayerReport {
        model: model.name().to_owned(),
        rows,
        total: sum.total,
        trainable: sum.trainable,
        non_trainable: sum.non_trainable,
    }
}

fn shape_text(shape: &[usize]) -> String {
    let dims: Vec<String> = std::iter::once("None".to_owned())
        .chain(shape.iter().map(usize::to_string))
        .collect();
    format!("({})", dims.join(", "))
}

impl LayerReport {
    pub fn to_text(&self) -> String {
        let header = ["Layer", "Type", "Output shape", "Params", "Trainable"];
        let cells: Vec<[String; 5]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.name.clone(),
                    r.kind.clone(),
                    shape_text(&r.output_shape),
                    group_thousands(r.params),
                    if r.trainable { "yes" } else { "no" }.to_owned(),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let line = |cols: [&str; 5]| {
            let mut s = String::new();
            for (i, (c, w)) in cols.iter().zip(widths).enumerate() {
                if i == 3 {
                    let _ = write!(s, "{c:>w$}  ");
                } else {
                    let _ = write!(s, "{c:<w$}  ");
                }
            }
            s.trim_end().to_owned() + "\n"
        };
        let rule = "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)) + "\n";
        let mut out = format!("Model: {}\n", self.model);
        out += &rule;
        out += &line(header);
        out += &rule;
        for row in &cells {
            out += &line([&row[0], &row[1], &row[2], &row[3], &row[4]]);
        }
        out += &rule;
        let _ = writeln!(out, "Total params: {}", group_thousands(self.total));
        let _ = writeln!(out, "Trainable params: {}", group_thousands(self.trainable));
        let _ = writeln!(
            out,
            "Non-trainable params: {}",
            group_thousands(self.non_trainable)
        );
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thousands() {
        assert_eq!(group_thousands(0), "0");
        assert_eq!(group_thousands(165), "165");
        assert_eq!(group_thousands(4_830), "4,830");
        assert_eq!(group_thousands(11_371_683), "11,371,683");
        assert_eq!(group_thousands(100_000), "100,000");
    }
}
