use std::fmt::Write as _;
use std::io::Read;

use crate::architectures::ModelKind;
use crate::error::{Error, Result};
use crate::training::EpochMetrics;

pub const EPOCHS_COLUMN: &str = "Epochs";

/// The four per-epoch curves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Curve {
    Accuracy,
    ValidationAccuracy,
    Loss,
    ValidationLoss,
}

impl Curve {
    pub const ALL: [Curve; 4] = [
        Curve::Accuracy,
        Curve::ValidationAccuracy,
        Curve::Loss,
        Curve::ValidationLoss,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            Curve::Accuracy => "accuracy.csv",
            Curve::ValidationAccuracy => "validation_accuracy.csv",
            Curve::Loss => "loss.csv",
            Curve::ValidationLoss => "validation_loss.csv",
        }
    }

    pub fn value(self, m: &EpochMetrics) -> Option<f64> {
        match self {
            Curve::Accuracy => Some(m.train_accuracy),
            Curve::ValidationAccuracy => m.val_accuracy,
            Curve::Loss => Some(m.train_loss),
            Curve::ValidationLoss => m.val_loss,
        }
    }
}

/// One metric per epoch for each model; columns follow `ModelKind::ALL`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveTable {
    pub models: Vec<ModelKind>,
    /// `rows[e][m]` is epoch `e + 1` of `models[m]`.
    pub rows: Vec<Vec<f64>>,
}

impl CurveTable {
    /// Builds a table from per-model histories. `None` when a history lacks
    /// the curve (no validation set).
    pub fn from_histories(
        curve: Curve,
        runs: &[(ModelKind, Vec<EpochMetrics>)],
    ) -> Result<Option<Self>> {
        let mut runs: Vec<&(ModelKind, Vec<EpochMetrics>)> = runs.iter().collect();
        runs.sort_by_key(|(k, _)| *k);
        if runs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Contract(
                "a model appears twice in the curve table".into(),
            ));
        }
        let epochs = runs.first().map_or(0, |(_, h)| h.len());
        if runs.iter().any(|(_, h)| h.len() != epochs) {
            return Err(Error::Contract("histories differ in length".into()));
        }
        let mut rows = Vec::with_capacity(epochs);
        for e in 0..epochs {
            let mut row = Vec::with_capacity(runs.len());
            for (_, h) in &runs {
                match curve.value(&h[e]) {
                    Some(v) => row.push(v),
                    None => return Ok(None),
                }
            }
            rows.push(row);
        }
        Ok(Some(CurveTable {
            models: runs.iter().map(|(k, _)| *k).collect(),
            rows,
        }))
    }

    pub fn header(&self) -> String {
        std::iter::once(EPOCHS_COLUMN)
            .chain(self.models.iter().map(|m| m.label()))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// CSV text; values use the shortest representation that parses back
    /// to the same number.
    pub fn to_csv(&self) -> String {
        let mut out = self.header() + "\n";
        for (e, row) in self.rows.iter().enumerate() {
            let _ = write!(out, "{}", e + 1);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(reader: impl Read) -> Result<Self> {
        let mut csv = csv::Reader::from_reader(reader);
        let headers = csv.headers()?.clone();
        let mut cols = headers.iter();
        if cols.next() != Some(EPOCHS_COLUMN) {
            return Err(Error::Schema(format!(
                "first column must be `{EPOCHS_COLUMN}`"
            )));
        }
        let models = cols
            .map(|label| {
                ModelKind::from_label(label)
                    .ok_or_else(|| Error::Schema(format!("unknown model column `{label}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if models.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Schema(
                "model columns out of order or repeated".into(),
            ));
        }
        let mut rows = Vec::new();
        for (i, record) in csv.records().enumerate() {
            let record = record?;
            let epoch: usize = record[0]
                .trim()
                .parse()
                .map_err(|_| Error::Schema(format!("bad epoch `{}`", &record[0])))?;
            if epoch != i + 1 {
                return Err(Error::Schema(format!(
                    "epochs must run 1, 2, ...; row {} says {epoch}",
                    i + 1
                )));
            }
            let row = record
                .iter()
                .skip(1)
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Schema(format!("bad value `{v}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(CurveTable { models, rows })
    }
}

pub const TIMING_HEADER: &str = "Model,Epoch1_ms,Epoch5_ms,Epoch10_ms";
pub const TIMED_EPOCHS: [usize; 3] = [1, 5, 10];

/// Wall time of epochs 1, 5 and 10 per model. Epochs a run did not reach
/// are left empty.
#[derive(Clone, Debug, PartialEq)]
pub struct TimingTable {
    pub rows: Vec<(ModelKind, [Option<f64>; 3])>,
}

impl TimingTable {
    pub fn from_histories(runs: &[(ModelKind, Vec<EpochMetrics>)]) -> Self {
        let mut rows: Vec<_> = runs
            .iter()
            .map(|(k, h)| (*k, TIMED_EPOCHS.map(|e| h.get(e - 1).map(|m| m.wall_ms))))
            .collect();
        rows.sort_by_key(|(k, _)| *k);
        TimingTable { rows }
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{TIMING_HEADER}\n");
        for (kind, cells) in &self.rows {
            out += kind.label();
            for c in cells {
                match c {
                    Some(ms) => {
                        let _ = write!(out, ",{ms:.3}");
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(reader: impl Read) -> Result<Self> {
        let mut csv = csv::Reader::from_reader(reader);
        let header = csv.headers()?.iter().collect::<Vec<_>>().join(",");
        if header != TIMING_HEADER {
            return Err(Error::Schema(format!("timing header `{header}`")));
        }
        let mut rows = Vec::new();
        for record in csv.records() {
            let record = record?;
            let kind = ModelKind::from_label(&record[0])
                .ok_or_else(|| Error::Schema(format!("unknown model `{}`", &record[0])))?;
            let mut cells = [None; 3];
            for (slot, v) in cells.iter_mut().zip(record.iter().skip(1)) {
                if !v.trim().is_empty() {
                    *slot = Some(
                        v.trim()
                            .parse()
                            .map_err(|_| Error::Schema(format!("bad time `{v}`")))?,
                    );
                }
            }
            rows.push((kind, cells));
        }
        Ok(TimingTable { rows })
    }
}

pub const METRICS_HEADER: &str = "epoch,train_accuracy,train_loss,val_accuracy,val_loss";
pub const EPOCH_TIMES_HEADER: &str = "Model,Epoch,ms";

/// Per-epoch metrics of one run. Wall time is left out so that repeated
/// runs with one seed give identical files.
pub fn metrics_csv(history: &[EpochMetrics]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = format!("{METRICS_HEADER}\n");
    for m in history {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            m.epoch,
            m.train_accuracy,
            m.train_loss,
            opt(m.val_accuracy),
            opt(m.val_loss)
        );
    }
    out
}

/// Every epoch's wall time, one row per model and epoch.
pub fn epoch_times_csv(runs: &[(ModelKind, Vec<EpochMetrics>)]) -> String {
    let mut out = format!("{EPOCH_TIMES_HEADER}\n");
    for (kind, history) in runs {
        for m in history {
            let _ = writeln!(out, "{},{},{:.3}", kind.id(), m.epoch, m.wall_ms);
        }
    }
    out
}

/// Inverse of [`epoch_times_csv`]: wall times per model in file order.
pub fn parse_epoch_times(reader: impl Read) -> Result<Vec<(ModelKind, Vec<f64>)>> {
    let mut csv = csv::Reader::from_reader(reader);
    let header = csv.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != EPOCH_TIMES_HEADER {
        return Err(Error::Schema(format!("epoch-times header `{header}`")));
    }
    let mut out: Vec<(ModelKind, Vec<f64>)> = Vec::new();
    for record in csv.records() {
        let record = record?;
        let kind: ModelKind = record[0].parse()?;
        let ms: f64 = record[2]
            .trim()
            .parse()
            .map_err(|_| Error::Schema(format!("bad time `{}`", &record[2])))?;
        match out.last_mut() {
            Some((k, times)) if *k == kind => times.push(ms),
            _ => out.push((kind, vec![ms])),
        }
    }
    Ok(out)
}

/// Mean per-epoch training time in milliseconds.
pub fn mean_epoch_ms(history: &[EpochMetrics]) -> f64 {
    if history.is_empty() {
        return 0.0;
    }
    history.iter().map(|m| m.wall_ms).sum::<f64>() / history.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn history(n: usize, seed: f64) -> Vec<EpochMetrics> {
        (1..=n)
            .map(|e| EpochMetrics {
                epoch: e,
                train_accuracy: seed / e as f64,
                train_loss: 1.0 / (e as f64 + seed),
                val_accuracy: Some(0.1 * seed),
                val_loss: None,
                wall_ms: 10.0 * e as f64,
            })
            .collect()
    }

    #[test]
    fn curve_header_follows_canonical_order() {
        let runs: Vec<_> = ModelKind::ALL
            .iter()
            .rev()
            .map(|&k| (k, history(3, k as usize as f64 + 0.3)))
            .collect();
        let t = CurveTable::from_histories(Curve::Accuracy, &runs)
            .unwrap()
            .unwrap();
        assert_eq!(
            t.header(),
            "Epochs,1-D Char,Glove,Res-CNN-BiLSTM,Transformer"
        );
        assert_eq!(CurveTable::parse(t.to_csv().as_bytes()).unwrap(), t);
        assert!(CurveTable::from_histories(Curve::ValidationLoss, &runs)
            .unwrap()
            .is_none());
    }

    #[test]
    fn epoch_times_round_trip_and_metrics_omit_time() {
        let runs = vec![
            (ModelKind::Transformer, history(3, 0.1)),
            (ModelKind::CharCnn, history(3, 0.2)),
        ];
        let parsed = parse_epoch_times(epoch_times_csv(&runs).as_bytes()).unwrap();
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0].0, ModelKind::Transformer);
        assert_eq!(parsed[1].1.len(), 3);
        let text = metrics_csv(&runs[0].1);
        assert!(text.starts_with(METRICS_HEADER));
        assert_eq!(text.lines().count(), 4);
        let mut slower = runs[0].1.clone();
        slower.iter_mut().for_each(|m| m.wall_ms *= 3.0);
        assert_eq!(metrics_csv(&slower), text);
    }

    #[test]
    fn timing_round_trip() {
        let runs = vec![
            (ModelKind::Transformer, history(10, 1.0)),
            (ModelKind::CharCnn, history(3, 1.0)),
        ];
        let t = TimingTable::from_histories(&runs);
        assert_eq!(t.rows[0].0, ModelKind::CharCnn);
        assert_eq!(t.rows[0].1, [Some(10.0), None, None]);
        let text = t.to_csv();
        assert!(text.starts_with("Model,Epoch1_ms,Epoch5_ms,Epoch10_ms\n"));
        assert_eq!(TimingTable::parse(text.as_bytes()).unwrap(), t);
    }

    #[test]
    fn malformed_curves_are_rejected() {
        assert!(CurveTable::parse("Epoch,Glove\n1,0.5\n".as_bytes()).is_err());
        assert!(CurveTable::parse("Epochs,Glove\n2,0.5\n".as_bytes()).is_err());
        assert!(CurveTable::parse("Epochs,Glove,1-D Char\n1,0.5,0.1\n".as_bytes()).is_err());
    }
}
