use crate::architectures::{ArchitectureConfig, ModelKind};
use crate::error::{Error, Result};
use crate::layers::ParamCount;
use crate::pipeline::{prepare, Pretrained};
use crate::tensor::Element;
use crate::text::Dataset;
use crate::training::{fit_with, EpochMetrics, TrainConfig};

/// Width and length divisors for runs on a single CPU core.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeskScale {
    pub width: usize,
    pub length: usize,
}

impl DeskScale {
    /// Default for timing runs: keeps every layer and the relative cost of
    /// the four networks while one epoch stays within seconds.
    pub const BENCHMARK: DeskScale = DeskScale {
        width: 16,
        length: 4,
    };
    /// Full size.
    pub const FULL: DeskScale = DeskScale {
        width: 1,
        length: 1,
    };

    pub fn apply(self, arch: &ArchitectureConfig) -> ArchitectureConfig {
        if self == DeskScale::FULL {
            arch.clone()
        } else {
            arch.scaled(self.width, self.length)
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchmarkConfig {
    pub models: Vec<ModelKind>,
    /// Already scaled.
    pub arch: ArchitectureConfig,
    pub train: TrainConfig,
    /// Seed of the random stand-in for pretrained word vectors.
    pub embedding_seed: u64,
}

#[derive(Clone, Debug)]
pub struct ModelRun {
    pub kind: ModelKind,
    pub parameters: ParamCount,
    pub history: Vec<EpochMetrics>,
}

/// Trains each model in turn on the same data and split, from the same
/// seed, and returns every history. `on_epoch` sees records as they land.
pub fn run_benchmark<T: Element>(
    config: &BenchmarkConfig,
    data: &Dataset,
    mut on_epoch: impl FnMut(ModelKind, &EpochMetrics),
) -> Result<Vec<ModelRun>> {
    if config.models.is_empty() {
        return Err(Error::Config("no models selected".into()));
    }
    config.train.validate()?;
    let mut runs = Vec::with_capacity(config.models.len());
    for &kind in &config.models {
        let mut prepared = prepare::<T>(
            kind,
            &config.arch,
            data,
            &Pretrained::Random {
                seed: config.embedding_seed,
            },
            config.train.validation_split,
            config.train.seed,
        )?;
        let history = fit_with(
            &mut prepared.model,
            &prepared.train,
            prepared.val.as_ref(),
            &config.train,
            |m| on_epoch(kind, m),
        )?;
        runs.push(ModelRun {
            kind,
            parameters: prepared.model.runtime_counts(),
            history,
        });
    }
    Ok(runs)
}

/// Models sorted by mean epoch time, fastest first.
pub fn speed_ranking(runs: &[ModelRun]) -> Vec<(ModelKind, f64)> {
    let mut ranked: Vec<(ModelKind, f64)> = runs
        .iter()
        .map(|r| (r.kind, super::mean_epoch_ms(&r.history)))
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{synthetic_corpus, tiny_architectures, SyntheticSpec};

    #[test]
    fn runs_every_model_with_equal_epochs() {
        let data = synthetic_corpus(&SyntheticSpec {
            examples: 40,
            ..SyntheticSpec::default()
        });
        let arch = tiny_architectures();
        let config = BenchmarkConfig {
            models: ModelKind::ALL.to_vec(),
            arch,
            train: TrainConfig {
                epochs: 2,
                batch: 16,
                ..TrainConfig::default()
            },
            embedding_seed: 3,
        };
        let mut seen = 0;
        let runs = run_benchmark::<f32>(&config, &data, |_, _| seen += 1).unwrap();
        assert_eq!(seen, 8);
        assert!(runs.iter().all(|r| r.history.len() == 2));
        assert!(runs.iter().all(|r| r.history[0].val_loss.is_some()));
        assert_eq!(speed_ranking(&runs).len(), 4);
    }
}
