use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use seqclf_core::bench::DeskScale;
use seqclf_core::ModelKind;

#[derive(Debug, Parser)]
#[command(
    name = "seqclf",
    version,
    about = "Text-classification networks: counts, training, timing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the layer table of one network.
    Describe(DescribeArgs),
    /// Check every parameter count of the four full-size networks.
    Verify(VerifyArgs),
    /// Train one network on a labeled CSV file.
    Train(TrainArgs),
    /// Train networks on a synthetic corpus and tabulate epoch times.
    Benchmark(BenchmarkArgs),
    /// Compare analytic and finite-difference gradients.
    Gradcheck(GradcheckArgs),
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: seqclf_core::Error| {
        format!(
            "{e}; expected one of {}",
            ModelKind::ALL.map(ModelKind::id).join(", ")
        )
    })
}

/// `W` or `W:L`: hidden widths divided by W, input lengths by L (default 1).
fn parse_scale(s: &str) -> Result<DeskScale, String> {
    let (w, l) = s.split_once(':').unwrap_or((s, "1"));
    let num = |t: &str| match t.trim().parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!(
            "`{s}` is not a scale; use W or W:L with positive integers"
        )),
    };
    Ok(DeskScale {
        width: num(w)?,
        length: num(l)?,
    })
}

/// Models picked for a benchmark, in the order given.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelSelection(pub Vec<ModelKind>);

fn parse_models(s: &str) -> Result<ModelSelection, String> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(ModelSelection(ModelKind::ALL.to_vec()));
    }
    let mut out = Vec::new();
    for part in s.split(',') {
        let kind = parse_model(part.trim())?;
        if out.contains(&kind) {
            return Err(format!("model `{}` listed twice", kind.id()));
        }
        out.push(kind);
    }
    Ok(ModelSelection(out))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    #[default]
    F32,
    /// 64-bit, for deterministic comparisons and tight numerics.
    F64,
}

#[derive(Debug, Args)]
pub struct DescribeArgs {
    #[arg(value_parser = parse_model)]
    pub model: ModelKind,
    /// Emit JSON instead of a text table.
    #[arg(long)]
    pub json: bool,
    #[arg(long, value_parser = parse_scale, value_name = "W[:L]")]
    pub scale: Option<DeskScale>,
    /// Key-value file overriding architecture defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Print every individual check.
    #[arg(long, short)]
    pub verbose: bool,
    /// Test hook: halve the first wide dense layer before checking.
    #[arg(long, hide = true)]
    pub mutate: bool,
}

/// Flags shared by the training commands. Unset flags fall back to the
/// config file, then to built-in defaults.
#[derive(Debug, Args)]
pub struct TrainingFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub decay: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fraction held out for validation, stratified by class.
    #[arg(long)]
    pub validation_split: Option<f64>,
    #[arg(long, value_enum, default_value_t)]
    pub precision: Precision,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_parser = parse_model)]
    pub model: ModelKind,
    /// CSV with `text` and `label` columns.
    #[arg(long)]
    pub data: PathBuf,
    /// GloVe-format vectors; required for glove-bilstm and res-cnn-bilstm.
    #[arg(long)]
    pub glove: Option<PathBuf>,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_scale, value_name = "W[:L]")]
    pub scale: Option<DeskScale>,
    #[command(flatten)]
    pub training: TrainingFlags,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// `all` or a comma-separated list.
    #[arg(long, default_value = "all", value_parser = parse_models)]
    pub models: ModelSelection,
    /// Size of the generated corpus.
    #[arg(long, value_name = "N")]
    pub synthetic: Option<usize>,
    /// Desk scale; defaults to 16:4.
    #[arg(long, value_parser = parse_scale, value_name = "W[:L]", conflicts_with = "paper_scale")]
    pub scale: Option<DeskScale>,
    /// Build the full-size networks.
    #[arg(long)]
    pub paper_scale: bool,
    #[arg(long, default_value = "bench")]
    pub out: PathBuf,
    #[command(flatten)]
    pub training: TrainingFlags,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Elements sampled per tensor; 0 checks every element.
    #[arg(long, default_value_t = 48)]
    pub max_elements: usize,
    #[arg(long, default_value_t = 11)]
    pub seed: u64,
    /// Test hook: corrupt one derivative so every case must fail.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scales_and_model_lists() {
        assert_eq!(
            parse_scale("16:4").unwrap(),
            DeskScale {
                width: 16,
                length: 4
            }
        );
        assert_eq!(parse_scale("8").unwrap().length, 1);
        assert!(parse_scale("0:2").is_err());
        assert!(parse_scale("x").is_err());
        assert_eq!(parse_models("all").unwrap().0.len(), 4);
        assert_eq!(
            parse_models("transformer, glove").unwrap().0,
            vec![ModelKind::Transformer, ModelKind::GloveBilstm]
        );
        assert!(parse_models("char-cnn,char-cnn").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
