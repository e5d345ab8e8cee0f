use seqclf_core::architectures::{
    build_char_cnn, describe_model, verify_reference_counts, ArchitectureConfig, CharCnnConfig,
    ModelInputs, ModelKind, ReferenceCounts,
};
use seqclf_core::layers::{layer_param_count, ParamCount};
use seqclf_core::{IdMatrix, Model, RngStream};

fn default_graphs() -> Vec<(ModelKind, seqclf_core::ModelGraph)> {
    let cfg = ArchitectureConfig::default();
    ModelKind::ALL
        .into_iter()
        .map(|k| (k, cfg.build(k).unwrap()))
        .collect()
}

#[test]
fn default_builds_match_reference_counts() {
    for (kind, graph) in default_graphs() {
        let report = verify_reference_counts(&graph, &ReferenceCounts::for_model(kind)).unwrap();
        let failures: Vec<_> = report.failures().collect();
        assert!(failures.is_empty(), "{kind}: {failures:?}");
    }
}

#[test]
fn declared_counts_agree_with_closed_form() {
    for (kind, graph) in default_graphs() {
        let mut closed = ParamCount::default();
        for node in graph.nodes() {
            let input = node
                .inputs
                .first()
                .map(|id| graph.node(*id).output_shape.clone())
                .unwrap_or_default();
            let c = layer_param_count(&node.spec, &input).unwrap();
            assert_eq!(c, node.params.count(), "{kind}/{}", node.spec.name);
            closed += c;
        }
        assert_eq!(closed, graph.counts(), "{kind}");
    }
}

#[test]
fn headline_totals() {
    let totals: Vec<(u64, u64)> = default_graphs()
        .iter()
        .map(|(_, g)| (g.counts().total, g.counts().trainable))
        .collect();
    assert_eq!(
        totals,
        [
            (11_371_683, 11_371_683),
            (5_430_813, 2_543_813),
            (48_819_707, 45_932_707),
            (655_041, 655_041),
        ]
    );
}

#[test]
fn narrowed_dense_layer_is_named_in_failure() {
    let cfg = CharCnnConfig {
        dense_units: 512,
        ..CharCnnConfig::default()
    };
    let graph = build_char_cnn(&cfg).unwrap();
    let report =
        verify_reference_counts(&graph, &ReferenceCounts::for_model(ModelKind::CharCnn)).unwrap();
    assert!(!report.passed());
    let failed: Vec<&str> = report.failures().map(|c| c.item.as_str()).collect();
    assert!(failed.contains(&"dense_1"), "{failed:?}");
    assert!(failed.contains(&"total"));
}

#[test]
fn mismatched_reference_is_rejected() {
    let graph = build_char_cnn(&CharCnnConfig::default()).unwrap();
    assert!(
        verify_reference_counts(&graph, &ReferenceCounts::for_model(ModelKind::Transformer))
            .is_err()
    );
}

#[test]
fn reports_total_their_rows() {
    for (kind, graph) in default_graphs() {
        let report = describe_model(&graph);
        assert_eq!(
            report.rows.iter().map(|r| r.params).sum::<u64>(),
            report.total
        );
        assert_eq!(report.total, report.trainable + report.non_trainable);
        if kind == ModelKind::GloveBilstm {
            let emb = report.rows.iter().find(|r| r.name == "embedding").unwrap();
            assert!(!emb.trainable);
        }
        let text = report.to_text();
        assert!(text.contains("Total params"));
        let back: seqclf_core::architectures::LayerReport =
            serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(back, report);
    }
    let char_rows = describe_model(&default_graphs()[0].1).rows.len();
    assert_eq!(char_rows, 17);
}

#[test]
fn runtime_tally_matches_declarations() {
    let cfg = ArchitectureConfig::default().scaled(16, 1);
    for kind in ModelKind::ALL {
        let graph = cfg.build(kind).unwrap();
        let declared = graph.counts();
        let model = Model::<f32>::init(graph, &mut RngStream::new(3)).unwrap();
        assert_eq!(model.runtime_counts(), declared, "{kind}");
    }
}

fn sample_ids(rows: usize, cols: usize, vocab: usize, seed: u64) -> IdMatrix {
    let mut rng = RngStream::new(seed);
    let ids = (0..rows * cols).map(|_| rng.below(vocab) as u32).collect();
    IdMatrix::new(rows, cols, ids).unwrap()
}

#[test]
fn default_models_emit_distributions() {
    let cfg = ArchitectureConfig::default();
    for kind in ModelKind::ALL {
        let graph = cfg.build(kind).unwrap();
        let model = Model::<f32>::init(graph, &mut RngStream::new(11)).unwrap();
        let chars = cfg
            .char_length(kind)
            .map(|t| sample_ids(1, t, cfg.char_cnn.chars.vocab, 1));
        let words = cfg
            .word_length(kind)
            .map(|t| sample_ids(1, t, cfg.word_vocab(kind).unwrap(), 2));
        let inputs = ModelInputs {
            chars: chars.as_ref(),
            words: words.as_ref(),
        };
        let probs = model.predict(inputs).unwrap();
        assert_eq!(probs.shape(), [1, 5]);
        let sum: f64 = probs.to_f64_vec().iter().sum();
        assert!((sum - 1.0).abs() < 1e-6, "{kind}: {sum}");
    }
}

#[test]
fn transformer_rejects_overlong_sequence() {
    let cfg = ArchitectureConfig::default();
    let graph = cfg.build(ModelKind::Transformer).unwrap();
    let model = Model::<f32>::init(graph, &mut RngStream::new(0)).unwrap();
    let ids = sample_ids(1, 120, 100, 0);
    assert!(matches!(
        model.predict(ModelInputs::words(&ids)),
        Err(seqclf_core::Error::Length { len: 120, max: 100 })
    ));
}

#[test]
fn frozen_table_is_shape_checked() {
    let cfg = ArchitectureConfig::default().scaled(16, 1);
    let graph = cfg.build(ModelKind::GloveBilstm).unwrap();
    let mut model = Model::<f32>::init(graph, &mut RngStream::new(0)).unwrap();
    let wrong = seqclf_core::Tensor::zeros(&[28_870, 50]);
    assert!(model
        .set_parameter("embedding", "embeddings", wrong)
        .is_err());
    let right = seqclf_core::Tensor::zeros(&[28_870, 100]);
    model
        .set_parameter("embedding", "embeddings", right)
        .unwrap();
}
