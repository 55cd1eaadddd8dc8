//! Property-based invariants for the data pipeline and numeric kernels.

use proptest::prelude::*;

use ged::autodiff::{Gradients, Graph, ParamStore, Tensor};
use ged::corpus::{
    normalize_sentence, read_dataset, write_dataset, LabeledSentence, NormalizeConfig,
    Vocabulary,
};
use ged::traineval::f_beta;

fn token() -> impl Strategy<Value = String> {
    "[a-z]{1,8}"
}

fn labeled_sentence() -> impl Strategy<Value = LabeledSentence> {
    prop::collection::vec((token(), prop::bool::ANY), 1..20).prop_map(|pairs| {
        let (tokens, flags): (Vec<String>, Vec<bool>) = pairs.into_iter().unzip();
        LabeledSentence {
            tokens,
            labels: flags.into_iter().map(|b| b as u8).collect(),
        }
    })
}

proptest! {
    #[test]
    fn dataset_roundtrip(data in prop::collection::vec(labeled_sentence(), 0..20)) {
        let mut bytes = Vec::new();
        write_dataset(&mut bytes, &data).unwrap();
        let back = read_dataset(bytes.as_slice()).unwrap();
        prop_assert_eq!(back, data);
    }

    #[test]
    fn accepted_sentences_respect_all_rules(raw in "[a-z0-9(). ]{0,200}") {
        let rules = NormalizeConfig::default();
        if let Ok(tokens) = normalize_sentence(&raw, &rules) {
            prop_assert!(tokens.len() >= rules.min_len && tokens.len() <= rules.max_len);
            prop_assert_eq!(tokens.last().unwrap(), ".");
            // numeric surface forms are gone and parentheses removed
            for t in &tokens {
                prop_assert!(t.chars().any(|c| !c.is_ascii_digit()) || t == "<num>");
                prop_assert!(t != "(" && t != ")");
            }
        }
    }

    #[test]
    fn normalization_is_idempotent(raw in "[a-z0-9(). ]{0,200}") {
        let rules = NormalizeConfig::default();
        if let Ok(tokens) = normalize_sentence(&raw, &rules) {
            let again = normalize_sentence(&tokens.join(" "), &rules).unwrap();
            prop_assert_eq!(again, tokens);
        }
    }

    #[test]
    fn vocabulary_roundtrips_and_preserves_ids(
        sentences in prop::collection::vec(
            prop::collection::vec(token(), 1..10), 1..12),
    ) {
        let vocab = Vocabulary::build(&sentences, 1).unwrap();
        let mut bytes = Vec::new();
        vocab.write(&mut bytes).unwrap();
        let back = Vocabulary::read(bytes.as_slice()).unwrap();
        prop_assert_eq!(back.len(), vocab.len());
        for sentence in &sentences {
            prop_assert_eq!(back.encode(sentence), vocab.encode(sentence));
        }
    }

    #[test]
    fn f_beta_is_bounded_and_zero_safe(
        p in 0.0f64..=100.0,
        r in 0.0f64..=100.0,
        beta in 0.1f64..=2.0,
    ) {
        let f = f_beta(p, r, beta);
        prop_assert!((0.0..=100.0).contains(&f), "f = {f}");
        // F never exceeds the larger of P and R
        prop_assert!(f <= p.max(r) + 1e-9);
        prop_assert_eq!(f_beta(0.0, r, beta), 0.0);
    }

    #[test]
    fn f_beta_is_monotone_in_recall(
        p in 1.0f64..=100.0,
        r in 1.0f64..=99.0,
        dr in 0.01f64..=1.0,
    ) {
        prop_assert!(f_beta(p, r + dr, 0.5) > f_beta(p, r, 0.5));
    }

    #[test]
    fn softmax_rows_are_distributions(
        rows in prop::collection::vec(
            prop::collection::vec(-20.0f64..20.0, 4), 1..6),
    ) {
        let store = ParamStore::<f64>::new();
        let mut g = Graph::new(&store);
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        let x = g.constant(Tensor::matrix(rows.len(), 4, data));
        let sm = g.softmax_rows(x).unwrap();
        for t in 0..rows.len() {
            let row = g.value(sm).row(t);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            let sum: f64 = row.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn clipping_bounds_the_global_norm(
        values in prop::collection::vec(-100.0f64..100.0, 1..8),
        clip in 0.1f64..10.0,
    ) {
        let mut store = ParamStore::<f64>::new();
        store.add("w", Tensor::vector(vec![0.0; values.len()]));
        let mut grads = Gradients::zeros_like(&store);
        let id = store.id_of("w").unwrap();
        grads.get_mut(id).data_mut().copy_from_slice(&values);
        let before = grads.global_norm();
        grads.clip_by_global_norm(clip);
        let after = grads.global_norm();
        prop_assert!(after <= clip + 1e-9);
        if before <= clip {
            // untouched when already within bounds
            prop_assert_eq!(grads.get(id).data(), values.as_slice());
        }
    }
}
