//! End-to-end acceptance suite. Each numbered check prints one PASS/FAIL
//! line; the test fails if any check fails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ged::autodiff::{Graph, ParamId};
use ged::corpus::{write_dataset, LabeledSentence, Sentence, Vocabulary};
use ged::lingpipe::{PosGroup, TaggedToken};
use ged::model::{Arch, Model, ModelConfig};
use ged::noisegen::{
    generate_training_set, NoiseConfig, NoiseMode, SubstitutionKey, SubstitutionTable,
};
use ged::traineval::{
    evaluate, report_from_counts, sentence_loss, train, EncodedSentence, TrainConfig,
};

type CheckResult = Result<(), String>;

fn check(cond: bool, msg: &str) -> CheckResult {
    if cond {
        Ok(())
    } else {
        Err(msg.to_string())
    }
}

// ---------------------------------------------------------------- 1

/// F0.5 must reproduce every published precision/recall row when fed
/// confusion counts that realize those percentages exactly.
fn metric_fidelity() -> CheckResult {
    // (precision %, recall %, printed F0.5, printed decimals)
    let rows: [(f64, f64, f64, u32); 12] = [
        (13.53, 6.27, 10.99, 2),
        (12.51, 7.15, 10.88, 2),
        (6.25, 50.10, 7.57, 2),
        (18.13, 4.46, 11.24, 2),
        (17.16, 5.39, 11.95, 2),
        (18.71, 7.48, 14.40, 2),
        (7.40, 1.34, 3.89, 2),
        (6.25, 1.34, 3.61, 2),
        (5.66, 57.43, 6.91, 2),
        (6.66, 0.67, 2.4, 1),
        (16.00, 2.68, 8.03, 2),
        (21.05, 8.05, 15.91, 2),
    ];
    for (p, r, f, decimals) in rows {
        // integer confusion counts whose ratios give p and r exactly:
        // with p = P/10000 and r = R/10000, tp = P*R, tp+fp = 10000*R,
        // tp+fn = 10000*P
        let p_i = (p * 100.0).round() as u64;
        let r_i = (r * 100.0).round() as u64;
        let tp = p_i * r_i;
        let fp = r_i * (10_000 - p_i);
        let fnc = p_i * (10_000 - r_i);
        let report = report_from_counts(tp, fp, fnc, 0.5, 0.5);
        if (report.precision - p).abs() > 1e-9 || (report.recall - r).abs() > 1e-9 {
            return Err(format!("counts for P={p} R={r} do not reproduce them"));
        }
        // the published scores were computed from unrounded P/R, so round
        // ours to the printed precision before applying the +/- 0.01 bound
        let scale = 10f64.powi(decimals as i32);
        let rounded = (report.f_score * scale).round() / scale;
        if (rounded - f).abs() > 0.01 + 1e-9 {
            return Err(format!(
                "P={p} R={r}: F0.5 {} (printed {rounded}) vs published {f}",
                report.f_score
            ));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- 2

/// Central finite differences over every parameter of the full
/// encoder+attention loss on a 5-token sentence, at 64-bit precision.
fn gradient_correctness() -> CheckResult {
    let mut config = ModelConfig::new(Arch::BilstmAttn, 8);
    config.d_emb = 4;
    config.d_hidden = 4;
    let mut model: Model<f64> = Model::new(config, 17);
    let sentence = EncodedSentence {
        ids: vec![3, 5, 1, 7, 2],
        labels: vec![1, 1, 0, 1, 1],
    };
    let analytic = {
        let mut graph = Graph::new(&model.store);
        let loss = sentence_loss(&mut graph, &model, &sentence).map_err(|e| e.to_string())?;
        graph.backward(loss).map_err(|e| e.to_string())?
    };
    let h = 1e-5;
    let mut max_rel: f64 = 0.0;
    let ids: Vec<ParamId> = model.store.iter().map(|(id, _, _)| id).collect();
    for id in ids {
        for j in 0..model.store.get(id).len() {
            let orig = model.store.get(id).data()[j];
            let mut eval = |v: f64| -> Result<f64, String> {
                model.store.get_mut(id).data_mut()[j] = v;
                let mut graph = Graph::new(&model.store);
                let loss =
                    sentence_loss(&mut graph, &model, &sentence).map_err(|e| e.to_string())?;
                Ok(graph.value(loss).item())
            };
            let up = eval(orig + h)?;
            let down = eval(orig - h)?;
            model.store.get_mut(id).data_mut()[j] = orig;
            let fd = (up - down) / (2.0 * h);
            let ad = analytic.get(id).data()[j];
            let rel = (ad - fd).abs() / ad.abs().max(fd.abs()).max(1e-6);
            max_rel = max_rel.max(rel);
        }
    }
    check(
        max_rel <= 1e-4,
        &format!("max relative gradient error {max_rel:.3e} > 1e-4"),
    )
}

// ---------------------------------------------------------------- 3

fn tagged_fixture() -> Vec<Vec<TaggedToken>> {
    let rows: &[&[(&str, &str)]] = &[
        &[
            ("an", "DT"),
            ("egg", "NN"),
            ("builds", "VBZ"),
            ("a", "DT"),
            ("suitable", "JJ"),
            ("building", "VBG"),
        ],
        &[
            ("this", "DT"),
            ("build", "VB"),
            ("of", "IN"),
            ("eggs", "NNS"),
            ("in", "IN"),
            ("by", "IN"),
        ],
        &[
            ("these", "DT"),
            ("built", "VBD"),
            ("for", "IN"),
            ("at", "IN"),
            ("suitably", "RB"),
            ("works", "VBZ"),
        ],
    ];
    rows.iter()
        .map(|r| r.iter().map(|(t, g)| TaggedToken::new(t, g)).collect())
        .collect()
}

/// The substitution-set construction groups the canonical examples the
/// way the published table does.
fn grouping_fidelity() -> CheckResult {
    let table = SubstitutionTable::build(tagged_fixture().iter());

    let verb_key = SubstitutionKey::Lemma(PosGroup::Verb, "build".into());
    let verbs = table.set(&verb_key).ok_or("no VERB build lemma set")?;
    for t in ["built", "build", "builds", "building"] {
        check(verbs.contains(t), &format!("{t} missing from verb set"))?;
    }

    let noun_key = SubstitutionKey::Lemma(PosGroup::Noun, "egg".into());
    let nouns = table.set(&noun_key).ok_or("no NOUN egg lemma set")?;
    for t in ["egg", "eggs"] {
        check(nouns.contains(t), &format!("{t} missing from noun set"))?;
    }

    let dets = table
        .set(&SubstitutionKey::Group(PosGroup::Det))
        .ok_or("no DET group set")?;
    for t in ["an", "a", "this", "these"] {
        check(dets.contains(t), &format!("{t} missing from DET set"))?;
    }

    let preps = table
        .set(&SubstitutionKey::Group(PosGroup::Prep))
        .ok_or("no PREP group set")?;
    for t in ["of", "in", "by", "for", "at"] {
        check(preps.contains(t), &format!("{t} missing from PREP set"))?;
    }

    // the adverb and adjective land on stem keys with the same stem
    let adv_stems: Vec<&SubstitutionKey> = table
        .keys_of("suitably")
        .iter()
        .filter(|k| k.group() == PosGroup::Adv)
        .collect();
    let adj_stems: Vec<&SubstitutionKey> = table
        .keys_of("suitable")
        .iter()
        .filter(|k| k.group() == PosGroup::Adj)
        .collect();
    match (adv_stems.as_slice(), adj_stems.as_slice()) {
        ([SubstitutionKey::Stem(_, a)], [SubstitutionKey::Stem(_, b)]) => {
            check(a == b, &format!("stems differ: {a} vs {b}"))
        }
        _ => Err("suitably/suitable not keyed by stem".into()),
    }
}

// ---------------------------------------------------------------- 4

fn synthetic_corpus(n: usize, seed: u64) -> Vec<Sentence> {
    // word pool mixing multi-set members, singletons and punctuation
    let pool = [
        "an", "a", "this", "these", "of", "in", "by", "for", "at", "egg", "eggs", "build",
        "builds", "built", "building", "suitable", "suitably", "works", "zymurgy", "qat", ".",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(6..=20);
            (0..len)
                .map(|_| pool[rng.gen_range(0..pool.len())].to_string())
                .collect()
        })
        .collect()
}

/// One-error-per-sentence injection: exactly one 0 label, replacement
/// always differs, set membership is respected, reruns are byte-identical.
fn injection_fidelity() -> CheckResult {
    let table = SubstitutionTable::build(tagged_fixture().iter());
    let corpus = synthetic_corpus(10_000, 99);
    let config = NoiseConfig::new(NoiseMode::Linguistic, 2024);
    let labeled = generate_training_set(&corpus, &table, None, &config)
        .map_err(|e| e.to_string())?;
    check(labeled.len() == corpus.len(), "sentence count changed")?;
    for (orig, noised) in corpus.iter().zip(&labeled) {
        let zeros: Vec<usize> = noised
            .labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == 0)
            .map(|(i, _)| i)
            .collect();
        check(zeros.len() == 1, "expected exactly one 0 label")?;
        let pos = zeros[0];
        let before = &orig[pos];
        let after = &noised.tokens[pos];
        check(before != after, "replacement equals the original")?;
        // all other tokens untouched
        for (i, (a, b)) in orig.iter().zip(&noised.tokens).enumerate() {
            if i != pos {
                check(a == b, "an unlabeled token was modified")?;
            }
        }
        // shared-key audit: original in a multi-member set => the
        // replacement must share one of those sets
        let in_multi = table
            .keys_of(before)
            .iter()
            .any(|k| table.set(k).is_some_and(|s| s.len() >= 2));
        if in_multi {
            let shares = table
                .keys_of(before)
                .iter()
                .any(|k| table.set(k).is_some_and(|s| s.len() >= 2 && s.contains(after)));
            check(shares, &format!("{before} -> {after} crosses sets"))?;
        }
    }
    // byte-identical rerun
    let again = generate_training_set(&corpus, &table, None, &config)
        .map_err(|e| e.to_string())?;
    let mut a = Vec::new();
    let mut b = Vec::new();
    write_dataset(&mut a, &labeled).map_err(|e| e.to_string())?;
    write_dataset(&mut b, &again).map_err(|e| e.to_string())?;
    check(a == b, "rerun with the same seed differs")
}

// ---------------------------------------------------------------- 5

/// With one error per sentence and mean length 20.8, about 4.8% of all
/// tokens must carry the 0 label.
fn noise_rate_consistency() -> CheckResult {
    // 1000 sentences, 800 of length 21 and 200 of length 20: mean 20.8
    let word = |i: usize| format!("w{}", i % 50);
    let corpus: Vec<Sentence> = (0..1000)
        .map(|s| {
            let len = if s % 5 == 0 { 20 } else { 21 };
            (0..len).map(|i| word(s * 7 + i)).collect()
        })
        .collect();
    let vocab = Vocabulary::build(&corpus, 1).map_err(|e| e.to_string())?;
    let config = NoiseConfig::new(NoiseMode::Uniform, 5);
    let labeled = generate_training_set(&corpus, &SubstitutionTable::default(), Some(&vocab), &config)
        .map_err(|e| e.to_string())?;
    let tokens: usize = labeled.iter().map(|s| s.tokens.len()).sum();
    let errors: usize = labeled
        .iter()
        .map(|s| s.labels.iter().filter(|&&l| l == 0).count())
        .sum();
    let mean_len = tokens as f64 / labeled.len() as f64;
    check((mean_len - 20.8).abs() < 1e-9, "fixture mean length wrong")?;
    let pct = 100.0 * errors as f64 / tokens as f64;
    check(
        (pct - 4.8).abs() <= 0.1,
        &format!("error rate {pct:.3}% not within 4.8 +/- 0.1"),
    )
}

// ---------------------------------------------------------------- 6

/// Toy language where correctness of the determiner depends on the noun
/// four positions away: singular nouns take this/that, plurals take
/// these/those. 30% of sentences flip the determiner's number.
fn toy_agreement_corpus(n: usize, seed: u64) -> Vec<LabeledSentence> {
    let sg_det = ["this", "that"];
    let pl_det = ["these", "those"];
    let sg_noun = ["cat", "dog", "bird", "fox"];
    let pl_noun = ["cats", "dogs", "birds", "foxes"];
    let adj = ["big", "red", "old", "shy"];
    let verb = ["runs", "waits", "sleeps"];
    let adv = ["quickly", "quietly"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let plural = rng.gen_bool(0.5);
            let corrupt = rng.gen_bool(0.3);
            // the written determiner agrees with the noun unless corrupted
            let det_pool = if plural != corrupt { pl_det } else { sg_det };
            let noun_pool = if plural { pl_noun } else { sg_noun };
            let tokens: Vec<String> = vec![
                det_pool[rng.gen_range(0..2)].into(),
                adj[rng.gen_range(0..4)].into(),
                adj[rng.gen_range(0..4)].into(),
                adj[rng.gen_range(0..4)].into(),
                noun_pool[rng.gen_range(0..4)].into(),
                verb[rng.gen_range(0..3)].into(),
                adv[rng.gen_range(0..2)].into(),
                ".".into(),
            ];
            let mut labels = vec![1u8; tokens.len()];
            if corrupt {
                labels[0] = 0;
            }
            LabeledSentence { tokens, labels }
        })
        .collect()
}

fn encode(vocab: &Vocabulary, data: &[LabeledSentence]) -> Vec<EncodedSentence> {
    ged::traineval::encode_dataset(vocab, data)
}

/// The recurrent model with attention must beat the fixed-window baseline
/// by >= 10 F0.5 points on agreement at distance 4, and the baseline must
/// be bitwise window-local.
fn long_distance_contrast() -> CheckResult {
    let train_data = toy_agreement_corpus(5_000, 1);
    let test_data = toy_agreement_corpus(500, 2);
    let sentences: Vec<Sentence> = train_data.iter().map(|s| s.tokens.clone()).collect();
    let vocab = Vocabulary::build(&sentences, 1).map_err(|e| e.to_string())?;
    let train_enc = encode(&vocab, &train_data);
    let test_enc = encode(&vocab, &test_data);

    let train_config = TrainConfig {
        seed: 7,
        epochs: 20,
        learning_rate: 5e-3,
        batch_size: 32,
        ..TrainConfig::default()
    };
    let mut scores = Vec::new();
    for arch in [Arch::BilstmAttn, Arch::Conv] {
        let mut config = ModelConfig::new(arch, vocab.len());
        config.d_emb = 16;
        config.d_hidden = 16;
        config.conv_d_emb = 16;
        let mut model: Model<f32> = Model::new(config, 7);
        train(&mut model, &train_enc, &train_config).map_err(|e| e.to_string())?;
        let report = evaluate(&model, &test_enc, 0.5, 0.5).map_err(|e| e.to_string())?;
        if arch == Arch::Conv {
            // window locality, bitwise: edit a token at distance > 1
            let base: Vec<usize> = test_enc[0].ids.clone();
            let mut edited = base.clone();
            edited[7] = if edited[7] == 3 { 4 } else { 3 };
            let a = model.predict(&base).map_err(|e| e.to_string())?;
            let b = model.predict(&edited).map_err(|e| e.to_string())?;
            for i in 0..=5 {
                check(
                    a[i].to_bits() == b[i].to_bits(),
                    "window baseline reacted to a distant edit",
                )?;
            }
        }
        scores.push(report.f_score);
    }
    let (recurrent, window) = (scores[0], scores[1]);
    check(
        recurrent >= window + 10.0,
        &format!("F0.5 {recurrent:.2} vs {window:.2}: margin < 10 points"),
    )
}

// ---------------------------------------------------------------- 7

/// The attention-free variant must train and evaluate to a valid report
/// under the same harness.
fn no_attention_variant_runs() -> CheckResult {
    let data = toy_agreement_corpus(300, 3);
    let sentences: Vec<Sentence> = data.iter().map(|s| s.tokens.clone()).collect();
    let vocab = Vocabulary::build(&sentences, 1).map_err(|e| e.to_string())?;
    let enc = encode(&vocab, &data);
    let mut config = ModelConfig::new(Arch::BilstmNoattn, vocab.len());
    config.d_emb = 8;
    config.d_hidden = 8;
    let mut model: Model<f32> = Model::new(config, 4);
    let train_config = TrainConfig {
        epochs: 2,
        ..TrainConfig::default()
    };
    train(&mut model, &enc, &train_config).map_err(|e| e.to_string())?;
    let r = evaluate(&model, &enc, 0.5, 0.5).map_err(|e| e.to_string())?;
    let total_errors: u64 = r.true_positives + r.false_negatives;
    let expected_errors: u64 = data
        .iter()
        .flat_map(|s| &s.labels)
        .filter(|&&l| l == 0)
        .count() as u64;
    check(total_errors == expected_errors, "confusion counts inconsistent")?;
    for v in [r.precision, r.recall, r.f_score] {
        check((0.0..=100.0).contains(&v), "metric outside [0, 100]")?;
    }
    Ok(())
}

// ---------------------------------------------------------------- 8

/// Identical inputs and seeds give byte-identical artifacts end to end.
fn determinism_end_to_end() -> CheckResult {
    let run = || -> Result<(Vec<u8>, Vec<u8>, String), String> {
        let data = toy_agreement_corpus(120, 8);
        let sentences: Vec<Sentence> = data.iter().map(|s| s.tokens.clone()).collect();
        let vocab = Vocabulary::build(&sentences, 1).map_err(|e| e.to_string())?;
        let table = SubstitutionTable::build(tagged_fixture().iter());
        let noised = generate_training_set(
            &sentences,
            &table,
            None,
            &NoiseConfig::new(NoiseMode::Linguistic, 11),
        )
        .map_err(|e| e.to_string())?;
        let mut noised_bytes = Vec::new();
        write_dataset(&mut noised_bytes, &noised).map_err(|e| e.to_string())?;
        let enc = encode(&vocab, &noised);
        let mut config = ModelConfig::new(Arch::BilstmAttn, vocab.len());
        config.d_emb = 6;
        config.d_hidden = 6;
        let mut model: Model<f32> = Model::new(config, 13);
        let tc = TrainConfig {
            seed: 13,
            epochs: 2,
            ..TrainConfig::default()
        };
        train(&mut model, &enc, &tc).map_err(|e| e.to_string())?;
        let mut ckpt = Vec::new();
        ged::traineval::save_checkpoint(&model, &mut ckpt).map_err(|e| e.to_string())?;
        let r = evaluate(&model, &enc, 0.5, 0.5).map_err(|e| e.to_string())?;
        Ok((noised_bytes, ckpt, format!("{r:?}")))
    };
    let (n1, c1, r1) = run()?;
    let (n2, c2, r2) = run()?;
    check(n1 == n2, "noised corpora differ between runs")?;
    check(c1 == c2, "checkpoints differ between runs")?;
    check(r1 == r2, "evaluation reports differ between runs")
}

// ---------------------------------------------------------------- 9

/// 50 epochs on 20 sentences must drive the mean loss from about ln 2
/// to below 0.1.
fn overfit_sanity() -> CheckResult {
    let data = toy_agreement_corpus(20, 21);
    let sentences: Vec<Sentence> = data.iter().map(|s| s.tokens.clone()).collect();
    let vocab = Vocabulary::build(&sentences, 1).map_err(|e| e.to_string())?;
    let enc = encode(&vocab, &data);
    let mut config = ModelConfig::new(Arch::BilstmAttn, vocab.len());
    config.d_emb = 16;
    config.d_hidden = 16;
    let mut model: Model<f32> = Model::new(config, 5);
    let tc = TrainConfig {
        seed: 5,
        epochs: 50,
        learning_rate: 5e-3,
        batch_size: 4,
        ..TrainConfig::default()
    };
    let losses = train(&mut model, &enc, &tc).map_err(|e| e.to_string())?;
    check(
        (losses[0] - std::f64::consts::LN_2).abs() < 0.2,
        &format!("initial loss {:.4} not close to ln 2", losses[0]),
    )?;
    let last = *losses.last().unwrap();
    check(last < 0.1, &format!("final loss {last:.4} >= 0.1"))
}

// ----------------------------------------------------------------

#[test]
fn acceptance() {
    type Check = fn() -> CheckResult;
    let checks: Vec<(&str, Check)> = vec![
        ("1 metric fidelity", metric_fidelity),
        ("2 gradient correctness", gradient_correctness),
        ("3 substitution-set grouping", grouping_fidelity),
        ("4 error-injection audit", injection_fidelity),
        ("5 noise-rate consistency", noise_rate_consistency),
        ("6 long-distance contrast", long_distance_contrast),
        ("7 no-attention variant", no_attention_variant_runs),
        ("8 end-to-end determinism", determinism_end_to_end),
        ("9 overfit sanity", overfit_sanity),
    ];
    let mut failures = Vec::new();
    for (name, f) in checks {
        match f() {
            Ok(()) => println!("acceptance {name}: PASS"),
            Err(msg) => {
                println!("acceptance {name}: FAIL ({msg})");
                failures.push(format!("{name}: {msg}"));
            }
        }
    }
    assert!(failures.is_empty(), "failed checks:\n{}", failures.join("\n"));
}
