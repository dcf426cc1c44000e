use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use runon::corpus::fuse;
use runon::seq2seq::{
    fuse_output, fuse_output_tokens, gradient_check, read_model, train_s2s, train_s2s_with_validation, write_model,
    S2SConfig, S2SError, S2SModel, Vocab,
};
use runon::{AnnotatedSentence, GapLabel, LabeledSequence};

type Batch = Vec<(Vec<u32>, Vec<GapLabel>)>;

fn vocab(n: usize) -> Vocab {
    let words = (0..n)
        .map(|i| if i == 0 { "<unk>".to_string() } else { format!("w{i}") })
        .collect();
    Vocab::from_words(words, true)
}

fn tiny_config(hidden: usize) -> S2SConfig {
    S2SConfig {
        hidden_size: hidden,
        embedding_size: 3,
        label_embedding_size: 2,
        position_window: 2,
        vocab_size: 8,
        dropout_rate: 0.0,
        ..S2SConfig::default()
    }
}

/// A model with parameters spread over (-0.5, 0.5) so every gate and the
/// attention softmax are away from their linear regime.
fn tiny_model(seed: u64, hidden: usize) -> S2SModel {
    let mut m = S2SModel::new(tiny_config(hidden), vocab(8)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in m.parameters_mut() {
        *v = rng.gen_range(-0.5..0.5);
    }
    m
}

fn random_batch(rng: &mut ChaCha8Rng, count: usize, max_len: usize, max_id: u32) -> Batch {
    (0..count)
        .map(|_| {
            let n = rng.gen_range(1..=max_len);
            let ids = (0..n).map(|_| rng.gen_range(0..max_id)).collect();
            let labels = (0..n)
                .map(|_| {
                    if rng.gen_bool(0.3) {
                        GapLabel::Period
                    } else {
                        GapLabel::Space
                    }
                })
                .collect();
            (ids, labels)
        })
        .collect()
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    for seed in 0..4 {
        let model = tiny_model(seed, 4 + seed as usize);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let batch = random_batch(&mut rng, 3, 6, 8);
        let p: Vec<f64> = model.parameters().iter().map(|&v| f64::from(v)).collect();
        let (_, analytic) = model.loss_and_gradient_at(&p, &batch).unwrap();
        let h = 1e-4;
        let mut worst = 0.0f64;
        let mut q = p.clone();
        for i in 0..p.len() {
            q[i] = p[i] + h;
            let up = model.loss_and_gradient_at(&q, &batch).unwrap().0;
            q[i] = p[i] - h;
            let down = model.loss_and_gradient_at(&q, &batch).unwrap().0;
            q[i] = p[i];
            worst = worst.max(rel_err(analytic[i], (up - down) / (2.0 * h)));
        }
        assert!(worst < 1e-4, "seed {seed}: max relative error {worst}");
        let reported = gradient_check(&model, &batch).unwrap();
        assert!((reported - worst).abs() < 1e-12, "{reported} vs {worst}");
    }
}

#[test]
fn unused_embedding_rows_get_zero_gradient() {
    let model = tiny_model(1, 4);
    let batch: Batch = vec![(
        vec![1, 2, 3, 2],
        vec![GapLabel::Space, GapLabel::Period, GapLabel::Space, GapLabel::Space],
    )];
    let (_, grad) = model.loss_and_gradient(&batch).unwrap();
    let t = model.layout().get("embedding").unwrap();
    let e = t.shape[1];
    for row in [0usize, 4, 5, 6, 7] {
        let g = &grad[t.offset + row * e..t.offset + (row + 1) * e];
        assert!(g.iter().all(|&v| v == 0.0), "row {row}: {g:?}");
    }
    let used = &grad[t.offset + 2 * e..t.offset + 3 * e];
    assert!(used.iter().any(|&v| v != 0.0));
}

#[test]
fn certain_gold_labels_give_zero_gradient() {
    let mut model = tiny_model(2, 4);
    model.tensor_mut("output.weight").unwrap().fill(0.0);
    model
        .tensor_mut("output.bias")
        .unwrap()
        .copy_from_slice(&[1000.0, -1000.0]);
    let batch: Batch = vec![(vec![1, 5, 3], vec![GapLabel::Space; 3])];
    let (loss, grad) = model.loss_and_gradient(&batch).unwrap();
    assert_eq!(loss, 0.0);
    assert!(grad.iter().all(|&g| g == 0.0));
}

#[test]
fn zero_output_projection_gives_even_odds() {
    let mut model = tiny_model(3, 5);
    model.tensor_mut("output.weight").unwrap().fill(0.0);
    model.tensor_mut("output.bias").unwrap().fill(0.0);
    let out = model.label_ids(&[1, 2, 3, 4, 5, 6]).unwrap();
    for p in &out.probabilities {
        assert_eq!(*p, [0.5, 0.5]);
    }
    // Ties resolve to SPACE.
    assert!(out.labels.iter().all(|&l| l == GapLabel::Space));
}

#[test]
fn length_one_input_and_tied_reversal() {
    let mut model = tiny_model(4, 6);
    let fwd_w = model.tensor("encoder.fwd.weight").unwrap().to_vec();
    let fwd_b = model.tensor("encoder.fwd.bias").unwrap().to_vec();
    model.tensor_mut("encoder.bwd.weight").unwrap().copy_from_slice(&fwd_w);
    model.tensor_mut("encoder.bwd.bias").unwrap().copy_from_slice(&fwd_b);

    let one = model.encode(&[3]).unwrap();
    assert_eq!(one.forward_states(), one.backward_states());

    let ids = [1u32, 7, 2, 2, 5];
    let rev: Vec<u32> = ids.iter().rev().copied().collect();
    let a = model.encode(&ids).unwrap();
    let b = model.encode(&rev).unwrap();
    let n = ids.len();
    for k in 0..n {
        assert_eq!(a.forward_states().row(k), b.backward_states().row(n - 1 - k));
        assert_eq!(a.backward_states().row(k), b.forward_states().row(n - 1 - k));
    }
}

#[test]
fn encoding_is_deterministic() {
    let a = S2SModel::new(tiny_config(4), vocab(8)).unwrap();
    let b = S2SModel::new(tiny_config(4), vocab(8)).unwrap();
    assert_eq!(a.parameters(), b.parameters());
    let ids = [1, 2, 3, 4];
    assert_eq!(a.encode(&ids).unwrap().states(), b.encode(&ids).unwrap().states());
}

#[test]
fn input_errors() {
    let model = tiny_model(5, 4);
    assert!(matches!(model.encode(&[]), Err(S2SError::EmptyInput)));
    assert!(matches!(model.encode(&[9]), Err(S2SError::UnknownId { id: 9, .. })));
    let s = AnnotatedSentence::from_text("a b c").unwrap();
    assert!(matches!(
        fuse_output(&s, &[GapLabel::Space]),
        Err(S2SError::LengthMismatch { tokens: 3, labels: 1 })
    ));
    assert!(matches!(train_s2s(&[], &S2SConfig::default()), Err(S2SError::NoData)));
    let bad = S2SConfig {
        dropout_rate: 1.0,
        ..S2SConfig::default()
    };
    assert!(matches!(bad.validate(), Err(S2SError::InvalidConfig(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn outputs_are_normalized_and_aligned(seed in 0u64..1000, n in 1usize..130) {
        // The default max_input_length is 100.
        let mut model = tiny_model(seed, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<u32> = (0..n).map(|_| rng.gen_range(0..8)).collect();
        // Larger scores make the softmax peaky.
        for v in model.tensor_mut("attention.score").unwrap() {
            *v *= 20.0;
        }
        let out = model.label_ids(&ids).unwrap();
        prop_assert_eq!(out.labels.len(), n);
        prop_assert_eq!(out.probabilities.len(), n);
        prop_assert_eq!(out.truncated, n > 100);
        prop_assert_eq!(*out.labels.last().unwrap(), GapLabel::Space);
        let m = n.min(100);
        prop_assert_eq!(out.attention.dim(), (m, m));
        for row in out.attention.rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-6);
        }
        for p in &out.probabilities {
            prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-6);
        }
    }
}

const STARTS: [&str; 4] = ["He", "She", "They", "We"];
const VERBS: [&str; 5] = ["saw", "liked", "found", "kept", "read"];
const NOUNS: [&str; 6] = ["the book", "a dog", "some rain", "the map", "a song", "our car"];
const ENDS: [&str; 3] = ["today", "again", "yesterday"];

fn toy_sentence(rng: &mut ChaCha8Rng) -> AnnotatedSentence {
    let text = format!(
        "{} {} {} {} .",
        STARTS[rng.gen_range(0..STARTS.len())],
        VERBS[rng.gen_range(0..VERBS.len())],
        NOUNS[rng.gen_range(0..NOUNS.len())],
        ENDS[rng.gen_range(0..ENDS.len())]
    );
    AnnotatedSentence::from_text(&text).unwrap()
}

/// Half run-ons made by fusing two toy sentences, half single sentences.
fn toy_data(seed: u64, count: usize) -> Vec<LabeledSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let a = toy_sentence(&mut rng);
            if i % 2 == 0 {
                let b = toy_sentence(&mut rng);
                fuse(&a, &b).unwrap()
            } else {
                LabeledSequence::negative(a)
            }
        })
        .collect()
}

fn small_config() -> S2SConfig {
    S2SConfig {
        hidden_size: 12,
        embedding_size: 8,
        label_embedding_size: 4,
        batch_size: 8,
        dropout_rate: 0.1,
        learning_rate: 0.1,
        epochs: 3,
        ..S2SConfig::default()
    }
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let data = toy_data(1, 20);
    let cfg = S2SConfig {
        learning_rate: 0.0,
        ..small_config()
    };
    let vocab = Vocab::build(data.iter().map(|s| s.sentence()), cfg.vocab_size, true);
    let init = S2SModel::new(cfg.clone(), vocab).unwrap();
    let trained = init.clone().fit(&data, &[]).unwrap();
    assert_eq!(init.parameters(), trained.parameters());
}

#[test]
fn training_is_deterministic_across_thread_counts() {
    let data = toy_data(2, 40);
    let cfg = small_config();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| train_s2s(&data, &cfg).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a.report(), b.report());
    assert_eq!(a.parameters(), b.parameters());
    let report = a.report().unwrap();
    assert_eq!(report.epochs.len(), 3);
    assert_eq!(report.valid_sequences, 4);
}

#[test]
fn loss_drops_after_one_hundred_steps() {
    let data = toy_data(3, 16);
    let cfg = S2SConfig {
        batch_size: 16,
        epochs: 100,
        dropout_rate: 0.0,
        ..small_config()
    };
    let vocab = Vocab::build(data.iter().map(|s| s.sentence()), cfg.vocab_size, true);
    let init = S2SModel::new(cfg, vocab).unwrap();
    let before = init.mean_loss(&data).unwrap();
    let trained = init.fit(&data, &[]).unwrap();
    let after = trained.mean_loss(&data).unwrap();
    assert!(after < before, "{after} !< {before}");
    assert!(after < 0.5 * before, "{after} vs {before}");
}

#[test]
fn validation_decay_and_best_checkpoint() {
    let train = toy_data(4, 40);
    let valid = toy_data(5, 10);
    let cfg = S2SConfig {
        epochs: 6,
        learning_rate: 0.5,
        ..small_config()
    };
    let model = train_s2s_with_validation(&train, &valid, &cfg).unwrap();
    let report = model.report().unwrap();
    let best = report
        .epochs
        .iter()
        .filter_map(|e| e.valid_loss)
        .fold(f64::INFINITY, f64::min);
    let kept = &report.epochs[report.best_epoch - 1];
    assert_eq!(kept.valid_loss, Some(best));
    assert!((model.mean_loss(&valid).unwrap() - best).abs() < 1e-9);
    for w in report.epochs.windows(2) {
        let expected = if w[0].improved {
            w[0].learning_rate
        } else {
            w[0].learning_rate * 0.5
        };
        assert_eq!(w[1].learning_rate, expected);
    }
}

#[test]
fn overfit_model_marks_fused_boundary() {
    let target = fuse(
        &AnnotatedSentence::from_text("This shows the rising of life expectancies .").unwrap(),
        &AnnotatedSentence::from_text("It is an achievement and it is also a challenge .").unwrap(),
    )
    .unwrap();
    let mut data = vec![target.clone()];
    data.extend(toy_data(6, 9));
    let cfg = S2SConfig {
        hidden_size: 16,
        embedding_size: 12,
        batch_size: 10,
        epochs: 150,
        dropout_rate: 0.0,
        learning_rate: 0.1,
        ..small_config()
    };
    let vocab = Vocab::build(data.iter().map(|s| s.sentence()), cfg.vocab_size, true);
    let model = S2SModel::new(cfg, vocab).unwrap().fit(&data, &[]).unwrap();
    let labels = model.tag_sentence(target.sentence()).unwrap();
    let periods: Vec<&str> = target
        .sentence()
        .tokens()
        .iter()
        .zip(&labels)
        .filter(|(_, &l)| l == GapLabel::Period)
        .map(|(t, _)| t.surface())
        .collect();
    assert_eq!(periods, ["expectancies"]);
    for seq in &data {
        assert_eq!(model.tag_sentence(seq.sentence()).unwrap(), seq.labels());
    }
}

#[test]
fn checkpoint_round_trip() {
    let data = toy_data(7, 20);
    let model = train_s2s(&data, &small_config()).unwrap();
    let mut buf = Vec::new();
    write_model(&model, &mut buf).unwrap();
    let back = read_model(buf.as_slice()).unwrap();
    assert_eq!(back.parameters(), model.parameters());
    assert_eq!(back.config(), model.config());
    assert_eq!(back.vocab(), model.vocab());
    assert_eq!(back.report(), model.report());
    let s = data[0].sentence();
    assert_eq!(back.label_sentence(s).unwrap(), model.label_sentence(s).unwrap());
    let mut again = Vec::new();
    write_model(&back, &mut again).unwrap();
    assert_eq!(buf, again);

    buf[0] = b'X';
    assert!(matches!(read_model(buf.as_slice()), Err(S2SError::Checkpoint(_))));
    assert!(read_model(&again[..again.len() - 3]).is_err());
}

#[test]
fn fuse_output_edits() {
    let s = AnnotatedSentence::from_text("we met John yesterday he said hi").unwrap();
    let mut labels = vec![GapLabel::Space; 7];
    assert_eq!(fuse_output(&s, &labels).unwrap(), s.text());
    labels[1] = GapLabel::Period;
    labels[3] = GapLabel::Period;
    assert_eq!(fuse_output(&s, &labels).unwrap(), "we met. John yesterday. He said hi");
    assert_eq!(
        fuse_output_tokens(&s, &labels).unwrap(),
        ["we", "met", ".", "John", "yesterday", ".", "He", "said", "hi"]
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gold_labels_invert_corpus_fusion(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = toy_sentence(&mut rng);
        let b = toy_sentence(&mut rng);
        let fused = fuse(&a, &b).unwrap();
        let tokens = fuse_output_tokens(fused.sentence(), fused.labels()).unwrap();
        let expected: Vec<&str> = a.surfaces().into_iter().chain(b.surfaces()).collect();
        prop_assert_eq!(tokens, expected);
    }
}
