use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use runon::ngram::{read_model, write_model, LmConfig, NgramModel, Smoothing, BOS, EOS, PERIOD};

fn config(order: usize, smoothing: Smoothing) -> LmConfig {
    LmConfig {
        order,
        min_count: 1,
        smoothing,
        lowercase: false,
    }
}

fn random_corpus(rng: &mut ChaCha8Rng, sentences: usize, vocab: u32, max_len: usize) -> Vec<Vec<String>> {
    (0..sentences)
        .map(|_| {
            let n = rng.gen_range(1..=max_len);
            (0..n).map(|_| format!("w{}", rng.gen_range(0..vocab))).collect()
        })
        .collect()
}

fn zipf_corpus(seed: u64, sentences: usize) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..sentences)
        .map(|_| {
            let n = rng.gen_range(3..12);
            let mut s: Vec<String> = (0..n)
                .map(|_| format!("w{}", rng.gen_range(0.0f64..7.0).exp() as u32))
                .collect();
            s.push(PERIOD.to_string());
            s
        })
        .collect()
}

/// Independent bigram estimator written straight from the textbook formulas.
struct Oracle {
    vocab: Vec<String>,
    bigram: HashMap<(String, String), f64>,
    unigram_raw: HashMap<String, f64>,
    continuation: HashMap<String, f64>,
}

impl Oracle {
    fn new(corpus: &[Vec<String>]) -> Self {
        let mut bigram = HashMap::new();
        let mut unigram_raw = HashMap::new();
        let mut vocab = BTreeSet::new();
        for s in corpus {
            let mut padded = vec![BOS.to_string()];
            padded.extend(s.iter().cloned());
            padded.push(EOS.to_string());
            for w in &padded[1..] {
                vocab.insert(w.clone());
                *unigram_raw.entry(w.clone()).or_insert(0.0) += 1.0;
            }
            for p in padded.windows(2) {
                *bigram.entry((p[0].clone(), p[1].clone())).or_insert(0.0) += 1.0;
            }
        }
        vocab.insert("<unk>".to_string());
        // Continuation count: distinct left neighbours of w.
        let mut continuation = HashMap::new();
        for (_, b) in bigram.keys() {
            *continuation.entry(b.clone()).or_insert(0.0) += 1.0;
        }
        Oracle {
            vocab: vocab.into_iter().collect(),
            bigram,
            unigram_raw,
            continuation,
        }
    }

    fn c(&self, u: &str, w: &str) -> f64 {
        self.bigram.get(&(u.to_string(), w.to_string())).copied().unwrap_or(0.0)
    }

    fn history(&self, u: &str) -> (f64, f64) {
        let mut total = 0.0;
        let mut distinct = 0.0;
        for ((a, _), &c) in &self.bigram {
            if a == u {
                total += c;
                distinct += 1.0;
            }
        }
        (total, distinct)
    }

    fn mle(&self, u: Option<&str>, w: &str) -> f64 {
        let unigram_total: f64 = self.unigram_raw.values().sum();
        let uni = self.unigram_raw.get(w).copied().unwrap_or(0.0) / unigram_total;
        match u {
            None => uni,
            Some(u) => {
                let (total, _) = self.history(u);
                if total == 0.0 {
                    uni
                } else {
                    self.c(u, w) / total
                }
            }
        }
    }

    fn witten_bell(&self, u: Option<&str>, w: &str) -> f64 {
        let v = self.vocab.len() as f64;
        let t: f64 = self.unigram_raw.values().sum();
        let d = self.unigram_raw.len() as f64;
        let uni = (self.unigram_raw.get(w).copied().unwrap_or(0.0) + d / v) / (t + d);
        match u {
            None => uni,
            Some(u) => {
                let (total, distinct) = self.history(u);
                if total == 0.0 {
                    uni
                } else {
                    (self.c(u, w) + distinct * uni) / (total + distinct)
                }
            }
        }
    }

    fn discounts(counts: impl Iterator<Item = f64>) -> [f64; 3] {
        let mut n = [0.0; 5];
        for c in counts {
            if (1.0..=4.0).contains(&c) {
                n[c as usize] += 1.0;
            }
        }
        let y = n[1] / (n[1] + 2.0 * n[2]);
        [
            1.0 - 2.0 * y * n[2] / n[1],
            2.0 - 3.0 * y * n[3] / n[2],
            3.0 - 4.0 * y * n[4] / n[3],
        ]
    }

    fn pick(d: &[f64; 3], c: f64) -> f64 {
        match c as u64 {
            0 => 0.0,
            1 => d[0],
            2 => d[1],
            _ => d[2],
        }
    }

    fn kneser_ney(&self, u: Option<&str>, w: &str) -> f64 {
        let cont = &self.continuation;
        let d1 = Self::discounts(cont.values().copied());
        let t: f64 = cont.values().sum();
        let gamma1: f64 = cont.values().map(|&c| Self::pick(&d1, c)).sum::<f64>() / t;
        let cw = cont.get(w).copied().unwrap_or(0.0);
        let uni = (cw - Self::pick(&d1, cw)).max(0.0) / t + gamma1 / self.vocab.len() as f64;
        let Some(u) = u else { return uni };
        let d2 = Self::discounts(self.bigram.values().copied());
        let mut total = 0.0;
        let mut mass = 0.0;
        for ((a, _), &c) in &self.bigram {
            if a == u {
                total += c;
                mass += Self::pick(&d2, c);
            }
        }
        if total == 0.0 {
            return uni;
        }
        let c = self.c(u, w);
        (c - Self::pick(&d2, c)).max(0.0) / total + mass / total * uni
    }
}

fn check_against_oracle(corpus: &[Vec<String>], smoothing: Smoothing) -> Smoothing {
    let model = NgramModel::train(corpus, &config(2, smoothing)).unwrap();
    let oracle = Oracle::new(corpus);
    let mut histories: Vec<Option<&str>> = vec![None, Some(BOS), Some("never-seen")];
    histories.extend(oracle.vocab.iter().map(|w| Some(w.as_str())));
    for u in histories {
        for w in &oracle.vocab {
            let h: Vec<&str> = u.into_iter().collect();
            let got = model.conditional(&h, w);
            let want = match model.estimator() {
                Smoothing::KneserNey => oracle.kneser_ney(u, w),
                Smoothing::WittenBell => oracle.witten_bell(u, w),
                Smoothing::MaximumLikelihood => oracle.mle(u, w),
            };
            assert!((got - want).abs() < 1e-12, "p({w} | {u:?}) = {got}, oracle {want}");
        }
    }
    model.estimator()
}

#[test]
fn kneser_ney_bigram_matches_oracle() {
    let corpus = zipf_corpus(11, 400);
    assert_eq!(
        check_against_oracle(&corpus, Smoothing::KneserNey),
        Smoothing::KneserNey
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn small_corpora_match_oracle(seed in any::<u64>(), vocab in 2u32..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..8);
        let corpus = random_corpus(&mut rng, n, vocab, 6);
        check_against_oracle(&corpus, Smoothing::KneserNey);
        check_against_oracle(&corpus, Smoothing::WittenBell);
        check_against_oracle(&corpus, Smoothing::MaximumLikelihood);
    }

    #[test]
    fn cached_flags_match_direct_recomputation(seed in any::<u64>(), order in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut corpus = random_corpus(&mut rng, 40, 12, 10);
        for s in corpus.iter_mut().step_by(3) {
            s.push(PERIOD.to_string());
        }
        let model = NgramModel::train(&corpus, &config(order, Smoothing::KneserNey)).unwrap();
        let words: Vec<String> = random_corpus(&mut rng, 1, 14, 15).remove(0);
        let words: Vec<&str> = words.iter().map(String::as_str).collect();
        let fast = model.perplexity_decrease_flags(&words);
        prop_assert_eq!(fast.len(), words.len().saturating_sub(1));
        // Score every event from its explicit history.
        let ppl = |segments: &[Vec<&str>]| {
            let mut lps = Vec::new();
            for seg in segments {
                let mut hist = vec![BOS];
                for w in seg.iter().copied().chain([EOS]) {
                    let h = &hist[hist.len().saturating_sub(order - 1)..];
                    lps.push(model.conditional(h, w).ln());
                    hist.push(w);
                }
            }
            (-lps.iter().sum::<f64>() / lps.len() as f64).exp()
        };
        let base = ppl(std::slice::from_ref(&words));
        prop_assert_eq!(base, model.mean_perplexity(&words));
        for (g, &flag) in fast.iter().enumerate() {
            let mut first = words[..=g].to_vec();
            first.push(PERIOD);
            let split = ppl(&[first, words[g + 1..].to_vec()]);
            prop_assert_eq!(split, model.perplexity_with_period(&words, g));
            prop_assert_eq!(flag, split < base);
            prop_assert_eq!(flag, model.perplexity_decrease_flag(&words, g));
        }
    }
}

#[test]
fn conditionals_normalize_over_random_contexts() {
    let corpus = zipf_corpus(5, 3000);
    // Order 5 on this corpus has no 5-gram seen four times, so it falls back.
    let kn = NgramModel::train(&corpus, &config(3, Smoothing::KneserNey)).unwrap();
    assert_eq!(kn.estimator(), Smoothing::KneserNey);
    let wb = NgramModel::train(&corpus, &config(5, Smoothing::KneserNey)).unwrap();
    assert_eq!(wb.estimator(), Smoothing::WittenBell);
    for model in [kn, wb] {
        normalized_everywhere(&model, &corpus);
    }
}

fn normalized_everywhere(model: &NgramModel, corpus: &[Vec<String>]) {
    let vocab: Vec<String> = model.predictable().map(String::from).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..1000 {
        let len = rng.gen_range(0..5);
        let mut ctx: Vec<&str> = Vec::new();
        if rng.gen_bool(0.3) {
            ctx.push(BOS);
        }
        for _ in 0..len {
            // Mostly continue a real sentence so higher orders are exercised.
            if rng.gen_bool(0.1) {
                ctx.push("oov-word");
            } else {
                let s = &corpus[rng.gen_range(0..corpus.len())];
                ctx.push(&s[rng.gen_range(0..s.len())]);
            }
        }
        let total: f64 = vocab.iter().map(|w| model.conditional(&ctx, w)).sum();
        assert!((total - 1.0).abs() < 1e-9, "{ctx:?} sums to {total}");
    }
    for s in corpus.iter().take(50) {
        let words: Vec<&str> = s.iter().map(String::as_str).collect();
        for i in 0..words.len() {
            let total: f64 = vocab
                .iter()
                .map(|w| model.conditional(&words[i.saturating_sub(4)..i], w))
                .sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn seen_ngrams_have_positive_probability() {
    let corpus = zipf_corpus(2, 200);
    let model = NgramModel::train(&corpus, &config(3, Smoothing::KneserNey)).unwrap();
    for s in &corpus {
        let words: Vec<&str> = s.iter().map(String::as_str).collect();
        assert!(model.sentence_log_probs(&words).iter().all(|lp| lp.is_finite()));
    }
}

#[test]
fn repeated_corpus_keeps_relative_frequencies() {
    let base = vec![
        "the cat sat on the mat ."
            .split(' ')
            .map(String::from)
            .collect::<Vec<_>>(),
        "the dog sat .".split(' ').map(String::from).collect(),
    ];
    let one = NgramModel::train(&base, &config(3, Smoothing::MaximumLikelihood)).unwrap();
    let oracle = Oracle::new(&base);
    for k in [2, 3, 7] {
        let copies: Vec<Vec<String>> = (0..k).flat_map(|_| base.clone()).collect();
        let many = NgramModel::train(&copies, &config(3, Smoothing::MaximumLikelihood)).unwrap();
        let vocab: Vec<&str> = one.predictable().collect();
        for &u in &vocab {
            for &v in &vocab {
                for &w in &vocab {
                    assert_eq!(one.conditional(&[u, v], w), many.conditional(&[u, v], w));
                }
                assert_eq!(one.conditional(&[u], v), many.conditional(&[u], v));
                assert!((one.conditional(&[u], v) - oracle.mle(Some(u), v)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn unknown_words_below_min_count() {
    let corpus = zipf_corpus(4, 300);
    let cfg = LmConfig {
        min_count: 2,
        ..config(3, Smoothing::KneserNey)
    };
    let model = NgramModel::train(&corpus, &cfg).unwrap();
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for w in corpus.iter().flatten() {
        *freq.entry(w).or_default() += 1;
    }
    let vocab: BTreeSet<&str> = model.predictable().collect();
    for (w, c) in freq {
        assert_eq!(vocab.contains(w), c >= 2, "{w}");
    }
    assert_eq!(model.conditional(&["w1"], "zzz"), model.conditional(&["w1"], "<unk>"));
    let words = ["w1", "never-seen", "w2"];
    assert!(model.mean_perplexity(&words).is_finite());
}

#[test]
fn lowercasing_folds_queries() {
    let corpus = zipf_corpus(8, 100);
    let cfg = LmConfig {
        lowercase: true,
        ..config(3, Smoothing::KneserNey)
    };
    let model = NgramModel::train(&corpus, &cfg).unwrap();
    assert_eq!(model.conditional(&["W1"], "W2"), model.conditional(&["w1"], "w2"));
}

#[test]
fn save_load_is_bit_exact() {
    for (seed, order, smoothing) in [
        (1, 5, Smoothing::KneserNey),
        (2, 3, Smoothing::WittenBell),
        (3, 2, Smoothing::MaximumLikelihood),
    ] {
        let corpus = zipf_corpus(seed, 500);
        let model = NgramModel::train(&corpus, &config(order, smoothing)).unwrap();
        let mut buf = Vec::new();
        write_model(&model, &mut buf).unwrap();
        let loaded = read_model(buf.as_slice()).unwrap();
        let mut again = Vec::new();
        write_model(&loaded, &mut again).unwrap();
        assert_eq!(buf, again);
        assert_eq!(loaded.estimator(), model.estimator());
        for s in corpus.iter().take(100) {
            let words: Vec<&str> = s.iter().map(String::as_str).collect();
            let a = model.sentence_log_probs(&words);
            let b = loaded.sentence_log_probs(&words);
            assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
            assert_eq!(
                model.perplexity_decrease_flags(&words),
                loaded.perplexity_decrease_flags(&words)
            );
        }
    }
}

#[test]
fn model_file_errors_name_the_line() {
    let err = read_model("runon-ngram 9\n".as_bytes()).unwrap_err().to_string();
    assert!(err.contains("line 1"), "{err}");
    let corpus = zipf_corpus(1, 20);
    let model = NgramModel::train(&corpus, &config(2, Smoothing::KneserNey)).unwrap();
    let mut buf = Vec::new();
    write_model(&model, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let truncated: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
    assert!(read_model(truncated.as_bytes()).is_err());
    assert!(text.starts_with("runon-ngram 1\norder 2\n"));
    assert!(text.contains("perplexity_denominator all-scored-tokens"));
}

#[test]
fn training_is_order_independent_and_deterministic() {
    let corpus = zipf_corpus(6, 5000);
    let a = NgramModel::train(&corpus, &config(4, Smoothing::KneserNey)).unwrap();
    let mut rev = corpus.clone();
    rev.reverse();
    let b = NgramModel::train(&rev, &config(4, Smoothing::KneserNey)).unwrap();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    write_model(&a, &mut x).unwrap();
    write_model(&b, &mut y).unwrap();
    assert_eq!(x, y);
}
