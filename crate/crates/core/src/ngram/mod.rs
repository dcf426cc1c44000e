//! Word n-gram language model with interpolated modified Kneser-Ney
//! smoothing, and the perplexity features computed from it.
//!
//! Sentences are padded with a single `<s>` and a final `</s>`. Lower orders
//! use continuation counts (the number of distinct left extensions), except
//! for n-grams that start with `<s>`, which have no left context and keep
//! their raw counts. Discounts `D1, D2, D3+` are estimated per order from
//! count-of-counts:
//!
//! ```text
//! Y  = n1 / (n1 + 2 n2)
//! D1 = 1 - 2Y n2/n1,   D2 = 2 - 3Y n3/n2,   D3+ = 3 - 4Y n4/n3
//! ```
//!
//! When some order has no valid discounts (tiny corpora), the whole model
//! falls back to Witten-Bell interpolation over raw counts. The unigram level
//! interpolates with the uniform distribution over the vocabulary (which
//! includes `</s>` and `<unk>` but never `<s>`), so every conditional
//! distribution sums to one.

mod io;

pub use io::{load_model, read_model, save_model, write_model, FORMAT_VERSION};

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";
/// Token inserted by the period-insertion features.
pub const PERIOD: &str = ".";

const UNK_ID: u32 = 0;
const BOS_ID: u32 = 1;
const EOS_ID: u32 = 2;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("cannot train a language model on an empty corpus")]
    EmptyCorpus,
    #[error("model order must be at least 1")]
    InvalidOrder,
    #[error("model file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Requested smoothing method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Smoothing {
    /// Interpolated modified Kneser-Ney, falling back to Witten-Bell when
    /// discounts cannot be estimated.
    KneserNey,
    WittenBell,
    /// Unsmoothed relative frequencies, backing off only for unseen contexts.
    MaximumLikelihood,
}

impl Smoothing {
    pub fn name(self) -> &'static str {
        match self {
            Smoothing::KneserNey => "kneser-ney",
            Smoothing::WittenBell => "witten-bell",
            Smoothing::MaximumLikelihood => "maximum-likelihood",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "kneser-ney" => Some(Smoothing::KneserNey),
            "witten-bell" => Some(Smoothing::WittenBell),
            "maximum-likelihood" => Some(Smoothing::MaximumLikelihood),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    pub order: usize,
    /// Word types seen fewer times than this are mapped to `<unk>`.
    pub min_count: u64,
    pub smoothing: Smoothing,
    /// Lowercase every word before counting and querying, so a fused
    /// sentence's lowercased first word matches its sentence-initial form.
    pub lowercase: bool,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            order: 5,
            min_count: 2,
            smoothing: Smoothing::KneserNey,
            lowercase: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct ContextStats {
    total: u64,
    distinct: u64,
    n1: u64,
    n2: u64,
    n3: u64,
}

/// Outcome of a k-gram period comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KgramFlag {
    /// A period is more likely than the next word.
    Gt,
    Lt,
    /// Not enough left context for this k.
    Na,
}

impl KgramFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            KgramFlag::Gt => "gt",
            KgramFlag::Lt => "lt",
            KgramFlag::Na => "na",
        }
    }

    pub fn is_gt(self) -> bool {
        self == KgramFlag::Gt
    }
}

impl fmt::Display for KgramFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A trained, immutable n-gram model.
#[derive(Debug, Clone)]
pub struct NgramModel {
    order: usize,
    min_count: u64,
    lowercase: bool,
    requested: Smoothing,
    estimator: Smoothing,
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    /// Raw counts; `raw[k - 1]` holds k-grams.
    raw: Vec<HashMap<Vec<u32>, u64>>,
    /// Counts the estimator uses (continuation counts for Kneser-Ney).
    counts: Vec<HashMap<Vec<u32>, u64>>,
    contexts: Vec<HashMap<Vec<u32>, ContextStats>>,
    discounts: Vec<[f64; 3]>,
}

type Counts = Vec<HashMap<Vec<u32>, u64>>;

fn fold_case(w: &str, lowercase: bool) -> std::borrow::Cow<'_, str> {
    if lowercase && w.chars().any(char::is_uppercase) {
        w.to_lowercase().into()
    } else {
        w.into()
    }
}

fn count_ngrams(sentences: &[Vec<u32>], order: usize) -> Counts {
    let partial: Vec<Counts> = sentences
        .par_chunks(2048)
        .map(|chunk| {
            let mut c: Counts = vec![HashMap::new(); order];
            for ids in chunk {
                for t in 1..ids.len() {
                    for k in 1..=order.min(t + 1) {
                        *c[k - 1].entry(ids[t + 1 - k..=t].to_vec()).or_insert(0) += 1;
                    }
                }
            }
            c
        })
        .collect();
    let mut merged: Counts = vec![HashMap::new(); order];
    for c in partial {
        for (k, m) in c.into_iter().enumerate() {
            for (g, n) in m {
                *merged[k].entry(g).or_insert(0) += n;
            }
        }
    }
    merged
}

fn kn_discounts(counts: &HashMap<Vec<u32>, u64>) -> Option<[f64; 3]> {
    let mut n = [0u64; 5];
    for &c in counts.values() {
        if (1..=4).contains(&c) {
            n[c as usize] += 1;
        }
    }
    if n[1..=4].contains(&0) {
        return None;
    }
    let (n1, n2, n3, n4) = (n[1] as f64, n[2] as f64, n[3] as f64, n[4] as f64);
    let y = n1 / (n1 + 2.0 * n2);
    let d = [
        1.0 - 2.0 * y * n2 / n1,
        2.0 - 3.0 * y * n3 / n2,
        3.0 - 4.0 * y * n4 / n3,
    ];
    let ok = d.iter().enumerate().all(|(i, &di)| di > 0.0 && di <= (i + 1) as f64);
    ok.then_some(d)
}

impl NgramModel {
    /// Trains a model on tokenized sentences.
    pub fn train<S: AsRef<str>>(sentences: &[Vec<S>], config: &LmConfig) -> Result<Self, LmError> {
        if config.order == 0 {
            return Err(LmError::InvalidOrder);
        }
        if sentences.iter().all(|s| s.is_empty()) {
            return Err(LmError::EmptyCorpus);
        }
        let fold = |w: &str| fold_case(w, config.lowercase).into_owned();
        let folded: Vec<Vec<String>> = sentences
            .iter()
            .map(|s| s.iter().map(|w| fold(w.as_ref())).collect())
            .collect();
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for s in &folded {
            for w in s {
                *freq.entry(w.as_str()).or_insert(0) += 1;
            }
        }
        let mut words: Vec<String> = freq
            .iter()
            .filter(|(w, &c)| c >= config.min_count && ![UNK, BOS, EOS].contains(w))
            .map(|(w, _)| w.to_string())
            .collect();
        words.sort();
        let mut vocab = vec![UNK.to_string(), BOS.to_string(), EOS.to_string()];
        vocab.extend(words);
        let index: HashMap<String, u32> = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();

        let ids: Vec<Vec<u32>> = folded
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| {
                let mut v = Vec::with_capacity(s.len() + 2);
                v.push(BOS_ID);
                v.extend(s.iter().map(|w| index.get(w.as_str()).copied().unwrap_or(UNK_ID)));
                v.push(EOS_ID);
                v
            })
            .collect();
        let raw = count_ngrams(&ids, config.order);
        Ok(Self::estimate(
            config.order,
            config.min_count,
            config.lowercase,
            config.smoothing,
            vocab,
            raw,
        ))
    }

    /// Derives everything else from raw counts; deterministic, so a loaded
    /// model reproduces the saved one exactly.
    fn estimate(
        order: usize,
        min_count: u64,
        lowercase: bool,
        requested: Smoothing,
        vocab: Vec<String>,
        raw: Counts,
    ) -> Self {
        let index = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        let mut counts = raw.clone();
        let mut estimator = requested;
        let mut discounts = vec![[0.0; 3]; order];
        if requested == Smoothing::KneserNey {
            for k in 1..order {
                let mut cont: HashMap<&[u32], u64> = HashMap::new();
                for g in raw[k].keys() {
                    *cont.entry(&g[1..]).or_insert(0) += 1;
                }
                for (g, c) in counts[k - 1].iter_mut() {
                    if g[0] != BOS_ID {
                        *c = cont.get(g.as_slice()).copied().unwrap_or(0);
                    }
                }
            }
            for k in 0..order {
                match kn_discounts(&counts[k]) {
                    Some(d) => discounts[k] = d,
                    None => {
                        estimator = Smoothing::WittenBell;
                        break;
                    }
                }
            }
            if estimator != Smoothing::KneserNey {
                counts = raw.clone();
                discounts = vec![[0.0; 3]; order];
            }
        }
        let contexts = counts
            .iter()
            .map(|m| {
                let mut ctx: HashMap<Vec<u32>, ContextStats> = HashMap::new();
                for (g, &c) in m {
                    let st = ctx.entry(g[..g.len() - 1].to_vec()).or_default();
                    st.total += c;
                    st.distinct += 1;
                    match c {
                        1 => st.n1 += 1,
                        2 => st.n2 += 1,
                        _ => st.n3 += 1,
                    }
                }
                ctx
            })
            .collect();
        NgramModel {
            order,
            min_count,
            lowercase,
            requested,
            estimator,
            vocab,
            index,
            raw,
            counts,
            contexts,
            discounts,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// Smoothing actually used (differs from the request after a fallback).
    pub fn estimator(&self) -> Smoothing {
        self.estimator
    }

    pub fn requested_smoothing(&self) -> Smoothing {
        self.requested
    }

    /// Per-order Kneser-Ney discounts `[D1, D2, D3+]`, if in use.
    pub fn discounts(&self) -> Option<&[[f64; 3]]> {
        (self.estimator == Smoothing::KneserNey).then_some(self.discounts.as_slice())
    }

    /// Symbols the model can predict: the vocabulary without `<s>`.
    pub fn predictable(&self) -> impl Iterator<Item = &str> + '_ {
        self.vocab
            .iter()
            .enumerate()
            .filter(|(i, _)| *i as u32 != BOS_ID)
            .map(|(_, w)| w.as_str())
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn lowercases(&self) -> bool {
        self.lowercase
    }

    pub fn id(&self, word: &str) -> u32 {
        if matches!(word, BOS | EOS | UNK) {
            return self.index[word];
        }
        let w = fold_case(word, self.lowercase);
        self.index.get(w.as_ref()).copied().unwrap_or(UNK_ID)
    }

    fn uniform(&self) -> f64 {
        1.0 / (self.vocab.len() - 1) as f64
    }

    /// Probability of the last id of `gram` given the rest; `gram` must be
    /// at most `order` long.
    fn prob_ids(&self, gram: &[u32]) -> f64 {
        let k = gram.len();
        debug_assert!(k >= 1 && k <= self.order);
        let lower = || {
            if k == 1 {
                self.uniform()
            } else {
                self.prob_ids(&gram[1..])
            }
        };
        let Some(st) = self.contexts[k - 1].get(&gram[..k - 1]) else {
            return lower();
        };
        let c = self.counts[k - 1].get(gram).copied().unwrap_or(0) as f64;
        let total = st.total as f64;
        match self.estimator {
            Smoothing::KneserNey => {
                let d = &self.discounts[k - 1];
                let disc = match c as u64 {
                    0 => 0.0,
                    1 => d[0],
                    2 => d[1],
                    _ => d[2],
                };
                let gamma = (d[0] * st.n1 as f64 + d[1] * st.n2 as f64 + d[2] * st.n3 as f64) / total;
                (c - disc).max(0.0) / total + gamma * lower()
            }
            Smoothing::WittenBell => {
                let distinct = st.distinct as f64;
                (c + distinct * lower()) / (total + distinct)
            }
            Smoothing::MaximumLikelihood => c / total,
        }
    }

    /// `p(seq[t] | seq[..t])`, truncating the history to `order - 1` ids.
    fn log_prob_at(&self, seq: &[u32], t: usize) -> f64 {
        let start = (t + 1).saturating_sub(self.order);
        self.prob_ids(&seq[start..=t]).ln()
    }

    /// Conditional probability of `word` after `history` (most recent last).
    /// A history starting with `<s>` is anchored at a sentence start.
    pub fn conditional(&self, history: &[&str], word: &str) -> f64 {
        let mut gram: Vec<u32> = history.iter().map(|w| self.id(w)).collect();
        gram.push(self.id(word));
        let start = gram.len().saturating_sub(self.order);
        self.prob_ids(&gram[start..])
    }

    fn padded(&self, words: &[&str]) -> Vec<u32> {
        let mut v = Vec::with_capacity(words.len() + 2);
        v.push(BOS_ID);
        v.extend(words.iter().map(|w| self.id(w)));
        v.push(EOS_ID);
        v
    }

    /// Natural-log probabilities of each word and the closing `</s>`.
    pub fn sentence_log_probs(&self, words: &[&str]) -> Vec<f64> {
        let seq = self.padded(words);
        (1..seq.len()).map(|t| self.log_prob_at(&seq, t)).collect()
    }

    fn perplexity_of(log_probs: &[f64]) -> f64 {
        let sum: f64 = log_probs.iter().sum();
        (-sum / log_probs.len() as f64).exp()
    }

    /// Mean per-word perplexity `exp(-mean log p)` over the words and `</s>`.
    pub fn mean_perplexity(&self, words: &[&str]) -> f64 {
        Self::perplexity_of(&self.sentence_log_probs(words))
    }

    /// Perplexity after splitting the text with `. </s> <s>` after word `gap`.
    pub fn perplexity_with_period(&self, words: &[&str], gap: usize) -> f64 {
        let mut first: Vec<&str> = words[..=gap].to_vec();
        first.push(PERIOD);
        let mut lps = self.sentence_log_probs(&first);
        lps.extend(self.sentence_log_probs(&words[gap + 1..]));
        Self::perplexity_of(&lps)
    }

    /// Whether inserting a period after word `gap` lowers mean perplexity.
    pub fn perplexity_decrease_flag(&self, words: &[&str], gap: usize) -> bool {
        assert!(gap + 1 < words.len(), "gap {gap} out of range");
        self.perplexity_with_period(words, gap) < self.mean_perplexity(words)
    }

    /// [`perplexity_decrease_flag`](Self::perplexity_decrease_flag) for every
    /// gap, reusing the unchanged log-probabilities.
    pub fn perplexity_decrease_flags(&self, words: &[&str]) -> Vec<bool> {
        let n = words.len();
        if n < 2 {
            return Vec::new();
        }
        let seq = self.padded(words);
        let orig: Vec<f64> = (1..seq.len()).map(|t| self.log_prob_at(&seq, t)).collect();
        let base = Self::perplexity_of(&orig);
        let period = self.id(PERIOD);
        let mut lps = Vec::with_capacity(n + 3);
        let mut head = Vec::with_capacity(n + 2);
        (0..n - 1)
            .map(|gap| {
                lps.clear();
                lps.extend_from_slice(&orig[..=gap]);
                head.clear();
                head.extend_from_slice(&seq[..=gap + 1]);
                head.push(period);
                lps.push(self.log_prob_at(&head, head.len() - 1));
                head.push(EOS_ID);
                lps.push(self.log_prob_at(&head, head.len() - 1));
                // Second sentence: <s> words[gap+1..] </s>. Word m sits at
                // index m - gap there and at m + 1 in `seq`; its score only
                // changes while its history window reaches back past <s>.
                let tail = &seq[gap + 2..];
                let mut tail_seq = Vec::with_capacity(tail.len() + 1);
                tail_seq.push(BOS_ID);
                tail_seq.extend_from_slice(tail);
                for t in 1..tail_seq.len() {
                    if t >= self.order {
                        lps.push(orig[gap + t]);
                    } else {
                        lps.push(self.log_prob_at(&tail_seq, t));
                    }
                }
                Self::perplexity_of(&lps) < base
            })
            .collect()
    }

    /// Compares `p(. | k-gram)` with `p(next word | k-gram)` for k = 1, 2, 3,
    /// where the k-gram ends at word `gap` and may start with `<s>`.
    pub fn kgram_flags(&self, words: &[&str], gap: usize) -> [KgramFlag; 3] {
        assert!(gap + 1 < words.len(), "gap {gap} out of range");
        let seq = self.padded(words);
        let end = gap + 1;
        let next = seq[gap + 2];
        let period = self.id(PERIOD);
        let mut out = [KgramFlag::Na; 3];
        for (i, flag) in out.iter_mut().enumerate() {
            let k = i + 1;
            if k > end + 1 {
                continue;
            }
            let mut gram = seq[end + 1 - k..=end].to_vec();
            let cut = (k + 1).saturating_sub(self.order);
            gram.push(period);
            let p_period = self.prob_ids(&gram[cut..]);
            *gram.last_mut().unwrap() = next;
            let p_next = self.prob_ids(&gram[cut..]);
            *flag = if p_period > p_next {
                KgramFlag::Gt
            } else {
                KgramFlag::Lt
            };
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(lines: &[&str]) -> Vec<Vec<String>> {
        lines
            .iter()
            .map(|l| l.split_whitespace().map(String::from).collect())
            .collect()
    }

    fn cfg(order: usize, smoothing: Smoothing) -> LmConfig {
        LmConfig {
            order,
            min_count: 1,
            smoothing,
            lowercase: false,
        }
    }

    fn assert_normalized(m: &NgramModel, history: &[&str]) {
        let total: f64 = m.predictable().map(|w| m.conditional(history, w)).sum();
        assert!((total - 1.0).abs() < 1e-9, "{history:?}: {total}");
    }

    #[test]
    fn symmetric_unigram() {
        let m = NgramModel::train(&corpus(&["a b"]), &cfg(1, Smoothing::KneserNey)).unwrap();
        assert_eq!(m.conditional(&[], "a"), m.conditional(&[], "b"));
        assert_normalized(&m, &[]);
    }

    #[test]
    fn empty_corpus_and_bad_order() {
        let empty: Vec<Vec<String>> = vec![vec![]];
        assert!(matches!(
            NgramModel::train(&empty, &LmConfig::default()),
            Err(LmError::EmptyCorpus)
        ));
        assert!(matches!(
            NgramModel::train(&corpus(&["a"]), &cfg(0, Smoothing::KneserNey)),
            Err(LmError::InvalidOrder)
        ));
    }

    #[test]
    fn uniform_unigram_perplexity_is_vocab_size() {
        // Each of a, b, c, </s> seen once: uniform over 4 symbols.
        let m = NgramModel::train(&corpus(&["a b c"]), &cfg(1, Smoothing::MaximumLikelihood)).unwrap();
        let ppl = m.mean_perplexity(&["c", "a", "b", "a"]);
        assert!((ppl - 4.0).abs() < 1e-12, "{ppl}");
    }

    #[test]
    fn certain_sentence_has_perplexity_one() {
        let m = NgramModel::train(&corpus(&["x y"]), &cfg(2, Smoothing::MaximumLikelihood)).unwrap();
        assert!((m.mean_perplexity(&["x", "y"]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_bigram_perplexity() {
        // Corpus "a b a" (MLE bigram). Padded: <s> a b a </s>.
        // p(a|<s>) = 1, p(b|a) = 1/2, p(a|b) = 1, p(</s>|a) = 1/2.
        // Query "a b a": log p = ln 1 + ln .5 + ln 1 + ln .5 over 4 events.
        let m = NgramModel::train(&corpus(&["a b a"]), &cfg(2, Smoothing::MaximumLikelihood)).unwrap();
        let expected = (-(2.0 * 0.5f64.ln()) / 4.0).exp();
        assert!((m.mean_perplexity(&["a", "b", "a"]) - expected).abs() < 1e-12);
        assert!((expected - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn witten_bell_fallback_on_tiny_corpus() {
        let m = NgramModel::train(&corpus(&["a b c"]), &cfg(3, Smoothing::KneserNey)).unwrap();
        assert_eq!(m.estimator(), Smoothing::WittenBell);
        assert!(m.discounts().is_none());
        for h in [&[][..], &["a"], &["<s>", "a"], &["q", "r"]] {
            assert_normalized(&m, h);
        }
    }

    #[test]
    fn kneser_ney_on_varied_corpus() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let lines: Vec<String> = (0..3000)
            .map(|_| {
                let n = rng.gen_range(2..7);
                let mut words: Vec<String> = (0..n)
                    .map(|_| {
                        // Roughly Zipfian, so every count-of-count is populated.
                        let r: f64 = rng.gen_range(0.0..8.0);
                        format!("w{}", r.exp() as u32)
                    })
                    .collect();
                words.push(".".into());
                words.join(" ")
            })
            .collect();
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let m = NgramModel::train(&corpus(&refs), &cfg(3, Smoothing::KneserNey)).unwrap();
        assert_eq!(m.estimator(), Smoothing::KneserNey);
        for h in [&[][..], &["w1"], &["<s>", "w2"], &["w3", "w4"], &["zz", "w0"]] {
            assert_normalized(&m, h);
        }
    }

    #[test]
    fn period_never_seen_means_no_flags() {
        let m = NgramModel::train(&corpus(&["a b c d", "c d a b"]), &cfg(1, Smoothing::MaximumLikelihood)).unwrap();
        let words = ["a", "b", "c", "d"];
        for g in 0..3 {
            assert!(!m.perplexity_decrease_flag(&words, g));
            assert!(m.kgram_flags(&words, g).iter().all(|f| !f.is_gt()));
        }
        assert_eq!(m.perplexity_decrease_flags(&words), vec![false; 3]);
    }

    #[test]
    fn kgram_context_availability() {
        let m = NgramModel::train(&corpus(&["a b c ."]), &cfg(4, Smoothing::KneserNey)).unwrap();
        let words = ["a", "b", "c", "d"];
        let f0 = m.kgram_flags(&words, 0);
        assert_ne!(f0[0], KgramFlag::Na);
        assert_ne!(f0[1], KgramFlag::Na);
        assert_eq!(f0[2], KgramFlag::Na);
        assert!(m.kgram_flags(&words, 1).iter().all(|&f| f != KgramFlag::Na));
        assert_eq!(
            [KgramFlag::Gt, KgramFlag::Lt, KgramFlag::Lt].map(KgramFlag::as_str),
            ["gt", "lt", "lt"]
        );
    }

    #[test]
    fn split_text_prefers_period() {
        let train = corpus(&[
            "this shows the rising of life expectancies .",
            "it is an achievement and it is also a challenge .",
            "the rising of prices is a challenge .",
            "it is life .",
        ]);
        let m = NgramModel::train(&train, &cfg(3, Smoothing::KneserNey)).unwrap();
        let fused: Vec<&str> =
            "this shows the rising of life expectancies it is an achievement and it is also a challenge ."
                .split(' ')
                .collect();
        let flags = m.perplexity_decrease_flags(&fused);
        assert!(flags[6], "after expectancies");
        assert!(!flags[2], "the | rising");
        for (g, &f) in flags.iter().enumerate() {
            assert_eq!(f, m.perplexity_decrease_flag(&fused, g));
        }
    }
}
