//! Synthetic run-on generation from clean annotated text.
//!
//! Adjacent sentence pairs that pass [`is_candidate_pair`] are fused by
//! deleting the first sentence's terminal punctuation and lowercasing the
//! second sentence's first word (unless it is a proper noun). The token that
//! lost its period is labeled [`GapLabel::Period`]; everything else is
//! [`GapLabel::Space`].

mod io;

use std::collections::HashSet;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use thiserror::Error;

pub use self::io::{read_corpus, read_labeled, read_trees, write_corpus, write_labeled, write_trees, FormatError};
use crate::seed::{rng_for, streams};
use crate::sentence::{lowercase_first, AnnotatedSentence, GapLabel, LabeledSequence, SentenceError, Token};
use crate::tree::ParseTree;

/// Exact fraction used for class ratios.
pub type Fraction = Ratio<u64>;

pub const MIN_TOKENS: usize = 5;
pub const MAX_TOKENS: usize = 50;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("sentence {0:?} does not end in terminal punctuation")]
    MissingTerminalPunctuation(String),
    #[error(
        "corpus cannot supply the requested counts: wanted {wanted_runons} run-ons and \
         {wanted_negatives} negatives, found {available_runons} pairs and {available_negatives} \
         remaining sentences"
    )]
    InsufficientCorpus {
        wanted_runons: usize,
        available_runons: usize,
        wanted_negatives: usize,
        available_negatives: usize,
    },
    #[error("target run-on fraction {target} exceeds the current fraction {current}")]
    FractionTooHigh { target: Fraction, current: Fraction },
    #[error("invalid run-on fraction {0}")]
    InvalidFraction(String),
    #[error(transparent)]
    Sentence(#[from] SentenceError),
}

/// Requested class counts and sampling seed for [`build_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetSpec {
    pub runon_count: usize,
    pub nonrunon_count: usize,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(runon_count: usize, nonrunon_count: usize, seed: u64) -> Self {
        DatasetSpec {
            runon_count,
            nonrunon_count,
            seed,
        }
    }

    /// Splits `total` so that the run-on share is `fraction`, rounding the
    /// run-on count half-up.
    pub fn with_fraction(total: usize, fraction: Fraction, seed: u64) -> Result<Self, CorpusError> {
        if *fraction.numer() == 0 || fraction > Fraction::from_integer(1) {
            return Err(CorpusError::InvalidFraction(fraction.to_string()));
        }
        let runons = (fraction * Fraction::from_integer(total as u64)).round().to_integer() as usize;
        Ok(DatasetSpec::new(runons, total - runons, seed))
    }

    pub fn target_runon_fraction(&self) -> Fraction {
        let total = (self.runon_count + self.nonrunon_count) as u64;
        if total == 0 {
            Fraction::from_integer(0)
        } else {
            Fraction::new(self.runon_count as u64, total)
        }
    }
}

/// Parses `0.1`, `10%` or `1/10` into an exact fraction.
pub fn parse_fraction(s: &str) -> Result<Fraction, CorpusError> {
    let bad = || CorpusError::InvalidFraction(s.to_string());
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: u64 = n.trim().parse().map_err(|_| bad())?;
        let d: u64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Fraction::new(n, d));
    }
    let (digits, scale) = match s.strip_suffix('%') {
        Some(p) => (p.trim(), 100u64),
        None => (s, 1u64),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if frac.len() > 15 || (int.is_empty() && frac.is_empty()) {
        return Err(bad());
    }
    let int: u64 = if int.is_empty() {
        0
    } else {
        int.parse().map_err(|_| bad())?
    };
    let den = 10u64.pow(frac.len() as u32);
    let frac: u64 = if frac.is_empty() {
        0
    } else {
        frac.parse().map_err(|_| bad())?
    };
    Ok(Fraction::new(int * den + frac, den * scale))
}

const TERMINAL: [&str; 3] = [".", "!", "?"];

pub fn is_terminal_punctuation(surface: &str) -> bool {
    TERMINAL.contains(&surface)
}

/// Scheme or `www.` prefix, case-insensitive.
pub fn is_url(surface: &str) -> bool {
    let lower = surface.to_lowercase();
    ["http://", "https://", "ftp://", "www."]
        .iter()
        .any(|p| lower.starts_with(p))
}

/// Colons, semicolons, dashes used as punctuation, and ellipses. Hyphens
/// inside words do not count.
pub fn is_special_punctuation(surface: &str) -> bool {
    matches!(surface, ":" | ";" | "…")
        || surface.chars().all(|c| c == '.') && surface.len() >= 2
        || surface.chars().all(|c| matches!(c, '-' | '–' | '—'))
}

/// True for sentences of 5–50 tokens without URLs or special punctuation.
pub fn is_clean_sentence(s: &AnnotatedSentence) -> bool {
    (MIN_TOKENS..=MAX_TOKENS).contains(&s.len())
        && s.tokens()
            .iter()
            .all(|t| !is_url(t.surface()) && !is_special_punctuation(t.surface()))
}

/// Whether two adjacent sentences may be fused into an artificial run-on.
pub fn is_candidate_pair(a: &AnnotatedSentence, b: &AnnotatedSentence) -> bool {
    is_clean_sentence(a) && is_clean_sentence(b)
}

/// Decides whether a sentence-initial word is a proper noun when POS tags are
/// missing: the word counts as proper if its lowercase form never occurs
/// mid-sentence anywhere in the corpus.
#[derive(Debug, Clone, Default)]
pub struct ProperNounLexicon {
    lowercase_mid_sentence: HashSet<String>,
}

impl ProperNounLexicon {
    pub fn from_sentences<'a>(sentences: impl IntoIterator<Item = &'a AnnotatedSentence>) -> Self {
        let mut lowercase_mid_sentence = HashSet::new();
        for s in sentences {
            for t in &s.tokens()[1..] {
                let w = t.surface();
                if w.chars().any(char::is_alphabetic) && w == w.to_lowercase() {
                    lowercase_mid_sentence.insert(w.to_string());
                }
            }
        }
        ProperNounLexicon { lowercase_mid_sentence }
    }

    pub fn is_proper(&self, surface: &str) -> bool {
        !self.lowercase_mid_sentence.contains(&surface.to_lowercase())
    }
}

fn keeps_case(token: &Token, lexicon: Option<&ProperNounLexicon>) -> bool {
    // The pronoun "I" is tagged PRP but is never lowercased.
    if token.surface() == "I" {
        return true;
    }
    match token.pos() {
        Some(tag) => tag == "NNP" || tag == "NNPS",
        None => lexicon.is_some_and(|lx| lx.is_proper(token.surface())),
    }
}

/// Fuses `a` and `b` into one run-on, using POS tags for the proper-noun test.
pub fn fuse(a: &AnnotatedSentence, b: &AnnotatedSentence) -> Result<LabeledSequence, CorpusError> {
    fuse_with(a, b, None)
}

/// Like [`fuse`], consulting `lexicon` when the first word of `b` is untagged.
pub fn fuse_with(
    a: &AnnotatedSentence,
    b: &AnnotatedSentence,
    lexicon: Option<&ProperNounLexicon>,
) -> Result<LabeledSequence, CorpusError> {
    let last = a.tokens().last().expect("sentences are non-empty");
    if !is_terminal_punctuation(last.surface()) || a.len() < 2 {
        return Err(CorpusError::MissingTerminalPunctuation(a.text()));
    }
    let kept = a.len() - 1;
    let mut tokens: Vec<Token> = a.tokens()[..kept].to_vec();
    let first = &b.tokens()[0];
    let first_fused = if keeps_case(first, lexicon) {
        first.clone()
    } else {
        first.with_surface(lowercase_first(first.surface()))
    };
    tokens.push(first_fused.clone());
    tokens.extend_from_slice(&b.tokens()[1..]);

    let parse = match (a.parse(), b.parse()) {
        (Some(pa), Some(pb)) => ParseTree::join_without_final_leaf(pa, pb).map(|mut t| {
            t.set_leaf(kept, first_fused.surface());
            t
        }),
        _ => None,
    };
    let source_id = format!("{}+{}", a.source_id(), b.source_id());
    let sentence = AnnotatedSentence::new(tokens, parse, source_id)?;
    let mut labels = vec![GapLabel::Space; sentence.len()];
    labels[kept - 1] = GapLabel::Period;
    Ok(LabeledSequence::new(sentence, labels)?)
}

/// All-SPACE labeling of a clean sentence.
pub fn label_negative(a: &AnnotatedSentence) -> LabeledSequence {
    LabeledSequence::negative(a.clone())
}

/// Splits a labeled sequence at its PERIOD gaps, restoring the period token
/// and the capitalization of each following token.
///
/// On artificial run-ons whose first sentence ended in `.`, this recovers the
/// original sentence pair exactly.
pub fn split_at_periods(seq: &LabeledSequence) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    let mut capitalize_next = false;
    for (tok, &label) in seq.sentence().tokens().iter().zip(seq.labels()) {
        let w = if capitalize_next {
            crate::sentence::uppercase_first(tok.surface())
        } else {
            tok.surface().to_string()
        };
        capitalize_next = false;
        out.last_mut().unwrap().push(w);
        if label == GapLabel::Period {
            out.last_mut().unwrap().push(".".to_string());
            out.push(Vec::new());
            capitalize_next = true;
        }
    }
    out
}

/// A pair is usable when it passes the candidate filter, the first sentence
/// ends in terminal punctuation and the second starts with a capital (so the
/// correction is invertible).
fn fusable(a: &AnnotatedSentence, b: &AnnotatedSentence) -> bool {
    is_candidate_pair(a, b)
        && is_terminal_punctuation(a.tokens().last().unwrap().surface())
        && b.tokens()[0].is_capitalized()
}

/// Samples run-ons and negatives from paragraphs of clean text.
///
/// Each source sentence is used at most once. Output order is a seeded
/// shuffle of both classes, so identical inputs always give identical output.
pub fn build_dataset(
    paragraphs: &[Vec<AnnotatedSentence>],
    spec: &DatasetSpec,
) -> Result<Vec<LabeledSequence>, CorpusError> {
    let needs_lexicon = paragraphs.iter().flatten().any(|s| s.tokens()[0].pos().is_none());
    let lexicon = needs_lexicon.then(|| ProperNounLexicon::from_sentences(paragraphs.iter().flatten()));

    // (paragraph, index of first sentence)
    let mut pairs: Vec<(usize, usize)> = paragraphs
        .par_iter()
        .enumerate()
        .map(|(p, para)| {
            (0..para.len().saturating_sub(1))
                .filter(|&i| fusable(&para[i], &para[i + 1]))
                .map(|i| (p, i))
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    let mut rng = rng_for(spec.seed, streams::CORPUS);
    pairs.shuffle(&mut rng);

    let mut used: HashSet<(usize, usize)> = HashSet::new();
    let mut chosen = Vec::with_capacity(spec.runon_count);
    for &(p, i) in &pairs {
        if chosen.len() == spec.runon_count {
            break;
        }
        if used.contains(&(p, i)) || used.contains(&(p, i + 1)) {
            continue;
        }
        used.insert((p, i));
        used.insert((p, i + 1));
        chosen.push((p, i));
    }
    let available_runons = chosen.len();

    let mut singles: Vec<(usize, usize)> = paragraphs
        .iter()
        .enumerate()
        .flat_map(|(p, para)| (0..para.len()).map(move |i| (p, i)))
        .filter(|&(p, i)| !used.contains(&(p, i)) && is_clean_sentence(&paragraphs[p][i]))
        .collect();
    singles.shuffle(&mut rng);

    if available_runons < spec.runon_count || singles.len() < spec.nonrunon_count {
        return Err(CorpusError::InsufficientCorpus {
            wanted_runons: spec.runon_count,
            available_runons,
            wanted_negatives: spec.nonrunon_count,
            available_negatives: singles.len(),
        });
    }

    let mut out = Vec::with_capacity(spec.runon_count + spec.nonrunon_count);
    for &(p, i) in &chosen {
        out.push(fuse_with(&paragraphs[p][i], &paragraphs[p][i + 1], lexicon.as_ref())?);
    }
    for &(p, i) in &singles[..spec.nonrunon_count] {
        out.push(label_negative(&paragraphs[p][i]));
    }
    out.shuffle(&mut rng);
    Ok(out)
}

/// Uniformly subsamples run-ons so they make up `target` of the output.
/// Negatives are all kept and the input order is preserved.
///
/// The run-on count is `round(target * negatives / (1 - target))`, computed
/// exactly, so the achieved fraction is within one sentence of the target.
pub fn downsample_runons(
    data: Vec<LabeledSequence>,
    target: Fraction,
    seed: u64,
) -> Result<Vec<LabeledSequence>, CorpusError> {
    let runons = data.iter().filter(|s| s.is_runon()).count() as u64;
    let negatives = data.len() as u64 - runons;
    if *target.numer() == 0 || target > Fraction::from_integer(1) || data.is_empty() {
        return Err(CorpusError::InvalidFraction(target.to_string()));
    }
    let current = Fraction::new(runons, runons + negatives);
    if target > current {
        return Err(CorpusError::FractionTooHigh { target, current });
    }
    let keep = if target == Fraction::from_integer(1) {
        runons
    } else {
        let (p, q) = (*target.numer() as u128, *target.denom() as u128);
        let n = negatives as u128;
        // round-half-up of p*n / (q - p)
        (((2 * p * n) + (q - p)) / (2 * (q - p))).min(runons as u128) as u64
    };

    let mut idx: Vec<usize> = data
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_runon())
        .map(|(i, _)| i)
        .collect();
    let mut rng = rng_for(seed, streams::DOWNSAMPLE);
    idx.shuffle(&mut rng);
    let kept: HashSet<usize> = idx.into_iter().take(keep as usize).collect();
    Ok(data
        .into_iter()
        .enumerate()
        .filter(|(i, s)| !s.is_runon() || kept.contains(i))
        .map(|(_, s)| s)
        .collect())
}

/// Run-on and negative counts of a labeled collection.
pub fn class_counts(data: &[LabeledSequence]) -> (usize, usize) {
    let runons = data.iter().filter(|s| s.is_runon()).count();
    (runons, data.len() - runons)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sent(text: &str) -> AnnotatedSentence {
        AnnotatedSentence::from_text(text).unwrap()
    }

    fn tagged(words: &str, tags: &str) -> AnnotatedSentence {
        AnnotatedSentence::from_tagged(words, tags).unwrap()
    }

    #[test]
    fn candidate_filter() {
        let seven = sent("the cat sat on the mat .");
        let twelve = sent("it was a very warm day and the sun was out .");
        assert!(is_candidate_pair(&seven, &twelve));
        let four = sent("it rained hard .");
        assert!(!is_candidate_pair(&four, &twelve));
        let url = sent("see http://x.com for the details .");
        assert!(!is_candidate_pair(&url, &twelve));
        assert!(!is_candidate_pair(
            &twelve,
            &sent("see WWW.example.org for the details .")
        ));
        for special in [":", ";", "--", "—", "...", "…", "-"] {
            let s = sent(&format!("one two {special} three four ."));
            assert!(!is_candidate_pair(&s, &twelve), "{special}");
        }
        assert!(is_candidate_pair(&sent("a well-known writer spoke today ."), &twelve));
        let fifty_one = sent(&"w ".repeat(51));
        assert!(!is_candidate_pair(&fifty_one, &twelve));
        let fifty = sent(&"w ".repeat(50));
        assert!(is_candidate_pair(&fifty, &twelve));
    }

    #[test]
    fn fuse_life_expectancy_pair() {
        let a = sent("This shows the rising of life expectancies .");
        let b = sent("It is an achievement and it is also a challenge .");
        let fused = fuse(&a, &b).unwrap();
        assert_eq!(
            fused.to_slash_notation(),
            "This/S shows/S the/S rising/S of/S life/S expectancies/P it/S is/S an/S \
             achievement/S and/S it/S is/S also/S a/S challenge/S ./S"
        );
        assert!(fused.is_runon());
        assert_eq!(fused.period_positions().count(), 1);
    }

    #[test]
    fn proper_nouns_keep_case() {
        let a = tagged("He met Mary .", "PRP VBD NNP .");
        let b = tagged("Mary left .", "NNP VBD .");
        let fused = fuse(&a, &b).unwrap();
        assert_eq!(fused.sentence().text(), "He met Mary Mary left .");
        assert_eq!(fused.labels()[2], GapLabel::Period);

        let b = tagged("She left .", "PRP VBD .");
        assert_eq!(fuse(&a, &b).unwrap().sentence().text(), "He met Mary she left .");
        let b = tagged("I left .", "PRP VBD .");
        assert_eq!(fuse(&a, &b).unwrap().sentence().text(), "He met Mary I left .");
    }

    #[test]
    fn lexicon_fallback_for_untagged_text() {
        let corpus = [sent("we saw Mary and the dog ."), sent("The dog ran off .")];
        let lx = ProperNounLexicon::from_sentences(&corpus);
        assert!(lx.is_proper("Mary"));
        assert!(!lx.is_proper("The"));
        let a = sent("He met Mary .");
        let fused = fuse_with(&a, &sent("Mary left ."), Some(&lx)).unwrap();
        assert_eq!(fused.sentence().text(), "He met Mary Mary left .");
        let fused = fuse_with(&a, &sent("The dog left ."), Some(&lx)).unwrap();
        assert_eq!(fused.sentence().text(), "He met Mary the dog left .");
    }

    #[test]
    fn fuse_requires_terminal_punctuation() {
        let a = sent("no period at the end");
        assert!(matches!(
            fuse(&a, &sent("Then more .")),
            Err(CorpusError::MissingTerminalPunctuation(_))
        ));
        assert!(matches!(
            fuse(&sent("."), &sent("Then more .")),
            Err(CorpusError::MissingTerminalPunctuation(_))
        ));
        assert!(fuse(&sent("Really ?"), &sent("Yes .")).is_ok());
    }

    #[test]
    fn fuse_updates_parse_leaves() {
        let a = AnnotatedSentence::new(
            vec![Token::word("It"), Token::word("rained"), Token::word(".")],
            Some(ParseTree::parse("(ROOT (S (NP (PRP It)) (VP (VBD rained)) (. .)))").unwrap()),
            "a",
        )
        .unwrap();
        let b = AnnotatedSentence::new(
            vec![Token::word("We"), Token::word("left"), Token::word(".")],
            Some(ParseTree::parse("(ROOT (S (NP (PRP We)) (VP (VBD left)) (. .)))").unwrap()),
            "b",
        )
        .unwrap();
        let fused = fuse(&a, &b).unwrap();
        let tree = fused.sentence().parse().unwrap();
        assert_eq!(tree.leaves().collect::<Vec<_>>(), ["It", "rained", "we", "left", "."]);
    }

    #[test]
    fn negatives_are_all_space() {
        let one = label_negative(&sent("Hi"));
        assert_eq!(one.labels(), &[GapLabel::Space]);
        let s = label_negative(&sent("It is an achievement and it is also a challenge ."));
        assert!(s.labels().iter().all(|&l| l == GapLabel::Space));
        assert!(!s.is_runon());
    }

    #[test]
    fn fraction_parsing() {
        assert_eq!(parse_fraction("0.1").unwrap(), Fraction::new(1, 10));
        assert_eq!(parse_fraction("10%").unwrap(), Fraction::new(1, 10));
        assert_eq!(parse_fraction("11.46%").unwrap(), Fraction::new(1146, 10000));
        assert_eq!(parse_fraction("560/56910").unwrap(), Fraction::new(560, 56910));
        assert!(parse_fraction("x").is_err());
        assert!(parse_fraction("1/0").is_err());
    }

    #[test]
    fn spec_from_fraction() {
        let spec = DatasetSpec::with_fraction(4510, Fraction::new(61, 100), 1).unwrap();
        assert_eq!(spec.runon_count, 2751);
        assert_eq!(spec.target_runon_fraction(), Fraction::new(2751, 4510));
        assert!(DatasetSpec::with_fraction(10, Fraction::new(0, 1), 1).is_err());
    }

    fn synthetic(runons: usize, negatives: usize) -> Vec<LabeledSequence> {
        let ro = LabeledSequence::from_slash_notation("a/P b/S ./S").unwrap();
        let neg = LabeledSequence::from_slash_notation("a/S b/S ./S").unwrap();
        let mut v = vec![ro; runons];
        v.extend(std::iter::repeat_n(neg, negatives));
        v
    }

    #[test]
    fn downsample_fake_esl() {
        // FakeESL 5,600 + 56,350 -> FakeESL-1% 560 + 56,350.
        let data = synthetic(5600, 56350);
        let out = downsample_runons(data.clone(), Fraction::new(560, 56910), 3).unwrap();
        assert_eq!(class_counts(&out), (560, 56350));
        // A literal 1% target gives round(56350 / 99) = 569.
        let out = downsample_runons(data, Fraction::new(1, 100), 3).unwrap();
        assert_eq!(class_counts(&out), (569, 56350));
    }

    #[test]
    fn downsample_identity_at_current_fraction() {
        let data = synthetic(28232, 218076);
        let out = downsample_runons(data.clone(), Fraction::new(28232, 246308), 3).unwrap();
        assert_eq!(out, data);
    }

    #[test]
    fn downsample_rejects_high_target() {
        let data = synthetic(10, 90);
        assert!(matches!(
            downsample_runons(data.clone(), Fraction::new(1, 5), 0),
            Err(CorpusError::FractionTooHigh { .. })
        ));
        assert!(matches!(
            downsample_runons(data, Fraction::new(0, 1), 0),
            Err(CorpusError::InvalidFraction(_))
        ));
    }

    #[test]
    fn split_recovers_pair() {
        let a = sent("But the illiterate will not stay illiterate always .");
        let b = sent("If they put an effort they can still develop .");
        let fused = fuse(&a, &b).unwrap();
        let parts = split_at_periods(&fused);
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].join(" "), a.text());
        assert_eq!(parts[1].join(" "), b.text());
    }
}
