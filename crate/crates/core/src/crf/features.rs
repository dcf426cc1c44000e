//! Per-gap feature extraction.
//!
//! Every gap gets one value for each template in [`templates`], in order; a
//! template id is its index. Values are opaque strings and each
//! `(template, value)` pair becomes an indicator feature in the CRF.

use std::fmt;
use std::sync::OnceLock;

use crate::ngram::{KgramFlag, NgramModel};
use crate::sentence::AnnotatedSentence;

pub const BOS: &str = "BOS";
pub const EOS: &str = "EOS";
pub const NO_PARSE: &str = "noparse";
pub const NO_LM: &str = "nolm";
pub const NO_TAG: &str = "_";

/// Offsets of the context window relative to `tok_i`: `i-2 ..= j+2`.
const WINDOW: [isize; 6] = [-2, -1, 0, 1, 2, 3];

fn offset_name(o: isize) -> String {
    if o > 0 {
        format!("+{o}")
    } else {
        o.to_string()
    }
}

fn build_templates() -> Vec<String> {
    let mut t = Vec::new();
    for kind in ["w", "t"] {
        for &o in &WINDOW {
            t.push(format!("{kind}[{}]", offset_name(o)));
        }
        for n in 2..=3 {
            for start in 0..=WINDOW.len() - n {
                let parts: Vec<String> = WINDOW[start..start + n]
                    .iter()
                    .map(|&o| format!("{kind}[{}]", offset_name(o)))
                    .collect();
                t.push(parts.join("|"));
            }
        }
    }
    for name in [
        "cap[0]",
        "cap[+1]",
        "cap[0]|cap[+1]",
        "remaining",
        "position",
        "kgram1",
        "kgram2",
        "kgram3",
        "ppl_drop",
        "hua_left",
        "hua_right",
        "hua_kind",
        "bias",
    ] {
        t.push(name.to_string());
    }
    t
}

/// Template names in column order.
pub fn templates() -> &'static [String] {
    static T: OnceLock<Vec<String>> = OnceLock::new();
    T.get_or_init(build_templates)
}

/// Feature values for one gap, one per template.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureVector {
    values: Vec<String>,
}

impl FeatureVector {
    pub fn new(values: Vec<String>) -> Self {
        FeatureVector { values }
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    /// `(template id, value)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &str)> + '_ {
        self.values.iter().enumerate().map(|(i, v)| (i, v.as_str()))
    }

    pub fn get(&self, template: &str) -> Option<&str> {
        let id = templates().iter().position(|t| t == template)?;
        self.values.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl fmt::Display for FeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.values.join("\t"))
    }
}

/// The space between `tok_i` and `tok_j = tok_{i+1}`.
#[derive(Debug, Clone, Copy)]
pub struct GapContext<'a> {
    pub sentence: &'a AnnotatedSentence,
    pub i: usize,
}

impl<'a> GapContext<'a> {
    pub fn new(sentence: &'a AnnotatedSentence, i: usize) -> Option<Self> {
        (i + 1 < sentence.len()).then_some(GapContext { sentence, i })
    }

    pub fn j(&self) -> usize {
        self.i + 1
    }

    pub fn n(&self) -> usize {
        self.sentence.len()
    }

    /// Tokens after the gap, `N - j`.
    pub fn remaining(&self) -> usize {
        self.n() - self.j()
    }

    /// Share of the sentence after the gap, `(N - j) / N`.
    pub fn fraction_following(&self) -> f64 {
        self.remaining() as f64 / self.n() as f64
    }

    /// One-decimal bucket of `j / N`, the share before the gap. This is the
    /// value printed in published feature dumps (0.0, 0.0, 0.1 for the first
    /// three gaps of a 27-token sentence).
    pub fn position_bucket(&self) -> String {
        let tenths = (10 * self.j()) / self.n();
        format!("{:.1}", tenths as f64 / 10.0)
    }
}

/// Language-model flags for a whole sentence, computed once.
struct LmFlags {
    ppl: Vec<bool>,
    kgram: Vec<[KgramFlag; 3]>,
}

fn lm_flags(sentence: &AnnotatedSentence, lm: &NgramModel) -> LmFlags {
    let words = sentence.surfaces();
    let gaps = words.len().saturating_sub(1);
    LmFlags {
        ppl: lm.perplexity_decrease_flags(&words),
        kgram: (0..gaps).map(|g| lm.kgram_flags(&words, g)).collect(),
    }
}

fn window_values(sentence: &AnnotatedSentence, i: usize) -> ([String; 6], [String; 6]) {
    let n = sentence.len() as isize;
    let tokens = sentence.tokens();
    let at = |o: isize, pos: bool| -> String {
        let p = i as isize + o;
        if p < 0 {
            BOS.to_string()
        } else if p >= n {
            EOS.to_string()
        } else {
            let t = &tokens[p as usize];
            if pos {
                t.pos().unwrap_or(NO_TAG).to_string()
            } else {
                // Case lives in the cap flags, as in published dumps.
                t.surface().to_lowercase()
            }
        }
    };
    (WINDOW.map(|o| at(o, false)), WINDOW.map(|o| at(o, true)))
}

fn cap(b: bool) -> &'static str {
    if b {
        "True"
    } else {
        "False"
    }
}

fn gap_features(ctx: GapContext<'_>, flags: Option<(&[KgramFlag; 3], bool)>) -> FeatureVector {
    let (words, tags) = window_values(ctx.sentence, ctx.i);
    let mut v = Vec::with_capacity(templates().len());
    for col in [&words, &tags] {
        v.extend(col.iter().cloned());
        for n in 2..=3 {
            for start in 0..=col.len() - n {
                v.push(col[start..start + n].join("|"));
            }
        }
    }
    let tokens = ctx.sentence.tokens();
    let (ci, cj) = (tokens[ctx.i].is_capitalized(), tokens[ctx.j()].is_capitalized());
    v.push(cap(ci).into());
    v.push(cap(cj).into());
    v.push(format!("{}|{}", cap(ci), cap(cj)));
    v.push(ctx.remaining().to_string());
    v.push(ctx.position_bucket());
    match flags {
        Some((k, ppl)) => {
            v.extend(k.iter().map(|f| f.as_str().to_string()));
            v.push(if ppl { "1" } else { "0" }.into());
        }
        None => v.extend(std::iter::repeat_n(NO_LM.to_string(), 4)),
    }
    match ctx.sentence.parse().map(|t| t.highest_uncommon_ancestors(ctx.i)) {
        Some(Ok(h)) => {
            let kind = h.pair_kind();
            v.push(h.left);
            v.push(h.right);
            v.push(kind);
        }
        _ => v.extend(std::iter::repeat_n(NO_PARSE.to_string(), 3)),
    }
    v.push("1".into());
    debug_assert_eq!(v.len(), templates().len());
    FeatureVector::new(v)
}

/// Features for a single gap.
pub fn extract_features(ctx: GapContext<'_>, lm: Option<&NgramModel>) -> FeatureVector {
    match lm {
        Some(lm) => {
            let words = ctx.sentence.surfaces();
            let ppl = lm.perplexity_decrease_flag(&words, ctx.i);
            let k = lm.kgram_flags(&words, ctx.i);
            gap_features(ctx, Some((&k, ppl)))
        }
        None => gap_features(ctx, None),
    }
}

/// Features for every gap of a sentence (`len - 1` vectors). Equal to calling
/// [`extract_features`] per gap but scores the sentence with the LM once.
pub fn featurize(sentence: &AnnotatedSentence, lm: Option<&NgramModel>) -> Vec<FeatureVector> {
    let flags = lm.map(|lm| lm_flags(sentence, lm));
    (0..sentence.len().saturating_sub(1))
        .map(|i| {
            let ctx = GapContext { sentence, i };
            gap_features(ctx, flags.as_ref().map(|f| (&f.kgram[i], f.ppl[i])))
        })
        .collect()
}
