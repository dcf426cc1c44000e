//! Mapping another system's corrected text back onto source gaps.

use crate::sentence::{AnnotatedSentence, GapLabel};

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Splits trailing terminal punctuation off a word: `"always."` gives
/// `["always", "."]`. Pure punctuation and abbreviation-free words are kept
/// whole.
pub fn split_terminal(token: &str) -> Vec<&str> {
    let stem = token.trim_end_matches(is_terminal);
    if stem.is_empty() || stem.len() == token.len() {
        vec![token]
    } else {
        vec![stem, &token[stem.len()..]]
    }
}

/// Labels for `source` implied by `corrected`: each terminal punctuation
/// token in `corrected` with no counterpart in `source` becomes a PERIOD at
/// the gap after the preceding aligned source token. Tokens are aligned by
/// a case-insensitive longest common subsequence.
pub fn align_corrected(source: &AnnotatedSentence, corrected: &str) -> Vec<GapLabel> {
    let src: Vec<(String, usize)> = source
        .tokens()
        .iter()
        .enumerate()
        .flat_map(|(i, t)| {
            split_terminal(t.surface())
                .into_iter()
                .map(move |p| (p.to_lowercase(), i))
        })
        .collect();
    let cor: Vec<String> = corrected
        .split_whitespace()
        .flat_map(split_terminal)
        .map(str::to_lowercase)
        .collect();
    let (n, m) = (src.len(), cor.len());
    // lcs[i][j]: LCS length of src[i..] and cor[j..].
    let mut lcs = vec![vec![0u32; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i][j] = if src[i].0 == cor[j] {
                lcs[i + 1][j + 1] + 1
            } else {
                lcs[i + 1][j].max(lcs[i][j + 1])
            };
        }
    }
    let mut matched_src: Vec<Option<usize>> = vec![None; m];
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if src[i].0 == cor[j] {
            matched_src[j] = Some(i);
            i += 1;
            j += 1;
        } else if lcs[i + 1][j] >= lcs[i][j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    let mut labels = vec![GapLabel::Space; source.len()];
    let mut last: Option<usize> = None;
    for (j, tok) in cor.iter().enumerate() {
        match matched_src[j] {
            Some(i) => last = Some(i),
            None if tok.chars().all(is_terminal) => {
                if let Some(i) = last {
                    let gap = src[i].1;
                    if gap + 1 < source.len() {
                        labels[gap] = GapLabel::Period;
                    }
                }
            }
            None => {}
        }
    }
    labels
}
