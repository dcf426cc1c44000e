//! Text formats for annotated corpora and labeled sequences.
//!
//! Corpus: one sentence per line, `tokens<TAB>tags` where both columns are
//! space-separated and the tag column is optional; a blank line separates
//! paragraphs. Trees come from an optional parallel file holding one
//! bracketed tree per sentence (`_` when a sentence has none).
//!
//! Labeled sequences: one token per line as `surface<TAB>POS<TAB>label` with
//! the label `S` or `P` (`_` for a missing tag), blank line between
//! sequences.

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::sentence::{AnnotatedSentence, GapLabel, LabeledSequence, Token};
use crate::tree::ParseTree;

#[derive(Debug, Error)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

impl FormatError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        FormatError {
            line,
            message: message.into(),
        }
    }
}

impl From<(usize, std::io::Error)> for FormatError {
    fn from((line, e): (usize, std::io::Error)) -> Self {
        FormatError::new(line, e.to_string())
    }
}

/// Reads bracketed trees, one per non-blank line; `_` marks a missing tree.
pub fn read_trees(reader: impl BufRead) -> Result<Vec<Option<ParseTree>>, FormatError> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| (n + 1, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "_" {
            out.push(None);
        } else {
            out.push(Some(
                ParseTree::parse(line).map_err(|e| FormatError::new(n + 1, e.to_string()))?,
            ));
        }
    }
    Ok(out)
}

pub fn write_trees<'a>(
    mut writer: impl Write,
    trees: impl IntoIterator<Item = Option<&'a ParseTree>>,
) -> std::io::Result<()> {
    for t in trees {
        match t {
            Some(t) => writeln!(writer, "{t}")?,
            None => writeln!(writer, "_")?,
        }
    }
    Ok(())
}

/// Reads paragraphs of sentences. When `trees` is given it must hold exactly
/// one entry per sentence.
pub fn read_corpus(
    reader: impl BufRead,
    trees: Option<Vec<Option<ParseTree>>>,
) -> Result<Vec<Vec<AnnotatedSentence>>, FormatError> {
    let mut paragraphs: Vec<Vec<AnnotatedSentence>> = Vec::new();
    let mut current = Vec::new();
    let mut trees = trees.map(|t| t.into_iter());
    let mut sentence_no = 0usize;
    let mut last_line = 0;
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        last_line = line_no;
        let line = line.map_err(|e| (line_no, e))?;
        if line.trim().is_empty() {
            if !current.is_empty() {
                paragraphs.push(std::mem::take(&mut current));
            }
            continue;
        }
        let (words, tags) = match line.split_once('\t') {
            Some((w, t)) => (w, Some(t)),
            None => (line.as_str(), None),
        };
        let words: Vec<&str> = words.split_whitespace().collect();
        let tags: Option<Vec<&str>> = tags.map(|t| t.split_whitespace().collect());
        if let Some(tags) = &tags {
            if tags.len() != words.len() {
                return Err(FormatError::new(
                    line_no,
                    format!("{} tokens but {} tags", words.len(), tags.len()),
                ));
            }
        }
        let tokens = words
            .iter()
            .enumerate()
            .map(|(i, w)| Token::new(*w, tags.as_ref().map(|t| t[i].to_string())))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| FormatError::new(line_no, e.to_string()))?;
        let parse = match trees.as_mut() {
            Some(it) => it.next().ok_or_else(|| {
                FormatError::new(line_no, format!("tree file ends before sentence {}", sentence_no + 1))
            })?,
            None => None,
        };
        let sentence = AnnotatedSentence::new(tokens, parse, format!("L{line_no}"))
            .map_err(|e| FormatError::new(line_no, e.to_string()))?;
        current.push(sentence);
        sentence_no += 1;
    }
    if !current.is_empty() {
        paragraphs.push(current);
    }
    if let Some(mut it) = trees {
        if it.next().is_some() {
            return Err(FormatError::new(
                last_line,
                format!("tree file has more entries than the {sentence_no} sentences"),
            ));
        }
    }
    Ok(paragraphs)
}

pub fn write_corpus(mut writer: impl Write, paragraphs: &[Vec<AnnotatedSentence>]) -> std::io::Result<()> {
    for (i, para) in paragraphs.iter().enumerate() {
        if i > 0 {
            writeln!(writer)?;
        }
        for s in para {
            let words = s.surfaces().join(" ");
            if s.tokens().iter().all(|t| t.pos().is_some()) {
                let tags: Vec<&str> = s.tokens().iter().map(|t| t.pos().unwrap()).collect();
                writeln!(writer, "{words}\t{}", tags.join(" "))?;
            } else {
                writeln!(writer, "{words}")?;
            }
        }
    }
    Ok(())
}

pub fn write_labeled<'a>(
    mut writer: impl Write,
    seqs: impl IntoIterator<Item = &'a LabeledSequence>,
) -> std::io::Result<()> {
    for (i, seq) in seqs.into_iter().enumerate() {
        if i > 0 {
            writeln!(writer)?;
        }
        for (t, l) in seq.sentence().tokens().iter().zip(seq.labels()) {
            writeln!(writer, "{}\t{}\t{}", t.surface(), t.pos().unwrap_or("_"), l.code())?;
        }
    }
    Ok(())
}

/// Reads labeled sequences. The label column may be omitted (labels default
/// to `S`), which lets unlabeled text share the format. Trees, when given,
/// are attached one per sequence.
pub fn read_labeled(
    reader: impl BufRead,
    trees: Option<Vec<Option<ParseTree>>>,
) -> Result<Vec<LabeledSequence>, FormatError> {
    let mut out = Vec::new();
    let mut tokens = Vec::new();
    let mut labels = Vec::new();
    let mut start_line = 1;
    let mut trees = trees.map(|t| t.into_iter());

    let mut finish = |tokens: &mut Vec<Token>,
                      labels: &mut Vec<GapLabel>,
                      line: usize,
                      out: &mut Vec<LabeledSequence>|
     -> Result<(), FormatError> {
        if tokens.is_empty() {
            return Ok(());
        }
        let parse = match trees.as_mut() {
            Some(it) => it
                .next()
                .ok_or_else(|| FormatError::new(line, "tree file ends early"))?,
            None => None,
        };
        let s = AnnotatedSentence::new(std::mem::take(tokens), parse, format!("L{line}"))
            .map_err(|e| FormatError::new(line, e.to_string()))?;
        let seq = LabeledSequence::new(s, std::mem::take(labels)).map_err(|e| FormatError::new(line, e.to_string()))?;
        out.push(seq);
        Ok(())
    };

    let mut line_no = 0;
    for (n, line) in reader.lines().enumerate() {
        line_no = n + 1;
        let line = line.map_err(|e| (line_no, e))?;
        if line.trim().is_empty() {
            finish(&mut tokens, &mut labels, start_line, &mut out)?;
            start_line = line_no + 1;
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 2 || cols.len() > 3 {
            return Err(FormatError::new(
                line_no,
                format!("expected surface<TAB>POS<TAB>label, found {} columns", cols.len()),
            ));
        }
        let pos = (cols[1] != "_").then(|| cols[1].to_string());
        let tok = Token::new(cols[0], pos).map_err(|e| FormatError::new(line_no, e.to_string()))?;
        let label = match cols.get(2) {
            Some(l) => GapLabel::parse(l).ok_or_else(|| FormatError::new(line_no, format!("unknown label {l:?}")))?,
            None => GapLabel::Space,
        };
        tokens.push(tok);
        labels.push(label);
    }
    finish(&mut tokens, &mut labels, start_line, &mut out)?;
    if let Some(mut it) = trees {
        if it.next().is_some() {
            return Err(FormatError::new(line_no, "tree file has more entries than sequences"));
        }
    }
    Ok(out)
}
