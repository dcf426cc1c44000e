//! Tokens, annotated sentences and per-token gap labels.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::ParseTree;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SentenceError {
    #[error("empty token")]
    EmptyToken,
    #[error("token {0:?} contains whitespace")]
    Whitespace(String),
    #[error("sentence has no tokens")]
    NoTokens,
    #[error("parse has {leaves} leaves but the sentence has {tokens} tokens")]
    LeafCount { leaves: usize, tokens: usize },
    #[error("parse leaf {index} is {leaf:?} but token is {token:?}")]
    LeafMismatch { index: usize, leaf: String, token: String },
    #[error("{labels} labels for {tokens} tokens")]
    LabelCount { labels: usize, tokens: usize },
    #[error("the final token must be labeled SPACE")]
    FinalPeriod,
}

/// One token of running text.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    surface: String,
    pos: Option<String>,
    is_capitalized: bool,
}

impl Token {
    pub fn new(surface: impl Into<String>, pos: Option<String>) -> Result<Self, SentenceError> {
        let surface = surface.into();
        if surface.is_empty() {
            return Err(SentenceError::EmptyToken);
        }
        if surface.chars().any(char::is_whitespace) {
            return Err(SentenceError::Whitespace(surface));
        }
        let is_capitalized = starts_uppercase(&surface);
        Ok(Token {
            surface,
            pos: pos.filter(|p| !p.is_empty()),
            is_capitalized,
        })
    }

    /// Shorthand for an untagged token; panics on empty or whitespace input.
    pub fn word(surface: &str) -> Self {
        Token::new(surface, None).expect("invalid token")
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn pos(&self) -> Option<&str> {
        self.pos.as_deref()
    }

    pub fn is_capitalized(&self) -> bool {
        self.is_capitalized
    }

    /// Same token with a new surface form; the POS tag is kept.
    pub(crate) fn with_surface(&self, surface: String) -> Self {
        Token {
            is_capitalized: starts_uppercase(&surface),
            surface,
            pos: self.pos.clone(),
        }
    }
}

pub(crate) fn starts_uppercase(s: &str) -> bool {
    s.chars().next().is_some_and(char::is_uppercase)
}

pub(crate) fn lowercase_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

pub(crate) fn uppercase_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// A tokenized sentence with optional POS tags and constituency parse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedSentence {
    tokens: Vec<Token>,
    parse: Option<ParseTree>,
    source_id: String,
}

impl AnnotatedSentence {
    pub fn new(
        tokens: Vec<Token>,
        parse: Option<ParseTree>,
        source_id: impl Into<String>,
    ) -> Result<Self, SentenceError> {
        if tokens.is_empty() {
            return Err(SentenceError::NoTokens);
        }
        if let Some(tree) = &parse {
            if tree.leaf_count() != tokens.len() {
                return Err(SentenceError::LeafCount {
                    leaves: tree.leaf_count(),
                    tokens: tokens.len(),
                });
            }
            for (index, (leaf, tok)) in tree.leaves().zip(&tokens).enumerate() {
                if leaf != tok.surface() {
                    return Err(SentenceError::LeafMismatch {
                        index,
                        leaf: leaf.to_string(),
                        token: tok.surface().to_string(),
                    });
                }
            }
        }
        Ok(AnnotatedSentence {
            tokens,
            parse,
            source_id: source_id.into(),
        })
    }

    /// Untagged, unparsed sentence from whitespace-separated text.
    pub fn from_text(text: &str) -> Result<Self, SentenceError> {
        let tokens = text
            .split_whitespace()
            .map(|w| Token::new(w, None))
            .collect::<Result<Vec<_>, _>>()?;
        AnnotatedSentence::new(tokens, None, "")
    }

    /// Tagged sentence from parallel word and tag lists.
    pub fn from_tagged(words: &str, tags: &str) -> Result<Self, SentenceError> {
        let tags: Vec<&str> = tags.split_whitespace().collect();
        let tokens = words
            .split_whitespace()
            .enumerate()
            .map(|(i, w)| Token::new(w, tags.get(i).map(|t| t.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        AnnotatedSentence::new(tokens, None, "")
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn parse(&self) -> Option<&ParseTree> {
        self.parse.as_ref()
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn surfaces(&self) -> Vec<&str> {
        self.tokens.iter().map(Token::surface).collect()
    }

    /// Drops the parse tree, keeping tokens and tags.
    pub fn without_parse(&self) -> Self {
        AnnotatedSentence {
            tokens: self.tokens.clone(),
            parse: None,
            source_id: self.source_id.clone(),
        }
    }

    /// Space-joined surface forms.
    pub fn text(&self) -> String {
        self.surfaces().join(" ")
    }
}

/// What follows a token: nothing (a space) or a missing sentence boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GapLabel {
    Space,
    Period,
}

impl GapLabel {
    pub const ALL: [GapLabel; 2] = [GapLabel::Space, GapLabel::Period];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            GapLabel::Space
        } else {
            GapLabel::Period
        }
    }

    /// `S` or `P`.
    pub fn code(self) -> char {
        match self {
            GapLabel::Space => 'S',
            GapLabel::Period => 'P',
        }
    }

    /// Accepts `S`/`P` and the long forms `SPACE`/`PERIOD`.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "S" | "SPACE" => Some(GapLabel::Space),
            "P" | "PERIOD" => Some(GapLabel::Period),
            _ => None,
        }
    }
}

impl fmt::Display for GapLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GapLabel::Space => f.write_str("SPACE"),
            GapLabel::Period => f.write_str("PERIOD"),
        }
    }
}

/// A sentence with one gap label per token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSequence {
    sentence: AnnotatedSentence,
    labels: Vec<GapLabel>,
    is_runon: bool,
}

impl LabeledSequence {
    pub fn new(sentence: AnnotatedSentence, labels: Vec<GapLabel>) -> Result<Self, SentenceError> {
        if labels.len() != sentence.len() {
            return Err(SentenceError::LabelCount {
                labels: labels.len(),
                tokens: sentence.len(),
            });
        }
        if labels.last() == Some(&GapLabel::Period) {
            return Err(SentenceError::FinalPeriod);
        }
        let is_runon = labels.contains(&GapLabel::Period);
        Ok(LabeledSequence {
            sentence,
            labels,
            is_runon,
        })
    }

    /// All-SPACE labeling.
    pub fn negative(sentence: AnnotatedSentence) -> Self {
        let labels = vec![GapLabel::Space; sentence.len()];
        LabeledSequence {
            sentence,
            labels,
            is_runon: false,
        }
    }

    /// Parses `word/S word/P ...` notation.
    pub fn from_slash_notation(text: &str) -> Result<Self, SentenceError> {
        let mut tokens = Vec::new();
        let mut labels = Vec::new();
        for item in text.split_whitespace() {
            let (w, l) = item.rsplit_once('/').ok_or(SentenceError::EmptyToken)?;
            tokens.push(Token::new(w, None)?);
            labels.push(GapLabel::parse(l).ok_or(SentenceError::EmptyToken)?);
        }
        LabeledSequence::new(AnnotatedSentence::new(tokens, None, "")?, labels)
    }

    pub fn sentence(&self) -> &AnnotatedSentence {
        &self.sentence
    }

    pub fn labels(&self) -> &[GapLabel] {
        &self.labels
    }

    pub fn is_runon(&self) -> bool {
        self.is_runon
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Indices of tokens followed by a missing period.
    pub fn period_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == GapLabel::Period)
            .map(|(i, _)| i)
    }

    /// Same sentence, new labels.
    pub fn relabel(&self, labels: Vec<GapLabel>) -> Result<Self, SentenceError> {
        LabeledSequence::new(self.sentence.clone(), labels)
    }

    /// `word/S word/P ...` rendering.
    pub fn to_slash_notation(&self) -> String {
        self.sentence
            .tokens()
            .iter()
            .zip(&self.labels)
            .map(|(t, l)| format!("{}/{}", t.surface(), l.code()))
            .collect::<Vec<_>>()
            .join(" ")
    }
}
