#![doc = include_str!("../../../book/src/introduction.md")]

pub mod corpus;
pub mod crf;
pub mod eval;
pub mod ngram;
pub mod seed;
pub mod sentence;
pub mod seq2seq;
pub mod toy;
pub mod tree;

pub use sentence::{AnnotatedSentence, GapLabel, LabeledSequence, Token};
pub use tree::ParseTree;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/data.md")]
    struct Data;
    #[doc = include_str!("../../../book/src/language-model.md")]
    struct LanguageModel;
    #[doc = include_str!("../../../book/src/crf.md")]
    struct Crf;
    #[doc = include_str!("../../../book/src/seq2seq.md")]
    struct Seq2Seq;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    struct Evaluation;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
