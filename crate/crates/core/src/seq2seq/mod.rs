//! Attention encoder-decoder gap labeler.
//!
//! A bidirectional LSTM reads the tokens; a unidirectional LSTM decoder with
//! additive attention emits one [`GapLabel`] per token, fed the previous
//! label at each step. [`fuse_output`] turns labels back into text.

mod checkpoint;
mod embeddings;
mod net;
mod params;
mod train;

use std::collections::HashMap;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sentence::{uppercase_first, AnnotatedSentence, GapLabel, LabeledSequence};
use net::{Encoded, Net};

pub use checkpoint::{load_model, read_model, save_model, write_model, CHECKPOINT_VERSION};
pub use embeddings::{read_embeddings, Embeddings};
pub use params::{Layout, TensorSpec};
pub use train::{gradient_check, split_validation, train_s2s, train_s2s_with_validation, EpochStats, TrainingReport};

pub const UNK: &str = "<unk>";

#[derive(Debug, Error)]
pub enum S2SError {
    #[error("empty input sequence")]
    EmptyInput,
    #[error("no training data")]
    NoData,
    #[error("{tokens} tokens but {labels} labels")]
    LengthMismatch { tokens: usize, labels: usize },
    #[error("token id {id} outside vocabulary of {size}")]
    UnknownId { id: u32, size: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("embedding dimension {found} does not match the model's {expected}")]
    EmbeddingSize { expected: usize, found: usize },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Model and training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct S2SConfig {
    pub hidden_size: usize,
    pub embedding_size: usize,
    pub label_embedding_size: usize,
    /// Relative positions beyond +-window share one attention bias.
    pub position_window: usize,
    pub vocab_size: usize,
    pub lowercase: bool,
    pub max_input_length: usize,
    pub dropout_rate: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub epochs: usize,
    /// Global gradient norm cap; 0 disables clipping.
    pub clip_norm: f64,
    /// Share of the data held out for validation by [`train_s2s`].
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for S2SConfig {
    fn default() -> Self {
        S2SConfig {
            hidden_size: 64,
            embedding_size: 64,
            label_embedding_size: 8,
            position_window: 3,
            vocab_size: 2000,
            lowercase: true,
            max_input_length: 100,
            dropout_rate: 0.2,
            batch_size: 32,
            learning_rate: 0.05,
            lr_decay: 0.5,
            epochs: 8,
            clip_norm: 5.0,
            validation_fraction: 0.1,
            seed: 7,
        }
    }
}

impl S2SConfig {
    /// The full-size setting: 1028 hidden units, 300-d embeddings, 100k words.
    pub fn full_size() -> Self {
        S2SConfig {
            hidden_size: 1028,
            embedding_size: 300,
            vocab_size: 100_000,
            dropout_rate: 0.5,
            batch_size: 128,
            learning_rate: 1e-4,
            ..S2SConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), S2SError> {
        let sizes = [
            ("hidden_size", self.hidden_size),
            ("embedding_size", self.embedding_size),
            ("label_embedding_size", self.label_embedding_size),
            ("vocab_size", self.vocab_size),
            ("max_input_length", self.max_input_length),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in sizes {
            if v == 0 {
                return Err(S2SError::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(S2SError::InvalidConfig(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(S2SError::InvalidConfig("learning_rate must be finite and >= 0".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(S2SError::InvalidConfig("lr_decay must be in (0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(S2SError::InvalidConfig("validation_fraction must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Word list with `<unk>` at id 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, u32>,
    lowercase: bool,
}

impl Vocab {
    /// Keeps the `max_size - 1` most frequent words (ties broken
    /// alphabetically) after `<unk>`.
    pub fn build<'a>(
        sentences: impl IntoIterator<Item = &'a AnnotatedSentence>,
        max_size: usize,
        lowercase: bool,
    ) -> Self {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for s in sentences {
            for t in s.tokens() {
                let w = if lowercase {
                    t.surface().to_lowercase()
                } else {
                    t.surface().to_string()
                };
                *counts.entry(w).or_insert(0) += 1;
            }
        }
        counts.remove(UNK);
        let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_size.saturating_sub(1));
        let words = std::iter::once(UNK.to_string())
            .chain(ranked.into_iter().map(|(w, _)| w))
            .collect();
        Self::from_words(words, lowercase)
    }

    /// `words[0]` must be `<unk>`.
    pub fn from_words(words: Vec<String>, lowercase: bool) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        Vocab {
            words,
            index,
            lowercase,
        }
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn lowercases(&self) -> bool {
        self.lowercase
    }

    pub fn id(&self, word: &str) -> u32 {
        let found = if self.lowercase {
            self.index.get(&word.to_lowercase())
        } else {
            self.index.get(word)
        };
        found.copied().unwrap_or(0)
    }

    pub fn ids(&self, sentence: &AnnotatedSentence) -> Vec<u32> {
        sentence.tokens().iter().map(|t| self.id(t.surface())).collect()
    }
}

/// Encoder output for one sequence.
#[derive(Debug, Clone)]
pub struct Encoding(Encoded<f32>);

impl Encoding {
    /// `n x 2H`: forward state then backward state for each token.
    pub fn states(&self) -> &Array2<f32> {
        &self.0.states
    }

    pub fn forward_states(&self) -> Array2<f32> {
        self.0.forward_states()
    }

    pub fn backward_states(&self) -> Array2<f32> {
        self.0.backward_states()
    }

    /// The decoder's initial state.
    pub fn summary(&self) -> &Array1<f32> {
        &self.0.summary
    }

    pub fn len(&self) -> usize {
        self.0.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Decoder output for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelOutput {
    /// `[p(SPACE), p(PERIOD)]` per token.
    pub probabilities: Vec<[f64; 2]>,
    pub labels: Vec<GapLabel>,
    /// Decode steps x labeled input length.
    pub attention: Array2<f64>,
    /// Tokens past `max_input_length` were copied through as SPACE.
    pub truncated: bool,
}

/// A trained (or freshly initialized) encoder-decoder.
#[derive(Debug, Clone)]
pub struct S2SModel {
    config: S2SConfig,
    vocab: Vocab,
    layout: Layout,
    params: Vec<f32>,
    report: Option<TrainingReport>,
}

impl S2SModel {
    /// Random initialization from `config.seed`.
    pub fn new(config: S2SConfig, vocab: Vocab) -> Result<Self, S2SError> {
        config.validate()?;
        if vocab.is_empty() {
            return Err(S2SError::InvalidConfig("empty vocabulary".into()));
        }
        let layout = Layout::new(&config, vocab.len());
        let mut rng = crate::seed::rng_for(config.seed, "s2s-init");
        let params = params::initialize(&layout, &config, &mut rng);
        Ok(S2SModel {
            config,
            vocab,
            layout,
            params,
            report: None,
        })
    }

    pub(crate) fn from_parts(
        config: S2SConfig,
        vocab: Vocab,
        params: Vec<f32>,
        report: Option<TrainingReport>,
    ) -> Result<Self, S2SError> {
        let layout = Layout::new(&config, vocab.len());
        if params.len() != layout.total() {
            return Err(S2SError::Checkpoint(format!(
                "{} parameters, layout needs {}",
                params.len(),
                layout.total()
            )));
        }
        Ok(S2SModel {
            config,
            vocab,
            layout,
            params,
            report,
        })
    }

    pub fn config(&self) -> &S2SConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn parameters(&self) -> &[f32] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [f32] {
        &mut self.params
    }

    pub fn tensor(&self, name: &str) -> Option<&[f32]> {
        let t = self.layout.get(name)?;
        Some(&self.params[t.offset..t.offset + t.len()])
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f32]> {
        let t = self.layout.get(name)?;
        let range = t.offset..t.offset + t.len();
        Some(&mut self.params[range])
    }

    pub fn report(&self) -> Option<&TrainingReport> {
        self.report.as_ref()
    }

    /// Copies vectors for every vocabulary word found in `emb`; returns how
    /// many rows were set.
    pub fn load_embeddings(&mut self, emb: &Embeddings) -> Result<usize, S2SError> {
        let e = self.config.embedding_size;
        if emb.dim() != e {
            return Err(S2SError::EmbeddingSize {
                expected: e,
                found: emb.dim(),
            });
        }
        let words = self.vocab.words().to_vec();
        let table = self.tensor_mut("embedding").expect("embedding tensor");
        let mut hits = 0;
        for (i, w) in words.iter().enumerate() {
            if let Some(v) = emb.get(w) {
                table[i * e..(i + 1) * e].copy_from_slice(v);
                hits += 1;
            }
        }
        Ok(hits)
    }

    fn net(&self) -> Net<'_, f32> {
        Net::new(&self.layout, &self.params, self.config.position_window)
    }

    fn check_ids(&self, ids: &[u32]) -> Result<(), S2SError> {
        if ids.is_empty() {
            return Err(S2SError::EmptyInput);
        }
        match ids.iter().find(|&&id| id as usize >= self.vocab.len()) {
            Some(&id) => Err(S2SError::UnknownId {
                id,
                size: self.vocab.len(),
            }),
            None => Ok(()),
        }
    }

    pub fn encode(&self, ids: &[u32]) -> Result<Encoding, S2SError> {
        self.check_ids(ids)?;
        Ok(Encoding(self.net().encode(ids, None)))
    }

    /// Greedy decoding; ties go to SPACE.
    pub fn decode_labels(&self, enc: &Encoding) -> LabelOutput {
        let dec = self.net().decode(&enc.0, None, None);
        let probabilities = dec
            .probabilities()
            .into_iter()
            .map(|[s, p]| [f64::from(s), f64::from(p)])
            .collect();
        LabelOutput {
            probabilities,
            labels: dec.labels.iter().map(|&l| GapLabel::from_index(l)).collect(),
            attention: dec.attention().mapv(f64::from),
            truncated: false,
        }
    }

    /// Labels a token-id sequence, truncating to `max_input_length`. The last
    /// token of the full input is always SPACE.
    pub fn label_ids(&self, ids: &[u32]) -> Result<LabelOutput, S2SError> {
        let max = self.config.max_input_length;
        let head = &ids[..ids.len().min(max)];
        let enc = self.encode(head)?;
        let mut out = self.decode_labels(&enc);
        if ids.len() > max {
            out.truncated = true;
            out.labels.resize(ids.len(), GapLabel::Space);
            out.probabilities.resize(ids.len(), [1.0, 0.0]);
        }
        *out.labels.last_mut().unwrap() = GapLabel::Space;
        Ok(out)
    }

    pub fn label_sentence(&self, sentence: &AnnotatedSentence) -> Result<LabelOutput, S2SError> {
        self.label_ids(&self.vocab.ids(sentence))
    }

    pub fn tag_sentence(&self, sentence: &AnnotatedSentence) -> Result<Vec<GapLabel>, S2SError> {
        Ok(self.label_sentence(sentence)?.labels)
    }

    /// Mean per-token cross-entropy of gold labels under teacher forcing,
    /// without dropout.
    pub fn mean_loss(&self, data: &[LabeledSequence]) -> Result<f64, S2SError> {
        let mut total = 0.0f64;
        let mut tokens = 0usize;
        let net = self.net();
        for seq in data {
            let (ids, gold) = self.training_pair(seq);
            if ids.is_empty() {
                continue;
            }
            total += f64::from(net.loss(&ids, &gold, None));
            tokens += ids.len();
        }
        if tokens == 0 {
            return Err(S2SError::NoData);
        }
        Ok(total / tokens as f64)
    }

    /// Truncated ids and label indices used for training.
    pub(crate) fn training_pair(&self, seq: &LabeledSequence) -> (Vec<u32>, Vec<usize>) {
        let n = seq.len().min(self.config.max_input_length);
        let ids = self.vocab.ids(seq.sentence())[..n].to_vec();
        let gold = seq.labels()[..n].iter().map(|l| l.index()).collect();
        (ids, gold)
    }

    /// Summed teacher-forced loss and its gradient over `batch`, in 64-bit
    /// arithmetic with dropout off. The gradient is laid out like
    /// [`S2SModel::parameters`].
    pub fn loss_and_gradient(&self, batch: &[(Vec<u32>, Vec<GapLabel>)]) -> Result<(f64, Vec<f64>), S2SError> {
        let p64: Vec<f64> = self.params.iter().map(|&v| f64::from(v)).collect();
        self.loss_and_gradient_at(&p64, batch)
    }

    /// [`S2SModel::loss_and_gradient`] at an arbitrary 64-bit parameter
    /// vector of the same layout.
    pub fn loss_and_gradient_at(
        &self,
        params: &[f64],
        batch: &[(Vec<u32>, Vec<GapLabel>)],
    ) -> Result<(f64, Vec<f64>), S2SError> {
        if params.len() != self.layout.total() {
            return Err(S2SError::InvalidConfig(format!(
                "{} parameters, layout needs {}",
                params.len(),
                self.layout.total()
            )));
        }
        train::loss_and_gradient_f64(self, params, batch)
    }
}

/// Corrected text: `". "` at every PERIOD gap and an uppercased first
/// character on the token after it. Tokens are joined with single spaces.
pub fn fuse_output(sentence: &AnnotatedSentence, labels: &[GapLabel]) -> Result<String, S2SError> {
    check_labels(sentence, labels)?;
    let mut out = String::new();
    let mut capitalize = false;
    for (i, (tok, &label)) in sentence.tokens().iter().zip(labels).enumerate() {
        if i > 0 {
            out.push(' ');
        }
        if capitalize {
            out.push_str(&uppercase_first(tok.surface()));
        } else {
            out.push_str(tok.surface());
        }
        capitalize = label == GapLabel::Period;
        if capitalize {
            out.push('.');
        }
    }
    Ok(out)
}

fn check_labels(sentence: &AnnotatedSentence, labels: &[GapLabel]) -> Result<(), S2SError> {
    if labels.len() != sentence.len() {
        return Err(S2SError::LengthMismatch {
            tokens: sentence.len(),
            labels: labels.len(),
        });
    }
    Ok(())
}

/// Like [`fuse_output`] but keeps each inserted period as its own token, the
/// tokenization used by the corpus.
pub fn fuse_output_tokens(sentence: &AnnotatedSentence, labels: &[GapLabel]) -> Result<Vec<String>, S2SError> {
    check_labels(sentence, labels)?;
    let mut out = Vec::with_capacity(sentence.len() + 2);
    let mut capitalize = false;
    for (tok, &label) in sentence.tokens().iter().zip(labels) {
        out.push(if capitalize {
            uppercase_first(tok.surface())
        } else {
            tok.surface().to_string()
        });
        capitalize = label == GapLabel::Period;
        if capitalize {
            out.push(".".to_string());
        }
    }
    Ok(out)
}
