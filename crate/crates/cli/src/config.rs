//! Option groups shared by the command line, `RUNON_*` variables and the
//! TOML config file.
//!
//! Every tunable is optional in all three sources. Flags and variables are
//! merged by clap; [`Merge`] then fills the gaps from the file, and the
//! `resolve` methods from the library defaults.

use std::path::Path;

use clap::{Args, ValueEnum};
use num_rational::Ratio;
use runon::corpus::parse_fraction;
use runon::crf::CrfConfig;
use runon::ngram::{LmConfig, Smoothing};
use runon::seq2seq::S2SConfig;
use runon::GapLabel;
use serde::{Deserialize, Serialize};

use crate::Failure;

pub trait Merge {
    /// Fields unset in `self` are taken from `file`.
    fn merge(self, file: Self) -> Self;
}

macro_rules! merge_fields {
    ($ty:ty { $($f:ident),* $(,)? }) => {
        impl Merge for $ty {
            fn merge(self, file: Self) -> Self {
                Self { $($f: self.$f.or(file.$f)),* }
            }
        }
    };
}

/// The config file: top-level `seed` and `workers`, then one table per
/// option group.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    #[serde(default)]
    pub dataset: DatasetOpts,
    #[serde(default)]
    pub lm: LmOpts,
    #[serde(default)]
    pub crf: CrfOpts,
    #[serde(default)]
    pub s2s: S2SOpts,
    #[serde(default)]
    pub bootstrap: BootstrapOpts,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::data(path, e))?;
        toml::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothingArg {
    KneserNey,
    WittenBell,
    MaximumLikelihood,
}

impl From<SmoothingArg> for Smoothing {
    fn from(s: SmoothingArg) -> Self {
        match s {
            SmoothingArg::KneserNey => Smoothing::KneserNey,
            SmoothingArg::WittenBell => Smoothing::WittenBell,
            SmoothingArg::MaximumLikelihood => Smoothing::MaximumLikelihood,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LabelArg {
    Space,
    Period,
}

impl From<LabelArg> for GapLabel {
    fn from(l: LabelArg) -> Self {
        match l {
            LabelArg::Space => GapLabel::Space,
            LabelArg::Period => GapLabel::Period,
        }
    }
}

/// How many run-ons and negatives to synthesize.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetOpts {
    /// Number of run-on sequences
    #[arg(long, env = "RUNON_RUNONS", conflicts_with_all = ["total", "fraction"])]
    pub runons: Option<usize>,
    /// Number of clean (all-SPACE) sequences
    #[arg(long, env = "RUNON_NEGATIVES", conflicts_with_all = ["total", "fraction"])]
    pub negatives: Option<usize>,
    /// Total sequences, split by --fraction
    #[arg(long, env = "RUNON_TOTAL", requires = "fraction")]
    pub total: Option<usize>,
    /// Run-on share of --total, as a decimal or p/q (0.61 for the large
    /// training set, 0.1 for the balanced test sets)
    #[arg(long, env = "RUNON_FRACTION", requires = "total")]
    pub fraction: Option<String>,
}

merge_fields!(DatasetOpts {
    runons,
    negatives,
    total,
    fraction
});

/// Resolved dataset size.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DatasetSize {
    pub runons: usize,
    pub negatives: usize,
}

impl DatasetOpts {
    pub fn resolve(&self) -> Result<DatasetSize, Failure> {
        match (self.runons, self.negatives, self.total, &self.fraction) {
            (Some(runons), Some(negatives), _, _) => Ok(DatasetSize { runons, negatives }),
            (_, _, Some(total), Some(f)) => {
                let fraction = parse_fraction(f).map_err(|e| Failure::usage(e.to_string()))?;
                let spec = runon::corpus::DatasetSpec::with_fraction(total, fraction, 0)
                    .map_err(|e| Failure::usage(e.to_string()))?;
                Ok(DatasetSize {
                    runons: spec.runon_count,
                    negatives: spec.nonrunon_count,
                })
            }
            _ => Err(Failure::usage(
                "give --runons and --negatives, or --total and --fraction",
            )),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmOpts {
    /// N-gram order [default: 5]
    #[arg(long, env = "RUNON_LM_ORDER")]
    pub order: Option<usize>,
    /// Word types rarer than this become <unk> [default: 2]
    #[arg(long, env = "RUNON_LM_MIN_COUNT")]
    pub min_count: Option<u64>,
    /// [default: kneser-ney]
    #[arg(long, env = "RUNON_LM_SMOOTHING", value_enum)]
    pub smoothing: Option<SmoothingArg>,
    /// Keep case when counting [default: lowercase]
    #[arg(long, env = "RUNON_LM_KEEP_CASE", num_args = 0..=1, default_missing_value = "true")]
    pub keep_case: Option<bool>,
}

merge_fields!(LmOpts {
    order,
    min_count,
    smoothing,
    keep_case
});

impl LmOpts {
    pub fn resolve(&self) -> LmConfig {
        let d = LmConfig::default();
        LmConfig {
            order: self.order.unwrap_or(d.order),
            min_count: self.min_count.unwrap_or(d.min_count),
            smoothing: self.smoothing.map_or(d.smoothing, Smoothing::from),
            lowercase: self.keep_case.map_or(d.lowercase, |k| !k),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrfOpts {
    /// Regularization trade-off; the L1 penalty is 1/c [default: 10, the
    /// published setting]
    #[arg(long, env = "RUNON_CRF_C")]
    pub c: Option<f64>,
    /// Drop features seen fewer times [default: 5, the published setting]
    #[arg(long, env = "RUNON_CRF_CUTOFF")]
    pub cutoff: Option<usize>,
    /// Decode threshold: PERIOD when the marginal of --threshold-label
    /// crosses it [default: 0.70, the published setting]
    #[arg(long, env = "RUNON_CRF_TAU")]
    pub tau: Option<f64>,
    /// Which marginal --tau applies to. With `space` a gap is PERIOD when
    /// p(SPACE) < tau; with `period` when p(PERIOD) > tau [default: space]
    #[arg(long, env = "RUNON_CRF_THRESHOLD_LABEL", value_enum)]
    pub threshold_label: Option<LabelArg>,
    /// OWL-QN iteration cap [default: 300]
    #[arg(long, env = "RUNON_CRF_MAX_ITERATIONS")]
    pub max_iterations: Option<usize>,
    /// Relative objective change that ends training [default: 1e-6]
    #[arg(long, env = "RUNON_CRF_TOLERANCE")]
    pub tolerance: Option<f64>,
}

merge_fields!(CrfOpts {
    c,
    cutoff,
    tau,
    threshold_label,
    max_iterations,
    tolerance
});

impl CrfOpts {
    pub fn resolve(&self) -> CrfConfig {
        let d = CrfConfig::default();
        CrfConfig {
            c: self.c.unwrap_or(d.c),
            cutoff: self.cutoff.unwrap_or(d.cutoff),
            tau: self.tau.unwrap_or(d.tau),
            threshold_label: self.threshold_label.map_or(d.threshold_label, GapLabel::from),
            max_iterations: self.max_iterations.unwrap_or(d.max_iterations),
            tolerance: self.tolerance.unwrap_or(d.tolerance),
            ..d
        }
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct S2SOpts {
    /// Use the full-size defaults (1028 hidden, 300-d embeddings, 100k
    /// words, dropout 0.5, batch 128, rate 1e-4) as the base
    #[arg(long, env = "RUNON_S2S_FULL_SIZE", num_args = 0..=1, default_missing_value = "true")]
    pub full_size: Option<bool>,
    /// Recurrent state size [default: 64; published 1028]
    #[arg(long, env = "RUNON_S2S_HIDDEN")]
    pub hidden_size: Option<usize>,
    /// Word embedding size [default: 64; published 300]
    #[arg(long, env = "RUNON_S2S_EMBEDDING")]
    pub embedding_size: Option<usize>,
    /// [default: 8]
    #[arg(long, env = "RUNON_S2S_LABEL_EMBEDDING")]
    pub label_embedding_size: Option<usize>,
    /// Relative attention positions beyond +-window share a bias [default: 3]
    #[arg(long, env = "RUNON_S2S_POSITION_WINDOW")]
    pub position_window: Option<usize>,
    /// Vocabulary cap [default: 2000; published 100k]
    #[arg(long, env = "RUNON_S2S_VOCAB")]
    pub vocab_size: Option<usize>,
    /// Keep case in the vocabulary [default: lowercase]
    #[arg(long, env = "RUNON_S2S_KEEP_CASE", num_args = 0..=1, default_missing_value = "true")]
    pub keep_case: Option<bool>,
    /// Longer inputs are truncated [default: 100, as published]
    #[arg(long, env = "RUNON_S2S_MAX_INPUT")]
    pub max_input_length: Option<usize>,
    /// [default: 0.2; published 0.5]
    #[arg(long, env = "RUNON_S2S_DROPOUT")]
    pub dropout_rate: Option<f64>,
    /// [default: 32; published 128]
    #[arg(long, env = "RUNON_S2S_BATCH")]
    pub batch_size: Option<usize>,
    /// Adagrad step size [default: 0.05; published 1e-4]
    #[arg(long, env = "RUNON_S2S_LR")]
    pub learning_rate: Option<f64>,
    /// Rate multiplier after an epoch without validation gain [default: 0.5,
    /// as published]
    #[arg(long, env = "RUNON_S2S_LR_DECAY")]
    pub lr_decay: Option<f64>,
    /// [default: 8]
    #[arg(long, env = "RUNON_S2S_EPOCHS")]
    pub epochs: Option<usize>,
    /// Global gradient norm cap, 0 to disable [default: 5]
    #[arg(long, env = "RUNON_S2S_CLIP")]
    pub clip_norm: Option<f64>,
    /// Held-out share when no --valid file is given [default: 0.1]
    #[arg(long, env = "RUNON_S2S_VALIDATION_FRACTION")]
    pub validation_fraction: Option<f64>,
}

merge_fields!(S2SOpts {
    full_size,
    hidden_size,
    embedding_size,
    label_embedding_size,
    position_window,
    vocab_size,
    keep_case,
    max_input_length,
    dropout_rate,
    batch_size,
    learning_rate,
    lr_decay,
    epochs,
    clip_norm,
    validation_fraction,
});

impl S2SOpts {
    pub fn resolve(&self, seed: u64) -> S2SConfig {
        let d = if self.full_size == Some(true) {
            S2SConfig::full_size()
        } else {
            S2SConfig::default()
        };
        S2SConfig {
            hidden_size: self.hidden_size.unwrap_or(d.hidden_size),
            embedding_size: self.embedding_size.unwrap_or(d.embedding_size),
            label_embedding_size: self.label_embedding_size.unwrap_or(d.label_embedding_size),
            position_window: self.position_window.unwrap_or(d.position_window),
            vocab_size: self.vocab_size.unwrap_or(d.vocab_size),
            lowercase: self.keep_case.map_or(d.lowercase, |k| !k),
            max_input_length: self.max_input_length.unwrap_or(d.max_input_length),
            dropout_rate: self.dropout_rate.unwrap_or(d.dropout_rate),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            lr_decay: self.lr_decay.unwrap_or(d.lr_decay),
            epochs: self.epochs.unwrap_or(d.epochs),
            clip_norm: self.clip_norm.unwrap_or(d.clip_norm),
            validation_fraction: self.validation_fraction.unwrap_or(d.validation_fraction),
            seed,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapOpts {
    /// Paired bootstrap replicates, at least 1000 [default: 10000]
    #[arg(long, env = "RUNON_REPLICATES")]
    pub replicates: Option<usize>,
}

merge_fields!(BootstrapOpts { replicates });

impl BootstrapOpts {
    pub fn resolve(&self) -> usize {
        self.replicates.unwrap_or(10_000)
    }
}

/// `0.1` or `1/10` as an exact ratio.
pub fn parse_rate(s: &str) -> Result<Ratio<u64>, Failure> {
    parse_fraction(s).map_err(|e| Failure::usage(e.to_string()))
}
