//! Linear-chain CRF over gap labels.
//!
//! Each `(template, value)` pair seen at least `cutoff` times in training
//! becomes a feature with one weight per label; four more weights score label
//! transitions. Training minimizes
//!
//! ```text
//! sum over sequences of -log p(y | x)  +  (1 / c) * sum |w|
//! ```
//!
//! with OWL-QN, so a larger `c` fits the data more tightly. Decoding labels a
//! gap PERIOD when the SPACE marginal drops below `tau` (strictly).

mod features;
mod io;
mod lattice;
pub mod owlqn;

use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::ngram::NgramModel;
use crate::sentence::{AnnotatedSentence, GapLabel};

pub use features::{
    extract_features, featurize, templates, FeatureVector, GapContext, BOS, EOS, NO_LM, NO_PARSE, NO_TAG,
};
pub use io::{
    load_model, read_feature_file, read_model, save_model, write_feature_file, write_model, FeatureFile, FORMAT_VERSION,
};
pub use lattice::{Lattice, Posteriors};

#[derive(Debug, Error)]
pub enum CrfError {
    #[error("no training sequences")]
    NoData,
    #[error("training labels contain only {0}; both SPACE and PERIOD are needed")]
    DegenerateLabels(GapLabel),
    #[error("{features} feature vectors but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One training or evaluation sequence: a feature vector and label per gap.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Vec<FeatureVector>,
    pub labels: Vec<GapLabel>,
}

impl Example {
    pub fn new(features: Vec<FeatureVector>, labels: Vec<GapLabel>) -> Result<Self, CrfError> {
        if features.len() != labels.len() {
            return Err(CrfError::LengthMismatch {
                features: features.len(),
                labels: labels.len(),
            });
        }
        Ok(Example { features, labels })
    }

    /// Gap features and labels for a token-labeled sentence (the final
    /// token's label is not a gap and is dropped).
    pub fn from_sentence(sentence: &AnnotatedSentence, labels: &[GapLabel], lm: Option<&NgramModel>) -> Self {
        let features = featurize(sentence, lm);
        let labels = labels[..features.len()].to_vec();
        Example { features, labels }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrfConfig {
    /// Fit/regularization trade-off; the L1 penalty is `1 / c`.
    pub c: f64,
    /// Features seen fewer times than this are dropped.
    pub cutoff: usize,
    pub tau: f64,
    /// Which marginal `tau` is compared against.
    pub threshold_label: GapLabel,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub memory: usize,
    /// Train even when every label is the same class.
    pub allow_single_class: bool,
}

impl Default for CrfConfig {
    fn default() -> Self {
        CrfConfig {
            c: 10.0,
            cutoff: 5,
            tau: 0.70,
            threshold_label: GapLabel::Space,
            max_iterations: 300,
            tolerance: 1e-6,
            memory: 10,
            allow_single_class: false,
        }
    }
}

impl CrfConfig {
    fn validate(&self) -> Result<(), CrfError> {
        if self.c.is_nan() || self.c <= 0.0 {
            return Err(CrfError::InvalidConfig(format!("c must be positive, got {}", self.c)));
        }
        validate_tau(self.tau)?;
        if self.memory == 0 {
            return Err(CrfError::InvalidConfig("memory must be at least 1".into()));
        }
        Ok(())
    }
}

fn validate_tau(tau: f64) -> Result<(), CrfError> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(CrfError::InvalidConfig(format!("tau must lie in (0, 1), got {tau}")))
    }
}

/// Labels from marginals: with `label` SPACE a gap is PERIOD iff
/// `p(SPACE) < tau`; with `label` PERIOD iff `p(PERIOD) > tau`.
pub fn threshold_labels(marginals: &[[f64; 2]], tau: f64, label: GapLabel) -> Vec<GapLabel> {
    marginals
        .iter()
        .map(|m| {
            let period = match label {
                GapLabel::Space => m[0] < tau,
                GapLabel::Period => m[1] > tau,
            };
            if period {
                GapLabel::Period
            } else {
                GapLabel::Space
            }
        })
        .collect()
}

/// How training ended.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSummary {
    pub iterations: usize,
    pub status: String,
    pub objective: f64,
    /// Objective per iteration (empty for loaded models).
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrfModel {
    templates: Vec<String>,
    keys: Vec<(u32, String)>,
    index: Vec<HashMap<String, u32>>,
    /// `[w(f, SPACE), w(f, PERIOD)]` for each feature, then transitions
    /// `SS, SP, PS, PP`.
    weights: Vec<f64>,
    c: f64,
    cutoff: usize,
    tau: f64,
    threshold_label: GapLabel,
    summary: TrainingSummary,
}

impl CrfModel {
    /// Builds a model from explicit weights. Feature ids follow the order of
    /// `features`.
    pub fn from_parts(
        templates: Vec<String>,
        features: Vec<(u32, String, [f64; 2])>,
        transitions: [[f64; 2]; 2],
        config: &CrfConfig,
    ) -> Result<Self, CrfError> {
        validate_tau(config.tau)?;
        let mut index = vec![HashMap::new(); templates.len()];
        let mut keys = Vec::with_capacity(features.len());
        let mut weights = Vec::with_capacity(2 * features.len() + 4);
        for (t, v, w) in features {
            let slot = index
                .get_mut(t as usize)
                .ok_or_else(|| CrfError::InvalidConfig(format!("template id {t} out of range")))?;
            if slot.insert(v.clone(), keys.len() as u32).is_some() {
                return Err(CrfError::InvalidConfig(format!("duplicate feature {t}:{v}")));
            }
            keys.push((t, v));
            weights.extend_from_slice(&w);
        }
        weights.extend(transitions.iter().flatten());
        Ok(CrfModel {
            templates,
            keys,
            index,
            weights,
            c: config.c,
            cutoff: config.cutoff,
            tau: config.tau,
            threshold_label: config.threshold_label,
            summary: TrainingSummary {
                iterations: 0,
                status: "untrained".into(),
                objective: 0.0,
                history: Vec::new(),
            },
        })
    }

    pub fn templates(&self) -> &[String] {
        &self.templates
    }

    pub fn feature_count(&self) -> usize {
        self.keys.len()
    }

    /// Feature keys `(template id, value)` in id order.
    pub fn features(&self) -> impl Iterator<Item = (u32, &str, [f64; 2])> + '_ {
        self.keys
            .iter()
            .enumerate()
            .map(|(i, (t, v))| (*t, v.as_str(), [self.weights[2 * i], self.weights[2 * i + 1]]))
    }

    pub fn feature_weights(&self, template: usize, value: &str) -> Option<[f64; 2]> {
        let f = *self.index.get(template)?.get(value)? as usize;
        Some([self.weights[2 * f], self.weights[2 * f + 1]])
    }

    pub fn transitions(&self) -> [[f64; 2]; 2] {
        let t = &self.weights[2 * self.keys.len()..];
        [[t[0], t[1]], [t[2], t[3]]]
    }

    /// All weights, features first then transitions.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn zero_weight_count(&self) -> usize {
        self.weights.iter().filter(|&&w| w == 0.0).count()
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn threshold_label(&self) -> GapLabel {
        self.threshold_label
    }

    pub fn set_threshold(&mut self, tau: f64, label: GapLabel) -> Result<(), CrfError> {
        validate_tau(tau)?;
        self.tau = tau;
        self.threshold_label = label;
        Ok(())
    }

    pub fn summary(&self) -> &TrainingSummary {
        &self.summary
    }

    fn feature_ids<'a>(&'a self, fv: &'a FeatureVector) -> impl Iterator<Item = usize> + 'a {
        fv.iter()
            .filter_map(|(t, v)| self.index.get(t).and_then(|m| m.get(v)).map(|&f| f as usize))
    }

    pub fn lattice(&self, seq: &[FeatureVector]) -> Lattice {
        let emissions = seq
            .iter()
            .map(|fv| {
                let mut e = [0.0; 2];
                for f in self.feature_ids(fv) {
                    e[0] += self.weights[2 * f];
                    e[1] += self.weights[2 * f + 1];
                }
                e
            })
            .collect();
        Lattice {
            emissions,
            transitions: self.transitions(),
        }
    }

    /// Per-gap `[p(SPACE), p(PERIOD)]`.
    pub fn marginals(&self, seq: &[FeatureVector]) -> Vec<[f64; 2]> {
        self.lattice(seq).marginals()
    }

    /// Threshold decoding with the model's `tau`.
    pub fn decode(&self, seq: &[FeatureVector]) -> Vec<GapLabel> {
        threshold_labels(&self.marginals(seq), self.tau, self.threshold_label)
    }

    pub fn viterbi(&self, seq: &[FeatureVector]) -> Vec<GapLabel> {
        self.lattice(seq).viterbi()
    }

    /// Token labels for a sentence (one per token, final token SPACE).
    pub fn tag_sentence(&self, sentence: &AnnotatedSentence, lm: Option<&NgramModel>) -> Vec<GapLabel> {
        let mut labels = self.decode(&featurize(sentence, lm));
        labels.push(GapLabel::Space);
        labels
    }
}

/// Training data compiled to feature ids, split into fixed chunks whose
/// gradients are summed in order (so results do not depend on threads).
pub struct Problem {
    n_features: usize,
    chunks: Vec<Chunk>,
}

struct Chunk {
    /// Global feature id of each local id, ascending.
    globals: Vec<u32>,
    seqs: Vec<(Vec<Vec<u32>>, Vec<usize>)>,
}

const CHUNK: usize = 128;

impl Problem {
    /// `sequences` holds, per gap, the ids of active features (each below
    /// `n_features`) and the gold label.
    pub fn new(n_features: usize, sequences: Vec<(Vec<Vec<u32>>, Vec<GapLabel>)>) -> Self {
        let sequences: Vec<_> = sequences.into_iter().filter(|(f, _)| !f.is_empty()).collect();
        let chunks = sequences
            .chunks(CHUNK)
            .map(|part| {
                let mut globals: Vec<u32> = part.iter().flat_map(|(f, _)| f.iter().flatten().copied()).collect();
                globals.sort_unstable();
                globals.dedup();
                let local: HashMap<u32, u32> = globals.iter().enumerate().map(|(l, &g)| (g, l as u32)).collect();
                let seqs = part
                    .iter()
                    .map(|(f, l)| {
                        let f = f.iter().map(|pos| pos.iter().map(|g| local[g]).collect()).collect();
                        (f, l.iter().map(|x| x.index()).collect())
                    })
                    .collect();
                Chunk { globals, seqs }
            })
            .collect();
        Problem { n_features, chunks }
    }

    pub fn n_weights(&self) -> usize {
        2 * self.n_features + 4
    }

    pub fn sequence_count(&self) -> usize {
        self.chunks.iter().map(|c| c.seqs.len()).sum()
    }

    fn chunk_loss(chunk: &Chunk, w: &[f64], n_features: usize) -> (f64, Vec<f64>) {
        let nl = chunk.globals.len();
        let t0 = 2 * n_features;
        let transitions = [[w[t0], w[t0 + 1]], [w[t0 + 2], w[t0 + 3]]];
        let lw: Vec<f64> = chunk
            .globals
            .iter()
            .flat_map(|&g| [w[2 * g as usize], w[2 * g as usize + 1]])
            .collect();
        let mut grad = vec![0.0; 2 * nl + 4];
        let mut loss = 0.0;
        for (feats, gold) in &chunk.seqs {
            let emissions: Vec<[f64; 2]> = feats
                .iter()
                .map(|fs| {
                    let mut e = [0.0; 2];
                    for &f in fs {
                        e[0] += lw[2 * f as usize];
                        e[1] += lw[2 * f as usize + 1];
                    }
                    e
                })
                .collect();
            let lat = Lattice { emissions, transitions };
            let post = lat.posteriors();
            let gold_labels: Vec<GapLabel> = gold.iter().map(|&y| GapLabel::from_index(y)).collect();
            loss += post.log_z - lat.score(&gold_labels);
            for (t, fs) in feats.iter().enumerate() {
                for &f in fs {
                    for y in 0..2 {
                        grad[2 * f as usize + y] += post.unary[t][y] - if gold[t] == y { 1.0 } else { 0.0 };
                    }
                }
            }
            for a in 0..2 {
                for b in 0..2 {
                    grad[2 * nl + 2 * a + b] += post.pairwise[a][b];
                }
            }
            for t in 1..gold.len() {
                grad[2 * nl + 2 * gold[t - 1] + gold[t]] -= 1.0;
            }
        }
        (loss, grad)
    }

    /// Negative conditional log-likelihood summed over sequences; writes its
    /// gradient into `grad`.
    pub fn objective(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        assert_eq!(w.len(), self.n_weights());
        let parts: Vec<(f64, Vec<f64>)> = self
            .chunks
            .par_iter()
            .map(|c| Self::chunk_loss(c, w, self.n_features))
            .collect();
        grad.iter_mut().for_each(|g| *g = 0.0);
        let t0 = 2 * self.n_features;
        let mut loss = 0.0;
        for (chunk, (l, g)) in self.chunks.iter().zip(parts) {
            loss += l;
            for (k, &gl) in chunk.globals.iter().enumerate() {
                grad[2 * gl as usize] += g[2 * k];
                grad[2 * gl as usize + 1] += g[2 * k + 1];
            }
            let nl = chunk.globals.len();
            for k in 0..4 {
                grad[t0 + k] += g[2 * nl + k];
            }
        }
        loss
    }
}

/// Trains a CRF on gap-labeled sequences.
pub fn train_crf(data: &[Example], config: &CrfConfig) -> Result<CrfModel, CrfError> {
    train_crf_with_templates(data, templates().to_vec(), config)
}

/// As [`train_crf`] with explicit template names (for feature files that
/// carry their own columns).
pub fn train_crf_with_templates(
    data: &[Example],
    templates: Vec<String>,
    config: &CrfConfig,
) -> Result<CrfModel, CrfError> {
    config.validate()?;
    for ex in data {
        if ex.features.len() != ex.labels.len() {
            return Err(CrfError::LengthMismatch {
                features: ex.features.len(),
                labels: ex.labels.len(),
            });
        }
    }
    let data: Vec<&Example> = data.iter().filter(|e| !e.labels.is_empty()).collect();
    if data.is_empty() {
        return Err(CrfError::NoData);
    }
    let mut seen = [false; 2];
    for ex in &data {
        for l in &ex.labels {
            seen[l.index()] = true;
        }
    }
    if !(seen[0] && seen[1]) && !config.allow_single_class {
        let only = if seen[0] { GapLabel::Space } else { GapLabel::Period };
        return Err(CrfError::DegenerateLabels(only));
    }

    let width = data
        .iter()
        .flat_map(|e| e.features.iter().map(FeatureVector::len))
        .max()
        .unwrap_or(0);
    let mut names = templates;
    while names.len() < width {
        names.push(format!("c{}", names.len()));
    }
    let mut freq: Vec<HashMap<&str, usize>> = vec![HashMap::new(); names.len()];
    for ex in &data {
        for fv in &ex.features {
            for (t, v) in fv.iter() {
                *freq[t].entry(v).or_insert(0) += 1;
            }
        }
    }
    let mut kept: Vec<(u32, String)> = Vec::new();
    for (t, m) in freq.iter().enumerate() {
        let mut vals: Vec<&str> = m.iter().filter(|(_, &c)| c >= config.cutoff).map(|(v, _)| *v).collect();
        vals.sort_unstable();
        kept.extend(vals.into_iter().map(|v| (t as u32, v.to_string())));
    }
    let mut model = CrfModel::from_parts(
        names,
        kept.into_iter().map(|(t, v)| (t, v, [0.0; 2])).collect(),
        [[0.0; 2]; 2],
        config,
    )?;

    let problem = Problem::new(
        model.feature_count(),
        data.iter()
            .map(|ex| {
                let ids = ex
                    .features
                    .iter()
                    .map(|fv| model.feature_ids(fv).map(|f| f as u32).collect())
                    .collect();
                (ids, ex.labels.clone())
            })
            .collect(),
    );
    log::info!(
        "crf: {} sequences, {} features after cutoff {}",
        problem.sequence_count(),
        model.feature_count(),
        config.cutoff
    );
    let opts = owlqn::OwlqnOptions {
        l1: 1.0 / config.c,
        memory: config.memory,
        max_iterations: config.max_iterations,
        tolerance: config.tolerance,
        ..Default::default()
    };
    let result = owlqn::minimize(|w, g| problem.objective(w, g), vec![0.0; problem.n_weights()], &opts);
    log::info!(
        "crf: {:?} after {} iterations, objective {:.6}",
        result.status,
        result.iterations,
        result.objective
    );
    model.weights = result.x;
    model.summary = TrainingSummary {
        iterations: result.iterations,
        status: format!("{:?}", result.status).to_lowercase(),
        objective: result.objective,
        history: result.history,
    };
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(vals: &[&str]) -> FeatureVector {
        FeatureVector::new(vals.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn threshold_is_strict() {
        let m = [[0.65, 0.35], [0.70, 0.30], [0.9, 0.1]];
        let l = threshold_labels(&m, 0.70, GapLabel::Space);
        assert_eq!(l, [GapLabel::Period, GapLabel::Space, GapLabel::Space]);
        let l = threshold_labels(&m, 0.30, GapLabel::Period);
        assert_eq!(l, [GapLabel::Period, GapLabel::Space, GapLabel::Space]);
    }

    #[test]
    fn zero_model_marks_every_gap() {
        let m = CrfModel::from_parts(vec!["a".into()], vec![], [[0.0; 2]; 2], &CrfConfig::default()).unwrap();
        let seq = vec![fv(&["x"]); 3];
        assert!(m.marginals(&seq).iter().all(|p| p[0] == 0.5));
        assert_eq!(m.decode(&seq), vec![GapLabel::Period; 3]);
        assert_eq!(m.viterbi(&seq), vec![GapLabel::Space; 3]);
    }

    #[test]
    fn training_errors() {
        let cfg = CrfConfig::default();
        assert!(matches!(train_crf(&[], &cfg), Err(CrfError::NoData)));
        let ex = Example::new(vec![fv(&["x"])], vec![GapLabel::Space]).unwrap();
        assert!(matches!(
            train_crf(std::slice::from_ref(&ex), &cfg),
            Err(CrfError::DegenerateLabels(GapLabel::Space))
        ));
        assert!(Example::new(vec![], vec![GapLabel::Space]).is_err());
        let bad = CrfConfig { tau: 1.0, ..cfg };
        assert!(matches!(train_crf(&[ex], &bad), Err(CrfError::InvalidConfig(_))));
    }

    #[test]
    fn learns_a_separable_rule() {
        let mut data = Vec::new();
        for i in 0..30 {
            let p = i % 3 == 0;
            data.push(
                Example::new(
                    vec![fv(&[if p { "end" } else { "mid" }, "b"]), fv(&["mid", "b"])],
                    vec![if p { GapLabel::Period } else { GapLabel::Space }, GapLabel::Space],
                )
                .unwrap(),
            );
        }
        let cfg = CrfConfig {
            c: 100.0,
            cutoff: 1,
            ..Default::default()
        };
        let m = train_crf_with_templates(&data, vec!["cue".into(), "bias".into()], &cfg).unwrap();
        assert!(m.summary().history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(m.decode(&data[0].features), data[0].labels);
        assert_eq!(m.decode(&data[1].features), data[1].labels);
    }
}
