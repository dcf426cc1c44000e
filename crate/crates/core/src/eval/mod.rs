//! Insertion-level scoring, the random baseline and paired bootstrap tests.
//!
//! Every gold PERIOD position is one item: predicting PERIOD there is a true
//! positive, predicting it anywhere else a false positive.

mod align;
mod report;

use std::ops::{Add, AddAssign};

use num_rational::Ratio;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::rng_for_item;
use crate::sentence::{GapLabel, LabeledSequence};

pub use align::{align_corrected, split_terminal};
pub use report::{report_table, round_half_up, write_csv, write_json, ReportRow};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("{pred} predicted sequences but {gold} gold sequences")]
    SequenceCount { pred: usize, gold: usize },
    #[error("sequence {index}: {message}")]
    Alignment { index: usize, message: String },
    #[error("invalid rate {0}")]
    InvalidRate(String),
    #[error("at least {min} replicates required, got {got}")]
    TooFewReplicates { min: usize, got: usize },
}

/// True positives, false positives and false negatives.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        Counts { tp, fp, fn_ }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f05(&self) -> f64 {
        f05(self.precision(), self.recall())
    }

    pub fn metric(&self, m: Metric) -> f64 {
        match m {
            Metric::Precision => self.precision(),
            Metric::Recall => self.recall(),
            Metric::F05 => self.f05(),
        }
    }
}

impl Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts::new(self.tp + o.tp, self.fp + o.fp, self.fn_ + o.fn_)
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        *self = *self + o;
    }
}

impl std::iter::Sum for Counts {
    fn sum<I: Iterator<Item = Counts>>(iter: I) -> Counts {
        iter.fold(Counts::default(), Add::add)
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// `(1 + b^2) P R / (b^2 P + R)`, or 0 when `P + R = 0`.
pub fn f_beta(p: f64, r: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * p + r;
    if p + r == 0.0 || denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * p * r / denom
    }
}

/// `1.25 P R / (0.25 P + R)`.
pub fn f05(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        1.25 * p * r / (0.25 * p + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[serde(rename = "p")]
    Precision,
    #[serde(rename = "r")]
    Recall,
    F05,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Precision, Metric::Recall, Metric::F05];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Precision => "p",
            Metric::Recall => "r",
            Metric::F05 => "f05",
        }
    }
}

/// Predicted and gold PERIOD positions of one sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Judgment {
    pub predicted: Vec<usize>,
    pub gold: Vec<usize>,
    pub counts: Counts,
}

impl Judgment {
    pub fn new(pred: &[GapLabel], gold: &[GapLabel]) -> Result<Self, String> {
        if pred.len() != gold.len() {
            return Err(format!("{} predicted labels, {} gold", pred.len(), gold.len()));
        }
        let periods = |ls: &[GapLabel]| -> Vec<usize> {
            ls.iter()
                .enumerate()
                .filter(|(_, &l)| l == GapLabel::Period)
                .map(|(i, _)| i)
                .collect()
        };
        let predicted = periods(pred);
        let gold_pos = periods(gold);
        let tp = predicted.iter().filter(|&&i| gold[i] == GapLabel::Period).count() as u64;
        let counts = Counts::new(tp, predicted.len() as u64 - tp, gold_pos.len() as u64 - tp);
        Ok(Judgment {
            predicted,
            gold: gold_pos,
            counts,
        })
    }
}

/// Per-sequence judgments of aligned streams. Tokens must agree
/// (case-insensitively, since predictions may come from recased text).
pub fn judge(pred: &[LabeledSequence], gold: &[LabeledSequence]) -> Result<Vec<Judgment>, EvalError> {
    if pred.len() != gold.len() {
        return Err(EvalError::SequenceCount {
            pred: pred.len(),
            gold: gold.len(),
        });
    }
    pred.iter()
        .zip(gold)
        .enumerate()
        .map(|(index, (p, g))| {
            let pt = p.sentence().tokens();
            let gt = g.sentence().tokens();
            if let Some(k) = pt
                .iter()
                .zip(gt)
                .position(|(a, b)| a.surface().to_lowercase() != b.surface().to_lowercase())
            {
                return Err(EvalError::Alignment {
                    index,
                    message: format!("token {k}: {:?} vs {:?}", pt[k].surface(), gt[k].surface()),
                });
            }
            Judgment::new(p.labels(), g.labels()).map_err(|message| EvalError::Alignment { index, message })
        })
        .collect()
}

/// Label-only variant of [`judge`].
pub fn judge_labels(pred: &[Vec<GapLabel>], gold: &[Vec<GapLabel>]) -> Result<Vec<Judgment>, EvalError> {
    if pred.len() != gold.len() {
        return Err(EvalError::SequenceCount {
            pred: pred.len(),
            gold: gold.len(),
        });
    }
    pred.iter()
        .zip(gold)
        .enumerate()
        .map(|(index, (p, g))| Judgment::new(p, g).map_err(|message| EvalError::Alignment { index, message }))
        .collect()
}

/// Scores a prediction stream against gold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub system: String,
    pub dataset: String,
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f05: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bootstrap: Option<BootstrapResult>,
}

impl EvalReport {
    pub fn from_counts(system: impl Into<String>, dataset: impl Into<String>, counts: Counts) -> Self {
        EvalReport {
            system: system.into(),
            dataset: dataset.into(),
            counts,
            precision: counts.precision(),
            recall: counts.recall(),
            f05: counts.f05(),
            bootstrap: None,
        }
    }

    /// A report from published precision and recall alone.
    pub fn from_pr(system: impl Into<String>, dataset: impl Into<String>, p: f64, r: f64) -> Self {
        EvalReport {
            system: system.into(),
            dataset: dataset.into(),
            counts: Counts::default(),
            precision: p,
            recall: r,
            f05: f05(p, r),
            bootstrap: None,
        }
    }
}

pub fn score(pred: &[LabeledSequence], gold: &[LabeledSequence]) -> Result<Counts, EvalError> {
    Ok(judge(pred, gold)?.iter().map(|j| j.counts).sum())
}

pub fn score_report(
    system: &str,
    dataset: &str,
    pred: &[LabeledSequence],
    gold: &[LabeledSequence],
) -> Result<EvalReport, EvalError> {
    Ok(EvalReport::from_counts(system, dataset, score(pred, gold)?))
}

/// Where a flagged sequence gets its PERIOD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapChoice {
    /// Any gap but the last token's, uniformly.
    Uniform,
    /// A gold PERIOD gap when the sequence has one, else uniform. With the
    /// rate set to the run-on share this gives P = R = prevalence in
    /// expectation, the "balanced" reading.
    Gold,
}

fn check_rate(rate: Ratio<u64>) -> Result<(), EvalError> {
    if *rate.denom() == 0 || rate.numer() > rate.denom() {
        return Err(EvalError::InvalidRate(format!("{}/{}", rate.numer(), rate.denom())));
    }
    Ok(())
}

/// Flags each sequence with probability `rate` and inserts one PERIOD in
/// every flagged sequence. Sequence `i` uses its own seeded stream, so the
/// output for a sequence does not depend on the others.
pub fn random_baseline(
    gold: &[LabeledSequence],
    rate: Ratio<u64>,
    choice: GapChoice,
    seed: u64,
) -> Result<Vec<LabeledSequence>, EvalError> {
    check_rate(rate)?;
    Ok(gold
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let mut rng = rng_for_item(seed, crate::seed::streams::BASELINE, i as u64);
            let mut labels = vec![GapLabel::Space; g.len()];
            let gaps = g.len().saturating_sub(1);
            let flagged = rng.gen_range(0..*rate.denom()) < *rate.numer();
            if flagged && gaps > 0 {
                let gold_pos: Vec<usize> = g.period_positions().collect();
                let at = match choice {
                    GapChoice::Gold if !gold_pos.is_empty() => gold_pos[rng.gen_range(0..gold_pos.len())],
                    _ => rng.gen_range(0..gaps),
                };
                labels[at] = GapLabel::Period;
            }
            g.relabel(labels).expect("same length")
        })
        .collect())
}

/// Expected TP/FP/FN of [`random_baseline`], as reals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedCounts {
    pub tp: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
}

impl ExpectedCounts {
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0.0 {
            0.0
        } else {
            self.tp / (self.tp + self.fp)
        }
    }

    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0.0 {
            0.0
        } else {
            self.tp / (self.tp + self.fn_)
        }
    }

    pub fn f05(&self) -> f64 {
        f05(self.precision(), self.recall())
    }
}

/// Closed-form expectation of the random baseline's counts.
pub fn expected_baseline(
    gold: &[LabeledSequence],
    rate: Ratio<u64>,
    choice: GapChoice,
) -> Result<ExpectedCounts, EvalError> {
    check_rate(rate)?;
    let q = *rate.numer() as f64 / *rate.denom() as f64;
    let (mut tp, mut pred, mut total_gold) = (0.0, 0.0, 0.0);
    for g in gold {
        let gaps = g.len().saturating_sub(1);
        let n_gold = g.period_positions().filter(|&i| i < gaps).count();
        total_gold += g.period_positions().count() as f64;
        if gaps == 0 {
            continue;
        }
        pred += q;
        tp += match choice {
            GapChoice::Gold if n_gold > 0 => q,
            _ => q * n_gold as f64 / gaps as f64,
        };
    }
    Ok(ExpectedCounts {
        tp,
        fp: pred - tp,
        fn_: total_gold - tp,
    })
}

/// One metric's paired bootstrap test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTest {
    pub metric: Metric,
    pub a: f64,
    pub b: f64,
    /// `a - b` on the full data.
    pub delta: f64,
    /// Share of replicates in which the observed winner (A on ties) does not
    /// strictly beat the other system.
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub replicates: usize,
    pub seed: u64,
    pub tests: Vec<MetricTest>,
}

impl BootstrapResult {
    pub fn test(&self, metric: Metric) -> &MetricTest {
        self.tests
            .iter()
            .find(|t| t.metric == metric)
            .expect("all metrics tested")
    }
}

pub const MIN_REPLICATES: usize = 1000;

/// Paired bootstrap over sequences. Replicate `r` resamples with its own
/// seeded stream, so the result does not depend on the worker count.
pub fn bootstrap_significance(
    pred_a: &[LabeledSequence],
    pred_b: &[LabeledSequence],
    gold: &[LabeledSequence],
    replicates: usize,
    seed: u64,
) -> Result<BootstrapResult, EvalError> {
    let a: Vec<Counts> = judge(pred_a, gold)?.into_iter().map(|j| j.counts).collect();
    let b: Vec<Counts> = judge(pred_b, gold)?.into_iter().map(|j| j.counts).collect();
    bootstrap_counts(&a, &b, replicates, seed)
}

/// [`bootstrap_significance`] on precomputed per-sequence counts.
pub fn bootstrap_counts(
    a: &[Counts],
    b: &[Counts],
    replicates: usize,
    seed: u64,
) -> Result<BootstrapResult, EvalError> {
    if replicates < MIN_REPLICATES {
        return Err(EvalError::TooFewReplicates {
            min: MIN_REPLICATES,
            got: replicates,
        });
    }
    if a.len() != b.len() {
        return Err(EvalError::SequenceCount {
            pred: a.len(),
            gold: b.len(),
        });
    }
    let n = a.len();
    let full_a: Counts = a.iter().copied().sum();
    let full_b: Counts = b.iter().copied().sum();
    let observed: Vec<(f64, f64, bool)> = Metric::ALL
        .iter()
        .map(|&m| {
            let (x, y) = (full_a.metric(m), full_b.metric(m));
            (x, y, x >= y)
        })
        .collect();
    let losses: [u64; 3] = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for_item(seed, crate::seed::streams::BOOTSTRAP, r as u64);
            let (mut ca, mut cb) = (Counts::default(), Counts::default());
            for _ in 0..n {
                let k = rng.gen_range(0..n);
                ca += a[k];
                cb += b[k];
            }
            let mut out = [0u64; 3];
            for (slot, (&m, &(_, _, a_won))) in out.iter_mut().zip(Metric::ALL.iter().zip(&observed)) {
                let (x, y) = (ca.metric(m), cb.metric(m));
                let wins = if a_won { x > y } else { y > x };
                *slot = u64::from(!wins);
            }
            out
        })
        .reduce(|| [0; 3], |x, y| [x[0] + y[0], x[1] + y[1], x[2] + y[2]]);
    let tests = Metric::ALL
        .iter()
        .zip(&observed)
        .zip(losses)
        .map(|((&metric, &(x, y, _)), lost)| MetricTest {
            metric,
            a: x,
            b: y,
            delta: x - y,
            p_value: lost as f64 / replicates as f64,
        })
        .collect();
    Ok(BootstrapResult {
        replicates,
        seed,
        tests,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn judgment_counts() {
        use GapLabel::{Period as P, Space as S};
        let j = Judgment::new(&[P, S, P, S], &[P, P, S, S]).unwrap();
        assert_eq!(j.counts, Counts::new(1, 1, 1));
        assert_eq!(j.predicted, [0, 2]);
        assert_eq!(j.gold, [0, 1]);
        assert!(Judgment::new(&[S], &[S, S]).is_err());
    }

    #[test]
    fn zero_denominators() {
        let c = Counts::default();
        assert_eq!((c.precision(), c.recall(), c.f05()), (0.0, 0.0, 0.0));
        assert_eq!(f_beta(0.0, 0.0, 0.5), 0.0);
        assert_eq!(f05(1.0, 1.0), 1.0);
    }
}
