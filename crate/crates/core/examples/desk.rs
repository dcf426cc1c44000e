//! Desk-scale run on the toy grammar: both labelers and the random baseline
//! on a held-out tenth.
//!
//! cargo run --release -p runon --example desk -- [sentences] [s2s-epochs]

use std::time::Instant;

use num_rational::Ratio;
use runon::corpus::{build_dataset, DatasetSpec};
use runon::crf::{train_crf, CrfConfig, Example};
use runon::eval::{expected_baseline, score, Counts, GapChoice};
use runon::ngram::{LmConfig, NgramModel};
use runon::seq2seq::{train_s2s, S2SConfig};
use runon::{toy, LabeledSequence};

fn show(name: &str, c: Counts) {
    println!(
        "{name:8} P {:.3} R {:.3} F0.5 {:.3}",
        c.precision(),
        c.recall(),
        c.f05()
    );
}

fn main() {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("a number")).collect();
    let total = args.first().copied().unwrap_or(20_000);
    let epochs = args.get(1).copied().unwrap_or(S2SConfig::default().epochs);
    let t = Instant::now();
    // Parses are dropped: trees joined from the gold pair would give the
    // boundary away.
    let paragraphs: Vec<Vec<_>> = toy::corpus_with_sentences(total * 13 / 10, 11)
        .iter()
        .map(|p| p.iter().map(|s| s.without_parse()).collect())
        .collect();
    let data = build_dataset(&paragraphs, &DatasetSpec::new(total / 10, total - total / 10, 11)).unwrap();
    let (test, train) = data.split_at(total / 10);

    let lm_corpus = toy::corpus_with_sentences(total * 5, 12);
    let lm_text: Vec<Vec<&str>> = lm_corpus.iter().flatten().map(|s| s.surfaces()).collect();
    let lm = NgramModel::train(&lm_text, &LmConfig::default()).unwrap();
    eprintln!("data and lm {:?}", t.elapsed());

    let examples: Vec<Example> = train
        .iter()
        .map(|s| Example::from_sentence(s.sentence(), s.labels(), Some(&lm)))
        .collect();
    let crf = train_crf(&examples, &CrfConfig::default()).unwrap();
    eprintln!("crf {:?}", t.elapsed());
    let pred: Vec<LabeledSequence> = test
        .iter()
        .map(|s| s.relabel(crf.tag_sentence(s.sentence(), Some(&lm))).unwrap())
        .collect();
    show("roCRF", score(&pred, test).unwrap());

    let s2s = train_s2s(
        train,
        &S2SConfig {
            epochs,
            ..S2SConfig::default()
        },
    )
    .unwrap();
    eprintln!("s2s {:?}", t.elapsed());
    let pred: Vec<LabeledSequence> = test
        .iter()
        .map(|s| s.relabel(s2s.tag_sentence(s.sentence()).unwrap()).unwrap())
        .collect();
    show("roS2S", score(&pred, test).unwrap());

    let b = expected_baseline(test, Ratio::new(1, 10), GapChoice::Gold).unwrap();
    println!(
        "{:8} P {:.3} R {:.3} F0.5 {:.3}",
        "random",
        b.precision(),
        b.recall(),
        b.f05()
    );
}
