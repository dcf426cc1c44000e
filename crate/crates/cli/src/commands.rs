use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use log::info;
use rayon::prelude::*;
use runon::corpus::{self, DatasetSpec};
use runon::crf::{self, CrfModel, Example};
use runon::eval::{self, EvalReport, GapChoice, Metric};
use runon::ngram::{self, NgramModel};
use runon::seq2seq::{self, S2SModel, Vocab};
use runon::{toy, AnnotatedSentence, GapLabel, LabeledSequence, ParseTree};
use serde::Serialize;

use crate::config::{parse_rate, BootstrapOpts, CrfOpts, DatasetOpts, LabelArg, LmOpts, Merge, S2SOpts};
use crate::{Context, Failure};

const FIXTURE_CORPUS: &str = include_str!("../fixtures/corpus.tsv");
const FIXTURE_TREES: &str = include_str!("../fixtures/corpus.trees");

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| Failure::data(path, e))
}

/// A file, or standard output for `-` or no path.
fn create(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) if p != Path::new("-") => {
            let f = File::create(p).map_err(|e| Failure::data(p, e))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        _ => Ok(Box::new(BufWriter::new(std::io::stdout().lock()))),
    }
}

fn finish(mut w: Box<dyn Write>, path: Option<&Path>) -> Result<(), Failure> {
    w.flush().map_err(|e| Failure::data(path.unwrap_or(Path::new("-")), e))
}

fn log_config(stage: &str, config: &impl Serialize) {
    info!(
        "{stage} config {}",
        serde_json::to_string(config).expect("serializable config")
    );
}

fn read_trees(path: Option<&Path>) -> Result<Option<Vec<Option<ParseTree>>>, Failure> {
    path.map(|p| corpus::read_trees(open(p)?).map_err(|e| Failure::data(p, e)))
        .transpose()
}

fn read_labeled(path: &Path, trees: Option<&Path>) -> Result<Vec<LabeledSequence>, Failure> {
    let trees = read_trees(trees)?;
    corpus::read_labeled(open(path)?, trees).map_err(|e| Failure::data(path, e))
}

fn read_corpus(path: &Path, trees: Option<&Path>) -> Result<Vec<Vec<AnnotatedSentence>>, Failure> {
    let trees = read_trees(trees)?;
    corpus::read_corpus(open(path)?, trees).map_err(|e| Failure::data(path, e))
}

fn write_labeled(path: Option<&Path>, seqs: &[LabeledSequence]) -> Result<(), Failure> {
    let mut w = create(path)?;
    corpus::write_labeled(&mut w, seqs).map_err(|e| Failure::data(path.unwrap_or(Path::new("-")), e))?;
    finish(w, path)
}

fn write_trees(path: &Path, seqs: &[LabeledSequence]) -> Result<(), Failure> {
    let mut w = create(Some(path))?;
    corpus::write_trees(&mut w, seqs.iter().map(|s| s.sentence().parse())).map_err(|e| Failure::data(path, e))?;
    finish(w, Some(path))
}

fn load_lm(path: Option<&Path>) -> Result<Option<NgramModel>, Failure> {
    path.map(|p| ngram::load_model(p).map_err(|e| Failure::data(p, e)))
        .transpose()
}

/// `NAME=PATH`, or a bare path named after its file stem.
#[derive(Debug, Clone)]
pub struct Named {
    name: String,
    path: PathBuf,
}

impl std::str::FromStr for Named {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once('=') {
            Some((n, p)) if !n.is_empty() && !p.is_empty() => Ok(Named {
                name: n.to_string(),
                path: p.into(),
            }),
            Some(_) => Err(format!("expected NAME=PATH, got {s:?}")),
            None => Ok(Named {
                name: stem(Path::new(s)),
                path: s.into(),
            }),
        }
    }
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned())
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Write at least this many sentences
    #[arg(long)]
    sentences: usize,
    /// Corpus file (`tokens<TAB>tags` per line, blank line between
    /// paragraphs); standard output when omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Parallel file of bracketed parse trees
    #[arg(long)]
    trees: Option<PathBuf>,
}

pub fn generate(ctx: &Context, a: GenerateArgs) -> Result<(), Failure> {
    log_config(
        "generate",
        &serde_json::json!({"seed": ctx.seed, "sentences": a.sentences}),
    );
    let paragraphs = toy::corpus_with_sentences(a.sentences, ctx.seed);
    let out = a.output.as_deref();
    let mut w = create(out)?;
    corpus::write_corpus(&mut w, &paragraphs).map_err(|e| Failure::data(out.unwrap_or(Path::new("-")), e))?;
    finish(w, out)?;
    if let Some(t) = &a.trees {
        let mut w = create(Some(t))?;
        corpus::write_trees(&mut w, paragraphs.iter().flatten().map(|s| s.parse())).map_err(|e| Failure::data(t, e))?;
        finish(w, Some(t))?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    /// Clean corpus: one sentence per line as `tokens<TAB>tags`, blank
    /// line between paragraphs
    #[arg(long)]
    corpus: PathBuf,
    /// Parallel parse trees for --corpus
    #[arg(long)]
    trees: Option<PathBuf>,
    #[command(flatten)]
    dataset: DatasetOpts,
    /// Subsample run-ons afterwards so they make up this share
    #[arg(long)]
    downsample: Option<String>,
    /// Labeled sequences (`surface<TAB>POS<TAB>S|P`); standard output when
    /// omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Trees of the output sequences
    #[arg(long)]
    output_trees: Option<PathBuf>,
    /// Move the first N sequences to --test-output
    #[arg(long, requires = "test_output", default_value_t = 0)]
    test_size: usize,
    #[arg(long)]
    test_output: Option<PathBuf>,
    /// Trees of the --test-output sequences
    #[arg(long, requires = "test_output")]
    test_output_trees: Option<PathBuf>,
}

pub fn synthesize(ctx: &Context, a: SynthesizeArgs) -> Result<(), Failure> {
    let size = a.dataset.clone().merge(ctx.file.dataset.clone()).resolve()?;
    log_config(
        "synthesize",
        &serde_json::json!({"seed": ctx.seed, "size": size, "downsample": a.downsample, "test_size": a.test_size}),
    );
    let paragraphs = read_corpus(&a.corpus, a.trees.as_deref())?;
    let spec = DatasetSpec::new(size.runons, size.negatives, ctx.seed);
    let mut data = corpus::build_dataset(&paragraphs, &spec).map_err(|e| Failure::data(&a.corpus, e))?;
    if let Some(f) = &a.downsample {
        data = corpus::downsample_runons(data, parse_rate(f)?, ctx.seed).map_err(|e| Failure::msg(e.to_string()))?;
    }
    let (runons, negatives) = corpus::class_counts(&data);
    info!("{runons} run-ons, {negatives} clean sequences");
    if a.test_size > data.len() {
        return Err(Failure::usage(format!(
            "--test-size {} exceeds the {} sequences",
            a.test_size,
            data.len()
        )));
    }
    let (test, train) = data.split_at(a.test_size);
    write_labeled(a.output.as_deref(), train)?;
    if let Some(t) = &a.output_trees {
        write_trees(t, train)?;
    }
    if let Some(p) = &a.test_output {
        write_labeled(Some(p), test)?;
        if let Some(t) = &a.test_output_trees {
            write_trees(t, test)?;
        }
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainLmArgs {
    /// Training text in corpus format (the tag column may be absent)
    #[arg(long)]
    input: PathBuf,
    /// Read --input as labeled sequences and split them at PERIOD labels
    #[arg(long)]
    labeled: bool,
    #[command(flatten)]
    lm: LmOpts,
    #[arg(short, long)]
    output: PathBuf,
}

pub fn train_lm(ctx: &Context, a: TrainLmArgs) -> Result<(), Failure> {
    let config = a.lm.clone().merge(ctx.file.lm.clone()).resolve();
    log_config(
        "train-lm",
        &serde_json::json!({
            "order": config.order,
            "min_count": config.min_count,
            "smoothing": config.smoothing.name(),
            "lowercase": config.lowercase,
        }),
    );
    let sentences: Vec<Vec<String>> = if a.labeled {
        read_labeled(&a.input, None)?
            .iter()
            .flat_map(corpus::split_at_periods)
            .collect()
    } else {
        read_corpus(&a.input, None)?
            .iter()
            .flatten()
            .map(|s| s.surfaces().into_iter().map(String::from).collect())
            .collect()
    };
    let model = NgramModel::train(&sentences, &config).map_err(|e| Failure::data(&a.input, e))?;
    info!(
        "{} sentences, vocabulary {}, estimator {}",
        sentences.len(),
        model.vocab_size(),
        model.estimator().name()
    );
    ngram::save_model(&model, &a.output).map_err(|e| Failure::data(&a.output, e))
}

/// Labeled input shared by the CRF stages.
#[derive(Debug, Args)]
pub struct LabeledInput {
    /// Labeled sequences (`surface<TAB>POS<TAB>S|P`)
    #[arg(long)]
    input: PathBuf,
    /// Parallel parse trees for --input
    #[arg(long)]
    trees: Option<PathBuf>,
    /// Language model for the perplexity and k-gram features; `nolm`
    /// sentinels otherwise
    #[arg(long)]
    lm: Option<PathBuf>,
}

fn examples(input: &LabeledInput) -> Result<Vec<Example>, Failure> {
    let data = read_labeled(&input.input, input.trees.as_deref())?;
    let lm = load_lm(input.lm.as_deref())?;
    Ok(data
        .par_iter()
        .map(|s| Example::from_sentence(s.sentence(), s.labels(), lm.as_ref()))
        .collect())
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[command(flatten)]
    input: LabeledInput,
    /// Leave out the template-name header line
    #[arg(long)]
    no_header: bool,
    /// One gap per line, tab-separated feature values, then the gold label
    #[arg(short, long)]
    output: Option<PathBuf>,
}

pub fn featurize(_ctx: &Context, a: FeaturizeArgs) -> Result<(), Failure> {
    let ex = examples(&a.input)?;
    let out = a.output.as_deref();
    let mut w = create(out)?;
    let header = (!a.no_header).then(crf::templates);
    crf::write_feature_file(&mut w, header, &ex).map_err(|e| Failure::data(out.unwrap_or(Path::new("-")), e))?;
    finish(w, out)
}

#[derive(Debug, Args)]
pub struct TrainCrfArgs {
    #[command(flatten)]
    input: LabeledInputOrFeatures,
    #[command(flatten)]
    crf: CrfOpts,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
pub struct LabeledInputOrFeatures {
    /// Labeled sequences to featurize
    #[arg(long, required_unless_present = "features")]
    input: Option<PathBuf>,
    /// A feature file written by `featurize`
    #[arg(long, conflicts_with_all = ["input", "trees", "lm"])]
    features: Option<PathBuf>,
    /// Parallel parse trees for --input
    #[arg(long)]
    trees: Option<PathBuf>,
    /// Language model for the perplexity and k-gram features
    #[arg(long)]
    lm: Option<PathBuf>,
}

pub fn train_crf(ctx: &Context, a: TrainCrfArgs) -> Result<(), Failure> {
    let config = a.crf.clone().merge(ctx.file.crf.clone()).resolve();
    log_config(
        "train-crf",
        &serde_json::json!({
            "c": config.c,
            "cutoff": config.cutoff,
            "tau": config.tau,
            "threshold_label": config.threshold_label.to_string(),
            "max_iterations": config.max_iterations,
            "tolerance": config.tolerance,
        }),
    );
    let src = &a.input;
    let (ex, templates, path) = match (&src.input, &src.features) {
        (Some(input), _) => {
            let li = LabeledInput {
                input: input.clone(),
                trees: src.trees.clone(),
                lm: src.lm.clone(),
            };
            (examples(&li)?, crf::templates().to_vec(), input.clone())
        }
        (None, Some(f)) => {
            let file = crf::read_feature_file(open(f)?).map_err(|e| Failure::data(f, e))?;
            (file.sequences.clone(), file.template_names(), f.clone())
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    let model = crf::train_crf_with_templates(&ex, templates, &config).map_err(|e| Failure::data(&path, e))?;
    let s = model.summary();
    info!(
        "{} after {} iterations, objective {:.6}, {} features, {} zero weights",
        s.status,
        s.iterations,
        s.objective,
        model.feature_count(),
        model.zero_weight_count()
    );
    crf::save_model(&model, &a.output).map_err(|e| Failure::data(&a.output, e))
}

#[derive(Debug, Args)]
pub struct TrainS2SArgs {
    /// Labeled training sequences
    #[arg(long)]
    input: PathBuf,
    /// Validation sequences; otherwise a seeded share of --input is held out
    #[arg(long)]
    valid: Option<PathBuf>,
    /// Word vectors (`word v1 ... vd` per line) to start the embedding table
    /// from
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[command(flatten)]
    s2s: S2SOpts,
    #[arg(short, long)]
    output: PathBuf,
}

pub fn train_s2s(ctx: &Context, a: TrainS2SArgs) -> Result<(), Failure> {
    let config = a.s2s.clone().merge(ctx.file.s2s.clone()).resolve(ctx.seed);
    log_config("train-s2s", &config);
    let data = read_labeled(&a.input, None)?;
    let s2s_err = |e: seq2seq::S2SError| Failure::data(&a.input, e);
    config.validate().map_err(|e| Failure::usage(e.to_string()))?;
    let (train, valid) = match &a.valid {
        Some(v) => (data, read_labeled(v, None)?),
        None => seq2seq::split_validation(&data, &config).map_err(s2s_err)?,
    };
    let vocab = Vocab::build(train.iter().map(|s| s.sentence()), config.vocab_size, config.lowercase);
    let mut model = S2SModel::new(config, vocab).map_err(s2s_err)?;
    if let Some(p) = &a.embeddings {
        let emb = seq2seq::read_embeddings(open(p)?, Some(model.vocab())).map_err(|e| Failure::data(p, e))?;
        let hits = model.load_embeddings(&emb).map_err(|e| Failure::data(p, e))?;
        info!(
            "{hits} of {} vocabulary words have pretrained vectors",
            model.vocab().len()
        );
    }
    let model = model.fit(&train, &valid).map_err(s2s_err)?;
    if let Some(r) = model.report() {
        for e in &r.epochs {
            info!(
                "epoch {}: train loss {:.5}, validation loss {}, rate {}{}",
                e.epoch,
                e.train_loss,
                e.valid_loss.map_or("-".into(), |v| format!("{v:.5}")),
                e.learning_rate,
                if e.improved { " *" } else { "" }
            );
        }
    }
    seq2seq::save_model(&model, &a.output).map_err(|e| Failure::data(&a.output, e))
}

/// Either trained labeler.
enum Labeler {
    Crf(CrfModel, Option<NgramModel>),
    S2S(S2SModel),
}

impl Labeler {
    fn load(path: &Path, lm: Option<&Path>) -> Result<Self, Failure> {
        let mut head = [0u8; 8];
        let n = open(path)?.read(&mut head).map_err(|e| Failure::data(path, e))?;
        if &head[..n] == b"RUNONS2S" {
            if lm.is_some() {
                return Err(Failure::usage("--lm applies to CRF models only"));
            }
            let m = seq2seq::load_model(path).map_err(|e| Failure::data(path, e))?;
            Ok(Labeler::S2S(m))
        } else {
            let m = crf::load_model(path).map_err(|e| Failure::data(path, e))?;
            Ok(Labeler::Crf(m, load_lm(lm)?))
        }
    }

    fn tag(&self, s: &AnnotatedSentence) -> Result<Vec<GapLabel>, String> {
        match self {
            Labeler::Crf(m, lm) => Ok(m.tag_sentence(s, lm.as_ref())),
            Labeler::S2S(m) => m.tag_sentence(s).map_err(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// Labeled sequences; the gold labels are ignored
    Labeled,
    /// Corpus format; each sentence line is one sequence
    Corpus,
}

/// Model and input shared by `tag` and `correct`.
#[derive(Debug, Args)]
pub struct TagInput {
    /// A CRF or encoder-decoder model file
    #[arg(long)]
    model: PathBuf,
    /// The language model the CRF was trained with
    #[arg(long)]
    lm: Option<PathBuf>,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    trees: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = InputFormat::Labeled)]
    format: InputFormat,
    /// Override the CRF model's decode threshold
    #[arg(long)]
    tau: Option<f64>,
    /// Override which marginal the threshold applies to
    #[arg(long, value_enum, requires = "tau")]
    threshold_label: Option<LabelArg>,
}

fn tag_all(t: &TagInput) -> Result<Vec<LabeledSequence>, Failure> {
    let sentences: Vec<AnnotatedSentence> = match t.format {
        InputFormat::Labeled => read_labeled(&t.input, t.trees.as_deref())?
            .into_iter()
            .map(|s| s.sentence().clone())
            .collect(),
        InputFormat::Corpus => read_corpus(&t.input, t.trees.as_deref())?
            .into_iter()
            .flatten()
            .collect(),
    };
    if sentences.is_empty() {
        return Err(Failure::data(&t.input, "no sequences"));
    }
    let mut labeler = Labeler::load(&t.model, t.lm.as_deref())?;
    if let Some(tau) = t.tau {
        match &mut labeler {
            Labeler::Crf(m, _) => {
                let label = t.threshold_label.map_or(m.threshold_label(), GapLabel::from);
                m.set_threshold(tau, label).map_err(|e| Failure::usage(e.to_string()))?;
            }
            Labeler::S2S(_) => return Err(Failure::usage("--tau applies to CRF models only")),
        }
    }
    if let Labeler::Crf(m, _) = &labeler {
        info!("tau {} on p({})", m.tau(), m.threshold_label());
    }
    sentences
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let labels = labeler
                .tag(s)
                .map_err(|e| Failure::data(&t.input, format!("sequence {}: {e}", i + 1)))?;
            Ok(LabeledSequence::new(s.clone(), labels).expect("one label per token"))
        })
        .collect()
}

#[derive(Debug, Args)]
pub struct TagArgs {
    #[command(flatten)]
    input: TagInput,
    /// Labeled predictions; standard output when omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
}

pub fn tag(_ctx: &Context, a: TagArgs) -> Result<(), Failure> {
    let pred = tag_all(&a.input)?;
    let periods: usize = pred.iter().map(|s| s.period_positions().count()).sum();
    info!("{} sequences, {periods} periods inserted", pred.len());
    write_labeled(a.output.as_deref(), &pred)
}

#[derive(Debug, Args)]
pub struct CorrectArgs {
    #[command(flatten)]
    input: TagInput,
    /// Corrected text, one sequence per line; standard output when omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
}

pub fn correct(_ctx: &Context, a: CorrectArgs) -> Result<(), Failure> {
    let pred = tag_all(&a.input)?;
    let out = a.output.as_deref();
    let mut w = create(out)?;
    for s in &pred {
        let text = seq2seq::fuse_output(s.sentence(), s.labels()).expect("labels match tokens");
        writeln!(w, "{text}").map_err(|e| Failure::data(out.unwrap_or(Path::new("-")), e))?;
    }
    finish(w, out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineMode {
    /// A flagged sequence gets its PERIOD at a gold position when it has one
    Gold,
    /// A flagged sequence gets its PERIOD at a uniformly chosen gap
    Uniform,
}

impl From<BaselineMode> for GapChoice {
    fn from(m: BaselineMode) -> Self {
        match m {
            BaselineMode::Gold => GapChoice::Gold,
            BaselineMode::Uniform => GapChoice::Uniform,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Gold labeled sequences
    #[arg(long)]
    gold: PathBuf,
    /// Predicted labeled sequences as [NAME=]PATH (repeatable)
    #[arg(long)]
    pred: Vec<Named>,
    /// Another system's corrected text as [NAME=]PATH, one line per gold
    /// sequence, aligned back to the gold tokens (repeatable)
    #[arg(long)]
    corrected: Vec<Named>,
    /// Dataset column name [default: the gold file's stem]
    #[arg(long)]
    dataset: Option<String>,
    /// Add a random baseline that flags sequences at this rate (0.1 is the
    /// balanced test-set prevalence)
    #[arg(long)]
    baseline_rate: Option<String>,
    #[arg(long, value_enum, default_value_t = BaselineMode::Gold, requires = "baseline_rate")]
    baseline_mode: BaselineMode,
    /// Report the baseline's expected counts instead of one seeded draw
    #[arg(long, requires = "baseline_rate")]
    baseline_expected: bool,
    /// Test every system against the first with a paired bootstrap
    #[arg(long)]
    significance: bool,
    #[command(flatten)]
    bootstrap: BootstrapOpts,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    format: ReportFormat,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn aligned_predictions(gold: &[LabeledSequence], corrected: &Path) -> Result<Vec<LabeledSequence>, Failure> {
    let lines: Vec<String> = open(corrected)?
        .lines()
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::data(corrected, e))?;
    if lines.len() != gold.len() {
        return Err(Failure::data(
            corrected,
            format!("{} lines for {} gold sequences", lines.len(), gold.len()),
        ));
    }
    Ok(gold
        .iter()
        .zip(&lines)
        .map(|(g, line)| {
            g.relabel(eval::align_corrected(g.sentence(), line))
                .expect("one label per token")
        })
        .collect())
}

fn write_reports(reports: &[EvalReport], format: ReportFormat, out: Option<&Path>) -> Result<(), Failure> {
    let mut w = create(out)?;
    let err = |e: &dyn std::fmt::Display| Failure::data(out.unwrap_or(Path::new("-")), e);
    match format {
        ReportFormat::Table => w
            .write_all(eval::report_table(reports).as_bytes())
            .map_err(|e| err(&e))?,
        ReportFormat::Csv => eval::write_csv(&mut w, reports).map_err(|e| err(&e))?,
        ReportFormat::Json => eval::write_json(&mut w, reports).map_err(|e| err(&e))?,
    }
    finish(w, out)
}

pub fn evaluate(ctx: &Context, a: EvaluateArgs) -> Result<(), Failure> {
    let replicates = a.bootstrap.clone().merge(ctx.file.bootstrap.clone()).resolve();
    log_config(
        "evaluate",
        &serde_json::json!({
            "seed": ctx.seed,
            "baseline_rate": a.baseline_rate,
            "baseline_mode": format!("{:?}", a.baseline_mode),
            "baseline_expected": a.baseline_expected,
            "replicates": a.significance.then_some(replicates),
        }),
    );
    if a.pred.is_empty() && a.corrected.is_empty() && a.baseline_rate.is_none() {
        return Err(Failure::usage(
            "nothing to score: give --pred, --corrected or --baseline-rate",
        ));
    }
    let gold = read_labeled(&a.gold, None)?;
    if gold.is_empty() {
        return Err(Failure::data(&a.gold, "no sequences"));
    }
    let dataset = a.dataset.clone().unwrap_or_else(|| stem(&a.gold));
    let mut systems: Vec<(String, Vec<LabeledSequence>)> = Vec::new();
    for p in &a.pred {
        systems.push((p.name.clone(), read_labeled(&p.path, None)?));
    }
    for c in &a.corrected {
        systems.push((c.name.clone(), aligned_predictions(&gold, &c.path)?));
    }
    let mut reports = Vec::new();
    for (name, pred) in &systems {
        let judged = eval::judge(pred, &gold).map_err(|e| Failure::msg(format!("{name}: {e}")))?;
        let counts = judged.iter().map(|j| j.counts).sum();
        reports.push(EvalReport::from_counts(name.clone(), dataset.clone(), counts));
    }
    if a.significance {
        if systems.len() < 2 {
            return Err(Failure::usage("--significance needs at least two systems"));
        }
        let (_, first) = &systems[0];
        for (i, (_, pred)) in systems.iter().enumerate().skip(1) {
            let b = eval::bootstrap_significance(first, pred, &gold, replicates, ctx.seed)
                .map_err(|e| Failure::usage(e.to_string()))?;
            reports[i].bootstrap = Some(b);
        }
    }
    if let Some(rate) = &a.baseline_rate {
        let rate = parse_rate(rate)?;
        let choice = GapChoice::from(a.baseline_mode);
        let report = if a.baseline_expected {
            let e = eval::expected_baseline(&gold, rate, choice).map_err(|e| Failure::usage(e.to_string()))?;
            EvalReport::from_pr("random", dataset.clone(), e.precision(), e.recall())
        } else {
            let pred =
                eval::random_baseline(&gold, rate, choice, ctx.seed).map_err(|e| Failure::usage(e.to_string()))?;
            EvalReport::from_counts(
                "random",
                dataset.clone(),
                eval::score(&pred, &gold).expect("aligned by construction"),
            )
        };
        reports.push(report);
    }
    write_reports(&reports, a.format, a.output.as_deref())
}

#[derive(Debug, Args)]
pub struct SignificanceArgs {
    #[arg(long)]
    gold: PathBuf,
    /// System A predictions as [NAME=]PATH
    #[arg(long)]
    a: Named,
    /// System B predictions as [NAME=]PATH
    #[arg(long)]
    b: Named,
    #[command(flatten)]
    bootstrap: BootstrapOpts,
    /// Print JSON instead of a table
    #[arg(long)]
    json: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

pub fn significance(ctx: &Context, a: SignificanceArgs) -> Result<(), Failure> {
    let replicates = a.bootstrap.clone().merge(ctx.file.bootstrap.clone()).resolve();
    log_config(
        "significance",
        &serde_json::json!({"seed": ctx.seed, "replicates": replicates}),
    );
    let gold = read_labeled(&a.gold, None)?;
    let pa = read_labeled(&a.a.path, None)?;
    let pb = read_labeled(&a.b.path, None)?;
    let r = eval::bootstrap_significance(&pa, &pb, &gold, replicates, ctx.seed)
        .map_err(|e| Failure::usage(e.to_string()))?;
    let out = a.output.as_deref();
    let mut w = create(out)?;
    let werr = |e: std::io::Error| Failure::data(out.unwrap_or(Path::new("-")), e);
    if a.json {
        let v = serde_json::json!({"a": a.a.name, "b": a.b.name, "result": r});
        serde_json::to_writer_pretty(&mut w, &v).map_err(|e| werr(e.into()))?;
        writeln!(w).map_err(werr)?;
    } else {
        writeln!(
            w,
            "A = {}, B = {}, {} replicates, seed {}",
            a.a.name, a.b.name, r.replicates, r.seed
        )
        .map_err(werr)?;
        writeln!(w, "{:9} {:>7} {:>7} {:>8} {:>7}", "metric", "A", "B", "A-B", "p").map_err(werr)?;
        for m in Metric::ALL {
            let t = r.test(m);
            writeln!(
                w,
                "{:9} {:7.4} {:7.4} {:+8.4} {:7.4}",
                m.name(),
                t.a,
                t.b,
                t.delta,
                t.p_value
            )
            .map_err(werr)?;
        }
    }
    finish(w, out)
}

#[derive(Debug, Args)]
pub struct SmokeArgs {
    /// Directory for every intermediate artifact and `report.json`
    #[arg(long)]
    dir: PathBuf,
    /// Drop the fixture's parse trees (parse features become `noparse`)
    #[arg(long)]
    no_parses: bool,
    /// Training-set F0.5 the CRF must reach
    #[arg(long, default_value_t = 0.95)]
    min_f05: f64,
}

/// Fixture synthesis sizes: 40 run-ons use 80 of the 200 sentences.
const SMOKE_RUNONS: usize = 40;
const SMOKE_NEGATIVES: usize = 80;

pub fn smoke(ctx: &Context, a: SmokeArgs) -> Result<(), Failure> {
    std::fs::create_dir_all(&a.dir).map_err(|e| Failure::data(&a.dir, e))?;
    let p = |name: &str| a.dir.join(name);
    std::fs::write(p("corpus.tsv"), FIXTURE_CORPUS).map_err(|e| Failure::data(&p("corpus.tsv"), e))?;
    let trees = if a.no_parses {
        None
    } else {
        std::fs::write(p("corpus.trees"), FIXTURE_TREES).map_err(|e| Failure::data(&p("corpus.trees"), e))?;
        Some(p("corpus.trees"))
    };
    let stage = |name: &str, r: Result<(), Failure>| {
        r.map_err(|e| match e {
            Failure::Usage(m) => Failure::Usage(format!("{name}: {m}")),
            Failure::Data(m) => Failure::Data(format!("{name}: {m}")),
        })
    };
    stage(
        "synthesize",
        synthesize(
            ctx,
            SynthesizeArgs {
                corpus: p("corpus.tsv"),
                trees: trees.clone(),
                dataset: DatasetOpts {
                    runons: Some(SMOKE_RUNONS),
                    negatives: Some(SMOKE_NEGATIVES),
                    ..DatasetOpts::default()
                },
                downsample: None,
                output: Some(p("data.tsv")),
                output_trees: trees.as_ref().map(|_| p("data.trees")),
                test_size: 0,
                test_output: None,
                test_output_trees: None,
            },
        ),
    )?;
    let data_trees = trees.as_ref().map(|_| p("data.trees"));
    stage(
        "train-lm",
        train_lm(
            ctx,
            TrainLmArgs {
                input: p("corpus.tsv"),
                labeled: false,
                lm: LmOpts::default(),
                output: p("lm.txt"),
            },
        ),
    )?;
    let input = || LabeledInput {
        input: p("data.tsv"),
        trees: data_trees.clone(),
        lm: Some(p("lm.txt")),
    };
    stage(
        "featurize",
        featurize(
            ctx,
            FeaturizeArgs {
                input: input(),
                no_header: false,
                output: Some(p("features.tsv")),
            },
        ),
    )?;
    stage(
        "train-crf",
        train_crf(
            ctx,
            TrainCrfArgs {
                input: LabeledInputOrFeatures {
                    input: None,
                    features: Some(p("features.tsv")),
                    trees: None,
                    lm: None,
                },
                crf: CrfOpts {
                    c: Some(1000.0),
                    cutoff: Some(1),
                    ..CrfOpts::default()
                },
                output: p("model.crf"),
            },
        ),
    )?;
    stage(
        "tag",
        tag(
            ctx,
            TagArgs {
                input: TagInput {
                    model: p("model.crf"),
                    lm: Some(p("lm.txt")),
                    input: p("data.tsv"),
                    trees: data_trees.clone(),
                    format: InputFormat::Labeled,
                    tau: None,
                    threshold_label: None,
                },
                output: Some(p("pred.tsv")),
            },
        ),
    )?;
    let pred = read_labeled(&p("pred.tsv"), None)?;
    let gold = read_labeled(&p("data.tsv"), None)?;
    let report = eval::score_report("roCRF", "fixture", &pred, &gold).map_err(|e| Failure::msg(e.to_string()))?;
    write_reports(
        std::slice::from_ref(&report),
        ReportFormat::Json,
        Some(&p("report.json")),
    )?;
    info!(
        "fixture P {:.4} R {:.4} F0.5 {:.4}",
        report.precision, report.recall, report.f05
    );
    if report.f05 < a.min_f05 {
        return Err(Failure::msg(format!(
            "training-set F0.5 {:.4} is below {}",
            report.f05, a.min_f05
        )));
    }
    Ok(())
}
