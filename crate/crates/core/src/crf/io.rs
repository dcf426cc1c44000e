//! Feature files and the CRF model file.
//!
//! Feature file: one gap per line, tab-separated feature values (column k is
//! template k) and a final gold label column (`S`/`P`, or `SPACE`/`PERIOD`).
//! A blank line ends a sequence. An optional first line `#<TAB>name...` names
//! the templates; without it columns are called `c0`, `c1`, ...
//!
//! Model file:
//!
//! ```text
//! runon-crf 1
//! c 10
//! cutoff 5
//! tau 0.7
//! threshold_label SPACE
//! iterations 87
//! status converged
//! objective 1234.5
//! templates <T>
//! <name per line>
//! transitions <SS> <SP> <PS> <PP>
//! features <F>
//! <template id><TAB><value><TAB><w SPACE><TAB><w PERIOD>
//! end
//! ```
//!
//! Floats are written in shortest round-trip form, so save/load is exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{CrfConfig, CrfError, CrfModel, Example, FeatureVector, TrainingSummary};
use crate::sentence::GapLabel;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "runon-crf";

fn format_err(line: usize, message: impl Into<String>) -> CrfError {
    CrfError::Format {
        line,
        message: message.into(),
    }
}

/// Parsed feature file.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub templates: Option<Vec<String>>,
    pub sequences: Vec<Example>,
}

impl FeatureFile {
    /// Template names, generated from the column count when absent.
    pub fn template_names(&self) -> Vec<String> {
        match &self.templates {
            Some(t) => t.clone(),
            None => {
                let width = self
                    .sequences
                    .iter()
                    .flat_map(|s| s.features.first())
                    .map(FeatureVector::len)
                    .next()
                    .unwrap_or(0);
                (0..width).map(|i| format!("c{i}")).collect()
            }
        }
    }
}

pub fn read_feature_file(reader: impl BufRead) -> Result<FeatureFile, CrfError> {
    let mut templates = None;
    let mut sequences = Vec::new();
    let mut feats = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for (n, line) in reader.lines().enumerate() {
        let no = n + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if n == 0 {
            if let Some(rest) = line.strip_prefix("#\t") {
                let names: Vec<String> = rest.split('\t').map(String::from).collect();
                width = Some(names.len() + 1);
                templates = Some(names);
                continue;
            }
        }
        if line.trim().is_empty() {
            if !feats.is_empty() {
                sequences.push(Example {
                    features: std::mem::take(&mut feats),
                    labels: std::mem::take(&mut labels),
                });
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 2 {
            return Err(format_err(no, "expected feature columns followed by a label"));
        }
        match width {
            Some(w) if w != cols.len() => {
                return Err(format_err(no, format!("expected {w} columns, found {}", cols.len())))
            }
            None => width = Some(cols.len()),
            _ => {}
        }
        let (label, values) = cols.split_last().unwrap();
        let label = GapLabel::parse(label).ok_or_else(|| format_err(no, format!("unknown label {label:?}")))?;
        feats.push(FeatureVector::new(values.iter().map(|s| s.to_string()).collect()));
        labels.push(label);
    }
    if !feats.is_empty() {
        sequences.push(Example {
            features: feats,
            labels,
        });
    }
    Ok(FeatureFile { templates, sequences })
}

pub fn write_feature_file(
    mut w: impl Write,
    templates: Option<&[String]>,
    sequences: &[Example],
) -> std::io::Result<()> {
    if let Some(t) = templates {
        writeln!(w, "#\t{}", t.join("\t"))?;
    }
    for (i, ex) in sequences.iter().enumerate() {
        if i > 0 {
            writeln!(w)?;
        }
        for (fv, l) in ex.features.iter().zip(&ex.labels) {
            writeln!(w, "{fv}\t{}", l.code())?;
        }
    }
    Ok(())
}

pub fn write_model(model: &CrfModel, mut w: impl Write) -> Result<(), CrfError> {
    writeln!(w, "{MAGIC} {FORMAT_VERSION}")?;
    writeln!(w, "c {}", model.c)?;
    writeln!(w, "cutoff {}", model.cutoff)?;
    writeln!(w, "tau {}", model.tau)?;
    writeln!(w, "threshold_label {}", model.threshold_label)?;
    writeln!(w, "iterations {}", model.summary.iterations)?;
    writeln!(w, "status {}", model.summary.status)?;
    writeln!(w, "objective {}", model.summary.objective)?;
    writeln!(w, "templates {}", model.templates.len())?;
    for t in &model.templates {
        writeln!(w, "{t}")?;
    }
    let t = model.transitions();
    writeln!(w, "transitions {} {} {} {}", t[0][0], t[0][1], t[1][0], t[1][1])?;
    writeln!(w, "features {}", model.feature_count())?;
    for (tid, v, ws) in model.features() {
        writeln!(w, "{tid}\t{v}\t{}\t{}", ws[0], ws[1])?;
    }
    writeln!(w, "end")?;
    Ok(())
}

pub fn save_model(model: &CrfModel, path: &Path) -> Result<(), CrfError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(model, &mut w)?;
    w.flush()?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    no: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String, CrfError> {
        self.no += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(format_err(self.no, "unexpected end of file")),
        }
    }

    fn field<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, CrfError> {
        let line = self.next()?;
        let v = line
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| format_err(self.no, format!("expected `{key} <value>`")))?;
        v.parse()
            .map_err(|_| format_err(self.no, format!("bad value for {key}: {v:?}")))
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64, CrfError> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format_err(line, format!("bad weight {s:?}")))
}

pub fn read_model(r: impl BufRead) -> Result<CrfModel, CrfError> {
    let mut lines = Lines {
        inner: r.lines(),
        no: 0,
    };
    let version: u32 = lines.field(MAGIC)?;
    if version != FORMAT_VERSION {
        return Err(format_err(1, format!("unsupported model version {version}")));
    }
    let c: f64 = lines.field("c")?;
    let cutoff: usize = lines.field("cutoff")?;
    let tau: f64 = lines.field("tau")?;
    let label: String = lines.field("threshold_label")?;
    let threshold_label = GapLabel::parse(&label).ok_or_else(|| format_err(lines.no, "bad threshold label"))?;
    let iterations: usize = lines.field("iterations")?;
    let status: String = lines.field("status")?;
    let objective: f64 = lines.field("objective")?;
    let nt: usize = lines.field("templates")?;
    let mut templates = Vec::with_capacity(nt);
    for _ in 0..nt {
        templates.push(lines.next()?);
    }
    let tline: String = lines.field("transitions")?;
    let tv: Vec<f64> = tline
        .split(' ')
        .map(|s| parse_f64(s, lines.no))
        .collect::<Result<_, _>>()?;
    if tv.len() != 4 {
        return Err(format_err(lines.no, "expected four transition weights"));
    }
    let nf: usize = lines.field("features")?;
    let mut features = Vec::with_capacity(nf);
    for _ in 0..nf {
        let line = lines.next()?;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(format_err(lines.no, "expected template<TAB>value<TAB>w_S<TAB>w_P"));
        }
        let t: u32 = cols[0].parse().map_err(|_| format_err(lines.no, "bad template id"))?;
        features.push((
            t,
            cols[1].to_string(),
            [parse_f64(cols[2], lines.no)?, parse_f64(cols[3], lines.no)?],
        ));
    }
    if lines.next()? != "end" {
        return Err(format_err(lines.no, "expected `end`"));
    }
    let config = CrfConfig {
        c,
        cutoff,
        tau,
        threshold_label,
        ..Default::default()
    };
    let mut model = CrfModel::from_parts(templates, features, [[tv[0], tv[1]], [tv[2], tv[3]]], &config)
        .map_err(|e| format_err(lines.no, e.to_string()))?;
    model.summary = TrainingSummary {
        iterations,
        status,
        objective,
        history: Vec::new(),
    };
    Ok(model)
}

pub fn load_model(path: &Path) -> Result<CrfModel, CrfError> {
    read_model(BufReader::new(File::open(path)?))
}
