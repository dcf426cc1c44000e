//! Text model file.
//!
//! ```text
//! runon-ngram 1
//! order 5
//! min_count 2
//! lowercase true
//! smoothing kneser-ney
//! estimator kneser-ney
//! perplexity_denominator all-scored-tokens
//! vocab <V>
//! <one word per line, id = line index>
//! counts <k> <M>
//! <space-separated ids><TAB><raw count>
//! ...
//! end
//! ```
//!
//! Only raw counts are stored; every derived table is recomputed on load by
//! the same code path used in training, so probabilities match bit for bit.
//! `estimator` and `perplexity_denominator` are informational. The latter
//! records that mean perplexity divides by every scored event, including
//! `</s>` and any inserted period.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{LmError, NgramModel, Smoothing};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "runon-ngram";

pub fn write_model(model: &NgramModel, mut w: impl Write) -> Result<(), LmError> {
    writeln!(w, "{MAGIC} {FORMAT_VERSION}")?;
    writeln!(w, "order {}", model.order)?;
    writeln!(w, "min_count {}", model.min_count)?;
    writeln!(w, "lowercase {}", model.lowercase)?;
    writeln!(w, "smoothing {}", model.requested.name())?;
    writeln!(w, "estimator {}", model.estimator.name())?;
    writeln!(w, "perplexity_denominator all-scored-tokens")?;
    writeln!(w, "vocab {}", model.vocab.len())?;
    for v in &model.vocab {
        writeln!(w, "{v}")?;
    }
    for (k, m) in model.raw.iter().enumerate() {
        let mut grams: Vec<(&Vec<u32>, &u64)> = m.iter().collect();
        grams.sort();
        writeln!(w, "counts {} {}", k + 1, grams.len())?;
        for (g, c) in grams {
            let ids: Vec<String> = g.iter().map(u32::to_string).collect();
            writeln!(w, "{}\t{c}", ids.join(" "))?;
        }
    }
    writeln!(w, "end")?;
    Ok(())
}

pub fn save_model(model: &NgramModel, path: &Path) -> Result<(), LmError> {
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
    fn next(&mut self) -> Result<String, LmError> {
        self.no += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, msg: impl Into<String>) -> LmError {
        LmError::Format {
            line: self.no,
            message: msg.into(),
        }
    }

    fn field(&mut self, key: &str) -> Result<String, LmError> {
        let line = self.next()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.to_string()),
            _ => Err(self.err(format!("expected `{key} <value>`"))),
        }
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, LmError> {
        let v = self.field(key)?;
        v.parse().map_err(|_| self.err(format!("bad value for {key}: {v:?}")))
    }
}

pub fn read_model(r: impl BufRead) -> Result<NgramModel, LmError> {
    let mut lines = Lines {
        inner: r.lines(),
        no: 0,
    };
    let version: u32 = lines.parsed(MAGIC)?;
    if version != FORMAT_VERSION {
        return Err(lines.err(format!("unsupported model version {version}")));
    }
    let order: usize = lines.parsed("order")?;
    if order == 0 {
        return Err(LmError::InvalidOrder);
    }
    let min_count: u64 = lines.parsed("min_count")?;
    let lowercase: bool = lines.parsed("lowercase")?;
    let name = lines.field("smoothing")?;
    let smoothing = Smoothing::from_name(&name).ok_or_else(|| lines.err(format!("unknown smoothing {name:?}")))?;
    lines.field("estimator")?;
    lines.field("perplexity_denominator")?;
    let n: usize = lines.parsed("vocab")?;
    let mut vocab = Vec::with_capacity(n);
    for _ in 0..n {
        vocab.push(lines.next()?);
    }
    if vocab.len() < 3 || vocab[..3] != [super::UNK, super::BOS, super::EOS] {
        return Err(lines.err("vocabulary must start with <unk> <s> </s>"));
    }
    let mut raw = Vec::with_capacity(order);
    for k in 1..=order {
        let header = lines.next()?;
        let parts: Vec<&str> = header.split(' ').collect();
        let m: usize = match parts.as_slice() {
            ["counts", kk, m] if kk.parse() == Ok(k) => m.parse().map_err(|_| lines.err("bad count total"))?,
            _ => return Err(lines.err(format!("expected `counts {k} <n>`"))),
        };
        let mut map = HashMap::with_capacity(m);
        for _ in 0..m {
            let line = lines.next()?;
            let (ids, c) = line
                .split_once('\t')
                .ok_or_else(|| lines.err("expected ids<TAB>count"))?;
            let gram: Vec<u32> = ids
                .split(' ')
                .map(|t| t.parse::<u32>().ok().filter(|&i| (i as usize) < n))
                .collect::<Option<_>>()
                .ok_or_else(|| lines.err(format!("bad n-gram ids {ids:?}")))?;
            if gram.len() != k {
                return Err(lines.err(format!("expected {k} ids")));
            }
            let c: u64 = c.parse().map_err(|_| lines.err(format!("bad count {c:?}")))?;
            map.insert(gram, c);
        }
        raw.push(map);
    }
    if lines.next()? != "end" {
        return Err(lines.err("expected `end`"));
    }
    Ok(NgramModel::estimate(order, min_count, lowercase, smoothing, vocab, raw))
}

pub fn load_model(path: &Path) -> Result<NgramModel, LmError> {
    read_model(BufReader::new(File::open(path)?))
}
