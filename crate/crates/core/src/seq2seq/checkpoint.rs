//! Binary checkpoints.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! "RUNONS2S" version
//! json_len json            {"config": ..., "report": ...}
//! vocab_len lowercase(0/1) (word_len word)*
//! tensor_count (name_len name ndim dims* f32*)*
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::{S2SConfig, S2SError, S2SModel, TrainingReport, Vocab};

const MAGIC: &[u8; 8] = b"RUNONS2S";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: S2SConfig,
    report: Option<TrainingReport>,
}

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn bad(msg: impl Into<String>) -> S2SError {
    S2SError::Checkpoint(msg.into())
}

fn read_str(r: &mut impl Read, limit: usize) -> Result<String, S2SError> {
    let n = r.read_u32::<LittleEndian>()? as usize;
    if n > limit {
        return Err(bad(format!("string of {n} bytes exceeds {limit}")));
    }
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| bad("invalid UTF-8"))
}

pub fn write_model(model: &S2SModel, mut w: impl Write) -> Result<(), S2SError> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
    let header = Header {
        config: model.config().clone(),
        report: model.report().cloned(),
    };
    let json = serde_json::to_string(&header).map_err(|e| bad(e.to_string()))?;
    write_str(&mut w, &json)?;
    let vocab = model.vocab();
    w.write_u32::<LittleEndian>(vocab.len() as u32)?;
    w.write_u32::<LittleEndian>(u32::from(vocab.lowercases()))?;
    for word in vocab.words() {
        write_str(&mut w, word)?;
    }
    let layout = model.layout();
    w.write_u32::<LittleEndian>(layout.tensors().len() as u32)?;
    for t in layout.tensors() {
        write_str(&mut w, t.name)?;
        w.write_u32::<LittleEndian>(t.shape.len() as u32)?;
        for &d in &t.shape {
            w.write_u32::<LittleEndian>(d as u32)?;
        }
        for &v in &model.parameters()[t.offset..t.offset + t.len()] {
            w.write_f32::<LittleEndian>(v)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_model(mut r: impl Read) -> Result<S2SModel, S2SError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a seq2seq checkpoint"));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let header: Header = serde_json::from_str(&read_str(&mut r, 1 << 20)?).map_err(|e| bad(format!("header: {e}")))?;
    header.config.validate()?;
    let n = r.read_u32::<LittleEndian>()? as usize;
    let lowercase = r.read_u32::<LittleEndian>()? != 0;
    let words = (0..n)
        .map(|_| read_str(&mut r, 1 << 16))
        .collect::<Result<Vec<_>, _>>()?;
    let vocab = Vocab::from_words(words, lowercase);
    let layout = super::Layout::new(&header.config, vocab.len());
    let count = r.read_u32::<LittleEndian>()? as usize;
    if count != layout.tensors().len() {
        return Err(bad(format!("{count} tensors, expected {}", layout.tensors().len())));
    }
    let mut params = vec![0f32; layout.total()];
    for t in layout.tensors() {
        let name = read_str(&mut r, 256)?;
        if name != t.name {
            return Err(bad(format!("tensor {name:?} where {:?} was expected", t.name)));
        }
        let ndim = r.read_u32::<LittleEndian>()? as usize;
        let shape = (0..ndim)
            .map(|_| r.read_u32::<LittleEndian>().map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        if shape != t.shape {
            return Err(bad(format!("{name}: shape {shape:?}, expected {:?}", t.shape)));
        }
        r.read_f32_into::<LittleEndian>(&mut params[t.offset..t.offset + t.len()])?;
    }
    if params.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite parameter"));
    }
    S2SModel::from_parts(header.config, vocab, params, header.report)
}

pub fn save_model(model: &S2SModel, path: impl AsRef<Path>) -> Result<(), S2SError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<S2SModel, S2SError> {
    read_model(BufReader::new(File::open(path)?))
}
