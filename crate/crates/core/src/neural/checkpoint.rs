//! Versioned binary checkpoints: hyperparameters, the vocabulary content
//! hashes a model was trained against, and every named tensor.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use indexmap::IndexMap;
use ndarray::Array2;

use super::{Hyper, ModelKind, ModelParams, NeuralError, ScoreFn};

const MAGIC: &[u8; 4] = b"JTCK";
const VERSION: u32 = 1;
const DTYPE_F64: u8 = 0;

/// A checkpoint on disk: model parameters plus the hashes of the source and
/// target vocabularies it expects.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub src_vocab_hash: u64,
    pub tgt_vocab_hash: u64,
}

fn bad(msg: impl Into<String>) -> NeuralError {
    NeuralError::Checkpoint(msg.into())
}

pub fn save(
    path: &Path,
    params: &ModelParams,
    src_vocab_hash: u64,
    tgt_vocab_hash: u64,
) -> Result<(), NeuralError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let h = &params.hyper;
    let kind_tag: u8 = match h.kind {
        ModelKind::Nmt => 0,
        ModelKind::Transformer => 1,
    };
    let score_tag: u8 = match h.score_fn {
        ScoreFn::Dot => 0,
        ScoreFn::General => 1,
    };
    w.write_all(&[kind_tag, score_tag, h.positional as u8])?;
    for v in [h.d_model, h.n_heads, h.n_layers, h.d_ff, h.src_vocab, h.tgt_vocab, h.max_len] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    w.write_all(&h.dropout.to_le_bytes())?;
    w.write_all(&src_vocab_hash.to_le_bytes())?;
    w.write_all(&tgt_vocab_hash.to_le_bytes())?;
    w.write_all(&(params.tensors.len() as u32).to_le_bytes())?;
    for (name, tensor) in &params.tensors {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&[DTYPE_F64])?;
        w.write_all(&(tensor.nrows() as u32).to_le_bytes())?;
        w.write_all(&(tensor.ncols() as u32).to_le_bytes())?;
        for &v in tensor.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

struct Cursor<R> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>, NeuralError> {
        let mut buf = vec![0u8; n];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| bad("truncated checkpoint"))?;
        Ok(buf)
    }

    fn u8(&mut self) -> Result<u8, NeuralError> {
        Ok(self.bytes(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, NeuralError> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, NeuralError> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, NeuralError> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }
}

pub fn load(path: &Path) -> Result<Checkpoint, NeuralError> {
    let mut r = Cursor { inner: BufReader::new(File::open(path)?) };
    if r.bytes(4)? != MAGIC {
        return Err(bad("not a checkpoint file (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let kind = match r.u8()? {
        0 => ModelKind::Nmt,
        1 => ModelKind::Transformer,
        t => return Err(bad(format!("unknown model kind tag {t}"))),
    };
    let score_fn = match r.u8()? {
        0 => ScoreFn::Dot,
        1 => ScoreFn::General,
        t => return Err(bad(format!("unknown score function tag {t}"))),
    };
    let positional = r.u8()? != 0;
    let mut dims = [0usize; 7];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let dropout = r.f64()?;
    let hyper = Hyper {
        kind,
        d_model: dims[0],
        n_heads: dims[1],
        n_layers: dims[2],
        d_ff: dims[3],
        src_vocab: dims[4],
        tgt_vocab: dims[5],
        max_len: dims[6],
        dropout,
        score_fn,
        positional,
    };
    let src_vocab_hash = r.u64()?;
    let tgt_vocab_hash = r.u64()?;
    let n_tensors = r.u32()? as usize;
    let mut tensors = IndexMap::with_capacity(n_tensors);
    for _ in 0..n_tensors {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.bytes(name_len)?)
            .map_err(|_| bad("tensor name is not UTF-8"))?;
        let dtype = r.u8()?;
        if dtype != DTYPE_F64 {
            return Err(bad(format!("unsupported dtype tag {dtype} for `{name}`")));
        }
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let raw = r.bytes(rows * cols * 8)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let tensor = Array2::from_shape_vec((rows, cols), data)
            .map_err(|_| bad(format!("bad shape for `{name}`")))?;
        tensors.insert(name, tensor);
    }
    Ok(Checkpoint {
        params: ModelParams { hyper, tensors },
        src_vocab_hash,
        tgt_vocab_hash,
    })
}
