//! Binary checkpoint container.
//!
//! All integers are little-endian; every float is the raw IEEE-754 bit
//! pattern, so save/load is bit-exact.
//!
//! ```text
//! magic        8 bytes   "GRNDCKPT"
//! version      u32       1
//! dims         u32 len + UTF-8 JSON of ModelDims
//! fingerprint  u32 len + UTF-8 (ModelDims::fingerprint)
//! vocab        u32 count, then per token: u32 len + UTF-8
//! tensors      u32 count, then per tensor:
//!                u32 len + UTF-8 name
//!                u32 ndim, ndim x u64 dims
//!                numel x f64
//! ```

use std::fs;
use std::path::Path;

use super::{GroundingModel, ModelDims};
use crate::error::{Error, Result};
use crate::query::{Vocabulary, OOV_TOKEN, PAD_TOKEN};
use crate::tensor::{ParamStore, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GRNDCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

pub fn encode_checkpoint(model: &GroundingModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut out, CHECKPOINT_VERSION);
    put_str(&mut out, &serde_json::to_string(&model.dims()).expect("dims serialize"));
    put_str(&mut out, &model.fingerprint());
    let tokens = &model.vocab().tokens()[2..];
    put_u32(&mut out, tokens.len() as u32);
    for t in tokens {
        put_str(&mut out, t);
    }
    put_u32(&mut out, model.params().len() as u32);
    for (name, t) in model.params().iter() {
        put_str(&mut out, name);
        put_u32(&mut out, t.shape().len() as u32);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.values() {
            out.extend_from_slice(&v.to_bits().to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(format!("truncated at byte {}", self.pos)),
        }
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> std::result::Result<String, String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|e| e.to_string())
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> std::result::Result<GroundingModel, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err("not a checkpoint (bad magic)".into());
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let dims: ModelDims = serde_json::from_str(&r.string()?).map_err(|e| e.to_string())?;
    let fingerprint = r.string()?;
    if fingerprint != dims.fingerprint() {
        return Err(format!("fingerprint {fingerprint} disagrees with stored dims"));
    }
    let n_tokens = r.u32()? as usize;
    let mut tokens = Vec::with_capacity(n_tokens.min(1 << 20));
    for _ in 0..n_tokens {
        let t = r.string()?;
        if t == PAD_TOKEN || t == OOV_TOKEN {
            return Err(format!("reserved token {t} in vocabulary body"));
        }
        tokens.push(t);
    }
    let vocab = Vocabulary::from_tokens(tokens);

    let n_tensors = r.u32()? as usize;
    let mut params = ParamStore::new();
    for _ in 0..n_tensors {
        let name = r.string()?;
        let ndim = r.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim.min(8));
        for _ in 0..ndim {
            shape.push(r.u64()? as usize);
        }
        let numel = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or("shape overflow")?;
        let raw = r.take(numel.checked_mul(8).ok_or("shape overflow")?)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().unwrap())))
            .collect();
        let tensor = Tensor::new(&shape, values).map_err(|e| format!("{name}: {e}"))?;
        params.insert(name, tensor.tracked());
    }
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    GroundingModel::from_parts(dims, vocab, params).map_err(|e| e.to_string())
}

pub fn save_checkpoint(model: &GroundingModel, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<GroundingModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|reason| Error::Format {
        path: path.to_path_buf(),
        line: 0,
        reason,
    })
}
