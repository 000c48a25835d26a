//! Binary checkpoint format. All integers are little-endian.
//!
//! ```text
//! magic        8 bytes  "QSSMCKPT"
//! version      u32      1
//! hash_len     u32      then hash_len bytes of UTF-8 config hash
//! meta_len     u32      then meta_len bytes of JSON {dims, calendar_columns}
//! n_entries    u32
//! entry*       name_len u32, name bytes, rows u32, cols u32, rows*cols f64
//! checksum     32 bytes SHA-256 of every preceding byte
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{Model, ModelDims};

pub const MAGIC: &[u8; 8] = b"QSSMCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Meta {
    dims: ModelDims,
    calendar_columns: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config_hash: String,
    pub model: Model,
}

fn put_u32(out: &mut Vec<u8>, x: usize) -> Result<()> {
    let v = u32::try_from(x).map_err(|_| Error::Checkpoint(format!("{x} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) -> Result<()> {
    put_u32(out, b.len())?;
    out.extend_from_slice(b);
    Ok(())
}

pub fn to_bytes(model: &Model, config_hash: &str) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    put_bytes(&mut out, config_hash.as_bytes())?;
    let meta = serde_json::to_vec(&Meta {
        dims: model.dims(),
        calendar_columns: model.calendar_columns.clone(),
    })?;
    put_bytes(&mut out, &meta)?;
    let tensors = model.tensors();
    put_u32(&mut out, tensors.len())?;
    for t in tensors {
        put_bytes(&mut out, t.name.as_bytes())?;
        put_u32(&mut out, t.shape.0)?;
        put_u32(&mut out, t.shape.1)?;
        for x in t.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()?;
        self.take(n)
    }

    fn string(&mut self) -> Result<String> {
        String::from_utf8(self.bytes()?.to_vec())
            .map_err(|_| Error::Checkpoint("non-UTF-8 string".into()))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < MAGIC.len() + 4 + 32 || &bytes[..8] != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Checkpoint("checksum mismatch: file is corrupted".into()));
    }
    let mut r = Reader { buf: body, pos: 8 };
    let version = r.u32()? as u32;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let config_hash = r.string()?;
    let meta: Meta = serde_json::from_slice(r.bytes()?)?;
    let mut model = Model::zeros(&meta.dims, meta.calendar_columns)?;
    let n = r.u32()?;
    let mut tensors = model.tensors_mut();
    if n != tensors.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {n} tensors, model expects {}",
            tensors.len()
        )));
    }
    for t in tensors.iter_mut() {
        let name = r.string()?;
        let shape = (r.u32()?, r.u32()?);
        if name != t.name || shape != t.shape {
            return Err(Error::Checkpoint(format!(
                "expected {} {:?}, found {name} {shape:?}",
                t.name, t.shape
            )));
        }
        let raw = r.take(shape.0 * shape.1 * 8)?;
        for (dst, chunk) in t.data.iter_mut().zip(raw.chunks_exact(8)) {
            *dst = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
    }
    drop(tensors);
    if r.pos != body.len() {
        return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
    }
    model.validate()?;
    Ok(Checkpoint { config_hash, model })
}

pub fn save(path: impl AsRef<Path>, model: &Model, config_hash: &str) -> Result<()> {
    std::fs::write(path, to_bytes(model, config_hash)?)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let p = path.as_ref();
    let bytes = std::fs::read(p)
        .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", p.display())))?;
    from_bytes(&bytes)
}
