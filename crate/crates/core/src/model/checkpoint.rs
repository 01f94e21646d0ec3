//! Checkpoint file: `VBCK`, u32 version, u8 model kind, u32 GRU hidden size,
//! u64 seed, 24 f64 scaling constants, u32-prefixed UTF-8 config echo, u32
//! tensor count, then per tensor a u32-prefixed name, u32 rank, u64 dims and
//! f64 data. A SHA-256 of everything before it closes the file. All
//! integers and floats are little-endian.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{FeatureScaling, Model, ModelKind};
use crate::datamodel::verified_body;
use crate::error::{Error, Result};
use crate::numerics::{ParamStore, Tensor};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"VBCK";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    /// Resolved training configuration the parameters came from.
    pub config_echo: String,
}

impl Checkpoint {
    pub fn new(model: Model, config_echo: impl Into<String>) -> Self {
        Checkpoint {
            model,
            config_echo: config_echo.into(),
        }
    }

    /// The model, provided it has the layout of `kind`.
    pub fn into_model(self, kind: ModelKind) -> Result<Model> {
        if self.model.kind() == kind {
            return Ok(self.model);
        }
        let m = self.model;
        Model::from_parts(kind, m.hidden(), m.seed(), m.params().clone(), *m.scaling())
    }
}

pub fn write_checkpoint<W: Write>(ckpt: &Checkpoint, mut writer: W) -> Result<()> {
    let m = &ckpt.model;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.push(m.kind().code());
    buf.extend_from_slice(&(m.hidden() as u32).to_le_bytes());
    buf.extend_from_slice(&m.seed().to_le_bytes());
    for v in m.scaling().to_vec() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&(ckpt.config_echo.len() as u32).to_le_bytes());
    buf.extend_from_slice(ckpt.config_echo.as_bytes());
    buf.extend_from_slice(&(m.params().len() as u32).to_le_bytes());
    for (name, t) in m.params().iter() {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.shape() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    writer.write_all(&buf)?;
    writer.write_all(&digest)?;
    writer.flush()?;
    Ok(())
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    write_checkpoint(ckpt, std::io::BufWriter::new(file))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    read_checkpoint(file)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Integrity("checkpoint ends early".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Integrity("checkpoint string is not UTF-8".into()))
    }
}

pub fn read_checkpoint<R: Read>(mut reader: R) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::Integrity("missing checkpoint magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            expected: CHECKPOINT_VERSION,
            found: version,
        });
    }
    let body = verified_body(&bytes)?;
    let mut c = Cursor { bytes: body, pos: 8 };
    let code = c.take(1)?[0];
    let kind = ModelKind::from_code(code)
        .ok_or_else(|| Error::Integrity(format!("unknown model kind {}", code)))?;
    let hidden = c.u32()? as usize;
    let seed = c.u64()?;
    let scaling: Vec<f64> = (0..24).map(|_| c.f64()).collect::<Result<_>>()?;
    let config_echo = c.string()?;
    let count = c.u32()? as usize;
    let mut params = ParamStore::new();
    for _ in 0..count {
        let name = c.string()?;
        let rank = c.u32()? as usize;
        if rank > 4 {
            return Err(Error::Integrity(format!("tensor {} has rank {}", name, rank)));
        }
        let shape: Vec<usize> = (0..rank).map(|_| c.u64().map(|d| d as usize)).collect::<Result<_>>()?;
        let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let n = n.filter(|&n| n <= body.len() / 8).ok_or_else(|| {
            Error::Integrity(format!("tensor {} claims shape {:?}", name, shape))
        })?;
        let data = (0..n).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
        params.push(name, Tensor::new(&shape, data)?);
    }
    if c.pos != body.len() {
        return Err(Error::Integrity("trailing bytes in checkpoint".into()));
    }
    let model = Model::from_parts(kind, hidden, seed, params, FeatureScaling::from_slice(&scaling))?;
    Ok(Checkpoint { model, config_echo })
}
