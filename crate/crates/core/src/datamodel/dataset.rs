//! Binary dataset file.
//!
//! ```text
//! header   "VBIN" | u32 version | u32 maneuver_dim | u32 connection_dim
//!          | u32 neighbor_slots | u32 observation_frames | u32 prediction_frames
//!          | u64 record_count
//! record   u32 byte_length | payload
//! payload  u32 scene_id | u64 event_id | i64 vehicle_id | i64 frame | u8 label
//!          | u8 ttlc_flag (0 = seconds, 1 = never) | f64 ttlc_seconds
//!          | f64[obs * maneuver_dim] target
//!          | neighbor_slots x (u8 is_real | i64 vehicle_id
//!                             | f64[obs * maneuver_dim] | f64[connection_dim])
//! trailer  sha256 of every preceding byte
//! ```
//! All integers and floats are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{
    Behavior, LabeledSample, ManeuverSequence, NeighborEntry, Ttlc, CONNECTION_DIM,
    MANEUVER_DIM, NEIGHBOR_SLOTS, OBSERVATION_FRAMES, PREDICTION_FRAMES,
};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"VBIN";
pub const DATASET_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

pub fn save_dataset(samples: &[LabeledSample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(file);
    write_dataset(samples, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<LabeledSample>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    read_dataset(BufReader::new(file))
}

struct HashingWriter<W> {
    inner: W,
    hasher: Sha256,
}

impl<W: Write> HashingWriter<W> {
    fn put(&mut self, bytes: &[u8]) -> Result<()> {
        self.hasher.update(bytes);
        self.inner.write_all(bytes)?;
        Ok(())
    }
}

pub fn write_dataset<W: Write>(samples: &[LabeledSample], writer: W) -> Result<()> {
    let mut w = HashingWriter {
        inner: writer,
        hasher: Sha256::new(),
    };
    let mut header = Vec::with_capacity(36);
    header.extend_from_slice(MAGIC);
    for v in [
        DATASET_VERSION,
        MANEUVER_DIM as u32,
        CONNECTION_DIM as u32,
        NEIGHBOR_SLOTS as u32,
        OBSERVATION_FRAMES as u32,
        PREDICTION_FRAMES as u32,
    ] {
        header.extend_from_slice(&v.to_le_bytes());
    }
    header.extend_from_slice(&(samples.len() as u64).to_le_bytes());
    w.put(&header)?;

    let mut payload = Vec::new();
    for s in samples {
        payload.clear();
        encode_sample(s, &mut payload);
        w.put(&(payload.len() as u32).to_le_bytes())?;
        w.put(&payload)?;
    }
    let digest = w.hasher.finalize();
    w.inner.write_all(&digest)?;
    Ok(())
}

fn encode_sample(s: &LabeledSample, out: &mut Vec<u8>) {
    out.extend_from_slice(&s.scene_id.to_le_bytes());
    out.extend_from_slice(&s.event_id.to_le_bytes());
    out.extend_from_slice(&s.vehicle_id.to_le_bytes());
    out.extend_from_slice(&s.frame.to_le_bytes());
    out.push(s.label.index() as u8);
    match s.ttlc {
        Ttlc::Seconds(t) => {
            out.push(0);
            out.extend_from_slice(&t.to_le_bytes());
        }
        Ttlc::Never => {
            out.push(1);
            out.extend_from_slice(&0f64.to_le_bytes());
        }
    }
    encode_sequence(&s.target, out);
    for n in &s.neighbors {
        out.push(n.vehicle_id.is_some() as u8);
        out.extend_from_slice(&n.vehicle_id.unwrap_or(0).to_le_bytes());
        encode_sequence(&n.features, out);
        for v in n.connection {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

fn encode_sequence(seq: &ManeuverSequence, out: &mut Vec<u8>) {
    for v in seq.flat() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Integrity(format!(
                "unexpected end of data at byte {} (wanted {} more)",
                self.pos, n
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

/// Splits off and verifies the trailing SHA-256 digest.
pub(crate) fn verified_body(bytes: &[u8]) -> Result<&[u8]> {
    if bytes.len() < DIGEST_LEN {
        return Err(Error::Integrity("file too short for checksum".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Integrity("checksum mismatch (truncated or corrupted file)".into()));
    }
    Ok(body)
}

pub fn read_dataset<R: Read>(mut reader: R) -> Result<Vec<LabeledSample>> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::Integrity("missing VBIN magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != DATASET_VERSION {
        return Err(Error::Version {
            expected: DATASET_VERSION,
            found: version,
        });
    }
    let body = verified_body(&bytes)?;
    let mut c = Cursor { bytes: body, pos: 8 };
    let dims = [c.u32()?, c.u32()?, c.u32()?, c.u32()?, c.u32()?];
    let expected = [
        MANEUVER_DIM as u32,
        CONNECTION_DIM as u32,
        NEIGHBOR_SLOTS as u32,
        OBSERVATION_FRAMES as u32,
        PREDICTION_FRAMES as u32,
    ];
    if dims != expected {
        return Err(Error::Integrity(format!(
            "header dimensions {:?}, this build expects {:?}",
            dims, expected
        )));
    }
    let count = c.u64()? as usize;
    let mut samples = Vec::with_capacity(count.min(1 << 20));
    for i in 0..count {
        let len = c.u32()? as usize;
        let start = c.pos;
        let sample = decode_sample(&mut c).map_err(|e| match e {
            Error::Integrity(m) => Error::Integrity(format!("record {}: {}", i, m)),
            other => other,
        })?;
        if c.pos - start != len {
            return Err(Error::Integrity(format!(
                "record {} declares {} bytes, decoded {}",
                i,
                len,
                c.pos - start
            )));
        }
        samples.push(sample);
    }
    if c.remaining() != 0 {
        return Err(Error::Integrity(format!(
            "{} trailing bytes after {} records",
            c.remaining(),
            count
        )));
    }
    Ok(samples)
}

fn decode_sample(c: &mut Cursor) -> Result<LabeledSample> {
    let scene_id = c.u32()?;
    let event_id = c.u64()?;
    let vehicle_id = c.i64()?;
    let frame = c.i64()?;
    let label_byte = c.u8()?;
    let label = Behavior::from_index(label_byte as usize)
        .ok_or_else(|| Error::Integrity(format!("bad label byte {}", label_byte)))?;
    let flag = c.u8()?;
    let secs = c.f64()?;
    let ttlc = match flag {
        0 => Ttlc::Seconds(secs),
        1 => Ttlc::Never,
        f => return Err(Error::Integrity(format!("bad ttlc flag {}", f))),
    };
    let target = decode_sequence(c)?;
    let mut neighbors = [NeighborEntry {
        vehicle_id: None,
        features: ManeuverSequence::zeros(),
        connection: [0.0; CONNECTION_DIM],
    }; NEIGHBOR_SLOTS];
    for n in neighbors.iter_mut() {
        let real = c.u8()?;
        let id = c.i64()?;
        n.vehicle_id = match real {
            0 => None,
            1 => Some(id),
            r => return Err(Error::Integrity(format!("bad neighbor flag {}", r))),
        };
        n.features = decode_sequence(c)?;
        for v in n.connection.iter_mut() {
            *v = c.f64()?;
        }
    }
    Ok(LabeledSample {
        scene_id,
        event_id,
        vehicle_id,
        frame,
        label,
        ttlc,
        target,
        neighbors,
    })
}

fn decode_sequence(c: &mut Cursor) -> Result<ManeuverSequence> {
    let mut seq = ManeuverSequence::zeros();
    for row in seq.0.iter_mut() {
        for v in row.iter_mut() {
            *v = c.f64()?;
        }
    }
    Ok(seq)
}
