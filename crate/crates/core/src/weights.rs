//! Binary weight container.
//!
//! Layout, all integers little-endian `u32`:
//! magic `HGW1`, version, entry count, then per entry the name length, name
//! bytes (UTF-8), rank, dims and the row-major `f32` payload. A CRC-32 of
//! every preceding byte closes the file.

use std::collections::HashSet;
use std::path::Path;

use harmonia_kernel::{ParameterStore, Tensor};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"HGW1";
pub const VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum WeightsError {
    #[error("not a weight container (bad magic)")]
    BadMagic,
    #[error("unsupported container version {0} (expected {VERSION})")]
    UnsupportedVersion(u32),
    #[error("container truncated at byte {0}")]
    Truncated(usize),
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("duplicate tensor name `{0}`")]
    DuplicateName(String),
    #[error("tensor `{name}` has invalid dims {dims:?}")]
    InvalidDims { name: String, dims: Vec<u64> },
    #[error("tensor name is not valid UTF-8")]
    InvalidName,
    #[error("{0} trailing bytes after the last entry")]
    TrailingBytes(usize),
    #[error("{what} does not fit in 32 bits")]
    TooLarge { what: String },
}

/// Named tensors in file order.
pub type NamedTensors = Vec<(String, Tensor)>;

fn put_u32(out: &mut Vec<u8>, v: usize, what: &str) -> Result<(), WeightsError> {
    let v = u32::try_from(v).map_err(|_| WeightsError::TooLarge { what: what.to_string() })?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn encode(tensors: &[(String, Tensor)]) -> Result<Vec<u8>, WeightsError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_u32(&mut out, tensors.len(), "entry count")?;
    for (name, t) in tensors {
        if !seen.insert(name.as_str()) {
            return Err(WeightsError::DuplicateName(name.clone()));
        }
        if t.shape().is_empty() || t.shape().contains(&0) {
            return Err(WeightsError::InvalidDims {
                name: name.clone(),
                dims: t.shape().iter().map(|&d| d as u64).collect(),
            });
        }
        put_u32(&mut out, name.len(), "name length")?;
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, t.shape().len(), "rank")?;
        for &d in t.shape() {
            put_u32(&mut out, d, "dimension")?;
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WeightsError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(WeightsError::Truncated(self.bytes.len()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, WeightsError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode(bytes: &[u8]) -> Result<NamedTensors, WeightsError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(if bytes.len() < 4 && MAGIC.starts_with(bytes) {
            WeightsError::Truncated(bytes.len())
        } else {
            WeightsError::BadMagic
        });
    }
    let mut head = Reader { bytes, pos: 4 };
    let version = head.u32()?;
    if version != VERSION {
        return Err(WeightsError::UnsupportedVersion(version));
    }
    if bytes.len() < 16 {
        return Err(WeightsError::Truncated(bytes.len()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes([tail[0], tail[1], tail[2], tail[3]]);
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(WeightsError::Checksum { stored, computed });
    }

    let mut r = Reader { bytes: body, pos: 8 };
    let count = r.u32()?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?).map_err(|_| WeightsError::InvalidName)?.to_string();
        if !seen.insert(name.clone()) {
            return Err(WeightsError::DuplicateName(name));
        }
        let rank = r.u32()? as usize;
        let mut dims = Vec::new();
        for _ in 0..rank {
            dims.push(r.u32()? as usize);
        }
        let n = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let bad = || WeightsError::InvalidDims {
            name: name.clone(),
            dims: dims.iter().map(|&d| d as u64).collect(),
        };
        let n = match n {
            Some(n) if rank > 0 && !dims.contains(&0) => n,
            _ => return Err(bad()),
        };
        let payload = r.take(n.checked_mul(4).ok_or_else(bad)?)?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let t = Tensor::from_vec(&dims, data).map_err(|_| bad())?;
        out.push((name, t));
    }
    if r.pos != body.len() {
        return Err(WeightsError::TrailingBytes(body.len() - r.pos));
    }
    Ok(out)
}

pub fn store_tensors(store: &ParameterStore) -> NamedTensors {
    store.iter().map(|(n, t)| (n.to_string(), Tensor::from_vec(t.shape(), t.data().to_vec()).expect("store tensors are valid"))).collect()
}

pub fn save_weights(store: &ParameterStore, path: &Path) -> crate::Result<()> {
    let bytes = encode(&store_tensors(store))?;
    std::fs::write(path, bytes).map_err(|source| crate::Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// A fresh store holding the saved tensors in file order. Optimizer state
/// is not persisted.
pub fn load_weights(path: &Path) -> crate::Result<ParameterStore> {
    let bytes = std::fs::read(path).map_err(|source| crate::Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut store = ParameterStore::new();
    for (name, t) in decode(&bytes)? {
        store.insert(&name, t)?;
    }
    Ok(store)
}
