//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    b"DCPK"
//! version  u32 (= 1)
//! count    u32
//! count × record:
//!   name_len u32, name UTF-8 bytes
//!   dtype    u8   (0 = u8, 1 = f32, 2 = f64)
//!   rank     u32, dims u64 × rank
//!   payload  row-major elements
//! ```
//!
//! The model config is stored first as a `u8` record named `__config__`
//! holding its `key=value` text.

use super::{DcpConfig, DcpError, ModelParams};
use crate::autodiff::{DType, Scalar, Tensor};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

pub const MAGIC: &[u8; 4] = b"DCPK";
pub const VERSION: u32 = 1;
pub const CONFIG_RECORD: &str = "__config__";
const DTYPE_U8: u8 = 0;

/// Failure to decode a checkpoint.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("record {name}: stored as {found}, expected {expected}")]
    DtypeMismatch {
        name: String,
        expected: &'static str,
        found: String,
    },
    #[error("record name is not UTF-8")]
    Utf8,
    #[error("missing {0} record")]
    MissingConfig(&'static str),
    #[error("trailing bytes after last record")]
    Trailing,
}

fn dtype_name(code: u8) -> String {
    match code {
        DTYPE_U8 => "u8".to_string(),
        c => DType::from_code(c)
            .map(|d| d.name().to_string())
            .unwrap_or_else(|| alloc::format!("code {c}")),
    }
}

fn put_record(out: &mut Vec<u8>, name: &str, dtype: u8, dims: &[usize], payload: &[u8]) {
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(dtype);
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    out.extend_from_slice(payload);
}

pub fn encode<T: Scalar>(params: &ModelParams<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&((params.entries().len() + 1) as u32).to_le_bytes());
    let cfg = params.config.to_text();
    put_record(
        &mut out,
        CONFIG_RECORD,
        DTYPE_U8,
        &[cfg.len()],
        cfg.as_bytes(),
    );
    let mut payload = Vec::new();
    for e in params.entries() {
        payload.clear();
        e.value.data().iter().for_each(|x| x.write_le(&mut payload));
        put_record(&mut out, &e.name, T::DTYPE as u8, e.value.shape(), &payload);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(CheckpointError::Truncated(self.bytes.len()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// One decoded record with its raw payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord<'a> {
    pub name: String,
    pub dtype: u8,
    pub dims: Vec<usize>,
    pub payload: &'a [u8],
}

/// Splits a checkpoint into records without interpreting payloads.
pub fn read_records(bytes: &[u8]) -> Result<Vec<RawRecord<'_>>, CheckpointError> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(4).map_err(|_| CheckpointError::BadMagic)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let count = r.u32()?;
    let mut out = Vec::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = core::str::from_utf8(r.take(len)?)
            .map_err(|_| CheckpointError::Utf8)?
            .to_string();
        let dtype = r.take(1)?[0];
        let rank = r.u32()? as usize;
        let dims = (0..rank)
            .map(|_| r.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let width = match dtype {
            DTYPE_U8 => 1,
            c => DType::from_code(c).map(DType::size).ok_or_else(|| {
                CheckpointError::DtypeMismatch {
                    name: name.clone(),
                    expected: "u8, f32 or f64",
                    found: dtype_name(c),
                }
            })?,
        };
        let n = dims
            .iter()
            .try_fold(width, |acc: usize, &d| acc.checked_mul(d))
            .ok_or(CheckpointError::Truncated(bytes.len()))?;
        let payload = r.take(n)?;
        out.push(RawRecord {
            name,
            dtype,
            dims,
            payload,
        });
    }
    if r.at != bytes.len() {
        return Err(CheckpointError::Trailing);
    }
    Ok(out)
}

/// Decodes a checkpoint written with element type `T`.
pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<ModelParams<T>, DcpError> {
    let records = read_records(bytes)?;
    let mut config = None;
    let mut stored = Vec::with_capacity(records.len());
    for rec in records {
        if rec.name == CONFIG_RECORD {
            if rec.dtype != DTYPE_U8 {
                return Err(CheckpointError::DtypeMismatch {
                    name: rec.name,
                    expected: "u8",
                    found: dtype_name(rec.dtype),
                }
                .into());
            }
            let text = core::str::from_utf8(rec.payload).map_err(|_| CheckpointError::Utf8)?;
            config = Some(DcpConfig::from_text(text)?);
            continue;
        }
        if rec.dtype != T::DTYPE as u8 {
            return Err(CheckpointError::DtypeMismatch {
                name: rec.name,
                expected: T::DTYPE.name(),
                found: dtype_name(rec.dtype),
            }
            .into());
        }
        let data = rec
            .payload
            .chunks_exact(T::DTYPE.size())
            .map(T::read_le)
            .collect();
        stored.push((rec.name, Tensor::new(&rec.dims, data)?));
    }
    let config = config.ok_or(CheckpointError::MissingConfig(CONFIG_RECORD))?;
    ModelParams::from_entries(config, stored)
}
