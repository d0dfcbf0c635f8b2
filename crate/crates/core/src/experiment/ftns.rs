//! FTNS feature-tensor file format.
//!
//! ```text
//! magic      4 bytes  "FTNS"
//! version    u16      1
//! count      u64
//! dims       u16 x 3  (rows, cols, bands)
//! records    count x (label u8, trial i32, window i32, feature u8, ordering u8,
//!                     rows*cols*bands f32)
//! ```
//! Little-endian throughout.

use std::fs;
use std::path::Path;

use super::features::{FeatureKind, FeatureTensor, OrderingTag};
use crate::error::{invalid, Error, Result};
use crate::io::eegb::ByteReader;

pub const FTNS_MAGIC: &[u8; 4] = b"FTNS";
pub const FTNS_VERSION: u16 = 1;

/// Serializes tensors that share one shape.
pub fn encode_features(dims: (usize, usize, usize), tensors: &[FeatureTensor]) -> Result<Vec<u8>> {
    let (h, w, c) = dims;
    for d in [h, w, c] {
        if d == 0 || d > u16::MAX as usize {
            return Err(invalid(format!("dimension {d} not representable")));
        }
    }
    let n = h * w * c;
    let mut out = Vec::with_capacity(20 + tensors.len() * (11 + 4 * n));
    out.extend_from_slice(FTNS_MAGIC);
    out.extend_from_slice(&FTNS_VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u64).to_le_bytes());
    for d in [h, w, c] {
        out.extend_from_slice(&(d as u16).to_le_bytes());
    }
    for t in tensors {
        if t.dims != dims {
            return Err(invalid(format!("tensor dims {:?} differ from {:?}", t.dims, dims)));
        }
        t.validate()?;
        out.push(t.label);
        out.extend_from_slice(&t.trial.to_le_bytes());
        out.extend_from_slice(&t.window.to_le_bytes());
        out.push(t.feature.code());
        out.push(t.ordering.code());
        for v in &t.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses FTNS bytes into the shared shape and the records.
pub fn decode_features(bytes: &[u8]) -> Result<((usize, usize, usize), Vec<FeatureTensor>)> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(4, "magic")?;
    if magic != FTNS_MAGIC {
        return Err(Error::Format {
            offset: 0,
            reason: format!("bad magic {magic:?}, expected \"FTNS\""),
        });
    }
    let at = r.offset();
    let version = r.u16("version")?;
    if version != FTNS_VERSION {
        return Err(Error::Format {
            offset: at,
            reason: format!("unsupported version {version}"),
        });
    }
    let count = r.u64("record count")?;
    let at = r.offset();
    let dims = (
        r.u16("rows")? as usize,
        r.u16("cols")? as usize,
        r.u16("bands")? as usize,
    );
    let n = dims.0 * dims.1 * dims.2;
    if n == 0 {
        return Err(Error::Format {
            offset: at,
            reason: format!("zero dimension in {dims:?}"),
        });
    }
    let record_len = 11 + 4 * n as u64;
    if count.checked_mul(record_len) != Some(r.remaining() as u64) {
        return Err(r.fail(format!(
            "{} payload bytes do not hold {count} records of {record_len} bytes",
            r.remaining()
        )));
    }
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let at = r.offset();
        let label = r.u8("label")?;
        let trial = r.i32("trial")?;
        let window = r.i32("window")?;
        let fc = r.u8("feature type")?;
        let oc = r.u8("ordering")?;
        let feature = FeatureKind::from_code(fc).ok_or_else(|| r.fail(format!("unknown feature code {fc}")))?;
        let ordering = OrderingTag::from_code(oc).ok_or_else(|| r.fail(format!("unknown ordering code {oc}")))?;
        let t = FeatureTensor {
            dims,
            label,
            trial,
            window,
            feature,
            ordering,
            values: r.f32s(n, "values")?,
        };
        t.validate().map_err(|e| Error::Format {
            offset: at,
            reason: e.to_string(),
        })?;
        out.push(t);
    }
    r.finish()?;
    Ok((dims, out))
}

pub fn write_features(path: impl AsRef<Path>, dims: (usize, usize, usize), tensors: &[FeatureTensor]) -> Result<()> {
    fs::write(path, encode_features(dims, tensors)?)?;
    Ok(())
}

pub fn read_features(path: impl AsRef<Path>) -> Result<((usize, usize, usize), Vec<FeatureTensor>)> {
    decode_features(&fs::read(path)?)
}
