//! EEGB binary recording format.
//!
//! ```text
//! magic        4 bytes  "EEGB"
//! version      u16      1
//! n_channels   u16
//! n_samples    u64
//! sample_rate  f64
//! subject_id   i32
//! video_id     i32
//! valence      f64
//! names        n_channels x (u8 length, UTF-8 bytes)
//! samples      n_channels x n_samples f32, channel-major
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::recording::{EegRecording, TrialMeta};
use crate::error::{Error, Result};

pub const EEGB_MAGIC: &[u8; 4] = b"EEGB";
pub const EEGB_VERSION: u16 = 1;

/// Little-endian cursor that reports the byte offset of any failure.
pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn fail(&self, reason: impl Into<String>) -> Error {
        Error::Format {
            offset: self.pos as u64,
            reason: reason.into(),
        }
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Format {
                offset: self.buf.len() as u64,
                reason: format!(
                    "truncated {what}: need {n} bytes at offset {}, {} available",
                    self.pos,
                    self.remaining()
                ),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().unwrap())
    }

    pub(crate) fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub(crate) fn u16(&mut self, what: &str) -> Result<u16> {
        self.array(what).map(u16::from_le_bytes)
    }

    pub(crate) fn u64(&mut self, what: &str) -> Result<u64> {
        self.array(what).map(u64::from_le_bytes)
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32> {
        self.array(what).map(u32::from_le_bytes)
    }

    pub(crate) fn i32(&mut self, what: &str) -> Result<i32> {
        self.array(what).map(i32::from_le_bytes)
    }

    pub(crate) fn f64(&mut self, what: &str) -> Result<f64> {
        self.array(what).map(f64::from_le_bytes)
    }

    pub(crate) fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| self.fail("size overflow"))?, what)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| self.fail("size overflow"))?, what)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(self.fail(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

/// Serializes a recording into EEGB bytes.
pub fn encode_recording(rec: &EegRecording) -> Vec<u8> {
    let n_ch = rec.n_channels();
    let n = rec.n_samples();
    let names_len: usize = rec.channel_names().iter().map(|s| 1 + s.len()).sum();
    let mut out = Vec::with_capacity(44 + names_len + 4 * n_ch * n);
    out.extend_from_slice(EEGB_MAGIC);
    out.extend_from_slice(&EEGB_VERSION.to_le_bytes());
    out.extend_from_slice(&(n_ch as u16).to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&rec.sample_rate_hz().to_le_bytes());
    let meta = rec.meta();
    out.extend_from_slice(&meta.subject_id.to_le_bytes());
    out.extend_from_slice(&meta.video_id.to_le_bytes());
    out.extend_from_slice(&meta.valence_score.to_le_bytes());
    for name in rec.channel_names() {
        out.push(name.len() as u8);
        out.extend_from_slice(name.as_bytes());
    }
    for v in rec.samples().iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parses EEGB bytes.
pub fn decode_recording(bytes: &[u8]) -> Result<EegRecording> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(4, "magic")?;
    if magic != EEGB_MAGIC {
        return Err(Error::Format {
            offset: 0,
            reason: format!("bad magic {magic:?}, expected \"EEGB\""),
        });
    }
    let at = r.offset();
    let version = r.u16("version")?;
    if version != EEGB_VERSION {
        return Err(Error::Format {
            offset: at,
            reason: format!("unsupported version {version}"),
        });
    }
    let at = r.offset();
    let n_ch = r.u16("channel count")? as usize;
    if n_ch == 0 {
        return Err(Error::Format {
            offset: at,
            reason: "channel count is zero".into(),
        });
    }
    let n = r.u64("sample count")? as usize;
    let rate = r.f64("sample rate")?;
    let meta = TrialMeta {
        subject_id: r.i32("subject id")?,
        video_id: r.i32("video id")?,
        valence_score: r.f64("valence")?,
    };
    let mut names = Vec::with_capacity(n_ch);
    for i in 0..n_ch {
        let len = r.u8("name length")? as usize;
        let at = r.offset();
        let raw = r.take(len, "channel name")?;
        let name = std::str::from_utf8(raw).map_err(|_| Error::Format {
            offset: at,
            reason: format!("channel {i} name is not UTF-8"),
        })?;
        names.push(name.to_string());
    }
    let payload_at = r.offset();
    let expected = n_ch
        .checked_mul(n)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| r.fail("sample payload size overflows"))?;
    if r.remaining() != expected {
        let have = r.remaining() / 4;
        return Err(Error::Format {
            offset: payload_at + r.remaining() as u64,
            reason: format!(
                "payload holds {have} values, header declares {n_ch} x {n} = {}",
                n_ch * n
            ),
        });
    }
    let values = r.f32s(n_ch * n, "samples")?;
    r.finish()?;
    let samples = Array2::from_shape_vec((n_ch, n), values).expect("length checked");
    EegRecording::new(names, rate, samples, meta).map_err(|e| Error::Format {
        offset: payload_at,
        reason: e.to_string(),
    })
}

pub fn write_recording(rec: &EegRecording, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_recording(rec))?;
    Ok(())
}

pub fn read_recording(path: impl AsRef<Path>) -> Result<EegRecording> {
    decode_recording(&fs::read(path)?)
}
