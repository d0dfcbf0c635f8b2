//! CNNM model checkpoints.
//!
//! ```text
//! magic        4 bytes  "CNNM"
//! version      u16      1
//! input        u32 x 3  height, width, channels
//! n_layers     u16
//! layers       n_layers x (tag u8, argument u32)
//! parameters   f64 per value, in Model::params order
//! running      per batch-norm layer: mean then variance, f64
//! ```
//! Layer tags: 0 conv3x3 (argument = output channels), 1 maxpool2x2,
//! 2 batchnorm, 3 relu, 4 flatten, 5 dense (argument = units), 6 softmax.
//! All values little-endian.

use std::fs;
use std::path::Path;

use super::model::Model;
use super::spec::{LayerSpec, ModelSpec};
use crate::error::{Error, Result};
use crate::io::eegb::ByteReader;
use crate::scalar::Real;

pub const CNNM_MAGIC: &[u8; 4] = b"CNNM";
pub const CNNM_VERSION: u16 = 1;

fn tag(l: &LayerSpec) -> (u8, u32) {
    match *l {
        LayerSpec::Conv3x3 { out_channels } => (0, out_channels as u32),
        LayerSpec::MaxPool2x2 => (1, 0),
        LayerSpec::BatchNorm => (2, 0),
        LayerSpec::Relu => (3, 0),
        LayerSpec::Flatten => (4, 0),
        LayerSpec::Dense { units } => (5, units as u32),
        LayerSpec::Softmax => (6, 0),
    }
}

pub fn encode_checkpoint<T: Real>(model: &Model<T>) -> Vec<u8> {
    let spec = model.spec();
    let mut out = Vec::new();
    out.extend_from_slice(CNNM_MAGIC);
    out.extend_from_slice(&CNNM_VERSION.to_le_bytes());
    for d in [spec.input.0, spec.input.1, spec.input.2] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&(spec.layers.len() as u16).to_le_bytes());
    for l in &spec.layers {
        let (t, a) = tag(l);
        out.push(t);
        out.extend_from_slice(&a.to_le_bytes());
    }
    let mut put = |vals: &[T]| {
        for v in vals {
            out.extend_from_slice(&v.to_f64_lossless().to_le_bytes());
        }
    };
    for p in model.params() {
        put(p);
    }
    for (m, v) in model.running_stats() {
        put(m);
        put(v);
    }
    out
}

pub fn decode_checkpoint<T: Real>(bytes: &[u8]) -> Result<Model<T>> {
    let mut r = ByteReader::new(bytes);
    if r.take(4, "magic")? != CNNM_MAGIC {
        return Err(Error::Format {
            offset: 0,
            reason: "bad magic, expected \"CNNM\"".into(),
        });
    }
    let at = r.offset();
    let version = r.u16("version")?;
    if version != CNNM_VERSION {
        return Err(Error::Format {
            offset: at,
            reason: format!("unsupported version {version}"),
        });
    }
    let input = (
        r.u32("input height")? as usize,
        r.u32("input width")? as usize,
        r.u32("input channels")? as usize,
    );
    let n_layers = r.u16("layer count")? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let at = r.offset();
        let t = r.u8("layer tag")?;
        let a = r.u32("layer argument")? as usize;
        layers.push(match t {
            0 => LayerSpec::Conv3x3 { out_channels: a },
            1 => LayerSpec::MaxPool2x2,
            2 => LayerSpec::BatchNorm,
            3 => LayerSpec::Relu,
            4 => LayerSpec::Flatten,
            5 => LayerSpec::Dense { units: a },
            6 => LayerSpec::Softmax,
            _ => {
                return Err(Error::Format {
                    offset: at,
                    reason: format!("unknown layer tag {t}"),
                })
            }
        });
    }
    let spec = ModelSpec { input, layers };
    let at = r.offset();
    let template = Model::<f64>::new(spec.clone(), 0).map_err(|e| Error::Format {
        offset: at,
        reason: format!("stored model description is invalid: {e}"),
    })?;
    let mut read = |n: usize, what: &str| -> Result<Vec<T>> {
        Ok(r.f64s(n, what)?.into_iter().map(T::lit).collect())
    };
    let mut params = Vec::new();
    for p in template.params() {
        params.push(read(p.len(), "parameters")?);
    }
    let mut running = Vec::new();
    for (m, v) in template.running_stats() {
        let mean = read(m.len(), "running mean")?;
        let var = read(v.len(), "running variance")?;
        running.push((mean, var));
    }
    r.finish()?;
    Model::from_parts(spec, params, running)
}

pub fn write_checkpoint<T: Real>(model: &Model<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_checkpoint(model))?;
    Ok(())
}

pub fn read_checkpoint<T: Real>(path: impl AsRef<Path>) -> Result<Model<T>> {
    decode_checkpoint(&fs::read(path)?)
}
