use std::path::Path;

use crate::error::CliError;
use crate::output::write_bytes;

/// Binary PGM (P5) bytes of a row-major grid, min mapped to 0 and max to 255.
/// A constant grid becomes uniform mid-gray (128).
pub fn encode_pgm(width: usize, height: usize, values: &[f64]) -> Result<Vec<u8>, CliError> {
    if width == 0 || height == 0 || values.len() != width * height {
        return Err(CliError::Config(format!(
            "{} values do not fill a {width}x{height} image",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Numeric("image values must be finite".into()));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(values.iter().map(|&v| {
        if max > min {
            (255.0 * (v - min) / (max - min)).round() as u8
        } else {
            128
        }
    }));
    Ok(out)
}

pub fn write_pgm(path: &Path, width: usize, height: usize, values: &[f64]) -> Result<(), CliError> {
    write_bytes(path, &encode_pgm(width, height, values)?)
}
