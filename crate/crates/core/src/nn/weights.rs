//! Export of the first convolution's 3x3 kernels.

use std::io::{BufRead, Write};

use super::model::Model;
use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Kernels of the first convolution, one per (input channel, filter) pair,
/// stored row-major by input channel. Each kernel is `[ky * 3 + kx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrid {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernels: Vec<[f64; 9]>,
}

/// Spread of a kernel relative to its magnitude: population standard
/// deviation over mean absolute value. 0 for a constant or all-zero kernel.
pub fn uniformity(kernel: &[f64; 9]) -> f64 {
    let mean = kernel.iter().sum::<f64>() / 9.0;
    let mean_abs = kernel.iter().map(|v| v.abs()).sum::<f64>() / 9.0;
    if mean_abs == 0.0 {
        return 0.0;
    }
    let var = kernel.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 9.0;
    var.sqrt() / mean_abs
}

pub fn dump_first_layer_weights<T: Real>(model: &Model<T>) -> Result<KernelGrid> {
    let (w, in_c, out_c) = model
        .first_conv()
        .ok_or_else(|| invalid("model has no convolution layer"))?;
    let mut kernels = Vec::with_capacity(in_c * out_c);
    for ci in 0..in_c {
        for co in 0..out_c {
            let mut k = [0.0; 9];
            for (p, v) in k.iter_mut().enumerate() {
                *v = w[(p * in_c + ci) * out_c + co].to_f64_lossless();
            }
            kernels.push(k);
        }
    }
    Ok(KernelGrid {
        in_channels: in_c,
        out_channels: out_c,
        kernels,
    })
}

impl KernelGrid {
    pub fn kernel(&self, in_channel: usize, out_channel: usize) -> &[f64; 9] {
        &self.kernels[in_channel * self.out_channels + out_channel]
    }

    pub fn uniformity_scores(&self) -> Vec<f64> {
        self.kernels.iter().map(uniformity).collect()
    }

    /// Writes the kernels back into the model's first convolution.
    pub fn apply_to<T: Real>(&self, model: &mut Model<T>) -> Result<()> {
        let (_, in_c, out_c) = model
            .first_conv()
            .ok_or_else(|| invalid("model has no convolution layer"))?;
        if (in_c, out_c) != (self.in_channels, self.out_channels) {
            return Err(invalid(format!(
                "kernel grid is {}x{}, model's first convolution is {in_c}x{out_c}",
                self.in_channels, self.out_channels
            )));
        }
        let w = &mut model.params_mut()[0];
        for ci in 0..in_c {
            for co in 0..out_c {
                for (p, &v) in self.kernel(ci, co).iter().enumerate() {
                    w[(p * in_c + ci) * out_c + co] = T::lit(v);
                }
            }
        }
        Ok(())
    }

    /// CSV with header `in_channel,out_channel,w0..w8,uniformity`; values use
    /// the shortest text that parses back to the same `f64`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "in_channel,out_channel,w0,w1,w2,w3,w4,w5,w6,w7,w8,uniformity")?;
        for ci in 0..self.in_channels {
            for co in 0..self.out_channels {
                let k = self.kernel(ci, co);
                let vals: Vec<String> = k.iter().map(|v| format!("{v:?}")).collect();
                writeln!(out, "{ci},{co},{},{:?}", vals.join(","), uniformity(k))?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut rows: Vec<(usize, usize, [f64; 9])> = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 12 {
                return Err(invalid(format!("weights line {}: expected 12 fields", i + 1)));
            }
            let bad = |s: &str| invalid(format!("weights line {}: bad field {s:?}", i + 1));
            let ci = f[0].parse().map_err(|_| bad(f[0]))?;
            let co = f[1].parse().map_err(|_| bad(f[1]))?;
            let mut k = [0.0; 9];
            for (p, v) in k.iter_mut().enumerate() {
                *v = f[2 + p].parse().map_err(|_| bad(f[2 + p]))?;
            }
            rows.push((ci, co, k));
        }
        let in_c = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let out_c = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        if rows.len() != in_c * out_c || rows.is_empty() {
            return Err(invalid("weights file does not hold a full kernel grid"));
        }
        let mut kernels = vec![[0.0; 9]; in_c * out_c];
        let mut seen = vec![false; in_c * out_c];
        for (ci, co, k) in rows {
            let idx = ci * out_c + co;
            if seen[idx] {
                return Err(invalid(format!("kernel ({ci}, {co}) listed twice")));
            }
            seen[idx] = true;
            kernels[idx] = k;
        }
        Ok(Self {
            in_channels: in_c,
            out_channels: out_c,
            kernels,
        })
    }

    /// Image of all kernels: input channels down, filters across, each kernel
    /// a 3x3 tile with a one-pixel gap. Gap pixels take the grid's minimum.
    /// Returns `(width, height, pixels)` row-major.
    pub fn tile_image(&self) -> (usize, usize, Vec<f64>) {
        let width = self.out_channels * 4 - 1;
        let height = self.in_channels * 4 - 1;
        let min = self.kernels.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let mut px = vec![min; width * height];
        for ci in 0..self.in_channels {
            for co in 0..self.out_channels {
                let k = self.kernel(ci, co);
                for ky in 0..3 {
                    for kx in 0..3 {
                        px[(ci * 4 + ky) * width + co * 4 + kx] = k[ky * 3 + kx];
                    }
                }
            }
        }
        (width, height, px)
    }
}
