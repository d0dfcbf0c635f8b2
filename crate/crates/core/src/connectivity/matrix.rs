//! 32x32 connectivity matrices under an electrode ordering.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::estimators::{pcc, pli};
use super::ordering::ElectrodeOrdering;
use crate::dsp::bands::BandDef;
use crate::dsp::hilbert::instantaneous_phase;
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectivityFeature {
    Pcc,
    Plv,
    Pli,
}

impl ConnectivityFeature {
    pub fn as_str(self) -> &'static str {
        match self {
            ConnectivityFeature::Pcc => "pcc",
            ConnectivityFeature::Plv => "plv",
            ConnectivityFeature::Pli => "pli",
        }
    }

    /// Value on the diagonal (an electrode paired with itself).
    pub fn self_value<T: Real>(self) -> T {
        match self {
            ConnectivityFeature::Pcc | ConnectivityFeature::Plv => T::one(),
            ConnectivityFeature::Pli => T::zero(),
        }
    }

    /// Whether the estimator consumes instantaneous phase rather than the signal.
    pub fn uses_phase(self) -> bool {
        !matches!(self, ConnectivityFeature::Pcc)
    }
}

impl fmt::Display for ConnectivityFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConnectivityFeature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pcc" => Ok(ConnectivityFeature::Pcc),
            "plv" => Ok(ConnectivityFeature::Plv),
            "pli" => Ok(ConnectivityFeature::Pli),
            _ => Err(invalid(format!("unknown connectivity feature {s:?}"))),
        }
    }
}

fn row_vec<T: Real>(row: ArrayView1<'_, T>) -> std::borrow::Cow<'_, [T]> {
    match row.to_slice() {
        Some(s) => std::borrow::Cow::Borrowed(s),
        None => std::borrow::Cow::Owned(row.to_vec()),
    }
}

fn symmetric_table<T: Real>(
    n: usize,
    diag: T,
    mut pair: impl FnMut(usize, usize) -> Result<T>,
) -> Result<Array2<T>> {
    let mut t = Array2::from_elem((n, n), diag);
    for i in 0..n {
        for j in i + 1..n {
            let v = pair(i, j)?;
            t[[i, j]] = v;
            t[[j, i]] = v;
        }
    }
    Ok(t)
}

/// Pearson correlation between every pair of rows, in row order.
pub fn pcc_table<T: Real>(signal: ArrayView2<'_, T>) -> Result<Array2<T>> {
    let rows: Vec<_> = signal.rows().into_iter().map(row_vec).collect();
    symmetric_table(rows.len(), T::one(), |i, j| {
        pcc(&rows[i], &rows[j]).map_err(|e| match e {
            Error::Signal(m) => Error::Signal(format!("channels {i}/{j}: {m}")),
            other => other,
        })
    })
}

/// Phase locking value between every pair of phase rows, via precomputed
/// unit phasors.
pub fn plv_table<T: Real>(phases: ArrayView2<'_, T>) -> Result<Array2<T>> {
    let (n_ch, n) = phases.dim();
    if n == 0 {
        return Err(invalid("empty phase series"));
    }
    let cos = phases.mapv(|p| p.cos());
    let sin = phases.mapv(|p| p.sin());
    let inv_n = T::one() / T::from_usize(n).unwrap();
    symmetric_table(n_ch, T::one(), |i, j| {
        let (ci, si, cj, sj) = (cos.row(i), sin.row(i), cos.row(j), sin.row(j));
        let (mut re, mut im) = (T::zero(), T::zero());
        for k in 0..n {
            re = re + ci[k] * cj[k] + si[k] * sj[k];
            im = im + si[k] * cj[k] - ci[k] * sj[k];
        }
        Ok((re.hypot(im) * inv_n).min(T::one()))
    })
}

/// Phase lag index between every pair of phase rows.
pub fn pli_table<T: Real>(phases: ArrayView2<'_, T>) -> Result<Array2<T>> {
    let rows: Vec<_> = phases.rows().into_iter().map(row_vec).collect();
    symmetric_table(rows.len(), T::zero(), |i, j| pli(&rows[i], &rows[j]))
}

/// Pairwise table in channel order. `data` is the band-limited signal for PCC
/// and the instantaneous phase for PLV and PLI.
pub fn pair_table<T: Real>(feature: ConnectivityFeature, data: ArrayView2<'_, T>) -> Result<Array2<T>> {
    match feature {
        ConnectivityFeature::Pcc => pcc_table(data),
        ConnectivityFeature::Plv => plv_table(data),
        ConnectivityFeature::Pli => pli_table(data),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMatrix<T> {
    feature: ConnectivityFeature,
    band: BandDef,
    ordering: ElectrodeOrdering,
    values: Array2<T>,
}

impl<T: Real> ConnectivityMatrix<T> {
    /// Rearranges a channel-order table so that cell `(i, j)` holds the pair
    /// `(ordering[i], ordering[j])`.
    pub fn from_table(
        feature: ConnectivityFeature,
        band: BandDef,
        ordering: &ElectrodeOrdering,
        table: ArrayView2<'_, T>,
        channel_names: &[String],
    ) -> Result<Self> {
        if table.dim() != (channel_names.len(), channel_names.len()) {
            return Err(invalid(format!(
                "table is {:?} for {} channels",
                table.dim(),
                channel_names.len()
            )));
        }
        let p = ordering.channel_indices(channel_names)?;
        let n = p.len();
        let values = Array2::from_shape_fn((n, n), |(i, j)| table[[p[i], p[j]]]);
        Ok(Self {
            feature,
            band,
            ordering: ordering.clone(),
            values,
        })
    }

    pub fn feature(&self) -> ConnectivityFeature {
        self.feature
    }

    pub fn band(&self) -> BandDef {
        self.band
    }

    pub fn ordering(&self) -> &ElectrodeOrdering {
        &self.ordering
    }

    pub fn values(&self) -> ArrayView2<'_, T> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<T> {
        self.values
    }

    /// Checks symmetry, the diagonal value and the estimator's range.
    pub fn validate(&self) -> Result<()> {
        let v = &self.values;
        let n = v.nrows();
        let (lo, hi) = match self.feature {
            ConnectivityFeature::Pcc => (-T::one(), T::one()),
            _ => (T::zero(), T::one()),
        };
        for i in 0..n {
            if v[[i, i]] != self.feature.self_value::<T>() {
                return Err(invalid(format!("diagonal entry {i} is {}", v[[i, i]])));
            }
            for j in 0..n {
                let x = v[[i, j]];
                if !x.is_finite() || x < lo || x > hi {
                    return Err(invalid(format!("entry ({i}, {j}) = {x} out of range")));
                }
                if x != v[[j, i]] {
                    return Err(invalid(format!("entry ({i}, {j}) breaks symmetry")));
                }
            }
        }
        Ok(())
    }

    /// One line per row, comma separated, shortest round-trip float text.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_matrix_csv(self.values.view(), out)
    }
}

pub fn write_matrix_csv<T: Real, W: Write>(values: ArrayView2<'_, T>, mut out: W) -> Result<()> {
    for row in values.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Computes one band's matrix directly from a band-limited segment
/// `[channels x samples]`. Phases are taken from this segment alone.
pub fn connectivity_matrix<T: Real>(
    band_signal: ArrayView2<'_, T>,
    channel_names: &[String],
    feature: ConnectivityFeature,
    band: BandDef,
    ordering: &ElectrodeOrdering,
) -> Result<ConnectivityMatrix<T>> {
    if band_signal.nrows() != 32 || channel_names.len() != 32 {
        return Err(invalid(format!(
            "connectivity matrices need 32 channels, got {}",
            band_signal.nrows()
        )));
    }
    let table = if feature.uses_phase() {
        let ph = instantaneous_phase(band_signal)?;
        pair_table(feature, ph.view())?
    } else {
        pair_table(feature, band_signal)?
    };
    ConnectivityMatrix::from_table(feature, band, ordering, table.view(), channel_names)
}
