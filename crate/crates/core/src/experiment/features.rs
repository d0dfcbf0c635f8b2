use std::fmt;
use std::str::FromStr;

use ndarray::s;
use serde::{Deserialize, Serialize};

use super::segment::{binarize_valence, segment_bounds, window_and_hop, HOP_S, WINDOW_S};
use crate::connectivity::matrix::{pair_table, ConnectivityFeature};
use crate::connectivity::ordering::{build_ordering, ElectrodeOrdering, OrderingMethod};
use crate::dsp::bands::{BandDef, BandName};
use crate::dsp::filter::BandBank;
use crate::dsp::hilbert::instantaneous_phase;
use crate::error::{invalid, Error, Result};
use crate::io::layout::ElectrodeLayout;
use crate::io::recording::EegRecording;
use crate::topomap::{psd_tensor, TopoInterpolator, GRID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Psd,
    Pcc,
    Plv,
    Pli,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 4] = [FeatureKind::Psd, FeatureKind::Pcc, FeatureKind::Plv, FeatureKind::Pli];

    pub fn code(self) -> u8 {
        match self {
            FeatureKind::Psd => 0,
            FeatureKind::Pcc => 1,
            FeatureKind::Plv => 2,
            FeatureKind::Pli => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Psd => "psd",
            FeatureKind::Pcc => "pcc",
            FeatureKind::Plv => "plv",
            FeatureKind::Pli => "pli",
        }
    }

    /// `None` for PSD.
    pub fn connectivity(self) -> Option<ConnectivityFeature> {
        match self {
            FeatureKind::Psd => None,
            FeatureKind::Pcc => Some(ConnectivityFeature::Pcc),
            FeatureKind::Plv => Some(ConnectivityFeature::Plv),
            FeatureKind::Pli => Some(ConnectivityFeature::Pli),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown feature {s:?}, expected psd, pcc, plv or pli")))
    }
}

/// Ordering recorded with a tensor. The random seed is not kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingTag {
    None,
    Dist1,
    Dist2,
    Random,
}

impl OrderingTag {
    pub fn code(self) -> u8 {
        match self {
            OrderingTag::None => 0,
            OrderingTag::Dist1 => 1,
            OrderingTag::Dist2 => 2,
            OrderingTag::Random => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        [OrderingTag::None, OrderingTag::Dist1, OrderingTag::Dist2, OrderingTag::Random]
            .get(code as usize)
            .copied()
    }
}

impl From<OrderingMethod> for OrderingTag {
    fn from(m: OrderingMethod) -> Self {
        match m {
            OrderingMethod::Dist1 => OrderingTag::Dist1,
            OrderingMethod::Dist2 => OrderingTag::Dist2,
            OrderingMethod::Random(_) => OrderingTag::Random,
        }
    }
}

/// One classifier input, `(rows, cols, bands)` stored row-major with the band
/// index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub dims: (usize, usize, usize),
    pub label: u8,
    pub trial: i32,
    pub window: i32,
    pub feature: FeatureKind,
    pub ordering: OrderingTag,
    pub values: Vec<f32>,
}

impl FeatureTensor {
    pub fn validate(&self) -> Result<()> {
        let (h, w, c) = self.dims;
        if self.values.len() != h * w * c {
            return Err(invalid(format!(
                "tensor has {} values for dims {:?}",
                self.values.len(),
                self.dims
            )));
        }
        if self.label > 1 {
            return Err(invalid(format!("label {} is not 0 or 1", self.label)));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "feature tensor of trial {} window {}",
                self.trial, self.window
            )));
        }
        Ok(())
    }

    pub fn get(&self, row: usize, col: usize, band: usize) -> f32 {
        let (_, w, c) = self.dims;
        self.values[(row * w + col) * c + band]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    pub feature: FeatureKind,
    pub ordering: OrderingMethod,
    #[serde(default = "all_bands")]
    pub bands: Vec<BandName>,
    #[serde(default = "default_window")]
    pub window_s: f64,
    #[serde(default = "default_hop")]
    pub hop_s: f64,
}

fn all_bands() -> Vec<BandName> {
    BandName::ALL.to_vec()
}

fn default_window() -> f64 {
    WINDOW_S
}

fn default_hop() -> f64 {
    HOP_S
}

impl FeatureConfig {
    pub fn new(feature: FeatureKind, ordering: OrderingMethod) -> Self {
        Self {
            feature,
            ordering,
            bands: all_bands(),
            window_s: WINDOW_S,
            hop_s: HOP_S,
        }
    }

    /// True when an ordering was requested for a feature that ignores it.
    pub fn ordering_ignored(&self) -> bool {
        self.feature == FeatureKind::Psd
    }

    /// Band definitions in tensor-channel order.
    pub fn band_defs(&self) -> Result<Vec<BandDef>> {
        if self.bands.is_empty() {
            return Err(invalid("no bands configured"));
        }
        let mut out: Vec<BandDef> = Vec::with_capacity(self.bands.len());
        for b in &self.bands {
            if out.iter().any(|d| d.name == *b) {
                return Err(invalid(format!("band {b} listed twice")));
            }
            out.push(b.def());
        }
        Ok(out)
    }
}

/// Reusable state for extracting features from many recordings.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    config: FeatureConfig,
    bands: Vec<BandDef>,
    layout: ElectrodeLayout,
    interp: TopoInterpolator,
    ordering: ElectrodeOrdering,
}

impl FeatureExtractor {
    pub fn new(config: FeatureConfig, layout: ElectrodeLayout) -> Result<Self> {
        let bands = config.band_defs()?;
        layout.require_deap32()?;
        let interp = TopoInterpolator::new(&layout)?;
        let ordering = build_ordering(config.ordering, &layout)?;
        Ok(Self {
            config,
            bands,
            layout,
            interp,
            ordering,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn ordering(&self) -> &ElectrodeOrdering {
        &self.ordering
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (GRID, GRID, self.bands.len())
    }

    /// Every window of `rec` in temporal order.
    ///
    /// Band filtering and the analytic signal run over the whole recording;
    /// windows are cut from the results.
    pub fn extract(&self, rec: &EegRecording, trial: i32) -> Result<Vec<FeatureTensor>> {
        rec.require_pipeline_channels()?;
        let label = binarize_valence(rec.meta().valence_score)?;
        let rate = rec.sample_rate_hz();
        let (win, hop) = window_and_hop(rate, self.config.window_s, self.config.hop_s)?;
        let bounds = segment_bounds(rec.n_samples(), win, hop)?;
        let x = rec.to_real::<f64>();
        let names = rec.channel_names();
        let bands = &self.bands;
        let nb = bands.len();
        let dims = self.dims();
        let tag = match self.config.feature {
            FeatureKind::Psd => OrderingTag::None,
            _ => self.config.ordering.into(),
        };
        let blank = |w: usize| FeatureTensor {
            dims,
            label,
            trial,
            window: w as i32,
            feature: self.config.feature,
            ordering: tag,
            values: vec![0.0; GRID * GRID * nb],
        };

        let mut out: Vec<FeatureTensor> = (0..bounds.len()).map(blank).collect();
        match self.config.feature.connectivity() {
            None => {
                for (t, &(a, b)) in out.iter_mut().zip(&bounds) {
                    let p = psd_tensor(x.slice(s![.., a..b]), names, rate, &self.interp, &self.layout, bands)?;
                    t.values.iter_mut().zip(p.iter()).for_each(|(o, &v)| *o = v as f32);
                }
            }
            Some(feature) => {
                let perm = self.ordering.channel_indices(names)?;
                let bank = BandBank::decompose(x.view(), rate, bands, "recording")?;
                for (bi, (_, signal)) in bank.iter().enumerate() {
                    let phase = if feature.uses_phase() {
                        Some(instantaneous_phase(signal)?)
                    } else {
                        None
                    };
                    for (t, &(a, b)) in out.iter_mut().zip(&bounds) {
                        let source = match &phase {
                            Some(p) => p.view().slice_move(s![.., a..b]),
                            None => signal.slice(s![.., a..b]),
                        };
                        let table = pair_table(feature, source)?;
                        for (i, &pi) in perm.iter().enumerate() {
                            for (j, &pj) in perm.iter().enumerate() {
                                t.values[(i * GRID + j) * nb + bi] = table[[pi, pj]] as f32;
                            }
                        }
                    }
                }
            }
        }
        for t in &out {
            t.validate()?;
        }
        Ok(out)
    }
}
