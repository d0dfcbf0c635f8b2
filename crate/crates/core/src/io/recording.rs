use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Trial annotations carried with a recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMeta {
    pub subject_id: i32,
    pub video_id: i32,
    /// Self-reported valence on the 1-9 scale.
    pub valence_score: f64,
}

impl Default for TrialMeta {
    fn default() -> Self {
        Self {
            subject_id: 0,
            video_id: 0,
            valence_score: 5.0,
        }
    }
}

/// Multichannel EEG in microvolts, stored `[channels x samples]`.
///
/// Construction validates the invariants; the value is immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct EegRecording {
    channel_names: Vec<String>,
    sample_rate_hz: f64,
    samples: Array2<f32>,
    meta: TrialMeta,
}

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 128.0;

impl EegRecording {
    pub fn new(
        channel_names: Vec<String>,
        sample_rate_hz: f64,
        samples: Array2<f32>,
        meta: TrialMeta,
    ) -> Result<Self> {
        if channel_names.is_empty() {
            return Err(invalid("recording has no channels"));
        }
        if channel_names.len() > u16::MAX as usize {
            return Err(invalid("too many channels"));
        }
        for (i, n) in channel_names.iter().enumerate() {
            if n.is_empty() || n.len() > u8::MAX as usize {
                return Err(invalid(format!("channel name {n:?} must be 1-255 bytes")));
            }
            if channel_names[..i].contains(n) {
                return Err(invalid(format!("duplicate channel name {n}")));
            }
        }
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(invalid(format!("sample rate must be positive, got {sample_rate_hz}")));
        }
        if samples.nrows() != channel_names.len() {
            return Err(invalid(format!(
                "{} channel names but {} sample rows",
                channel_names.len(),
                samples.nrows()
            )));
        }
        if samples.ncols() == 0 {
            return Err(invalid("recording has no samples"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(invalid("recording contains non-finite samples"));
        }
        if !(1.0..=9.0).contains(&meta.valence_score) {
            return Err(invalid(format!(
                "valence score {} outside [1, 9]",
                meta.valence_score
            )));
        }
        Ok(Self {
            channel_names,
            sample_rate_hz,
            samples: samples.as_standard_layout().into_owned(),
            meta,
        })
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn samples(&self) -> ArrayView2<'_, f32> {
        self.samples.view()
    }

    pub fn channel(&self, index: usize) -> ArrayView1<'_, f32> {
        self.samples.row(index)
    }

    pub fn meta(&self) -> TrialMeta {
        self.meta
    }

    pub fn n_channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.ncols()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sample_rate_hz
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channel_names.iter().position(|c| c == name)
    }

    /// Pipeline stages work on 32-channel montages only.
    pub fn require_pipeline_channels(&self) -> Result<()> {
        if self.n_channels() != 32 {
            return Err(invalid(format!(
                "pipeline needs 32 channels, recording has {}",
                self.n_channels()
            )));
        }
        Ok(())
    }

    /// Samples converted to the working precision.
    pub fn to_real<T: Real>(&self) -> Array2<T> {
        self.samples.mapv(|v| T::lit(v as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("ch{i}")).collect()
    }

    #[test]
    fn validation() {
        let ok = EegRecording::new(names(2), 128.0, Array2::zeros((2, 4)), TrialMeta::default());
        assert!(ok.is_ok());
        assert!(EegRecording::new(vec![], 128.0, Array2::zeros((0, 4)), TrialMeta::default()).is_err());
        assert!(EegRecording::new(names(2), 0.0, Array2::zeros((2, 4)), TrialMeta::default()).is_err());
        assert!(EegRecording::new(names(2), 128.0, Array2::zeros((2, 0)), TrialMeta::default()).is_err());
        assert!(EegRecording::new(names(3), 128.0, Array2::zeros((2, 4)), TrialMeta::default()).is_err());
        let dup = vec!["a".to_string(), "a".to_string()];
        assert!(EegRecording::new(dup, 128.0, Array2::zeros((2, 4)), TrialMeta::default()).is_err());
        let meta = TrialMeta { valence_score: 9.5, ..TrialMeta::default() };
        assert!(EegRecording::new(names(2), 128.0, Array2::zeros((2, 4)), meta).is_err());
    }

    #[test]
    fn single_channel_loads_but_pipeline_rejects() {
        let r = EegRecording::new(names(1), 128.0, Array2::zeros((1, 10)), TrialMeta::default()).unwrap();
        assert!(r.require_pipeline_channels().is_err());
    }
}
