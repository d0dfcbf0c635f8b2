//! Labelled synthetic corpus whose classes differ only in which electrode
//! pairs share an oscillator.
//!
//! Every lateral channel carries the same two-oscillator mixture in the
//! planted band in both classes. High-valence trials lock left neighbours and
//! give right channels private splits; low-valence trials lock mirror pairs.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::bands::BandName;
use crate::error::{invalid, Result};
use crate::io::recording::{EegRecording, TrialMeta, DEFAULT_SAMPLE_RATE_HZ};
use crate::io::synth::{synthesize, CouplingSpec};

/// High-valence trials couple these left-hemisphere neighbours.
pub const WITHIN_LEFT_PAIRS: [(&str, &str); 7] = [
    ("Fp1", "AF3"),
    ("F3", "F7"),
    ("FC5", "FC1"),
    ("C3", "T7"),
    ("CP5", "CP1"),
    ("P3", "P7"),
    ("PO3", "O1"),
];

/// Low-valence trials couple every left electrode to its mirror image.
pub const MIRROR_PAIRS: [(&str, &str); 14] = [
    ("Fp1", "Fp2"),
    ("AF3", "AF4"),
    ("F3", "F4"),
    ("F7", "F8"),
    ("FC5", "FC6"),
    ("FC1", "FC2"),
    ("C3", "C4"),
    ("T7", "T8"),
    ("CP5", "CP6"),
    ("CP1", "CP2"),
    ("P3", "P4"),
    ("P7", "P8"),
    ("PO3", "PO4"),
    ("O1", "O2"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantedCorpus {
    pub n_trials: usize,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    /// Band of the planted coupling. The default, low alpha, keeps the shared
    /// oscillator inside one analysis sub-band.
    pub band: BandName,
    /// Power fraction of the shared oscillator in each coupled channel.
    pub strength: f64,
    pub noise_uv: f64,
    pub seed: u64,
}

impl Default for PlantedCorpus {
    fn default() -> Self {
        Self {
            n_trials: 40,
            duration_s: 60.0,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            band: BandName::LowAlpha,
            strength: 0.9,
            noise_uv: 2.0,
            seed: 0,
        }
    }
}

impl PlantedCorpus {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(invalid("corpus needs at least one trial"));
        }
        if !(0.0..=1.0).contains(&self.strength) {
            return Err(invalid(format!("strength {} outside [0, 1]", self.strength)));
        }
        if !(self.noise_uv >= 0.0 && self.noise_uv.is_finite()) {
            return Err(invalid("noise_uv must be finite and non-negative"));
        }
        Ok(())
    }

    /// Odd trials are high valence.
    pub fn label(&self, trial: usize) -> u8 {
        (trial % 2) as u8
    }

    fn trial_rng(&self, trial: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial as u64);
        rng
    }

    /// Generator input for one trial.
    pub fn trial_spec(&self, trial: usize) -> CouplingSpec {
        let mut rng = self.trial_rng(trial);
        let label = self.label(trial);
        let valence_score = if label == 1 {
            rng.random_range(5.5..=9.0)
        } else {
            rng.random_range(1.0..=5.0)
        };
        let synth_seed = rng.random::<u64>();
        let pairs: &[(&str, &str)] = if label == 1 { &WITHIN_LEFT_PAIRS } else { &MIRROR_PAIRS };
        let mut spec = CouplingSpec::deap32(self.noise_uv, synth_seed);
        for &(a, b) in pairs {
            let lag = rng.random_range(-PI..PI);
            spec = spec.couple(a, b, self.band, self.strength, lag);
        }
        if label == 1 {
            for &(_, right) in &MIRROR_PAIRS {
                spec = spec.split(right, self.band, self.strength);
            }
        }
        spec.meta = TrialMeta {
            subject_id: 1 + (trial / 40) as i32,
            video_id: 1 + (trial % 40) as i32,
            valence_score,
        };
        spec
    }

    pub fn trial(&self, trial: usize) -> Result<EegRecording> {
        self.validate()?;
        synthesize(&self.trial_spec(trial), self.duration_s, self.sample_rate_hz)
    }

    pub fn generate(&self) -> Result<Vec<EegRecording>> {
        (0..self.n_trials).map(|t| self.trial(t)).collect()
    }
}
