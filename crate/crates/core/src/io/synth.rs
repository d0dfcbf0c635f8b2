//! Synthetic EEG with controllable pairwise phase coupling.
//!
//! Each channel is a sum of drifting-frequency oscillators, one per source band
//! (delta, theta, alpha, beta, gamma), plus white Gaussian noise. The
//! instantaneous frequency of every oscillator follows a reflected random walk
//! inside its band, smoothed over about half a second, so two independent
//! oscillators do not stay phase locked.
//!
//! A coupling entry gives two channels a shared oscillator in the requested
//! band; the second channel receives it delayed by `phase_lag` radians. The
//! shared and private oscillators of a source band are mixed with power
//! weights `strength` and `1 - strength`, so band power does not depend on how
//! strongly a channel is coupled.
//!
//! A split entry gives a channel the same two-oscillator structure as a
//! coupling, but with a private oscillator in place of the shared one, so
//! coupled and uncoupled channels have matching power statistics.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::layout::DEAP32_CHANNELS;
use super::recording::{EegRecording, TrialMeta};
use crate::dsp::bands::{BandDef, BandName};
use crate::error::{invalid, Result};

/// Source bands: (band, lowest oscillator frequency, amplitude in microvolts).
const SOURCES: [(BandName, f64, f64); 5] = [
    (BandName::Delta, 0.5, 8.0),
    (BandName::Theta, 4.0, 6.0),
    (BandName::Alpha, 8.0, 10.0),
    (BandName::Beta, 13.0, 4.0),
    (BandName::Gamma, 30.0, 2.0),
];

/// Random-walk spread of the instantaneous frequency after one second, as a
/// fraction of the band width.
const DRIFT_PER_SECOND: f64 = 0.5;

/// Standard deviation of the Gaussian that smooths the frequency walk, seconds.
const SMOOTHING_S: f64 = 0.5;

const OWN_STREAM: u64 = 0;
const SHARED_STREAM: u64 = 1 << 32;
const NOISE_STREAM: u64 = 2 << 32;
const SPLIT_STREAM: u64 = 3 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coupling {
    pub channel_a: String,
    pub channel_b: String,
    pub band: BandName,
    /// Fraction of the band's power carried by the shared oscillator, in `[0, 1]`.
    pub strength: f64,
    /// Phase of `channel_a` minus phase of `channel_b`, radians.
    pub phase_lag: f64,
}

/// Moves `strength` of a channel's band power onto a private oscillator
/// drawn in `band`, like an uncoupled half of a [`Coupling`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    pub channel: String,
    pub band: BandName,
    pub strength: f64,
}

/// Generator input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub channels: Vec<String>,
    pub couplings: Vec<Coupling>,
    #[serde(default)]
    pub splits: Vec<Split>,
    /// White-noise standard deviation per channel, microvolts.
    pub noise_amplitude: Vec<f64>,
    pub seed: u64,
    #[serde(default)]
    pub meta: TrialMeta,
}

impl CouplingSpec {
    /// DEAP montage, no coupling, uniform noise.
    pub fn deap32(noise: f64, seed: u64) -> Self {
        Self {
            channels: DEAP32_CHANNELS.iter().map(|s| s.to_string()).collect(),
            couplings: Vec::new(),
            splits: Vec::new(),
            noise_amplitude: vec![noise; 32],
            seed,
            meta: TrialMeta::default(),
        }
    }

    pub fn couple(
        mut self,
        a: &str,
        b: &str,
        band: BandName,
        strength: f64,
        phase_lag: f64,
    ) -> Self {
        self.couplings.push(Coupling {
            channel_a: a.to_string(),
            channel_b: b.to_string(),
            band,
            strength,
            phase_lag,
        });
        self
    }

    pub fn split(mut self, channel: &str, band: BandName, strength: f64) -> Self {
        self.splits.push(Split {
            channel: channel.to_string(),
            band,
            strength,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(invalid("coupling spec has no channels"));
        }
        if self.noise_amplitude.len() != self.channels.len() {
            return Err(invalid(format!(
                "{} noise amplitudes for {} channels",
                self.noise_amplitude.len(),
                self.channels.len()
            )));
        }
        if self.noise_amplitude.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
            return Err(invalid("noise amplitudes must be finite and non-negative"));
        }
        for c in &self.couplings {
            for ch in [&c.channel_a, &c.channel_b] {
                if !self.channels.contains(ch) {
                    return Err(invalid(format!("coupling references unknown channel {ch}")));
                }
            }
            if c.channel_a == c.channel_b {
                return Err(invalid(format!("channel {} coupled to itself", c.channel_a)));
            }
            if !(0.0..=1.0).contains(&c.strength) {
                return Err(invalid(format!("coupling strength {} outside [0, 1]", c.strength)));
            }
            if !c.phase_lag.is_finite() {
                return Err(invalid("phase lag must be finite"));
            }
        }
        for sp in &self.splits {
            if !self.channels.contains(&sp.channel) {
                return Err(invalid(format!("split references unknown channel {}", sp.channel)));
            }
            if !(0.0..=1.0).contains(&sp.strength) {
                return Err(invalid(format!("split strength {} outside [0, 1]", sp.strength)));
            }
        }
        Ok(())
    }
}

/// Index into [`SOURCES`] of the source band that contains `band`.
fn source_of(band: BandName) -> usize {
    let def = band.def();
    SOURCES
        .iter()
        .position(|(s, _, _)| s.def().contains(&def))
        .expect("every canonical band lies inside a source band")
}

/// Oscillation range actually used for a band (no DC component).
fn oscillator_range(band: &BandDef) -> (f64, f64) {
    let floor = SOURCES[source_of(band.name)].1;
    (band.f_lo.max(floor), band.f_hi)
}

/// Phase trajectory of a drifting oscillator. The frequency walk is smoothed
/// so that the oscillator's spectrum stays compact around the band.
fn drifting_phase(lo: f64, hi: f64, rng: &mut ChaCha8Rng, smoother: &Smoother) -> Vec<f64> {
    let rate_hz = smoother.rate_hz;
    let width = hi - lo;
    let step = DRIFT_PER_SECOND * width / rate_hz.sqrt();
    let mut f = lo + width * rng.random::<f64>();
    let mut phase = 2.0 * PI * rng.random::<f64>();
    let mut walk = Vec::with_capacity(smoother.n);
    for _ in 0..smoother.n {
        walk.push(f);
        f += step * rng.sample::<f64, _>(StandardNormal);
        // reflect back into the band
        while f < lo || f > hi {
            f = if f < lo { 2.0 * lo - f } else { 2.0 * hi - f };
        }
    }
    let mut out = Vec::with_capacity(smoother.n);
    for f in smoother.smooth(&walk) {
        out.push(phase);
        phase = (phase + 2.0 * PI * f.clamp(lo, hi) / rate_hz) % (2.0 * PI);
    }
    out
}

/// Gaussian moving average truncated at 4 sigma and renormalised at the ends,
/// done as one FFT convolution. Every output is a weighted mean of inputs.
struct Smoother {
    n: usize,
    rate_hz: f64,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    kernel: Vec<Complex<f64>>,
    weight: Vec<f64>,
}

impl Smoother {
    fn new(n: usize, rate_hz: f64) -> Self {
        let sigma = SMOOTHING_S * rate_hz;
        let r = ((4.0 * sigma).ceil() as usize).min(n);
        let len = n + r + 1;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(len);
        let ifft = planner.plan_fft_inverse(len);
        let mut kernel = vec![Complex::new(0.0, 0.0); len];
        for k in 0..=r {
            let w = (-0.5 * (k as f64 / sigma).powi(2)).exp();
            kernel[k].re = w;
            kernel[(len - k) % len].re = w;
        }
        fft.process(&mut kernel);
        let mut this = Self {
            n,
            rate_hz,
            fft,
            ifft,
            kernel,
            weight: Vec::new(),
        };
        this.weight = this.convolve(&vec![1.0; n]);
        this
    }

    fn convolve(&self, x: &[f64]) -> Vec<f64> {
        let len = self.kernel.len();
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        buf.resize(len, Complex::new(0.0, 0.0));
        self.fft.process(&mut buf);
        buf.iter_mut().zip(&self.kernel).for_each(|(b, k)| *b *= k);
        self.ifft.process(&mut buf);
        buf[..self.n].iter().map(|c| c.re / len as f64).collect()
    }

    fn smooth(&self, x: &[f64]) -> Vec<f64> {
        self.convolve(x).iter().zip(&self.weight).map(|(v, w)| v / w).collect()
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Generates a recording. Pure in `(spec, duration_s, sample_rate_hz)`.
pub fn synthesize(spec: &CouplingSpec, duration_s: f64, sample_rate_hz: f64) -> Result<EegRecording> {
    spec.validate()?;
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(invalid(format!("duration must be positive, got {duration_s}")));
    }
    if !(sample_rate_hz > 2.0 * BandName::Gamma.def().f_hi) {
        return Err(invalid(format!(
            "sample rate {sample_rate_hz} Hz cannot represent the gamma band"
        )));
    }
    let n = (duration_s * sample_rate_hz).round() as usize;
    if n == 0 {
        return Err(invalid("duration shorter than one sample"));
    }
    let n_ch = spec.channels.len();
    let smoother = Smoother::new(n, sample_rate_hz);

    let shared: Vec<Vec<f64>> = spec
        .couplings
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let (lo, hi) = oscillator_range(&c.band.def());
            drifting_phase(lo, hi, &mut stream(spec.seed, SHARED_STREAM + k as u64), &smoother)
        })
        .collect();

    let mut out = Array2::<f64>::zeros((n_ch, n));
    for (c, name) in spec.channels.iter().enumerate() {
        let mut row = vec![0.0f64; n];
        for (s, &(band, floor, amp)) in SOURCES.iter().enumerate() {
            // (coupling index, lag applied to this channel, strength)
            let links: Vec<(usize, f64, f64)> = spec
                .couplings
                .iter()
                .enumerate()
                .filter(|(_, k)| source_of(k.band) == s)
                .filter_map(|(k, cp)| {
                    if cp.channel_a == *name {
                        Some((k, 0.0, cp.strength))
                    } else if cp.channel_b == *name {
                        Some((k, cp.phase_lag, cp.strength))
                    } else {
                        None
                    }
                })
                .collect();
            let splits: Vec<(usize, &Split)> = spec
                .splits
                .iter()
                .enumerate()
                .filter(|(_, sp)| sp.channel == *name && source_of(sp.band) == s)
                .collect();
            let total: f64 = links.iter().map(|l| l.2).sum::<f64>() + splits.iter().map(|(_, sp)| sp.strength).sum::<f64>();
            let own_weight = (1.0 - total).max(0.0);
            let norm = if total > 1.0 { 1.0 / total } else { 1.0 };
            if own_weight > 0.0 {
                let def = band.def();
                let ph = drifting_phase(
                    def.f_lo.max(floor),
                    def.f_hi,
                    &mut stream(spec.seed, OWN_STREAM + (c * SOURCES.len() + s) as u64),
                    &smoother,
                );
                let a = amp * own_weight.sqrt();
                row.iter_mut().zip(&ph).for_each(|(r, p)| *r += a * p.cos());
            }
            for (k, lag, strength) in links {
                let a = amp * (strength * norm).sqrt();
                row.iter_mut()
                    .zip(&shared[k])
                    .for_each(|(r, p)| *r += a * (p - lag).cos());
            }
            for (k, sp) in splits {
                let (lo, hi) = oscillator_range(&sp.band.def());
                let ph = drifting_phase(lo, hi, &mut stream(spec.seed, SPLIT_STREAM + k as u64), &smoother);
                let a = amp * (sp.strength * norm).sqrt();
                row.iter_mut().zip(&ph).for_each(|(r, p)| *r += a * p.cos());
            }
        }
        let sigma = spec.noise_amplitude[c];
        if sigma > 0.0 {
            let mut rng = stream(spec.seed, NOISE_STREAM + c as u64);
            for r in row.iter_mut() {
                *r += sigma * rng.sample::<f64, _>(StandardNormal);
            }
        }
        out.row_mut(c).iter_mut().zip(row).for_each(|(o, v)| *o = v);
    }
    EegRecording::new(
        spec.channels.clone(),
        sample_rate_hz,
        out.mapv(|v| v as f32),
        spec.meta,
    )
}
