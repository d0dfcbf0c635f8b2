//! Band filtering, Welch spectra and analytic-signal phase.

pub mod bands;
pub mod filter;
pub mod hilbert;
pub mod welch;

pub use bands::{parse_bands, BandDef, BandName, CANONICAL_BANDS};
pub use filter::{bandpass, filter_length, BandBank, BandpassFilter};
pub use hilbert::{analytic_signal, instantaneous_phase, wrap_phase, PhaseSeries};
pub use welch::{band_power, welch_psd, welch_window};
