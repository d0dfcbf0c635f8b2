//! Recordings, electrode layouts, file formats and the synthetic generator.

pub(crate) mod eegb;
pub mod csv_import;
pub mod layout;
pub mod recording;
pub mod synth;

pub use csv_import::{parse_csv_recording, read_csv_recording};
pub use eegb::{decode_recording, encode_recording, read_recording, write_recording, EEGB_MAGIC, EEGB_VERSION};
pub use layout::{Electrode, ElectrodeLayout, Hemisphere, DEAP32_CHANNELS};
pub use recording::{EegRecording, TrialMeta, DEFAULT_SAMPLE_RATE_HZ};
pub use synth::{synthesize, Coupling, CouplingSpec, Split};
