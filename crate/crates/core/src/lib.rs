pub mod connectivity;
pub mod dsp;
pub mod error;
pub mod experiment;
pub mod io;
pub mod nn;
pub mod scalar;
pub mod topomap;

pub use error::{Error, Result};
pub use scalar::Real;
