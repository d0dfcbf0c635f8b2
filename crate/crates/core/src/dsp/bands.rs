use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// The ten analysis bands, in canonical tensor-channel order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandName {
    Delta,
    Theta,
    LowAlpha,
    HighAlpha,
    Alpha,
    LowBeta,
    MidBeta,
    HighBeta,
    Beta,
    Gamma,
}

impl BandName {
    pub const ALL: [BandName; 10] = [
        BandName::Delta,
        BandName::Theta,
        BandName::LowAlpha,
        BandName::HighAlpha,
        BandName::Alpha,
        BandName::LowBeta,
        BandName::MidBeta,
        BandName::HighBeta,
        BandName::Beta,
        BandName::Gamma,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BandName::Delta => "delta",
            BandName::Theta => "theta",
            BandName::LowAlpha => "low_alpha",
            BandName::HighAlpha => "high_alpha",
            BandName::Alpha => "alpha",
            BandName::LowBeta => "low_beta",
            BandName::MidBeta => "mid_beta",
            BandName::HighBeta => "high_beta",
            BandName::Beta => "beta",
            BandName::Gamma => "gamma",
        }
    }

    /// Position in the canonical band order.
    pub fn index(self) -> usize {
        BandName::ALL.iter().position(|&b| b == self).unwrap()
    }

    /// The canonical frequency range of this band.
    pub fn def(self) -> BandDef {
        CANONICAL_BANDS[self.index()]
    }
}

impl fmt::Display for BandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BandName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BandName::ALL
            .iter()
            .copied()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown band name {s:?}")))
    }
}

/// A named frequency band `[f_lo, f_hi]` in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandDef {
    pub name: BandName,
    pub f_lo: f64,
    pub f_hi: f64,
}

impl BandDef {
    pub fn new(name: BandName, f_lo: f64, f_hi: f64) -> Result<Self> {
        if !(f_lo >= 0.0 && f_lo < f_hi && f_hi.is_finite()) {
            return Err(invalid(format!(
                "band {name}: need 0 <= f_lo < f_hi, got [{f_lo}, {f_hi}]"
            )));
        }
        Ok(Self { name, f_lo, f_hi })
    }

    pub fn width(&self) -> f64 {
        self.f_hi - self.f_lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.f_lo + self.f_hi)
    }

    pub fn contains(&self, other: &BandDef) -> bool {
        self.f_lo <= other.f_lo && other.f_hi <= self.f_hi
    }
}

const fn band(name: BandName, f_lo: f64, f_hi: f64) -> BandDef {
    BandDef { name, f_lo, f_hi }
}

/// Band table used throughout the pipeline. Note the gap between 9.5 and 10.5 Hz
/// separating the low and high alpha sub-bands.
pub const CANONICAL_BANDS: [BandDef; 10] = [
    band(BandName::Delta, 0.0, 3.0),
    band(BandName::Theta, 4.0, 7.0),
    band(BandName::LowAlpha, 8.0, 9.5),
    band(BandName::HighAlpha, 10.5, 12.0),
    band(BandName::Alpha, 8.0, 12.0),
    band(BandName::LowBeta, 13.0, 16.0),
    band(BandName::MidBeta, 17.0, 20.0),
    band(BandName::HighBeta, 21.0, 29.0),
    band(BandName::Beta, 13.0, 29.0),
    band(BandName::Gamma, 30.0, 50.0),
];

/// Parses a list of band names, preserving the given order.
pub fn parse_bands<S: AsRef<str>>(names: &[S]) -> Result<Vec<BandDef>> {
    let mut out = Vec::with_capacity(names.len());
    for n in names {
        let b: BandName = n.as_ref().parse()?;
        if out.iter().any(|d: &BandDef| d.name == b) {
            return Err(invalid(format!("band {b} listed twice")));
        }
        out.push(b.def());
    }
    if out.is_empty() {
        return Err(invalid("band list is empty"));
    }
    Ok(out)
}
