use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// DEAP channel order.
pub const DEAP32_CHANNELS: [&str; 32] = [
    "Fp1", "AF3", "F3", "F7", "FC5", "FC1", "C3", "T7", "CP5", "CP1", "P3", "P7", "PO3", "O1", "Oz",
    "Pz", "Fp2", "AF4", "Fz", "F4", "F8", "FC6", "FC2", "Cz", "C4", "T8", "CP6", "CP2", "P4", "P8",
    "PO4", "O2",
];

const DEAP32_LAYOUT_CSV: &str = include_str!("../../data/deap32_layout.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hemisphere {
    Left,
    Right,
    Midline,
}

impl FromStr for Hemisphere {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Hemisphere::Left),
            "right" => Ok(Hemisphere::Right),
            "midline" => Ok(Hemisphere::Midline),
            other => Err(invalid(format!("unknown hemisphere {other:?}"))),
        }
    }
}

impl fmt::Display for Hemisphere {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hemisphere::Left => "left",
            Hemisphere::Right => "right",
            Hemisphere::Midline => "midline",
        })
    }
}

/// One scalp site in 2-D projected coordinates (nose toward +y, right ear toward +x).
#[derive(Debug, Clone, PartialEq)]
pub struct Electrode {
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub hemisphere: Hemisphere,
}

/// Electrode positions on the unit disc, in a fixed channel order.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodeLayout {
    electrodes: Vec<Electrode>,
}

impl ElectrodeLayout {
    /// The shipped DEAP 32-channel montage.
    pub fn deap32() -> Self {
        let layout = Self::from_csv_str(DEAP32_LAYOUT_CSV).expect("shipped layout is valid");
        layout.require_deap32().expect("shipped layout is complete");
        layout
    }

    /// Parses `name,x,y,hemisphere` rows; `#` lines and the header row are skipped.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut electrodes = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("name,") {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(invalid(format!("layout line {}: expected 4 fields", lineno + 1)));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| invalid(format!("layout line {}: bad number {s:?}", lineno + 1)))
            };
            electrodes.push(Electrode {
                name: f[0].to_string(),
                x: num(f[1])?,
                y: num(f[2])?,
                hemisphere: f[3].parse()?,
            });
        }
        Self::new(electrodes)
    }

    pub fn new(electrodes: Vec<Electrode>) -> Result<Self> {
        for (i, e) in electrodes.iter().enumerate() {
            if electrodes[..i].iter().any(|o| o.name == e.name) {
                return Err(invalid(format!("duplicate electrode {}", e.name)));
            }
            if !(e.x.is_finite() && e.y.is_finite()) || e.x * e.x + e.y * e.y > 1.0 {
                return Err(invalid(format!("electrode {} lies outside the unit disc", e.name)));
            }
            let expected = if e.x == 0.0 {
                Hemisphere::Midline
            } else if e.x < 0.0 {
                Hemisphere::Left
            } else {
                Hemisphere::Right
            };
            if e.hemisphere != expected {
                return Err(invalid(format!(
                    "electrode {} tagged {} but x = {}",
                    e.name, e.hemisphere, e.x
                )));
            }
        }
        Ok(Self { electrodes })
    }

    /// Checks that every DEAP electrode is present.
    pub fn require_deap32(&self) -> Result<()> {
        if self.electrodes.len() != 32 {
            return Err(invalid(format!(
                "layout has {} electrodes, expected 32",
                self.electrodes.len()
            )));
        }
        for name in DEAP32_CHANNELS {
            if self.index_of(name).is_none() {
                return Err(invalid(format!("layout is missing electrode {name}")));
            }
        }
        Ok(())
    }

    pub fn electrodes(&self) -> &[Electrode] {
        &self.electrodes
    }

    pub fn len(&self) -> usize {
        self.electrodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.electrodes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.electrodes.iter().position(|e| e.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&Electrode> {
        self.electrodes.iter().find(|e| e.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.electrodes.iter().map(|e| e.name.clone()).collect()
    }

    /// Maps each layout electrode to its row in `channel_names`.
    pub fn channel_map(&self, channel_names: &[String]) -> Result<Vec<usize>> {
        self.electrodes
            .iter()
            .map(|e| {
                channel_names
                    .iter()
                    .position(|c| *c == e.name)
                    .ok_or_else(|| invalid(format!("recording has no channel {}", e.name)))
            })
            .collect()
    }
}
