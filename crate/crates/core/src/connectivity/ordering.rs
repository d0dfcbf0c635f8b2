//! Electrode orderings that decide which electrodes sit next to each other in
//! a connectivity matrix.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::io::layout::{ElectrodeLayout, Hemisphere};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OrderingMethod {
    /// Greedy nearest-neighbour walk through the left hemisphere from Fp1, then
    /// the right hemisphere from Fp2, then the midline front to back.
    Dist1,
    /// Greedy nearest-neighbour walk over all electrodes from Fp1.
    Dist2,
    /// Seeded uniform permutation.
    Random(u64),
}

impl OrderingMethod {
    /// Code used in the feature-tensor file.
    pub fn code(self) -> u8 {
        match self {
            OrderingMethod::Dist1 => 1,
            OrderingMethod::Dist2 => 2,
            OrderingMethod::Random(_) => 3,
        }
    }
}

impl fmt::Display for OrderingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrderingMethod::Dist1 => f.write_str("dist1"),
            OrderingMethod::Dist2 => f.write_str("dist2"),
            OrderingMethod::Random(s) => write!(f, "random:{s}"),
        }
    }
}

impl FromStr for OrderingMethod {
    type Err = Error;

    /// Accepts `dist1`, `dist2` and `random:<seed>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dist1" => Ok(OrderingMethod::Dist1),
            "dist2" => Ok(OrderingMethod::Dist2),
            _ => s
                .strip_prefix("random:")
                .and_then(|seed| seed.parse().ok())
                .map(OrderingMethod::Random)
                .ok_or_else(|| {
                    invalid(format!(
                        "unknown ordering {s:?}, expected dist1, dist2 or random:<seed>"
                    ))
                }),
        }
    }
}

impl Serialize for OrderingMethod {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OrderingMethod {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Matrix index to electrode name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElectrodeOrdering {
    method: OrderingMethod,
    names: Vec<String>,
}

impl ElectrodeOrdering {
    pub fn method(&self) -> OrderingMethod {
        self.method
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Row of `channel_names` for each matrix index.
    pub fn channel_indices(&self, channel_names: &[String]) -> Result<Vec<usize>> {
        self.names
            .iter()
            .map(|n| {
                channel_names
                    .iter()
                    .position(|c| c == n)
                    .ok_or_else(|| invalid(format!("no channel named {n}")))
            })
            .collect()
    }

    /// `p[i]` is the index in `other` of this ordering's i-th electrode, so that
    /// `M_self[i][j] == M_other[p[i]][p[j]]`.
    pub fn relative_to(&self, other: &ElectrodeOrdering) -> Result<Vec<usize>> {
        self.channel_indices(&other.names)
    }
}

/// Greedy nearest unvisited neighbour. Ties go to the more posterior electrode
/// (smaller y), then to the lower layout index.
fn greedy_walk(layout: &ElectrodeLayout, start: usize, pool: &[usize]) -> Vec<usize> {
    let e = layout.electrodes();
    let mut left: Vec<usize> = pool.iter().copied().filter(|&i| i != start).collect();
    let mut path = vec![start];
    let mut cur = start;
    while !left.is_empty() {
        let d2 = |i: usize| (e[i].x - e[cur].x).powi(2) + (e[i].y - e[cur].y).powi(2);
        let (pos, _) = left
            .iter()
            .enumerate()
            .min_by(|(_, &a), (_, &b)| {
                d2(a)
                    .total_cmp(&d2(b))
                    .then(e[a].y.total_cmp(&e[b].y))
                    .then(a.cmp(&b))
            })
            .unwrap();
        cur = left.remove(pos);
        path.push(cur);
    }
    path
}

pub fn build_ordering(method: OrderingMethod, layout: &ElectrodeLayout) -> Result<ElectrodeOrdering> {
    layout.require_deap32()?;
    let idx = |name: &str| layout.index_of(name).unwrap();
    let e = layout.electrodes();
    let side = |h: Hemisphere| -> Vec<usize> { (0..e.len()).filter(|&i| e[i].hemisphere == h).collect() };
    let order: Vec<usize> = match method {
        OrderingMethod::Dist1 => {
            let mut o = greedy_walk(layout, idx("Fp1"), &side(Hemisphere::Left));
            o.extend(greedy_walk(layout, idx("Fp2"), &side(Hemisphere::Right)));
            let mut mid = side(Hemisphere::Midline);
            mid.sort_by(|&a, &b| e[b].y.total_cmp(&e[a].y).then(a.cmp(&b)));
            o.extend(mid);
            o
        }
        OrderingMethod::Dist2 => {
            let all: Vec<usize> = (0..e.len()).collect();
            greedy_walk(layout, idx("Fp1"), &all)
        }
        OrderingMethod::Random(seed) => {
            let mut o: Vec<usize> = (0..e.len()).collect();
            o.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            o
        }
    };
    Ok(ElectrodeOrdering {
        method,
        names: order.into_iter().map(|i| e[i].name.clone()).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellClass {
    Within,
    Between,
    Midline,
}

/// Classifies every matrix cell by the hemispheres of its two electrodes.
pub fn hemisphere_mask(ordering: &ElectrodeOrdering, layout: &ElectrodeLayout) -> Result<Vec<Vec<CellClass>>> {
    let hemi: Vec<Hemisphere> = ordering
        .names()
        .iter()
        .map(|n| {
            layout
                .get(n)
                .map(|e| e.hemisphere)
                .ok_or_else(|| invalid(format!("layout has no electrode {n}")))
        })
        .collect::<Result<_>>()?;
    Ok(hemi
        .iter()
        .map(|&a| {
            hemi.iter()
                .map(|&b| match (a, b) {
                    (Hemisphere::Midline, _) | (_, Hemisphere::Midline) => CellClass::Midline,
                    _ if a == b => CellClass::Within,
                    _ => CellClass::Between,
                })
                .collect()
        })
        .collect())
}

/// Number of 3x3 windows (stride 1, no padding) holding at least one
/// within-hemisphere and one between-hemisphere cell.
pub fn mixed_window_count(mask: &[Vec<CellClass>]) -> usize {
    let n = mask.len();
    if n < 3 {
        return 0;
    }
    let mut count = 0;
    for r in 0..n - 2 {
        for c in 0..n - 2 {
            let cells = (r..r + 3).flat_map(|i| (c..c + 3).map(move |j| (i, j)));
            let (mut within, mut between) = (false, false);
            for (i, j) in cells {
                within |= mask[i][j] == CellClass::Within;
                between |= mask[i][j] == CellClass::Between;
            }
            count += (within && between) as usize;
        }
    }
    count
}
