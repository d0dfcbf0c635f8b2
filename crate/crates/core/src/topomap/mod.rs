//! Scalp topographies: per-electrode values rendered onto a 32x32 grid.
//!
//! Grid orientation is nose up: row 0 is the front of the head, column 0 the
//! left ear. Cell `(row, col)` has centre `x = -1 + 2 col / 31`,
//! `y = 1 - 2 row / 31`, so the grid spans the unit disc edge to edge.

use ndarray::{Array2, Array3, ArrayView2};

use crate::dsp::bands::BandDef;
use crate::dsp::welch::{band_power, welch_psd};
use crate::error::{invalid, Result};
use crate::io::layout::ElectrodeLayout;
use crate::scalar::Real;

pub const GRID: usize = 32;

/// Number of nearest electrodes blended into a non-electrode cell.
pub const IDW_NEIGHBOURS: usize = 4;

fn coord_to_index(v: f64) -> usize {
    (((v + 1.0) * (GRID as f64 - 1.0) / 2.0).round() as usize).min(GRID - 1)
}

/// Centre of a grid cell in head coordinates.
pub fn cell_center(row: usize, col: usize) -> (f64, f64) {
    let s = 2.0 / (GRID as f64 - 1.0);
    (-1.0 + s * col as f64, 1.0 - s * row as f64)
}

/// Grid cell `(row, col)` of every electrode, in layout order.
pub fn electrode_to_grid(layout: &ElectrodeLayout) -> Result<Vec<(usize, usize)>> {
    let mut cells: Vec<(usize, usize)> = Vec::with_capacity(layout.len());
    for e in layout.electrodes() {
        let cell = (coord_to_index(-e.y), coord_to_index(e.x));
        if let Some(k) = cells.iter().position(|&c| c == cell) {
            return Err(invalid(format!(
                "electrodes {} and {} share grid cell {cell:?}",
                layout.electrodes()[k].name,
                e.name
            )));
        }
        cells.push(cell);
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq)]
enum Cell {
    Electrode(usize),
    Blend(Vec<(usize, f64)>),
    Outside,
}

/// Precomputed interpolation weights for one layout.
#[derive(Debug, Clone, PartialEq)]
pub struct TopoInterpolator {
    n_electrodes: usize,
    electrode_cells: Vec<(usize, usize)>,
    cells: Vec<Cell>,
}

impl TopoInterpolator {
    pub fn new(layout: &ElectrodeLayout) -> Result<Self> {
        if layout.len() < IDW_NEIGHBOURS {
            return Err(invalid(format!(
                "need at least {IDW_NEIGHBOURS} electrodes, layout has {}",
                layout.len()
            )));
        }
        let electrode_cells = electrode_to_grid(layout)?;
        let es = layout.electrodes();
        let mut cells = Vec::with_capacity(GRID * GRID);
        for row in 0..GRID {
            for col in 0..GRID {
                if let Some(k) = electrode_cells.iter().position(|&c| c == (row, col)) {
                    cells.push(Cell::Electrode(k));
                    continue;
                }
                let (x, y) = cell_center(row, col);
                if x * x + y * y > 1.0 {
                    cells.push(Cell::Outside);
                    continue;
                }
                let mut d2: Vec<(f64, usize)> = es
                    .iter()
                    .enumerate()
                    .map(|(k, e)| ((e.x - x).powi(2) + (e.y - y).powi(2), k))
                    .collect();
                d2.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let near = &d2[..IDW_NEIGHBOURS];
                let blend = if near[0].0 == 0.0 {
                    vec![(near[0].1, 1.0)]
                } else {
                    let total: f64 = near.iter().map(|(d, _)| 1.0 / d).sum();
                    near.iter().map(|&(d, k)| (k, 1.0 / d / total)).collect()
                };
                cells.push(Cell::Blend(blend));
            }
        }
        Ok(Self {
            n_electrodes: layout.len(),
            electrode_cells,
            cells,
        })
    }

    pub fn electrode_cells(&self) -> &[(usize, usize)] {
        &self.electrode_cells
    }

    /// Whether the cell centre lies on the scalp disc (electrode cells always do).
    pub fn is_inside(&self, row: usize, col: usize) -> bool {
        !matches!(self.cells[row * GRID + col], Cell::Outside)
    }

    /// Electrodes contributing to a cell, in ascending layout index.
    pub fn neighbours(&self, row: usize, col: usize) -> Vec<usize> {
        let mut v: Vec<usize> = match &self.cells[row * GRID + col] {
            Cell::Electrode(k) => vec![*k],
            Cell::Blend(w) => w.iter().map(|&(k, _)| k).collect(),
            Cell::Outside => Vec::new(),
        };
        v.sort_unstable();
        v
    }

    /// Renders per-electrode values (layout order) into a grid.
    pub fn render<T: Real>(&self, values: &[T]) -> Result<Array2<T>> {
        let mut out = Array2::zeros((GRID, GRID));
        self.render_into(values, out.view_mut().into_slice().unwrap())?;
        Ok(out)
    }

    /// Writes the grid row-major into `out` (length `GRID * GRID`).
    pub fn render_into<T: Real>(&self, values: &[T], out: &mut [T]) -> Result<()> {
        if values.len() != self.n_electrodes {
            return Err(invalid(format!(
                "{} values for {} electrodes",
                values.len(),
                self.n_electrodes
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("value for electrode {k} is not finite")));
        }
        for (o, cell) in out.iter_mut().zip(&self.cells) {
            *o = match cell {
                Cell::Electrode(k) => values[*k],
                Cell::Blend(w) => w
                    .iter()
                    .fold(T::zero(), |acc, &(k, wk)| acc + T::lit(wk) * values[k]),
                Cell::Outside => T::zero(),
            };
        }
        Ok(())
    }
}

/// One band's topography.
#[derive(Debug, Clone, PartialEq)]
pub struct Topography<T> {
    pub band: BandDef,
    pub grid: Array2<T>,
    pub electrode_cells: Vec<(usize, usize)>,
}

pub fn render_topography<T: Real>(values: &[T], layout: &ElectrodeLayout, band: BandDef) -> Result<Topography<T>> {
    let interp = TopoInterpolator::new(layout)?;
    Ok(Topography {
        band,
        grid: interp.render(values)?,
        electrode_cells: interp.electrode_cells().to_vec(),
    })
}

/// Band power of every channel of `segment` for each band, `[bands x channels]`.
pub fn band_powers<T: Real>(segment: ArrayView2<'_, T>, rate_hz: f64, bands: &[BandDef]) -> Result<Array2<T>> {
    let mut out = Array2::zeros((bands.len(), segment.nrows()));
    for (c, row) in segment.rows().into_iter().enumerate() {
        let psd = welch_psd(&row.to_vec(), rate_hz)?;
        for (b, band) in bands.iter().enumerate() {
            out[[b, c]] = band_power(&psd, band, rate_hz)?;
        }
    }
    Ok(out)
}

/// PSD topographies of one segment stacked as `(32, 32, bands)`. Rows of
/// `segment` follow `channel_names`, which must cover the layout.
pub fn psd_tensor<T: Real>(
    segment: ArrayView2<'_, T>,
    channel_names: &[String],
    rate_hz: f64,
    interp: &TopoInterpolator,
    layout: &ElectrodeLayout,
    bands: &[BandDef],
) -> Result<Array3<T>> {
    if segment.nrows() != 32 {
        return Err(invalid(format!("PSD tensor needs 32 channels, got {}", segment.nrows())));
    }
    let map = layout.channel_map(channel_names)?;
    let powers = band_powers(segment, rate_hz, bands)?;
    let mut out = Array3::zeros((GRID, GRID, bands.len()));
    let mut grid = vec![T::zero(); GRID * GRID];
    let mut values = vec![T::zero(); map.len()];
    for b in 0..bands.len() {
        values.iter_mut().zip(&map).for_each(|(v, &c)| *v = powers[[b, c]]);
        interp.render_into(&values, &mut grid)?;
        for (i, &g) in grid.iter().enumerate() {
            out[[i / GRID, i % GRID, b]] = g;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::bands::{BandName, CANONICAL_BANDS};
    use crate::io::layout::DEAP32_CHANNELS;

    fn layout() -> ElectrodeLayout {
        ElectrodeLayout::deap32()
    }

    #[test]
    fn centre_and_extremes() {
        let l = layout();
        let cells = electrode_to_grid(&l).unwrap();
        let cz = cells[l.index_of("Cz").unwrap()];
        assert!((15..=16).contains(&cz.0) && (15..=16).contains(&cz.1), "{cz:?}");
        let leftmost = l
            .electrodes()
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.x.total_cmp(&b.1.x))
            .unwrap()
            .0;
        let min_col = cells.iter().map(|c| c.1).min().unwrap();
        assert_eq!(cells[leftmost].1, min_col);
        let mut uniq = cells.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 32);
    }

    #[test]
    fn collision_is_a_layout_error() {
        let l = ElectrodeLayout::from_csv_str("a,0.1,0.1,right\nb,0.11,0.1,right\nc,-0.5,0,left\nd,0,0,midline\n").unwrap();
        assert!(electrode_to_grid(&l).is_err());
    }

    #[test]
    fn constant_values_fill_the_disc() {
        let t = render_topography(&[7.0f64; 32], &layout(), BandName::Alpha.def()).unwrap();
        let interp = TopoInterpolator::new(&layout()).unwrap();
        for r in 0..GRID {
            for c in 0..GRID {
                let v = t.grid[[r, c]];
                if interp.is_inside(r, c) {
                    assert!((v - 7.0).abs() < 1e-12, "{v} at {r},{c}");
                } else {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn electrode_cells_are_exact_and_render_is_linear() {
        let l = layout();
        let interp = TopoInterpolator::new(&l).unwrap();
        let v: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let w: Vec<f64> = (0..32).map(|i| (i as f64 * 1.1).cos()).collect();
        let gv = interp.render(&v).unwrap();
        for (k, &(r, c)) in interp.electrode_cells().iter().enumerate() {
            assert_eq!(gv[[r, c]], v[k]);
        }
        let (a, b) = (2.5, -0.75);
        let mix: Vec<f64> = v.iter().zip(&w).map(|(x, y)| a * x + b * y).collect();
        let gm = interp.render(&mix).unwrap();
        let gw = interp.render(&w).unwrap();
        for ((m, x), y) in gm.iter().zip(gv.iter()).zip(gw.iter()) {
            assert!((m - (a * x + b * y)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_segment_gives_zero_tensor() {
        let l = layout();
        let interp = TopoInterpolator::new(&l).unwrap();
        let names: Vec<String> = DEAP32_CHANNELS.iter().map(|s| s.to_string()).collect();
        let seg = Array2::<f64>::zeros((32, 384));
        let t = psd_tensor(seg.view(), &names, 128.0, &interp, &l, &CANONICAL_BANDS).unwrap();
        assert_eq!(t.dim(), (32, 32, 10));
        assert!(t.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn alpha_line_dominates_gamma() {
        let l = layout();
        let interp = TopoInterpolator::new(&l).unwrap();
        let names: Vec<String> = DEAP32_CHANNELS.iter().map(|s| s.to_string()).collect();
        let seg = Array2::from_shape_fn((32, 384), |(_, i)| (2.0 * std::f64::consts::PI * 10.0 * i as f64 / 128.0).sin());
        let t = psd_tensor(seg.view(), &names, 128.0, &interp, &l, &CANONICAL_BANDS).unwrap();
        let mean = |k: usize| t.index_axis(ndarray::Axis(2), k).mean().unwrap();
        let alpha = mean(BandName::Alpha.index());
        let gamma = mean(BandName::Gamma.index());
        assert!(alpha > 10.0 * gamma, "{alpha} vs {gamma}");
    }

    #[test]
    fn wrong_value_count_rejected() {
        let interp = TopoInterpolator::new(&layout()).unwrap();
        assert!(interp.render(&[1.0f64; 31]).is_err());
        assert!(interp.render(&[f64::NAN; 32]).is_err());
    }
}
