use ndarray::{s, ArrayView2};

use crate::error::{invalid, Result};
use crate::io::recording::EegRecording;

pub const WINDOW_S: f64 = 3.0;
pub const HOP_S: f64 = 0.5;

/// Window and hop lengths in samples: `round(win_s * rate)`, `round(hop_s * rate)`.
pub fn window_and_hop(rate_hz: f64, win_s: f64, hop_s: f64) -> Result<(usize, usize)> {
    let win = (win_s * rate_hz).round();
    let hop = (hop_s * rate_hz).round();
    if !(win >= 1.0 && hop >= 1.0 && win.is_finite() && hop.is_finite()) {
        return Err(invalid(format!(
            "window {win_s} s / hop {hop_s} s at {rate_hz} Hz is less than one sample"
        )));
    }
    Ok((win as usize, hop as usize))
}

/// `[start, end)` sample ranges of every full window, in temporal order.
/// There are `floor((n - win) / hop) + 1` of them.
pub fn segment_bounds(n: usize, win: usize, hop: usize) -> Result<Vec<(usize, usize)>> {
    if win == 0 || hop == 0 {
        return Err(invalid("window and hop must be positive"));
    }
    if n < win {
        return Err(invalid(format!(
            "recording has {n} samples, shorter than one {win}-sample window"
        )));
    }
    Ok((0..=(n - win) / hop).map(|k| (k * hop, k * hop + win)).collect())
}

/// One window of a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment<'a> {
    pub trial: usize,
    pub window: usize,
    pub start: usize,
    pub samples: ArrayView2<'a, f32>,
    pub label: u8,
}

/// Cuts a recording into overlapping windows that inherit its valence label.
pub fn segment(rec: &EegRecording, trial: usize, win_s: f64, hop_s: f64) -> Result<Vec<Segment<'_>>> {
    let (win, hop) = window_and_hop(rec.sample_rate_hz(), win_s, hop_s)?;
    let label = binarize_valence(rec.meta().valence_score)?;
    let data = rec.samples();
    Ok(segment_bounds(rec.n_samples(), win, hop)?
        .into_iter()
        .enumerate()
        .map(|(window, (a, b))| Segment {
            trial,
            window,
            start: a,
            samples: data.slice_move(s![.., a..b]),
            label,
        })
        .collect())
}

/// Valence 1-5 is low (0), above 5 is high (1).
pub fn binarize_valence(score: f64) -> Result<u8> {
    if !(1.0..=9.0).contains(&score) {
        return Err(invalid(format!("valence score {score} outside [1, 9]")));
    }
    Ok(u8::from(score > 5.0))
}

/// Fraction of matching entries.
pub fn accuracy<L: PartialEq>(predictions: &[L], labels: &[L]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(invalid(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(invalid("accuracy of an empty set"));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::recording::TrialMeta;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn rec(n: usize) -> EegRecording {
        let names = (0..2).map(|i| format!("c{i}")).collect();
        EegRecording::new(names, 128.0, Array2::zeros((2, n)), TrialMeta { valence_score: 7.0, ..TrialMeta::default() })
            .unwrap()
    }

    #[test]
    fn sixty_seconds_gives_115_windows() {
        let r = rec(7680);
        let segs = segment(&r, 0, WINDOW_S, HOP_S).unwrap();
        assert_eq!(segs.len(), 115);
        assert_eq!(segs[1].start, 64);
        assert_eq!(segs[114].start + 384, 7680);
        assert!(segs.iter().all(|s| s.samples.ncols() == 384 && s.label == 1));
    }

    #[test]
    fn boundary_lengths() {
        assert_eq!(segment(&rec(384), 0, 3.0, 0.5).unwrap().len(), 1);
        assert!(segment(&rec(383), 0, 3.0, 0.5).is_err());
    }

    #[test]
    fn valence_threshold() {
        assert_eq!(binarize_valence(5.0).unwrap(), 0);
        assert_eq!(binarize_valence(5.01).unwrap(), 1);
        assert_eq!(binarize_valence(9.0).unwrap(), 1);
        assert_eq!(binarize_valence(1.0).unwrap(), 0);
        assert!(binarize_valence(0.5).is_err());
        assert!(binarize_valence(9.5).is_err());
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, 0, 1], &[1, 0, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 1, 0, 0], &[1, 0, 1, 0]).unwrap(), 0.5);
        assert_eq!(accuracy(&[0, 0], &[1, 1]).unwrap(), 0.0);
        assert!(accuracy::<u8>(&[], &[]).is_err());
    }

    proptest! {
        #[test]
        fn count_formula(n in 1usize..5000, win in 1usize..600, hop in 1usize..200) {
            let r = segment_bounds(n, win, hop);
            if n < win {
                prop_assert!(r.is_err());
            } else {
                let b = r.unwrap();
                prop_assert_eq!(b.len(), (n - win) / hop + 1);
                prop_assert!(b.iter().all(|&(a, e)| e - a == win && e <= n));
                prop_assert!(b.windows(2).all(|w| w[1].0 == w[0].0 + hop));
            }
        }
    }
}
