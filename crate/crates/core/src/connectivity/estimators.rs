//! Pairwise connectivity estimators.
//!
//! Each estimator is exactly symmetric in its arguments: swapping the inputs
//! negates the phase difference bit for bit, and the sums below only depend
//! on `|dphi|` and the sign of `dphi`.

use crate::dsp::hilbert::wrap_phase;
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

fn check_pair<T>(x: &[T], y: &[T], min_len: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(invalid(format!(
            "inputs have different lengths ({} and {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < min_len {
        return Err(invalid(format!(
            "need at least {min_len} samples, got {}",
            x.len()
        )));
    }
    Ok(())
}

/// Pearson correlation with population normalisation, clamped to `[-1, 1]`.
pub fn pcc<T: Real>(x: &[T], y: &[T]) -> Result<T> {
    check_pair(x, y, 2)?;
    let n = T::from_usize(x.len()).unwrap();
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy = sxy + da * db;
        sxx = sxx + da * da;
        syy = syy + db * db;
    }
    if sxx == T::zero() || syy == T::zero() {
        return Err(Error::Signal("correlation undefined for a constant input".into()));
    }
    let r = sxy / (sxx * syy).sqrt();
    Ok(r.max(-T::one()).min(T::one()))
}

/// Phase locking value: magnitude of the mean unit phasor of `phase_x - phase_y`.
///
/// Phasors are summed relative to the first difference, so a constant lag
/// gives exactly 1.
pub fn plv<T: Real>(phase_x: &[T], phase_y: &[T]) -> Result<T> {
    check_pair(phase_x, phase_y, 1)?;
    let d0 = phase_x[0] - phase_y[0];
    let (mut re, mut im) = (T::zero(), T::zero());
    for (&a, &b) in phase_x.iter().zip(phase_y) {
        let d = (a - b) - d0;
        let m = d.abs();
        re = re + m.cos();
        im = if d < T::zero() { im - m.sin() } else { im + m.sin() };
    }
    let n = T::from_usize(phase_x.len()).unwrap();
    Ok((re.hypot(im) / n).min(T::one()))
}

/// Sign of a phase difference after wrapping to `(-pi, pi]`. A difference of
/// exactly `pi` has no lead or lag and counts as 0, like a zero difference.
#[inline]
pub fn phase_lag_sign<T: Real>(d: T) -> i32 {
    let m = wrap_phase(d.abs());
    let s = if m > T::zero() && m < T::PI() {
        1
    } else if m < T::zero() {
        -1
    } else {
        0
    };
    if d < T::zero() {
        -s
    } else {
        s
    }
}

/// Phase lag index: `|mean sign(wrap(phase_x - phase_y))|`.
pub fn pli<T: Real>(phase_x: &[T], phase_y: &[T]) -> Result<T> {
    check_pair(phase_x, phase_y, 1)?;
    let total: i64 = phase_x
        .iter()
        .zip(phase_y)
        .map(|(&a, &b)| phase_lag_sign(a - b) as i64)
        .sum();
    Ok(T::from_i64(total.abs()).unwrap() / T::from_usize(phase_x.len()).unwrap())
}
