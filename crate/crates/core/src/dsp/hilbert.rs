//! Analytic signal and instantaneous phase.

use ndarray::{Array2, ArrayView2, Axis};
use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Analytic signal `x + j H{x}` via the frequency-domain Hilbert transformer:
/// positive frequencies doubled, negative frequencies zeroed, DC and Nyquist kept.
pub fn analytic_signal<T: Real>(x: &[T]) -> Vec<Complex<T>> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let two = T::lit(2.0);
    let half = n / 2;
    for (k, b) in buf.iter_mut().enumerate() {
        let h = if k == 0 || (n % 2 == 0 && k == half) {
            T::one()
        } else if k < n.div_ceil(2) {
            two
        } else {
            T::zero()
        };
        *b = *b * h;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = T::one() / T::from_usize(n).unwrap();
    buf.into_iter().map(|c| c * scale).collect()
}

/// Wraps an angle into `(-pi, pi]`.
#[inline]
pub fn wrap_phase<T: Real>(a: T) -> T {
    let pi = T::PI();
    let two_pi = pi + pi;
    let mut w = a;
    if w > pi || w <= -pi {
        w = w - two_pi * ((w + pi) / two_pi).floor();
        // (w + pi) mod 2pi lands in [0, 2pi); shift the closed end to +pi
        if w <= -pi {
            w = w + two_pi;
        }
        if w > pi {
            w = w - two_pi;
        }
    }
    w
}

/// Per-channel instantaneous phase `[channels x samples]`, radians in `(-pi, pi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSeries<T> {
    phases: Array2<T>,
}

impl<T: Real> PhaseSeries<T> {
    pub fn view(&self) -> ArrayView2<'_, T> {
        self.phases.view()
    }

    pub fn into_inner(self) -> Array2<T> {
        self.phases
    }

    pub fn n_channels(&self) -> usize {
        self.phases.nrows()
    }

    pub fn len(&self) -> usize {
        self.phases.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.ncols() == 0
    }
}

/// Phase of the analytic signal for every channel of a band-limited signal.
pub fn instantaneous_phase<T: Real>(band_signal: ArrayView2<'_, T>) -> Result<PhaseSeries<T>> {
    let (n_ch, n) = band_signal.dim();
    let mut phases = Array2::zeros((n_ch, n));
    let mut row = vec![T::zero(); n];
    for (c, channel) in band_signal.axis_iter(Axis(0)).enumerate() {
        if channel.iter().all(|&v| v == T::zero()) {
            return Err(Error::Signal(format!(
                "channel {c} is identically zero; phase is undefined"
            )));
        }
        row.iter_mut().zip(channel.iter()).for_each(|(r, &v)| *r = v);
        let z = analytic_signal(&row);
        let pi = T::PI();
        for (p, zc) in phases.row_mut(c).iter_mut().zip(&z) {
            let a = zc.im.atan2(zc.re);
            if !a.is_finite() {
                return Err(Error::NonFinite(format!("phase of channel {c}")));
            }
            // atan2 may return -pi for a negative real axis with -0 imaginary part
            *p = if a <= -pi { pi } else { a };
        }
    }
    Ok(PhaseSeries { phases })
}
