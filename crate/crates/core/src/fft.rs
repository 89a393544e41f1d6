//! 1-D Fourier filtering of real rows with mirror or zero padding.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Filters rows of length `n` inside a padded buffer.
pub(crate) struct RowFilter {
    n: usize,
    /// Mirror width on each side; 0 for zero padding.
    pad: usize,
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl RowFilter {
    /// Rows reflected by `pad` samples on each side.
    pub(crate) fn mirror(n: usize, pad: usize) -> Result<Self> {
        if pad > n {
            return Err(Error::Domain(format!("padding {pad} exceeds row length {n}")));
        }
        Ok(Self::with_len(n, pad, n + 2 * pad))
    }

    /// Rows followed by zeros up to `len` samples.
    pub(crate) fn zero(n: usize, len: usize) -> Result<Self> {
        if len < n {
            return Err(Error::Domain(format!("padded length {len} below row length {n}")));
        }
        Ok(Self::with_len(n, 0, len))
    }

    fn with_len(n: usize, pad: usize, len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, pad, len, forward: planner.plan_fft_forward(len), inverse: planner.plan_fft_inverse(len) }
    }

    pub(crate) fn padded_len(&self) -> usize {
        self.len
    }

    /// Signed frequency index of FFT bin `k`.
    pub(crate) fn frequency_index(&self, k: usize) -> f64 {
        let len = self.padded_len();
        if k <= len / 2 {
            k as f64
        } else {
            k as f64 - len as f64
        }
    }

    /// Multiplies the spectrum by `response[k]` and returns the real part of
    /// the central `n` samples.
    pub(crate) fn apply(&self, row: &[f64], response: &[Complex64]) -> Vec<f64> {
        debug_assert_eq!(row.len(), self.n);
        let len = self.padded_len();
        let mut buf: Vec<Complex64> = Vec::with_capacity(len);
        buf.extend((0..self.pad).map(|i| Complex64::new(row[self.pad - 1 - i], 0.0)));
        buf.extend(row.iter().map(|&v| Complex64::new(v, 0.0)));
        buf.extend((0..self.pad).map(|i| Complex64::new(row[self.n - 1 - i], 0.0)));
        buf.resize(len, Complex64::new(0.0, 0.0));
        self.forward.process(&mut buf);
        buf.iter_mut().zip(response).for_each(|(b, r)| *b *= r);
        self.inverse.process(&mut buf);
        let scale = 1.0 / len as f64;
        buf[self.pad..self.pad + self.n].iter().map(|c| c.re * scale).collect()
    }

    pub(crate) fn spectrum(&self, signal: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        debug_assert_eq!(buf.len(), self.padded_len());
        self.forward.process(&mut buf);
        buf
    }
}

/// 2-D forward FFT of a square real image, row-major.
pub(crate) fn fft2(values: &[f64], n: usize) -> Vec<Complex64> {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    for row in buf.chunks_mut(n) {
        fft.process(row);
    }
    let mut column = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            column[i] = buf[i * n + j];
        }
        fft.process(&mut column);
        for i in 0..n {
            buf[i * n + j] = column[i];
        }
    }
    buf
}
