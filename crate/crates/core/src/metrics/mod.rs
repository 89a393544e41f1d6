//! Image-quality metrics: Fourier ring correlation, contrast-to-noise ratio
//! and a ring-artifact score.

mod cnr;
mod frc;
mod rings;

pub use cnr::{cnr, Circle, Cnr};
pub use frc::{central_crop, frc, resolution_from_frc, FrcCurve, Resolution};
pub use rings::ring_score;

/// Gaussian smoothing with weights renormalised at the ends.
pub(crate) fn gaussian_smooth(values: &[f64], sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return values.to_vec();
    }
    let reach = (4.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-reach..=reach).map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let n = values.len() as isize;
    (0..n)
        .map(|i| {
            let (mut acc, mut norm) = (0.0, 0.0);
            for (k, w) in kernel.iter().enumerate() {
                let j = i + k as isize - reach;
                if (0..n).contains(&j) {
                    acc += w * values[j as usize];
                    norm += w;
                }
            }
            acc / norm
        })
        .collect()
}
