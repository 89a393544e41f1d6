use crate::projector::Image;

use super::gaussian_smooth;

/// Radial smoothing applied to the angular-mean profile, pixels.
const TREND_SIGMA: f64 = 3.0;

/// Strength of concentric structure about the image centre.
///
/// The image is resampled on a polar grid (unit radial step, bilinear). The
/// score is the mean over radii of `|A(r) - T(r)|`, where `A` is the angular
/// mean and `T` its Gaussian-smoothed radial trend, divided by the standard
/// deviation of the whole image. A constant image scores 0.
pub fn ring_score(img: &Image) -> f64 {
    let n = img.n();
    let data = img.data();
    let mean = data.iter().sum::<f64>() / (n * n) as f64;
    let std = (data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n * n) as f64).sqrt();
    if std == 0.0 {
        return 0.0;
    }
    let c = (n as f64 - 1.0) / 2.0;
    let sample = |x: f64, y: f64| -> f64 {
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let (j, i) = (x0 as usize, y0 as usize);
        let at = |i: usize, j: usize| data[[i.min(n - 1), j.min(n - 1)]];
        (1.0 - fy) * ((1.0 - fx) * at(i, j) + fx * at(i, j + 1)) + fy * ((1.0 - fx) * at(i + 1, j) + fx * at(i + 1, j + 1))
    };
    let r_max = c.floor() as usize;
    let profile: Vec<f64> = (1..=r_max)
        .map(|r| {
            let r = r as f64;
            let n_phi = ((4.0 * std::f64::consts::PI * r).ceil() as usize).max(16);
            (0..n_phi)
                .map(|k| {
                    let phi = std::f64::consts::TAU * k as f64 / n_phi as f64;
                    sample(c + r * phi.cos(), c + r * phi.sin())
                })
                .sum::<f64>()
                / n_phi as f64
        })
        .collect();
    let trend = gaussian_smooth(&profile, TREND_SIGMA);
    let residue = profile.iter().zip(&trend).map(|(p, t)| (p - t).abs()).sum::<f64>() / profile.len() as f64;
    residue / std
}

#[cfg(test)]
mod tests {
    use ndarray::Array2;

    use super::*;

    fn with_rings(amplitude: f64) -> Image {
        let n = 96;
        let c = (n as f64 - 1.0) / 2.0;
        Image::new(
            Array2::from_shape_fn((n, n), |(i, j)| {
                let r = (i as f64 - c).hypot(j as f64 - c);
                let blob = (-((i as f64 - 30.0).powi(2) + (j as f64 - 60.0).powi(2)) / 200.0).exp();
                let ring: f64 = [12.0, 23.0, 31.0, 40.0].iter().map(|&r0| (-((r - r0) / 0.7).powi(2)).exp()).sum();
                blob + amplitude * ring
            }),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn constant_image_scores_zero() {
        assert_eq!(ring_score(&Image::new(Array2::from_elem((32, 32), 4.0), 1.0).unwrap()), 0.0);
    }

    #[test]
    fn stronger_rings_score_higher() {
        let scores: Vec<f64> = [0.0, 0.05, 0.1, 0.2].iter().map(|&a| ring_score(&with_rings(a))).collect();
        assert!(scores.windows(2).all(|w| w[1] > w[0]), "{scores:?}");
    }
}
