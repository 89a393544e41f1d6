use crate::error::{Error, Result};
use crate::projector::Image;

/// Circular region in pixel coordinates (`x` column, `y` row). Pixels whose
/// centres lie within `radius` belong to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

impl Circle {
    fn pixels<'a>(&self, img: &'a Image) -> impl Iterator<Item = f64> + 'a {
        let c = *self;
        img.data()
            .indexed_iter()
            .filter(move |((i, j), _)| (*j as f64 - c.x).hypot(*i as f64 - c.y) <= c.radius)
            .map(|(_, &v)| v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cnr {
    pub value: f64,
    /// Both regions had zero spread; `value` is then 0.
    pub degenerate: bool,
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `|mean₁ - mean₂| / sqrt(std₁² + std₂²)` with population standard
/// deviations.
pub fn cnr(img: &Image, roi1: Circle, roi2: Circle) -> Result<Cnr> {
    let n = img.n() as f64;
    for (k, roi) in [roi1, roi2].iter().enumerate() {
        if !(roi.radius > 0.0)
            || roi.x - roi.radius < -0.5
            || roi.y - roi.radius < -0.5
            || roi.x + roi.radius > n - 0.5
            || roi.y + roi.radius > n - 0.5
        {
            return Err(Error::Domain(format!("ROI {} does not fit inside the image", k + 1)));
        }
    }
    if (roi1.x - roi2.x).hypot(roi1.y - roi2.y) < roi1.radius + roi2.radius {
        return Err(Error::Domain("ROIs overlap".into()));
    }
    let a: Vec<f64> = roi1.pixels(img).collect();
    let b: Vec<f64> = roi2.pixels(img).collect();
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("ROI contains no pixel centres".into()));
    }
    let (m1, s1) = mean_and_std(&a);
    let (m2, s2) = mean_and_std(&b);
    let spread = (s1 * s1 + s2 * s2).sqrt();
    if spread == 0.0 {
        return Ok(Cnr { value: 0.0, degenerate: true });
    }
    Ok(Cnr { value: (m1 - m2).abs() / spread, degenerate: false })
}

#[cfg(test)]
mod tests {
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    use super::*;

    const LEFT: Circle = Circle { x: 20.0, y: 32.0, radius: 10.0 };
    const RIGHT: Circle = Circle { x: 44.0, y: 32.0, radius: 10.0 };

    #[test]
    fn constant_regions_are_degenerate() {
        let img = Image::new(Array2::from_elem((64, 64), 3.0), 1.0).unwrap();
        assert_eq!(cnr(&img, LEFT, RIGHT).unwrap(), Cnr { value: 0.0, degenerate: true });
    }

    #[test]
    fn two_valued_regions() {
        // Left: half 1s, half 3s (mean 2, std 1). Right: constant 1.
        let img = Image::new(
            Array2::from_shape_fn((64, 64), |(i, j)| if j < 32 { if (i + j) % 2 == 0 { 1.0 } else { 3.0 } } else { 1.0 }),
            1.0,
        )
        .unwrap();
        let left = Circle { x: 15.5, y: 31.5, radius: 10.0 };
        let c = cnr(&img, left, RIGHT).unwrap();
        assert!((c.value - 1.0).abs() < 1e-12, "{}", c.value);
    }

    #[test]
    fn gaussian_noise_matches_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let img = Image::new(
            Array2::from_shape_fn((100, 100), |(_, j)| if j < 50 { 10.0 } else { 5.0 } + normal.sample(&mut rng)),
            1.0,
        )
        .unwrap();
        let a = Circle { x: 24.5, y: 49.5, radius: 18.0 };
        let b = Circle { x: 74.5, y: 49.5, radius: 18.0 };
        let c = cnr(&img, a, b).unwrap();
        let expect = 5.0 / 2f64.sqrt();
        assert!((c.value - expect).abs() < 0.05 * expect, "{}", c.value);
    }

    #[test]
    fn affine_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let img = Image::new(Array2::from_shape_fn((64, 64), |(_, j)| j as f64 * 0.1 + normal.sample(&mut rng)), 1.0).unwrap();
        let base = cnr(&img, LEFT, RIGHT).unwrap().value;
        let mut moved = img.clone();
        moved.data_mut().mapv_inplace(|v| 2.5 * v - 7.0);
        assert!((cnr(&moved, LEFT, RIGHT).unwrap().value - base).abs() < 1e-12 * base);
    }

    #[test]
    fn rejects_bad_regions() {
        let img = Image::zeros(64, 1.0);
        let outside = Circle { x: 5.0, y: 32.0, radius: 10.0 };
        assert!(matches!(cnr(&img, outside, RIGHT), Err(Error::Domain(_))));
        let overlap = Circle { x: 25.0, y: 32.0, radius: 10.0 };
        assert!(matches!(cnr(&img, LEFT, overlap), Err(Error::Domain(_))));
    }
}
