use crate::error::{Error, Result};
use crate::fft::fft2;
use crate::projector::Image;

use super::gaussian_smooth;

/// Correlation per frequency ring of width one bin.
#[derive(Debug, Clone, PartialEq)]
pub struct FrcCurve {
    /// Ring centre frequencies, cycles per pixel.
    pub frequencies: Vec<f64>,
    /// Correlation before smoothing.
    pub raw: Vec<f64>,
    /// Smoothed correlation.
    pub values: Vec<f64>,
    /// Fourier samples per ring.
    pub counts: Vec<usize>,
    /// µm.
    pub pixel_size: f64,
}

impl FrcCurve {
    /// Curve from given samples, unsmoothed.
    pub fn new(frequencies: Vec<f64>, values: Vec<f64>, pixel_size: f64) -> Result<Self> {
        if frequencies.len() != values.len() || frequencies.len() < 2 {
            return Err(Error::Shape("need matching frequencies and values, at least 2".into()));
        }
        let counts = vec![0; values.len()];
        Ok(Self { frequencies, raw: values.clone(), values, counts, pixel_size })
    }
}

/// Fourier ring correlation `Re Σ F₁F₂* / sqrt(Σ|F₁|² Σ|F₂|²)` per ring.
pub fn frc(a: &Image, b: &Image, sigma_bins: f64) -> Result<FrcCurve> {
    if a.n() != b.n() {
        return Err(Error::Shape(format!("images are {0}x{0} and {1}x{1}", a.n(), b.n())));
    }
    if a.data().iter().all(|&v| v == 0.0) || b.data().iter().all(|&v| v == 0.0) {
        return Err(Error::Domain("FRC of an all-zero image is undefined".into()));
    }
    if !(sigma_bins >= 0.0) {
        return Err(Error::Domain(format!("smoothing sigma must be >= 0, got {sigma_bins}")));
    }
    let n = a.n();
    let fa = fft2(a.as_slice(), n);
    let fb = fft2(b.as_slice(), n);
    let n_bins = n / 2 + 1;
    let mut num = vec![0.0; n_bins];
    let mut da = vec![0.0; n_bins];
    let mut db = vec![0.0; n_bins];
    let mut counts = vec![0usize; n_bins];
    let signed = |k: usize| if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    for i in 0..n {
        for j in 0..n {
            let bin = signed(i).hypot(signed(j)).round() as usize;
            if bin >= n_bins {
                continue;
            }
            let (x, y) = (fa[i * n + j], fb[i * n + j]);
            num[bin] += (x * y.conj()).re;
            da[bin] += x.norm_sqr();
            db[bin] += y.norm_sqr();
            counts[bin] += 1;
        }
    }
    let raw: Vec<f64> = (0..n_bins)
        .map(|k| {
            let den = (da[k] * db[k]).sqrt();
            if den > 0.0 {
                num[k] / den
            } else {
                0.0
            }
        })
        .collect();
    Ok(FrcCurve {
        frequencies: (0..n_bins).map(|k| k as f64 / n as f64).collect(),
        values: gaussian_smooth(&raw, sigma_bins),
        raw,
        counts,
        pixel_size: a.pixel_size(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    pub pixels: f64,
    pub micrometers: f64,
    /// False when the curve never drops below the cutoff; the band limit is
    /// reported instead.
    pub crossed: bool,
}

/// Resolution at the first downward crossing of `cutoff`, interpolated
/// linearly between bins.
pub fn resolution_from_frc(curve: &FrcCurve, cutoff: f64) -> Result<Resolution> {
    let v = &curve.values;
    if v.len() < 2 {
        return Err(Error::Shape("FRC curve needs at least 2 bins".into()));
    }
    if v[0] < cutoff {
        return Err(Error::Domain(format!("FRC starts at {} below the cutoff {cutoff}", v[0])));
    }
    let f = &curve.frequencies;
    let (omega, crossed) = match (1..v.len()).find(|&i| v[i] < cutoff && v[i - 1] >= cutoff) {
        Some(i) => {
            let frac = (v[i - 1] - cutoff) / (v[i - 1] - v[i]);
            (f[i - 1] + frac * (f[i] - f[i - 1]), true)
        }
        None => (*f.last().expect("non-empty"), false),
    };
    let pixels = 1.0 / omega;
    Ok(Resolution { pixels, micrometers: pixels * curve.pixel_size, crossed })
}

/// Central square covering `fraction` of the side length.
pub fn central_crop(img: &Image, fraction: f64) -> Result<Image> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Domain(format!("crop fraction must be in (0, 1], got {fraction}")));
    }
    let n = img.n();
    let m = ((fraction * n as f64).round() as usize).clamp(2, n);
    let start = (n - m) / 2;
    let view = img.data().slice(ndarray::s![start..start + m, start..start + m]);
    Image::new(view.to_owned(), img.pixel_size())
}
