//! Single-offset retrieval followed by filtered backprojection.
//!
//! Each projection row is divided by the flat field at the working offset,
//! deconvolved with `1 + i·q·zγ·f̄′/f̄` along `t`, and log-transformed. The
//! result is scaled so that a pure absorber returns `γ⁻¹·(-log(s/f))`.

use ndarray::Array2;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::RowFilter;
use crate::illumination::IlluminationCurve;
use crate::projector::{Geometry, Image, OnTheFly, RadonOperator, Sinogram};

/// Filtered values below this are clamped before the logarithm.
pub const RATIO_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalConfig {
    /// µm.
    pub gamma: f64,
    /// Sample–detector distance, µm.
    pub z: f64,
    /// Working mask offset, µm.
    pub offset: f64,
    /// Mirror padding on each side, pixels. `None` uses half the row length.
    pub pad: Option<usize>,
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) || !(self.z > 0.0 && self.z.is_finite()) {
            return Err(Error::Domain(format!("gamma and z must be positive, got {} and {}", self.gamma, self.z)));
        }
        if !self.offset.is_finite() {
            return Err(Error::Domain("working offset must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Retrieval {
    pub projections: Sinogram,
    /// Entries clamped at [`RATIO_FLOOR`].
    pub clamped: usize,
}

/// Filter response per FFT bin. Bin 0 is exactly 1.
fn response(filter: &RowFilter, pixel_size: f64, kappa: f64) -> Vec<Complex64> {
    let len = filter.padded_len() as f64;
    (0..filter.padded_len())
        .map(|k| {
            let q = std::f64::consts::TAU * filter.frequency_index(k) / (len * pixel_size);
            Complex64::new(1.0, q * kappa).inv()
        })
        .collect()
}

/// Retrieves `γ⁻¹`-scaled projections from a single-offset sinogram.
pub fn retrieve(sino: &Sinogram, ic: &IlluminationCurve, cfg: &RetrievalConfig) -> Result<Retrieval> {
    cfg.validate()?;
    let n_t = sino.n_pixels();
    if ic.n_pixels() != n_t {
        return Err(Error::Shape(format!("illumination curve has {} pixels, sinogram {n_t}", ic.n_pixels())));
    }
    let flat: Vec<f64> = (0..n_t).map(|t| ic.eval(t, cfg.offset)).collect();
    if let Some(t) = flat.iter().position(|&f| !(f > 0.0)) {
        return Err(Error::Domain(format!("flat field is {} at pixel {t}, offset {}", flat[t], cfg.offset)));
    }
    let mean = ic.mean();
    let (f_bar, df_bar) = (mean.eval(cfg.offset), mean.eval_deriv(cfg.offset));
    let kappa = cfg.z * cfg.gamma * df_bar / f_bar;
    let filter = RowFilter::mirror(n_t, cfg.pad.unwrap_or(n_t / 2))?;
    let resp = response(&filter, sino.pixel_size(), kappa);
    let inv_gamma = 1.0 / cfg.gamma;

    let columns: Vec<(Vec<f64>, usize)> = (0..sino.n_angles())
        .into_par_iter()
        .map(|a| {
            let ratio: Vec<f64> = (0..n_t).map(|t| sino.data()[[t, a]] / flat[t]).collect();
            let mut clamped = 0;
            let h = filter
                .apply(&ratio, &resp)
                .into_iter()
                .map(|v| {
                    let v = if v < RATIO_FLOOR {
                        clamped += 1;
                        RATIO_FLOOR
                    } else {
                        v
                    };
                    -v.ln() * inv_gamma
                })
                .collect();
            (h, clamped)
        })
        .collect();
    let mut out = Array2::zeros((n_t, sino.n_angles()));
    let mut clamped = 0;
    for (a, (col, c)) in columns.into_iter().enumerate() {
        out.column_mut(a).assign(&ndarray::Array1::from(col));
        clamped += c;
    }
    if clamped > 0 {
        log::warn!("{clamped} filtered ratios were non-positive and clamped to {RATIO_FLOOR}");
    }
    Ok(Retrieval { projections: Sinogram::new(out, sino.angles().to_vec(), sino.pixel_size())?, clamped })
}

/// Ram-Lak response in the frequency domain, built from its band-limited
/// spatial kernel so the DC term is not zero.
fn ram_lak(filter: &RowFilter) -> Vec<Complex64> {
    let len = filter.padded_len();
    let kernel: Vec<f64> = (0..len)
        .map(|k| {
            let n = filter.frequency_index(k).abs() as usize;
            if n == 0 {
                0.25
            } else if n % 2 == 1 {
                -1.0 / (std::f64::consts::PI * n as f64).powi(2)
            } else {
                0.0
            }
        })
        .collect();
    filter.spectrum(&kernel).into_iter().map(|c| Complex64::new(2.0 * c.re, 0.0)).collect()
}

/// Ramp-filtered backprojection with zero padding to at least twice the row
/// length. Angles must cover a half or full turn
/// uniformly.
pub fn fbp(projections: &Sinogram) -> Result<Image> {
    let n_angles = projections.n_angles();
    if n_angles < 2 {
        return Err(Error::Shape(format!("fbp needs at least 2 angles, got {n_angles}")));
    }
    let n_t = projections.n_pixels();
    let geom = Geometry::for_sinogram(projections)?;
    // Zero padding: mirrored content would leak through the ramp kernel's
    // long tails and bias the background.
    let filter = RowFilter::zero(n_t, (2 * n_t).next_power_of_two().max(64))?;
    let resp = ram_lak(&filter);
    let columns: Vec<Vec<f64>> = (0..n_angles)
        .into_par_iter()
        .map(|a| {
            let row: Vec<f64> = projections.data().column(a).to_vec();
            filter.apply(&row, &resp)
        })
        .collect();
    let mut filtered = Array2::zeros((n_t, n_angles));
    for (a, col) in columns.into_iter().enumerate() {
        filtered.column_mut(a).assign(&ndarray::Array1::from(col));
    }
    let ps = projections.pixel_size();
    let mut image = OnTheFly::new(geom).adjoint(&Sinogram::new(filtered, projections.angles().to_vec(), ps)?)?;
    // The adjoint already carries one factor of the pixel size.
    let scale = std::f64::consts::PI / (2.0 * n_angles as f64) / (ps * ps);
    image.data_mut().mapv_inplace(|v| v * scale);
    Ok(image)
}
