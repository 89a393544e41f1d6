use std::f64::consts::PI;

use crate::error::{Error, Result};

use super::{Image, Sinogram};

/// Parallel-beam scan description.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    n_pixels: usize,
    angles: Vec<f64>,
    pixel_size: f64,
    step: f64,
}

impl Geometry {
    /// `angles` in radians, strictly increasing within `[0, 2π)`;
    /// `pixel_size` in micrometres.
    pub fn new(n_pixels: usize, angles: Vec<f64>, pixel_size: f64) -> Result<Self> {
        if n_pixels < 2 {
            return Err(Error::Shape(format!("need at least 2 detector pixels, got {n_pixels}")));
        }
        if angles.is_empty() {
            return Err(Error::Shape("need at least one projection angle".into()));
        }
        if let Some(a) = angles.iter().find(|a| !(0.0..2.0 * PI).contains(*a)) {
            return Err(Error::Domain(format!("angle {a} outside [0, 2π)")));
        }
        if angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("angles must be strictly increasing".into()));
        }
        if !(pixel_size > 0.0 && pixel_size.is_finite()) {
            return Err(Error::Domain(format!("pixel size must be positive, got {pixel_size}")));
        }
        Ok(Self { n_pixels, angles, pixel_size, step: 1.0 })
    }

    /// `n_angles` equally spaced angles over a half (`[0, π)`) or full
    /// (`[0, 2π)`) rotation.
    pub fn uniform(n_pixels: usize, n_angles: usize, pixel_size: f64, full_rotation: bool) -> Result<Self> {
        let span = if full_rotation { 2.0 * PI } else { PI };
        let angles = (0..n_angles).map(|k| span * k as f64 / n_angles as f64).collect();
        Self::new(n_pixels, angles, pixel_size)
    }

    /// Sampling step along each ray, in pixels (default 1).
    pub fn with_step(mut self, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Domain(format!("ray step must be positive, got {step}")));
        }
        self.step = step;
        Ok(self)
    }

    pub fn n_pixels(&self) -> usize {
        self.n_pixels
    }

    pub fn n_angles(&self) -> usize {
        self.angles.len()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Rotation centre in pixel units, `(N_t - 1) / 2`.
    pub fn center(&self) -> f64 {
        (self.n_pixels as f64 - 1.0) / 2.0
    }

    /// Geometry restricted to a subset of angles (e.g. odd/even splits).
    pub fn select_angles(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_angles()) {
            return Err(Error::Shape(format!("angle index {bad} out of range")));
        }
        let angles = indices.iter().map(|&i| self.angles[i]).collect();
        Self::new(self.n_pixels, angles, self.pixel_size)?.with_step(self.step)
    }

    /// Geometry matching an existing sinogram's detector and angles.
    pub fn for_sinogram(sino: &Sinogram) -> Result<Self> {
        Self::new(sino.n_pixels(), sino.angles().to_vec(), sino.pixel_size())
    }

    pub(crate) fn check_image(&self, image: &Image) -> Result<()> {
        if image.n() != self.n_pixels {
            return Err(Error::Shape(format!(
                "image is {0}x{0} but geometry has {1} detector pixels",
                image.n(),
                self.n_pixels
            )));
        }
        Ok(())
    }

    pub(crate) fn check_sinogram(&self, sino: &Sinogram) -> Result<()> {
        if sino.n_pixels() != self.n_pixels || sino.n_angles() != self.n_angles() {
            return Err(Error::Shape(format!(
                "sinogram is {}x{} but geometry is {}x{}",
                sino.n_pixels(),
                sino.n_angles(),
                self.n_pixels,
                self.n_angles()
            )));
        }
        Ok(())
    }
}
