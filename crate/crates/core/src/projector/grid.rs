use ndarray::Array2;

use crate::error::{ensure_finite, Error, Result};

/// Square image of the combined contrast `h(x, y)` in inverse micrometres.
///
/// Row index is `y`, column index is `x`; pixel centres sit at integer
/// coordinates and the rotation centre is `(n - 1) / 2` on both axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    data: Array2<f64>,
    pixel_size: f64,
}

impl Image {
    pub fn new(data: Array2<f64>, pixel_size: f64) -> Result<Self> {
        let (rows, cols) = data.dim();
        if rows != cols {
            return Err(Error::Shape(format!("image must be square, got {rows}x{cols}")));
        }
        if rows < 2 {
            return Err(Error::Shape(format!("image needs at least 2 pixels per side, got {rows}")));
        }
        if !(pixel_size > 0.0 && pixel_size.is_finite()) {
            return Err(Error::Domain(format!("pixel size must be positive, got {pixel_size}")));
        }
        ensure_finite(data.iter(), "image")?;
        Ok(Self { data: data.as_standard_layout().into_owned(), pixel_size })
    }

    pub fn zeros(n: usize, pixel_size: f64) -> Self {
        Self::new(Array2::zeros((n, n)), pixel_size).expect("valid zero image")
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    /// Mutable access to the pixels. Operators re-check finiteness on entry.
    pub fn data_mut(&mut self) -> &mut Array2<f64> {
        &mut self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub(crate) fn as_slice(&self) -> &[f64] {
        self.data.as_slice().expect("image storage is standard layout")
    }

    pub(crate) fn from_vec_unchecked(n: usize, values: Vec<f64>, pixel_size: f64) -> Self {
        let data = Array2::from_shape_vec((n, n), values).expect("n*n values");
        Self { data, pixel_size }
    }
}

/// Sinogram indexed `(t, θ)`: detector pixel along axis 0, projection angle
/// along axis 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    data: Array2<f64>,
    angles: Vec<f64>,
    pixel_size: f64,
}

impl Sinogram {
    pub fn new(data: Array2<f64>, angles: Vec<f64>, pixel_size: f64) -> Result<Self> {
        if data.ncols() != angles.len() {
            return Err(Error::Shape(format!(
                "sinogram has {} angle columns but {} angles",
                data.ncols(),
                angles.len()
            )));
        }
        if angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("sinogram angles must be strictly increasing".into()));
        }
        if !(pixel_size > 0.0 && pixel_size.is_finite()) {
            return Err(Error::Domain(format!("pixel size must be positive, got {pixel_size}")));
        }
        ensure_finite(data.iter(), "sinogram")?;
        Ok(Self { data: data.as_standard_layout().into_owned(), angles, pixel_size })
    }

    pub fn zeros(n_pixels: usize, angles: Vec<f64>, pixel_size: f64) -> Result<Self> {
        Self::new(Array2::zeros((n_pixels, angles.len())), angles, pixel_size)
    }

    pub fn n_pixels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_angles(&self) -> usize {
        self.data.ncols()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array2<f64> {
        &mut self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    /// Keeps only the listed angle columns, in the given order.
    pub fn select_angles(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_angles()) {
            return Err(Error::Shape(format!("angle index {bad} out of range")));
        }
        let data = self.data.select(ndarray::Axis(1), indices);
        let angles = indices.iter().map(|&i| self.angles[i]).collect();
        Self::new(data, angles, self.pixel_size)
    }

    pub(crate) fn as_slice(&self) -> &[f64] {
        self.data.as_slice().expect("sinogram storage is standard layout")
    }

    pub(crate) fn from_parts_unchecked(data: Array2<f64>, angles: Vec<f64>, pixel_size: f64) -> Self {
        Self { data, angles, pixel_size }
    }
}
