use ndarray::{Array2, Zip};

use crate::error::{Error, Result};

use super::Sinogram;

/// Derivative along the detector axis `t`, in units of 1/µm.
///
/// Central differences in the interior, one-sided differences at the first
/// and last detector pixel.
pub fn diff_t(sino: &Sinogram) -> Result<Sinogram> {
    let out = diff_t_array(sino.data(), sino.pixel_size())?;
    Ok(Sinogram::from_parts_unchecked(out, sino.angles().to_vec(), sino.pixel_size()))
}

/// Exact transpose of [`diff_t`].
pub fn diff_t_adjoint(sino: &Sinogram) -> Result<Sinogram> {
    let out = diff_t_adjoint_array(sino.data(), sino.pixel_size())?;
    Ok(Sinogram::from_parts_unchecked(out, sino.angles().to_vec(), sino.pixel_size()))
}

fn check_len(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::Shape(format!("detector derivative needs at least 3 pixels, got {n}")));
    }
    Ok(())
}

pub(crate) fn diff_t_array(p: &Array2<f64>, pixel_size: f64) -> Result<Array2<f64>> {
    let n = p.nrows();
    check_len(n)?;
    let inv = 1.0 / pixel_size;
    let half = 0.5 * inv;
    let mut out = Array2::zeros(p.raw_dim());
    Zip::from(out.row_mut(0)).and(p.row(0)).and(p.row(1)).for_each(|o, &a, &b| *o = (b - a) * inv);
    for i in 1..n - 1 {
        Zip::from(out.row_mut(i))
            .and(p.row(i - 1))
            .and(p.row(i + 1))
            .for_each(|o, &a, &b| *o = (b - a) * half);
    }
    Zip::from(out.row_mut(n - 1))
        .and(p.row(n - 2))
        .and(p.row(n - 1))
        .for_each(|o, &a, &b| *o = (b - a) * inv);
    Ok(out)
}

pub(crate) fn diff_t_adjoint_array(y: &Array2<f64>, pixel_size: f64) -> Result<Array2<f64>> {
    let n = y.nrows();
    check_len(n)?;
    let inv = 1.0 / pixel_size;
    let half = 0.5 * inv;
    let mut out = Array2::zeros(y.raw_dim());
    // Scatter each output row of the forward operator back onto its inputs.
    Zip::from(out.row_mut(0)).and(y.row(0)).for_each(|o, &v| *o -= v * inv);
    Zip::from(out.row_mut(1)).and(y.row(0)).for_each(|o, &v| *o += v * inv);
    for i in 1..n - 1 {
        Zip::from(out.row_mut(i - 1)).and(y.row(i)).for_each(|o, &v| *o -= v * half);
        Zip::from(out.row_mut(i + 1)).and(y.row(i)).for_each(|o, &v| *o += v * half);
    }
    Zip::from(out.row_mut(n - 2)).and(y.row(n - 1)).for_each(|o, &v| *o -= v * inv);
    Zip::from(out.row_mut(n - 1)).and(y.row(n - 1)).for_each(|o, &v| *o += v * inv);
    Ok(out)
}
