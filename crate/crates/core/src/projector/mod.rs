//! Discrete parallel-beam Radon transform and detector-axis derivative.
//!
//! Rays are sampled at a fixed step (one pixel by default) with bilinear
//! interpolation; the adjoint scatters with the same weights, so it is the
//! exact transpose of the forward operator. Two implementations share the
//! sampler: [`OnTheFly`] recomputes footprints per call, [`LookupTable`]
//! stores them.
//!
//! Forward projection parallelises over detector rows. The adjoint
//! accumulates fixed blocks of angles into private buffers and merges them in
//! block order, so results do not depend on the number of threads.

mod diff;
mod geometry;
mod grid;
mod lookup;
mod onthefly;
mod ray;

use std::ops::Range;

use rayon::prelude::*;

pub use diff::{diff_t, diff_t_adjoint};
pub(crate) use diff::{diff_t_adjoint_array, diff_t_array};
pub use geometry::Geometry;
pub use grid::{Image, Sinogram};
pub use lookup::{build_lookup, LookupTable, DEFAULT_TABLE_BUDGET};
pub use onthefly::OnTheFly;
pub use ray::Footprint;

use crate::error::Result;

/// A linear projection operator with its exact adjoint.
pub trait RadonOperator: Send + Sync {
    fn geometry(&self) -> &Geometry;
    fn forward(&self, image: &Image) -> Result<Sinogram>;
    fn adjoint(&self, sino: &Sinogram) -> Result<Image>;
}

/// Forward projection with the on-the-fly operator.
pub fn radon_forward(image: &Image, geom: &Geometry) -> Result<Sinogram> {
    OnTheFly::new(geom.clone()).forward(image)
}

/// Backprojection (exact adjoint of [`radon_forward`]).
pub fn radon_adjoint(sino: &Sinogram, geom: &Geometry) -> Result<Image> {
    OnTheFly::new(geom.clone()).adjoint(sino)
}

const ANGLE_BLOCKS: usize = 16;

/// Fixed partition of the angles into at most [`ANGLE_BLOCKS`] contiguous
/// ranges. Depends only on the angle count.
fn angle_blocks(n_angles: usize) -> Vec<Range<usize>> {
    let blocks = ANGLE_BLOCKS.min(n_angles);
    (0..blocks).map(|b| (b * n_angles / blocks)..((b + 1) * n_angles / blocks)).collect()
}

/// Sums per-block buffers pixel by pixel in block order.
fn accumulate_blocks(buffers: Vec<Vec<f64>>, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    out.par_chunks_mut(4096).enumerate().for_each(|(chunk, dst)| {
        let start = chunk * 4096;
        let end = start + dst.len();
        for buf in &buffers {
            for (o, v) in dst.iter_mut().zip(&buf[start..end]) {
                *o += v;
            }
        }
    });
    out
}

fn sinogram_from_vec(geom: &Geometry, values: Vec<f64>) -> Sinogram {
    let data = ndarray::Array2::from_shape_vec((geom.n_pixels(), geom.n_angles()), values)
        .expect("n_pixels * n_angles values");
    Sinogram::from_parts_unchecked(data, geom.angles().to_vec(), geom.pixel_size())
}
