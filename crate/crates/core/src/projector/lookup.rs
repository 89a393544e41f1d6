use rayon::prelude::*;

use crate::error::{ensure_finite, Error, Result};

use super::ray::{Footprint, RaySampler};
use super::{accumulate_blocks, angle_blocks, Geometry, Image, RadonOperator, Sinogram};

/// Default ceiling for [`build_lookup`]: 4 GiB.
pub const DEFAULT_TABLE_BUDGET: usize = 4 << 30;

/// Precomputed interpolation footprints for every ray sample.
///
/// Produces bitwise the same sinograms as [`super::OnTheFly`]: the table
/// stores exactly the footprints the on-the-fly sampler generates, and both
/// sum them in the same order.
#[derive(Debug, Clone)]
pub struct LookupTable {
    geom: Geometry,
    scale: f64,
    /// Offsets into `footprints`, one per ray `t * n_angles + a`, plus end.
    ray_start: Vec<usize>,
    footprints: Vec<Footprint>,
}

/// Builds the lookup table for `geom`, failing before allocation when the
/// table would need more than `budget_bytes`.
pub fn build_lookup(geom: &Geometry, budget_bytes: usize) -> Result<LookupTable> {
    let estimate = LookupTable::estimate_bytes(geom);
    if estimate > budget_bytes {
        return Err(Error::Resource(format!(
            "lookup table needs {estimate} bytes, budget is {budget_bytes}"
        )));
    }
    let sampler = RaySampler::new(geom);
    let n = geom.n_pixels();
    let n_angles = geom.n_angles();
    let per_row: Vec<(Vec<usize>, Vec<Footprint>)> = (0..n)
        .into_par_iter()
        .map(|t| {
            let mut counts = Vec::with_capacity(n_angles);
            let mut fps = Vec::new();
            for a in 0..n_angles {
                let before = fps.len();
                sampler.for_each(t, a, |fp| fps.push(*fp));
                counts.push(fps.len() - before);
            }
            (counts, fps)
        })
        .collect();
    let total: usize = per_row.iter().map(|(_, f)| f.len()).sum();
    let mut ray_start = Vec::with_capacity(n * n_angles + 1);
    let mut footprints = Vec::with_capacity(total);
    ray_start.push(0);
    for (counts, fps) in per_row {
        for c in counts {
            ray_start.push(ray_start.last().unwrap() + c);
        }
        footprints.extend_from_slice(&fps);
    }
    Ok(LookupTable { scale: sampler.ray_scale(geom.pixel_size()), geom: geom.clone(), ray_start, footprints })
}

impl LookupTable {
    /// Bytes the table for `geom` would occupy, computed by counting samples.
    pub fn estimate_bytes(geom: &Geometry) -> usize {
        let sampler = RaySampler::new(geom);
        let n_angles = geom.n_angles();
        let samples: usize = (0..geom.n_pixels())
            .into_par_iter()
            .map(|t| {
                let mut count = 0usize;
                for a in 0..n_angles {
                    sampler.for_each(t, a, |_| count += 1);
                }
                count
            })
            .sum();
        Self::bytes_for(samples, geom.n_pixels() * n_angles)
    }

    fn bytes_for(samples: usize, rays: usize) -> usize {
        samples * std::mem::size_of::<Footprint>() + (rays + 1) * std::mem::size_of::<usize>()
    }

    pub fn memory_bytes(&self) -> usize {
        Self::bytes_for(self.footprints.len(), self.ray_start.len() - 1)
    }

    pub fn n_samples(&self) -> usize {
        self.footprints.len()
    }

    pub fn footprints(&self) -> &[Footprint] {
        &self.footprints
    }

    /// Footprints of ray `(t, angle)` in summation order.
    pub fn ray(&self, t: usize, angle: usize) -> &[Footprint] {
        let r = t * self.geom.n_angles() + angle;
        &self.footprints[self.ray_start[r]..self.ray_start[r + 1]]
    }
}

impl RadonOperator for LookupTable {
    fn geometry(&self) -> &Geometry {
        &self.geom
    }

    fn forward(&self, image: &Image) -> Result<Sinogram> {
        self.geom.check_image(image)?;
        ensure_finite(image.data().iter(), "image")?;
        let n_angles = self.geom.n_angles();
        let pixels = image.as_slice();
        let mut out = vec![0.0; self.geom.n_pixels() * n_angles];
        out.par_chunks_mut(n_angles).enumerate().for_each(|(t, row)| {
            for (a, value) in row.iter_mut().enumerate() {
                let mut sum = 0.0;
                for fp in self.ray(t, a) {
                    sum += fp.gather(pixels);
                }
                *value = sum * self.scale;
            }
        });
        Ok(super::sinogram_from_vec(&self.geom, out))
    }

    fn adjoint(&self, sino: &Sinogram) -> Result<Image> {
        self.geom.check_sinogram(sino)?;
        ensure_finite(sino.data().iter(), "sinogram")?;
        let n = self.geom.n_pixels();
        let n_angles = self.geom.n_angles();
        let values = sino.as_slice();
        let buffers: Vec<Vec<f64>> = angle_blocks(n_angles)
            .into_par_iter()
            .map(|range| {
                let mut buf = vec![0.0; n * n];
                for a in range {
                    for t in 0..n {
                        let v = values[t * n_angles + a] * self.scale;
                        for fp in self.ray(t, a) {
                            fp.scatter(&mut buf, v);
                        }
                    }
                }
                buf
            })
            .collect();
        Ok(Image::from_vec_unchecked(n, accumulate_blocks(buffers, n * n), self.geom.pixel_size()))
    }
}
