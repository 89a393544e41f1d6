use rayon::prelude::*;

use crate::error::{ensure_finite, Result};

use super::ray::RaySampler;
use super::{accumulate_blocks, angle_blocks, Geometry, Image, RadonOperator, Sinogram};

/// Radon transform computing interpolation footprints on the fly.
///
/// Auxiliary memory is one `(cos, sin)` pair per angle.
#[derive(Debug, Clone)]
pub struct OnTheFly {
    geom: Geometry,
    sampler: RaySampler,
}

impl OnTheFly {
    pub fn new(geom: Geometry) -> Self {
        let sampler = RaySampler::new(&geom);
        Self { geom, sampler }
    }
}

impl RadonOperator for OnTheFly {
    fn geometry(&self) -> &Geometry {
        &self.geom
    }

    fn forward(&self, image: &Image) -> Result<Sinogram> {
        self.geom.check_image(image)?;
        ensure_finite(image.data().iter(), "image")?;
        let n_angles = self.geom.n_angles();
        let scale = self.sampler.ray_scale(self.geom.pixel_size());
        let pixels = image.as_slice();
        let mut out = vec![0.0; self.geom.n_pixels() * n_angles];
        out.par_chunks_mut(n_angles).enumerate().for_each(|(t, row)| {
            for (a, value) in row.iter_mut().enumerate() {
                let mut sum = 0.0;
                self.sampler.for_each(t, a, |fp| sum += fp.gather(pixels));
                *value = sum * scale;
            }
        });
        Ok(super::sinogram_from_vec(&self.geom, out))
    }

    fn adjoint(&self, sino: &Sinogram) -> Result<Image> {
        self.geom.check_sinogram(sino)?;
        ensure_finite(sino.data().iter(), "sinogram")?;
        let n = self.geom.n_pixels();
        let n_angles = self.geom.n_angles();
        let scale = self.sampler.ray_scale(self.geom.pixel_size());
        let values = sino.as_slice();
        let buffers: Vec<Vec<f64>> = angle_blocks(n_angles)
            .into_par_iter()
            .map(|range| {
                let mut buf = vec![0.0; n * n];
                for a in range {
                    for t in 0..n {
                        let v = values[t * n_angles + a] * scale;
                        self.sampler.for_each(t, a, |fp| fp.scatter(&mut buf, v));
                    }
                }
                buf
            })
            .collect();
        Ok(Image::from_vec_unchecked(n, accumulate_blocks(buffers, n * n), self.geom.pixel_size()))
    }
}
