use super::Geometry;

/// Bilinear interpolation footprint of one sample point along a ray.
///
/// Corners outside the image carry weight 0 and index 0, so gathering and
/// scattering never branch on bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub index: [u32; 4],
    pub weight: [f64; 4],
}

impl Footprint {
    #[inline]
    pub(crate) fn gather(&self, image: &[f64]) -> f64 {
        self.weight[0] * image[self.index[0] as usize]
            + self.weight[1] * image[self.index[1] as usize]
            + self.weight[2] * image[self.index[2] as usize]
            + self.weight[3] * image[self.index[3] as usize]
    }

    #[inline]
    pub(crate) fn scatter(&self, image: &mut [f64], value: f64) {
        for k in 0..4 {
            image[self.index[k] as usize] += self.weight[k] * value;
        }
    }
}

/// Enumerates the sample points of every ray `(t, θ)`.
///
/// Samples sit at `s = k · step` along the ray, symmetric about the point
/// closest to the rotation centre, and only inside the circle that bounds the
/// bilinear support of the image. Sample order is ascending in `k` and is the
/// summation order of every projector.
#[derive(Debug, Clone)]
pub(crate) struct RaySampler {
    n: usize,
    center: f64,
    step: f64,
    radius: f64,
    trig: Vec<(f64, f64)>,
}

impl RaySampler {
    pub(crate) fn new(geom: &Geometry) -> Self {
        let center = geom.center();
        Self {
            n: geom.n_pixels(),
            center,
            step: geom.step(),
            radius: std::f64::consts::SQRT_2 * (center + 1.0),
            trig: geom.angles().iter().map(|a| (a.cos(), a.sin())).collect(),
        }
    }

    /// Line-integral scale applied to every ray sum (step length in
    /// micrometres).
    pub(crate) fn ray_scale(&self, pixel_size: f64) -> f64 {
        self.step * pixel_size
    }

    /// Footprint of a sample whose bilinear support crosses the image edge.
    fn edge(&self, ri: i64, ci: i64, wr: [f64; 2], wc: [f64; 2]) -> Footprint {
        let n = self.n as i64;
        let mut fp = Footprint { index: [0; 4], weight: [0.0; 4] };
        for (slot, (dr, dc)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
            let (r, c) = (ri + dr, ci + dc);
            if (0..n).contains(&r) && (0..n).contains(&c) {
                fp.index[slot] = (r * n + c) as u32;
                fp.weight[slot] = wr[dr as usize] * wc[dc as usize];
            }
        }
        fp
    }

    /// Range of `k` that can land inside the image square, padded by one
    /// sample on each side. The per-sample check stays authoritative.
    #[inline]
    fn clip(&self, k_max: i64, u: f64, cos: f64, sin: f64) -> (i64, i64) {
        let (mut lo, mut hi) = (-k_max, k_max);
        // col = center + u cos - s sin, row = center + u sin + s cos
        for (a, b) in [(self.center + u * cos, -sin), (self.center + u * sin, cos)] {
            if b.abs() < 1e-9 {
                continue;
            }
            let s0 = (-2.0 - a) / b;
            let s1 = (self.n as f64 + 1.0 - a) / b;
            let (s_lo, s_hi) = if s0 < s1 { (s0, s1) } else { (s1, s0) };
            lo = lo.max((s_lo / self.step).floor() as i64 - 1);
            hi = hi.min((s_hi / self.step).ceil() as i64 + 1);
        }
        (lo, hi)
    }

    #[inline]
    pub(crate) fn for_each(&self, t: usize, angle: usize, visit: impl FnMut(&Footprint)) {
        self.walk(t, angle, true, visit)
    }

    #[inline]
    fn walk(&self, t: usize, angle: usize, clipped: bool, mut visit: impl FnMut(&Footprint)) {
        let u = t as f64 - self.center;
        let half_sq = self.radius * self.radius - u * u;
        if half_sq <= 0.0 {
            return;
        }
        let k_max = (half_sq.sqrt() / self.step).floor() as i64;
        let (cos, sin) = self.trig[angle];
        let (k_lo, k_hi) = if clipped { self.clip(k_max, u, cos, sin) } else { (-k_max, k_max) };
        let n = self.n as i64;
        let last = n - 1;
        // every sample lies within `radius` of the centre, so col, row > -n
        let shift = n as f64;
        for k in k_lo..=k_hi {
            let s = k as f64 * self.step;
            let col = self.center + (u * cos - s * sin);
            let row = self.center + (u * sin + s * cos);
            // truncation of a shifted positive value is floor, without a libm call
            let mut ci = (col + shift) as i64 - n;
            let mut ri = (row + shift) as i64 - n;
            // the shifted sum can round up across an integer
            ci -= (ci as f64 > col) as i64;
            ri -= (ri as f64 > row) as i64;
            let (c0, r0) = (ci as f64, ri as f64);
            if ci < -1 || ci > last || ri < -1 || ri > last {
                continue;
            }
            let fc = col - c0;
            let fr = row - r0;
            let wc = [1.0 - fc, fc];
            let wr = [1.0 - fr, fr];
            if ci >= 0 && ci < last && ri >= 0 && ri < last {
                let base = (ri * n + ci) as u32;
                let n32 = n as u32;
                visit(&Footprint {
                    index: [base, base + 1, base + n32, base + n32 + 1],
                    weight: [wr[0] * wc[0], wr[0] * wc[1], wr[1] * wc[0], wr[1] * wc[1]],
                });
            } else {
                visit(&self.edge(ri, ci, wr, wc));
            }
        }
    }
}
