//! Flat-field illumination curves `f(t, m)`.
//!
//! Each detector pixel `t` carries intensities sampled at equally spaced mask
//! offsets `m` over exactly one mask period. Between knots the curve is a
//! periodic Catmull-Rom cubic, giving continuous `f` and `∂f/∂m`.

use ndarray::{Array2, Array3, Axis};

use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct IlluminationCurve {
    samples: Array2<f64>,
    origin: f64,
    period: f64,
    spacing: f64,
    n_repeats_averaged: usize,
}

impl IlluminationCurve {
    /// `samples` is `[N_t × N_m]` counts; `offsets` are the `N_m` mask
    /// positions in micrometres, equally spaced by `period / N_m`.
    pub fn new(samples: Array2<f64>, offsets: &[f64], period: f64, n_repeats_averaged: usize) -> Result<Self> {
        let n_m = samples.ncols();
        if offsets.len() != n_m {
            return Err(Error::Shape(format!("{} offsets for {n_m} sample columns", offsets.len())));
        }
        if n_m < 4 {
            return Err(Error::Shape(format!("cubic interpolation needs at least 4 offsets, got {n_m}")));
        }
        if samples.nrows() == 0 {
            return Err(Error::Shape("illumination curve has no pixels".into()));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::Domain(format!("period must be positive, got {period}")));
        }
        ensure_finite(offsets, "offsets")?;
        let spacing = period / n_m as f64;
        let origin = offsets[0];
        if offsets.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("offsets must be strictly increasing".into()));
        }
        for (k, &m) in offsets.iter().enumerate() {
            if (m - (origin + k as f64 * spacing)).abs() > 1e-9 * period {
                return Err(Error::Domain(format!(
                    "offsets must be equally spaced by period/N_m = {spacing}; offset {k} is {m}"
                )));
            }
        }
        Self::checked(samples, origin, period, n_repeats_averaged)
    }

    /// Knots at `origin + k · period / N_m`.
    pub fn uniform(samples: Array2<f64>, origin: f64, period: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) || !origin.is_finite() {
            return Err(Error::Domain(format!("bad period {period} or origin {origin}")));
        }
        if samples.ncols() < 4 || samples.nrows() == 0 {
            return Err(Error::Shape(format!("need ≥1 pixel and ≥4 offsets, got {:?}", samples.dim())));
        }
        Self::checked(samples, origin, period, 1)
    }

    fn checked(samples: Array2<f64>, origin: f64, period: f64, n_repeats_averaged: usize) -> Result<Self> {
        ensure_finite(samples.iter(), "illumination samples")?;
        if let Some(v) = samples.iter().find(|&&v| v < 0.0) {
            return Err(Error::Domain(format!("illumination intensities must be ≥ 0, found {v}")));
        }
        if n_repeats_averaged == 0 {
            return Err(Error::Domain("n_repeats_averaged must be ≥ 1".into()));
        }
        let spacing = period / samples.ncols() as f64;
        Ok(Self { samples: samples.as_standard_layout().into_owned(), origin, period, spacing, n_repeats_averaged })
    }

    pub fn n_pixels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_offsets(&self) -> usize {
        self.samples.ncols()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn n_repeats_averaged(&self) -> usize {
        self.n_repeats_averaged
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    pub fn offsets(&self) -> Vec<f64> {
        (0..self.n_offsets()).map(|k| self.origin + k as f64 * self.spacing).collect()
    }

    /// Knot index and fractional position of `m`, wrapped into one period.
    #[inline]
    fn locate(&self, m: f64) -> (usize, f64) {
        let mut r = (m - self.origin) % self.period;
        if r < 0.0 {
            r += self.period;
        }
        let u = r / self.spacing;
        let k = u.floor();
        let s = u - k;
        (k as usize % self.n_offsets(), s)
    }

    #[inline]
    fn knots(&self, t: usize, k: usize) -> [f64; 4] {
        let n = self.n_offsets();
        let row = self.samples.row(t);
        [row[(k + n - 1) % n], row[k], row[(k + 1) % n], row[(k + 2) % n]]
    }

    /// Interpolated intensity at pixel `t`, mask offset `m` (µm).
    #[inline]
    pub fn eval(&self, t: usize, m: f64) -> f64 {
        let (k, s) = self.locate(m);
        let [p0, p1, p2, p3] = self.knots(t, k);
        let (a, b, c) = cr_coefficients(p0, p1, p2, p3);
        0.5 * (2.0 * p1 + s * (a + s * (b + s * c)))
    }

    /// Derivative `∂f/∂m` of the interpolant, per micrometre.
    #[inline]
    pub fn eval_deriv(&self, t: usize, m: f64) -> f64 {
        self.eval_with_deriv(t, m).1
    }

    /// `(f, ∂f/∂m)` in one pass.
    #[inline]
    pub fn eval_with_deriv(&self, t: usize, m: f64) -> (f64, f64) {
        let (k, s) = self.locate(m);
        let [p0, p1, p2, p3] = self.knots(t, k);
        let (a, b, c) = cr_coefficients(p0, p1, p2, p3);
        let value = 0.5 * (2.0 * p1 + s * (a + s * (b + s * c)));
        let slope = 0.5 * (a + s * (2.0 * b + 3.0 * s * c)) / self.spacing;
        (value, slope)
    }

    /// Pixel-averaged curve `f̄(m)` with its derivative.
    pub fn mean(&self) -> MeanCurve {
        let n_t = self.n_pixels() as f64;
        let values: Vec<f64> = self
            .samples
            .columns()
            .into_iter()
            .map(|col| col.iter().fold(0.0, |acc, v| acc + v) / n_t)
            .collect();
        let curve = Self {
            samples: Array2::from_shape_vec((1, values.len()), values.clone()).expect("one row"),
            origin: self.origin,
            period: self.period,
            spacing: self.spacing,
            n_repeats_averaged: self.n_repeats_averaged,
        };
        let offsets = self.offsets();
        let derivs = offsets.iter().map(|&m| curve.eval_deriv(0, m)).collect();
        MeanCurve { offsets, values, derivs, curve }
    }

    /// Periodic Gaussian smoothing along `m` with width `sigma_steps` knots.
    /// Optional preprocessing; reconstruction uses raw curves by default.
    pub fn smoothed(&self, sigma_steps: f64) -> Result<Self> {
        if !(sigma_steps > 0.0 && sigma_steps.is_finite()) {
            return Err(Error::Domain(format!("smoothing width must be positive, got {sigma_steps}")));
        }
        let n = self.n_offsets() as i64;
        let reach = (4.0 * sigma_steps).ceil() as i64;
        let kernel: Vec<f64> =
            (-reach..=reach).map(|d| (-(d * d) as f64 / (2.0 * sigma_steps * sigma_steps)).exp()).collect();
        let norm: f64 = kernel.iter().sum();
        let mut out = Array2::zeros(self.samples.raw_dim());
        for (src, mut dst) in self.samples.rows().into_iter().zip(out.rows_mut()) {
            for k in 0..n {
                let mut acc = 0.0;
                for (w, d) in kernel.iter().zip(-reach..=reach) {
                    acc += w * src[(k + d).rem_euclid(n) as usize];
                }
                dst[k as usize] = acc / norm;
            }
        }
        Ok(Self { samples: out, ..self.clone() })
    }
}

#[inline]
fn cr_coefficients(p0: f64, p1: f64, p2: f64, p3: f64) -> (f64, f64, f64) {
    (p2 - p0, 2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3, -p0 + 3.0 * p1 - 3.0 * p2 + p3)
}

/// Pixel-averaged illumination curve.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanCurve {
    pub offsets: Vec<f64>,
    /// `f̄` at each knot.
    pub values: Vec<f64>,
    /// `f̄′` at each knot, from the interpolant of the mean.
    pub derivs: Vec<f64>,
    curve: IlluminationCurve,
}

impl MeanCurve {
    pub fn eval(&self, m: f64) -> f64 {
        self.curve.eval(0, m)
    }

    pub fn eval_deriv(&self, m: f64) -> f64 {
        self.curve.eval_deriv(0, m)
    }

    /// Offset of the largest knot value.
    pub fn argmax(&self) -> f64 {
        let (k, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best });
        self.offsets[k]
    }
}

/// Averages repeated flat-field scans `[N_t × N_m × N_rep]` per `(t, m)`.
pub fn ic_from_scans(scans: &Array3<f64>, offsets: &[f64], period: f64) -> Result<IlluminationCurve> {
    let n_rep = scans.len_of(Axis(2));
    if n_rep == 0 {
        return Err(Error::Shape("need at least one flat-field repeat".into()));
    }
    ensure_finite(scans.iter(), "flat-field scans")?;
    if let Some(v) = scans.iter().find(|&&v| v < 0.0) {
        return Err(Error::Domain(format!("photon counts must be ≥ 0, found {v}")));
    }
    let mean = scans.map_axis(Axis(2), |lane| lane.iter().fold(0.0, |acc, v| acc + v) / n_rep as f64);
    IlluminationCurve::new(mean, offsets, period, n_rep)
}
