//! The EI forward model
//! `s_mod(t,θ,m) = exp(-P) · f(t, m - m_o(θ) - m_r(t) - zγ·D)` with
//! `P = R[h]` and `D = ∂_t P`.

use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::{Array2, Array3};
use rayon::prelude::*;

use crate::error::{ensure_finite, Error, Result};
use crate::illumination::IlluminationCurve;
use crate::projector::{diff_t_adjoint_array, diff_t_array, Geometry, Image, OnTheFly, RadonOperator, Sinogram};

/// Projections above this value are clamped before `exp(-P)` to avoid
/// underflow. Every clamped entry is counted in [`Evaluation::clamped`].
pub const ATTENUATION_CAP: f64 = 50.0;

/// Unknowns of the forward model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub h: Image,
    /// Per-angle mask drift, µm.
    pub m_o: Vec<f64>,
    /// Per-pixel ring offset, µm. Identically zero unless `ring_enabled`.
    pub m_r: Vec<f64>,
    pub ring_enabled: bool,
}

impl ModelParams {
    pub fn zeros(geom: &Geometry, ring_enabled: bool) -> Self {
        Self {
            h: Image::zeros(geom.n_pixels(), geom.pixel_size()),
            m_o: vec![0.0; geom.n_angles()],
            m_r: vec![0.0; geom.n_pixels()],
            ring_enabled,
        }
    }

    pub fn validate(&self, geom: &Geometry) -> Result<()> {
        if self.h.n() != geom.n_pixels() {
            return Err(Error::Shape(format!("h is {0}x{0}, geometry has {1} pixels", self.h.n(), geom.n_pixels())));
        }
        if self.m_o.len() != geom.n_angles() {
            return Err(Error::Shape(format!("m_o has {} entries for {} angles", self.m_o.len(), geom.n_angles())));
        }
        if self.m_r.len() != geom.n_pixels() {
            return Err(Error::Shape(format!("m_r has {} entries for {} pixels", self.m_r.len(), geom.n_pixels())));
        }
        ensure_finite(self.h.data().iter(), "h")?;
        ensure_finite(&self.m_o, "m_o")?;
        ensure_finite(&self.m_r, "m_r")?;
        if !self.ring_enabled && self.m_r.iter().any(|&v| v != 0.0) {
            return Err(Error::Domain("m_r must be identically zero when ring offsets are disabled".into()));
        }
        Ok(())
    }
}

/// Measured sample scan plus everything needed to model it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanData {
    s_exp: Array3<f64>,
    offsets: Vec<f64>,
    ic: IlluminationCurve,
    z: f64,
    gamma: f64,
    geometry: Geometry,
}

impl ScanData {
    /// `s_exp` is `[N_t × N_θ × N_m]` in flat-field count units; `offsets`
    /// are the `N_m` mask positions (µm) at which it was acquired.
    pub fn new(
        s_exp: Array3<f64>,
        offsets: Vec<f64>,
        ic: IlluminationCurve,
        z: f64,
        gamma: f64,
        geometry: Geometry,
    ) -> Result<Self> {
        let (n_t, n_a, n_m) = s_exp.dim();
        if n_t != geometry.n_pixels() || n_a != geometry.n_angles() {
            return Err(Error::Shape(format!(
                "s_exp is {n_t}x{n_a}x{n_m}, geometry is {}x{}",
                geometry.n_pixels(),
                geometry.n_angles()
            )));
        }
        if n_m == 0 || offsets.len() != n_m {
            return Err(Error::Shape(format!("{} offsets for {n_m} offset slices", offsets.len())));
        }
        if ic.n_pixels() != n_t {
            return Err(Error::Shape(format!("illumination curve has {} pixels, scan has {n_t}", ic.n_pixels())));
        }
        if !(z > 0.0 && z.is_finite()) || !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!("z and gamma must be positive, got z={z}, gamma={gamma}")));
        }
        ensure_finite(s_exp.iter(), "s_exp")?;
        ensure_finite(&offsets, "offsets")?;
        Ok(Self { s_exp: s_exp.as_standard_layout().into_owned(), offsets, ic, z, gamma, geometry })
    }

    pub fn s_exp(&self) -> &Array3<f64> {
        &self.s_exp
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn ic(&self) -> &IlluminationCurve {
        &self.ic
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// Same scan with a different flat-field curve.
    pub fn with_ic(self, ic: IlluminationCurve) -> Result<Self> {
        Self::new(self.s_exp, self.offsets, ic, self.z, self.gamma, self.geometry)
    }

    pub fn with_s_exp(self, s_exp: Array3<f64>) -> Result<Self> {
        Self::new(s_exp, self.offsets, self.ic, self.z, self.gamma, self.geometry)
    }

    /// Keeps only the listed projection angles.
    pub fn select_angles(&self, indices: &[usize]) -> Result<Self> {
        let geometry = self.geometry.select_angles(indices)?;
        let s_exp = self.s_exp.select(ndarray::Axis(1), indices);
        Self::new(s_exp, self.offsets.clone(), self.ic.clone(), self.z, self.gamma, geometry)
    }

    /// The `[N_t × N_θ]` slice at offset index `k`, as a sinogram.
    pub fn sinogram_at(&self, k: usize) -> Result<Sinogram> {
        if k >= self.offsets.len() {
            return Err(Error::Shape(format!("offset index {k} out of range")));
        }
        Sinogram::new(
            self.s_exp.index_axis(ndarray::Axis(2), k).to_owned(),
            self.geometry.angles().to_vec(),
            self.geometry.pixel_size(),
        )
    }
}

/// Number of operator applications made through a [`ForwardModel`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CallCounts {
    pub radon_forward: usize,
    pub radon_adjoint: usize,
    pub diff_t: usize,
    pub diff_t_adjoint: usize,
}

#[derive(Debug, Default)]
struct Counters {
    radon_forward: AtomicUsize,
    radon_adjoint: AtomicUsize,
    diff_t: AtomicUsize,
    diff_t_adjoint: AtomicUsize,
}

/// Result of one model evaluation. `projection` and `derivative` are shared
/// by the cost and gradient so each evaluation projects exactly once.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub projection: Array2<f64>,
    pub derivative: Array2<f64>,
    /// `exp(-min(P, ATTENUATION_CAP))`.
    pub attenuation: Array2<f64>,
    pub s_mod: Array3<f64>,
    /// `∂f/∂m` at the shifted argument, present when requested.
    pub slope: Option<Array3<f64>>,
    pub clamped: usize,
}

/// Forward model bound to a scan and a projector.
pub struct ForwardModel<'a> {
    scan: &'a ScanData,
    projector: &'a dyn RadonOperator,
    gamma: f64,
    counters: Counters,
}

impl<'a> ForwardModel<'a> {
    pub fn new(scan: &'a ScanData, projector: &'a dyn RadonOperator) -> Result<Self> {
        if projector.geometry() != scan.geometry() {
            return Err(Error::Shape("projector geometry differs from scan geometry".into()));
        }
        Ok(Self { scan, projector, gamma: scan.gamma(), counters: Counters::default() })
    }

    /// Overrides the γ used in the refraction term.
    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub fn scan(&self) -> &ScanData {
        self.scan
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn counts(&self) -> CallCounts {
        CallCounts {
            radon_forward: self.counters.radon_forward.load(Ordering::Relaxed),
            radon_adjoint: self.counters.radon_adjoint.load(Ordering::Relaxed),
            diff_t: self.counters.diff_t.load(Ordering::Relaxed),
            diff_t_adjoint: self.counters.diff_t_adjoint.load(Ordering::Relaxed),
        }
    }

    pub fn evaluate(&self, params: &ModelParams, with_slope: bool) -> Result<Evaluation> {
        let geom = self.scan.geometry();
        params.validate(geom)?;
        self.counters.radon_forward.fetch_add(1, Ordering::Relaxed);
        let projection = self.projector.forward(&params.h)?.into_data();
        self.counters.diff_t.fetch_add(1, Ordering::Relaxed);
        let derivative = diff_t_array(&projection, geom.pixel_size())?;

        let clamped = projection.iter().filter(|&&p| p > ATTENUATION_CAP).count();
        if clamped > 0 {
            log::debug!("{clamped} projections exceed {ATTENUATION_CAP} and were clamped");
        }
        let attenuation = projection.mapv(|p| (-p.min(ATTENUATION_CAP)).exp());

        let (n_t, n_a) = (geom.n_pixels(), geom.n_angles());
        let offsets = self.scan.offsets();
        let n_m = offsets.len();
        let zg = self.scan.z() * self.gamma;
        let ic = self.scan.ic();
        let mut s_mod = vec![0.0; n_t * n_a * n_m];
        let mut slope = if with_slope { vec![0.0; n_t * n_a * n_m] } else { Vec::new() };
        let fill = |t: usize, out: &mut [f64], mut slope_out: Option<&mut [f64]>| {
            for a in 0..n_a {
                let shift = zg * derivative[[t, a]];
                let att = attenuation[[t, a]];
                for (k, &m) in offsets.iter().enumerate() {
                    let arg = m - params.m_o[a] - params.m_r[t] - shift;
                    let (f, df) = ic.eval_with_deriv(t, arg);
                    out[a * n_m + k] = att * f;
                    if let Some(s) = slope_out.as_deref_mut() {
                        s[a * n_m + k] = df;
                    }
                }
            }
        };
        let row_len = n_a * n_m;
        if with_slope {
            s_mod
                .par_chunks_mut(row_len)
                .zip(slope.par_chunks_mut(row_len))
                .enumerate()
                .for_each(|(t, (out, sl))| fill(t, out, Some(sl)));
        } else {
            s_mod.par_chunks_mut(row_len).enumerate().for_each(|(t, out)| fill(t, out, None));
        }
        let shape = (n_t, n_a, n_m);
        Ok(Evaluation {
            projection,
            derivative,
            attenuation,
            s_mod: Array3::from_shape_vec(shape, s_mod).expect("shape"),
            slope: with_slope.then(|| Array3::from_shape_vec(shape, slope).expect("shape")),
            clamped,
        })
    }

    /// `Rᵀ[a + Dᵀ b]`: one backprojection and one derivative transpose.
    pub fn backproject_chain(&self, a: Array2<f64>, b: &Array2<f64>) -> Result<Image> {
        let geom = self.scan.geometry();
        self.counters.diff_t_adjoint.fetch_add(1, Ordering::Relaxed);
        let combined = a + &diff_t_adjoint_array(b, geom.pixel_size())?;
        self.counters.radon_adjoint.fetch_add(1, Ordering::Relaxed);
        self.projector.adjoint(&Sinogram::new(combined, geom.angles().to_vec(), geom.pixel_size())?)
    }
}

/// Evaluates the forward model with the on-the-fly projector and the scan's γ.
pub fn forward(params: &ModelParams, scan: &ScanData) -> Result<Array3<f64>> {
    let projector = OnTheFly::new(scan.geometry().clone());
    Ok(ForwardModel::new(scan, &projector)?.evaluate(params, false)?.s_mod)
}

/// `s_exp - s_mod`.
pub fn residual(scan: &ScanData, s_mod: &Array3<f64>) -> Result<Array3<f64>> {
    if s_mod.dim() != scan.s_exp().dim() {
        return Err(Error::Shape(format!("s_mod is {:?}, s_exp is {:?}", s_mod.dim(), scan.s_exp().dim())));
    }
    Ok(scan.s_exp() - s_mod)
}
