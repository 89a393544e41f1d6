//! Synthetic phantoms, illumination-curve models, flat-field scans and
//! full scan synthesis.
//!
//! Every random draw comes from a ChaCha8 stream keyed by `(seed, domain,
//! detector pixel)`, so outputs depend only on the seed and never on
//! scheduling.

use ndarray::{Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;

use crate::error::{ensure_finite, Error, Result};
use crate::forward_model::{forward, ModelParams, ScanData};
use crate::illumination::{ic_from_scans, IlluminationCurve};
use crate::projector::{Geometry, Image};

const STREAM_JITTER: u64 = 1;
const STREAM_FLAT: u64 = 2;
const STREAM_SCAN: u64 = 3;

fn stream(seed: u64, domain: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << 40) | index as u64);
    rng
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
    if mean > 0.0 {
        Poisson::new(mean).expect("positive finite mean").sample(rng)
    } else {
        0.0
    }
}

/// A disk in pixel coordinates (`x` is the column, `y` the row).
#[derive(Debug, Clone, PartialEq)]
pub struct Disk {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    /// µm⁻¹.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhantomSpec {
    /// Painted in order; later disks cover earlier ones.
    pub disks: Vec<Disk>,
    pub background: f64,
}

impl PhantomSpec {
    /// Three granules of different plastics, scaled to an `n`-pixel grid.
    /// Values are in µm⁻¹.
    pub fn granules(n: usize) -> Self {
        let c = (n as f64 - 1.0) / 2.0;
        let (orbit, radius) = (0.24 * n as f64, 0.16 * n as f64);
        let values = [1.0e-4, 0.62e-4, 0.48e-4];
        let disks = values
            .iter()
            .enumerate()
            .map(|(i, &value)| {
                let angle = std::f64::consts::FRAC_PI_2 + i as f64 * std::f64::consts::TAU / 3.0;
                Disk { x: c + orbit * angle.cos(), y: c - orbit * angle.sin(), radius, value }
            })
            .collect();
        Self { disks, background: 0.0 }
    }
}

/// Rasterises the phantom with 4×4 supersampling per pixel.
pub fn make_phantom(spec: &PhantomSpec, n: usize, pixel_size: f64) -> Result<Image> {
    if n < 2 {
        return Err(Error::Shape(format!("phantom needs at least 2 pixels, got {n}")));
    }
    let c = (n as f64 - 1.0) / 2.0;
    for (i, d) in spec.disks.iter().enumerate() {
        if !(d.radius > 0.0) || !d.value.is_finite() || !d.x.is_finite() || !d.y.is_finite() {
            return Err(Error::Domain(format!("disk {i} needs a positive radius and finite values")));
        }
        if (d.x - c).hypot(d.y - c) + d.radius > n as f64 / 2.0 {
            return Err(Error::Domain(format!("disk {i} extends beyond the field of view")));
        }
    }
    if !spec.background.is_finite() {
        return Err(Error::Domain("background must be finite".into()));
    }
    const SUB: usize = 4;
    let data = Array2::from_shape_fn((n, n), |(i, j)| {
        let mut v = spec.background;
        for d in &spec.disks {
            let mut inside = 0usize;
            for a in 0..SUB {
                for b in 0..SUB {
                    let y = i as f64 + (a as f64 + 0.5) / SUB as f64 - 0.5;
                    let x = j as f64 + (b as f64 + 0.5) / SUB as f64 - 0.5;
                    if (x - d.x).hypot(y - d.y) <= d.radius {
                        inside += 1;
                    }
                }
            }
            let cover = inside as f64 / (SUB * SUB) as f64;
            if cover == 1.0 {
                v = d.value;
            } else if cover > 0.0 {
                v = v * (1.0 - cover) + d.value * cover;
            }
        }
        v
    });
    Image::new(data, pixel_size)
}

/// Periodic Gaussian peak on a constant pedestal, with per-pixel peak
/// variation. The peak sits at `m = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct IcModel {
    /// Counts at the peak per step and repeat.
    pub peak: f64,
    pub pedestal: f64,
    /// Gaussian σ, µm.
    pub width: f64,
    /// µm.
    pub period: f64,
    /// Relative standard deviation of the per-pixel peak height.
    pub jitter: f64,
    pub jitter_seed: u64,
}

impl Default for IcModel {
    fn default() -> Self {
        Self { peak: 400.0, pedestal: 40.0, width: 8.0, period: 38.0, jitter: 0.02, jitter_seed: 7 }
    }
}

impl IcModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.peak >= 0.0 && self.pedestal >= 0.0 && self.peak.is_finite() && self.pedestal.is_finite()) {
            return Err(Error::Domain("peak and pedestal counts must be >= 0".into()));
        }
        if !(self.width > 0.0 && self.period > 0.0 && self.width.is_finite() && self.period.is_finite()) {
            return Err(Error::Domain("width and period must be > 0".into()));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::Domain("jitter must be >= 0".into()));
        }
        Ok(())
    }

    /// Per-pixel peak multipliers.
    pub fn peak_scales(&self, n_pixels: usize) -> Vec<f64> {
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        (0..n_pixels)
            .map(|t| {
                let mut rng = stream(self.jitter_seed, STREAM_JITTER, t);
                (1.0 + self.jitter * normal.sample(&mut rng)).max(0.0)
            })
            .collect()
    }

    /// Expected counts at offset `m` for a pixel with peak multiplier `scale`.
    pub fn mean_counts(&self, scale: f64, m: f64) -> f64 {
        let r = (m / self.period).round();
        let base = m - r * self.period;
        let peak: f64 = (-2..=2)
            .map(|j| {
                let d = base - j as f64 * self.period;
                (-d * d / (2.0 * self.width * self.width)).exp()
            })
            .sum();
        self.pedestal + self.peak * scale * peak
    }

    /// `n_steps` offsets covering one period, starting half a period before
    /// the peak.
    pub fn step_offsets(&self, n_steps: usize) -> Vec<f64> {
        (0..n_steps).map(|k| -self.period / 2.0 + k as f64 * self.period / n_steps as f64).collect()
    }

    pub fn peak_position(&self) -> f64 {
        0.0
    }

    /// Slope position 9 µm above the peak.
    pub fn working_offset(&self) -> f64 {
        self.peak_position() + 9.0
    }

    /// Noise-free curve sampled at the scan steps.
    pub fn expected_flat(&self, n_pixels: usize, n_steps: usize) -> Result<IlluminationCurve> {
        self.validate()?;
        let scales = self.peak_scales(n_pixels);
        let offsets = self.step_offsets(n_steps);
        let samples = Array2::from_shape_fn((n_pixels, n_steps), |(t, k)| self.mean_counts(scales[t], offsets[k]));
        IlluminationCurve::uniform(samples, offsets[0], self.period)
    }
}

/// Poisson flat-field scans `[N_t × n_steps × n_repeats]` over one period.
pub fn sample_flatfield(model: &IcModel, n_pixels: usize, n_steps: usize, n_repeats: usize, seed: u64) -> Result<Array3<f64>> {
    model.validate()?;
    if n_steps < 4 {
        return Err(Error::Domain(format!("need at least 4 steps, got {n_steps}")));
    }
    if n_repeats < 1 {
        return Err(Error::Domain("need at least one repeat".into()));
    }
    let scales = model.peak_scales(n_pixels);
    let offsets = model.step_offsets(n_steps);
    let rows: Vec<Vec<f64>> = (0..n_pixels)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, STREAM_FLAT, t);
            let mut row = Vec::with_capacity(n_steps * n_repeats);
            for &m in &offsets {
                let mean = model.mean_counts(scales[t], m);
                for _ in 0..n_repeats {
                    row.push(poisson(&mut rng, mean));
                }
            }
            row
        })
        .collect();
    Ok(Array3::from_shape_vec((n_pixels, n_steps, n_repeats), rows.concat()).expect("shape"))
}

/// Mask drift `m_o(θ)` as a function of scan progress `p = i / N_θ`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DriftSpec {
    #[default]
    None,
    Constant { amplitude: f64 },
    /// `amplitude · p`.
    Linear { amplitude: f64 },
    /// `amplitude · sin(2π · cycles · p)`.
    Sinusoid { amplitude: f64, cycles: f64 },
}

impl DriftSpec {
    pub fn offsets(&self, n_angles: usize) -> Result<Vec<f64>> {
        let progress = |i: usize| i as f64 / n_angles as f64;
        let out: Vec<f64> = match *self {
            DriftSpec::None => vec![0.0; n_angles],
            DriftSpec::Constant { amplitude } => vec![amplitude; n_angles],
            DriftSpec::Linear { amplitude } => (0..n_angles).map(|i| amplitude * progress(i)).collect(),
            DriftSpec::Sinusoid { amplitude, cycles } => (0..n_angles)
                .map(|i| amplitude * (std::f64::consts::TAU * cycles * progress(i)).sin())
                .collect(),
        };
        ensure_finite(&out, "drift")?;
        Ok(out)
    }
}

/// Acquisition settings for [`synthesize_scan`].
#[derive(Debug, Clone, PartialEq)]
pub struct Acquisition {
    pub ic: IcModel,
    /// Steps per period of the illumination-curve grid.
    pub n_steps: usize,
    pub drift: DriftSpec,
    /// Mask offsets of the sample scan, µm.
    pub offsets: Vec<f64>,
    /// Exposure relative to one flat-field repeat. `None` disables noise.
    pub exposure: Option<f64>,
    /// µm.
    pub z: f64,
    /// µm.
    pub gamma: f64,
}

/// Synthesises a sample scan of `phantom`.
///
/// The noise-free signal is exactly [`forward`] at the true parameters with
/// the noise-free flat field on the `n_steps` grid. Poisson counts are drawn
/// at `exposure` times that mean and scaled back to one-repeat units. The
/// returned scan carries the noise-free flat; swap in a measured one with
/// [`ScanData::with_ic`].
pub fn synthesize_scan(phantom: &Image, acq: &Acquisition, geom: &Geometry, seed: u64) -> Result<ScanData> {
    let n = geom.n_pixels();
    if phantom.n() != n {
        return Err(Error::Shape(format!("phantom is {0}x{0}, geometry has {n} pixels", phantom.n())));
    }
    if let Some(e) = acq.exposure {
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::Domain(format!("exposure must be positive, got {e}")));
        }
    }
    let ic = acq.ic.expected_flat(n, acq.n_steps)?;
    let n_m = acq.offsets.len();
    let blank = Array3::zeros((n, geom.n_angles(), n_m));
    let scan = ScanData::new(blank, acq.offsets.clone(), ic, acq.z, acq.gamma, geom.clone())?;
    let truth = true_params(phantom, acq, geom)?;
    let mut s = forward(&truth, &scan)?;
    if let Some(exposure) = acq.exposure {
        let row = geom.n_angles() * n_m;
        s.as_slice_mut()
            .expect("standard layout")
            .par_chunks_mut(row)
            .enumerate()
            .for_each(|(t, values)| {
                let mut rng = stream(seed, STREAM_SCAN, t);
                for v in values {
                    *v = poisson(&mut rng, *v * exposure) / exposure;
                }
            });
    }
    scan.with_s_exp(s)
}

/// Parameters that generated a synthetic scan.
pub fn true_params(phantom: &Image, acq: &Acquisition, geom: &Geometry) -> Result<ModelParams> {
    let mut p = ModelParams::zeros(geom, false);
    p.h = phantom.clone();
    p.m_o = acq.drift.offsets(geom.n_angles())?;
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// One flat-field repeat.
    UndersampledFlat,
    /// Twenty flat-field repeats.
    WellSampledFlat,
    /// Well-sampled flat with sinusoidal mask drift.
    Drift,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::UndersampledFlat, Preset::WellSampledFlat, Preset::Drift];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::UndersampledFlat => "undersampled-flat",
            Preset::WellSampledFlat => "well-sampled-flat",
            Preset::Drift => "drift",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::Domain(format!("unknown preset {name:?}")))
    }

    pub fn settings(&self) -> SimulationSettings {
        let base = SimulationSettings::default();
        match self {
            Preset::UndersampledFlat => SimulationSettings { flat_repeats: 1, ..base },
            Preset::WellSampledFlat => base,
            Preset::Drift => SimulationSettings {
                acquisition: Acquisition {
                    drift: DriftSpec::Sinusoid { amplitude: 1.5, cycles: 1.0 },
                    ..base.acquisition.clone()
                },
                ..base
            },
        }
    }
}

/// Everything needed to simulate one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSettings {
    pub n_pixels: usize,
    pub n_angles: usize,
    /// µm.
    pub pixel_size: f64,
    pub phantom: PhantomSpec,
    pub acquisition: Acquisition,
    pub flat_repeats: usize,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        let n = 128;
        let ic = IcModel::default();
        let offsets = vec![ic.working_offset()];
        Self {
            n_pixels: n,
            n_angles: 180,
            pixel_size: 50.0,
            phantom: PhantomSpec::granules(n),
            acquisition: Acquisition {
                ic,
                n_steps: 33,
                drift: DriftSpec::None,
                offsets,
                exposure: Some(10.0),
                z: 200.0,
                gamma: 5.0,
            },
            flat_repeats: 20,
        }
    }
}

impl SimulationSettings {
    pub fn geometry(&self) -> Result<Geometry> {
        Geometry::uniform(self.n_pixels, self.n_angles, self.pixel_size, true)
    }
}

/// A simulated dataset. `scan` carries the flat field measured from
/// `flat_scans`.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub truth: ModelParams,
    pub flat_scans: Array3<f64>,
    pub scan: ScanData,
}

pub fn simulate(settings: &SimulationSettings, seed: u64) -> Result<Simulation> {
    let geom = settings.geometry()?;
    let phantom = make_phantom(&settings.phantom, settings.n_pixels, settings.pixel_size)?;
    let acq = &settings.acquisition;
    let scan = synthesize_scan(&phantom, acq, &geom, seed)?;
    // Distinct seed domain for the flat so it is independent of the scan.
    let flat_scans = sample_flatfield(&acq.ic, settings.n_pixels, acq.n_steps, settings.flat_repeats, seed ^ 0x5eed_f1a7)?;
    let ic = ic_from_scans(&flat_scans, &acq.ic.step_offsets(acq.n_steps), acq.ic.period)?;
    Ok(Simulation { truth: true_params(&phantom, acq, &geom)?, flat_scans, scan: scan.with_ic(ic)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_phantom_is_background() {
        let img = make_phantom(&PhantomSpec { disks: vec![], background: 3e-5 }, 16, 1.0).unwrap();
        assert!(img.data().iter().all(|&v| v == 3e-5));
    }

    #[test]
    fn fully_covered_pixel_has_exact_value() {
        let spec = PhantomSpec { disks: vec![Disk { x: 10.0, y: 12.0, radius: 3.0, value: 0.123 }], background: 0.5 };
        let img = make_phantom(&spec, 32, 1.0).unwrap();
        assert_eq!(img.data()[[12, 10]], 0.123);
        assert_eq!(img.data()[[0, 0]], 0.5);
    }

    #[test]
    fn disk_area_matches_analytic() {
        let spec = PhantomSpec { disks: vec![Disk { x: 31.7, y: 32.2, radius: 20.0, value: 1.0 }], background: 0.0 };
        let area: f64 = make_phantom(&spec, 64, 1.0).unwrap().data().sum();
        let exact = std::f64::consts::PI * 400.0;
        assert!((area - exact).abs() < 0.005 * exact, "{area} vs {exact}");
    }

    #[test]
    fn disk_outside_field_of_view_is_rejected() {
        let spec = PhantomSpec { disks: vec![Disk { x: 2.0, y: 16.0, radius: 4.0, value: 1.0 }], background: 0.0 };
        assert!(matches!(make_phantom(&spec, 32, 1.0), Err(Error::Domain(_))));
        let bad = PhantomSpec { disks: vec![Disk { x: 16.0, y: 16.0, radius: 0.0, value: 1.0 }], background: 0.0 };
        assert!(matches!(make_phantom(&bad, 32, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn granule_preset_fits() {
        for n in [64, 128, 220] {
            make_phantom(&PhantomSpec::granules(n), n, 50.0).unwrap();
        }
    }

    #[test]
    fn zero_peak_gives_zero_counts() {
        let model = IcModel { peak: 0.0, pedestal: 0.0, ..IcModel::default() };
        let scans = sample_flatfield(&model, 8, 33, 3, 1).unwrap();
        assert!(scans.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn flat_repeats_average_to_model_mean() {
        let model = IcModel::default();
        let reps = 400;
        let scans = sample_flatfield(&model, 6, 12, reps, 2).unwrap();
        let scales = model.peak_scales(6);
        let offsets = model.step_offsets(12);
        for (t, &scale) in scales.iter().enumerate() {
            for (k, &m) in offsets.iter().enumerate() {
                let mean = model.mean_counts(scale, m);
                let avg = scans.slice(ndarray::s![t, k, ..]).mean().unwrap();
                assert!((avg - mean).abs() <= 3.0 * (mean / reps as f64).sqrt() + 1e-12, "{avg} vs {mean}");
            }
        }
    }

    #[test]
    fn flat_field_is_deterministic() {
        let model = IcModel::default();
        let a = sample_flatfield(&model, 8, 33, 2, 5).unwrap();
        assert_eq!(a, sample_flatfield(&model, 8, 33, 2, 5).unwrap());
        assert_ne!(a, sample_flatfield(&model, 8, 33, 2, 6).unwrap());
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        assert_eq!(a, pool.install(|| sample_flatfield(&model, 8, 33, 2, 5).unwrap()));
    }

    #[test]
    fn ic_model_shape() {
        let model = IcModel { jitter: 0.0, ..IcModel::default() };
        let at = |m| model.mean_counts(1.0, m);
        assert!(at(0.0) > at(4.0) && at(4.0) > at(9.0) && at(9.0) > at(19.0));
        assert!((at(5.0) - at(-5.0)).abs() < 1e-9);
        assert!((at(3.0) - at(3.0 + 38.0)).abs() < 1e-9);
        assert_eq!(model.working_offset(), 9.0);
        let offsets = model.step_offsets(33);
        assert_eq!(offsets.len(), 33);
        assert!((offsets[1] - offsets[0] - 38.0 / 33.0).abs() < 1e-12);
    }

    fn small_settings() -> SimulationSettings {
        let n = 32;
        let mut s = SimulationSettings { n_pixels: n, n_angles: 24, phantom: PhantomSpec::granules(n), ..Default::default() };
        s.acquisition.exposure = None;
        s
    }

    #[test]
    fn noise_free_scan_matches_forward_model() {
        let s = small_settings();
        let geom = s.geometry().unwrap();
        let phantom = make_phantom(&s.phantom, s.n_pixels, s.pixel_size).unwrap();
        let acq = Acquisition { drift: DriftSpec::Sinusoid { amplitude: 1.0, cycles: 2.0 }, ..s.acquisition.clone() };
        let scan = synthesize_scan(&phantom, &acq, &geom, 3).unwrap();
        let model = forward(&true_params(&phantom, &acq, &geom).unwrap(), &scan).unwrap();
        assert_eq!(scan.s_exp(), &model);
    }

    #[test]
    fn empty_noise_free_scan_is_the_flat() {
        let s = small_settings();
        let geom = s.geometry().unwrap();
        let phantom = Image::zeros(s.n_pixels, s.pixel_size);
        let scan = synthesize_scan(&phantom, &s.acquisition, &geom, 3).unwrap();
        let m = s.acquisition.offsets[0];
        for ((t, _, _), &v) in scan.s_exp().indexed_iter() {
            assert_eq!(v, scan.ic().eval(t, m));
        }
        // On the step grid the interpolant reproduces the model exactly.
        let scales = s.acquisition.ic.peak_scales(s.n_pixels);
        let k = 5;
        let mk = s.acquisition.ic.step_offsets(33)[k];
        for (t, &scale) in scales.iter().enumerate() {
            let expect = s.acquisition.ic.mean_counts(scale, mk);
            assert!((scan.ic().eval(t, mk) - expect).abs() < 1e-9 * expect);
        }
    }

    #[test]
    fn pure_absorber_counts_stay_within_poisson_bands() {
        let mut s = small_settings();
        s.acquisition.exposure = Some(1000.0);
        // Vanishing refraction: only attenuation remains.
        s.acquisition.z = 1e-9;
        let geom = s.geometry().unwrap();
        let phantom = make_phantom(&s.phantom, s.n_pixels, s.pixel_size).unwrap();
        let scan = synthesize_scan(&phantom, &s.acquisition, &geom, 4).unwrap();
        let p = crate::projector::radon_forward(&phantom, &geom).unwrap();
        let m = s.acquisition.offsets[0];
        let mut outside = 0usize;
        for ((t, a, _), &v) in scan.s_exp().indexed_iter() {
            let f = scan.ic().eval(t, m);
            let mean = f * (-p.data()[[t, a]]).exp();
            let sigma = (mean / 1000.0).sqrt();
            if (v - mean).abs() > 3.0 * sigma {
                outside += 1;
            }
        }
        // 3σ bands hold for about 99.7% of entries.
        assert!(outside as f64 <= 0.01 * scan.s_exp().len() as f64, "{outside}");
    }

    #[test]
    fn presets_are_consistent() {
        assert_eq!(Preset::from_name("drift").unwrap(), Preset::Drift);
        assert!(Preset::from_name("other").is_err());
        assert_eq!(Preset::UndersampledFlat.settings().flat_repeats, 1);
        assert_eq!(Preset::WellSampledFlat.settings().flat_repeats, 20);
        assert_ne!(Preset::Drift.settings().acquisition.drift, DriftSpec::None);
        let s = SimulationSettings::default();
        assert_eq!(s.acquisition.n_steps, 33);
        assert_eq!(s.acquisition.offsets, vec![9.0]);
    }

    #[test]
    fn simulation_is_deterministic() {
        let s = small_settings();
        let a = simulate(&s, 9).unwrap();
        let b = simulate(&s, 9).unwrap();
        assert_eq!(a.scan, b.scan);
        assert_eq!(a.flat_scans, b.flat_scans);
        assert_eq!(a.scan.ic().n_repeats_averaged(), 20);
    }

    #[test]
    fn drift_forms() {
        assert_eq!(DriftSpec::None.offsets(3).unwrap(), vec![0.0; 3]);
        assert_eq!(DriftSpec::Constant { amplitude: 2.0 }.offsets(2).unwrap(), vec![2.0, 2.0]);
        assert_eq!(DriftSpec::Linear { amplitude: 4.0 }.offsets(4).unwrap(), vec![0.0, 1.0, 2.0, 3.0]);
        let s = DriftSpec::Sinusoid { amplitude: 2.0, cycles: 1.0 }.offsets(4).unwrap();
        assert!((s[1] - 2.0).abs() < 1e-12 && (s[3] + 2.0).abs() < 1e-12);
    }
}
