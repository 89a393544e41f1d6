//! Run configuration: JSON file plus command-line overrides.

use std::path::Path;

use clap::Args;
use eitomo_core::simulate::{PhantomSpec, Preset, SimulationSettings};
use eitomo_core::{Geometry, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n_pixels: usize,
    /// Projections over a full turn.
    pub n_angles: usize,
    /// µm.
    pub pixel_size: f64,
    /// µm.
    pub gamma: f64,
    pub lambda: f64,
    /// Sample to detector distance, µm.
    pub z: f64,
    /// Mask offsets of the sample scan, µm.
    pub offsets: Vec<f64>,
    /// Illumination-curve period, µm.
    pub period: f64,
    pub ring_enabled: bool,
    pub drift_enabled: bool,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub history_size: usize,
    pub preset: String,
    pub seed: u64,
    /// Simulate without Poisson noise in the sample scan.
    pub noise_free: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let solver = SolverConfig::default();
        let sim = SimulationSettings::default();
        Self {
            n_pixels: sim.n_pixels,
            n_angles: sim.n_angles,
            pixel_size: sim.pixel_size,
            gamma: solver.gamma,
            // Counts-squared cost with h in µm⁻¹: 1e-2 is negligible here.
            // 1e11 gave the lowest error on the simulation presets.
            lambda: 1e11,
            z: sim.acquisition.z,
            offsets: sim.acquisition.offsets.clone(),
            period: sim.acquisition.ic.period,
            ring_enabled: solver.ring_enabled,
            drift_enabled: solver.drift_enabled,
            max_iters: solver.max_iters,
            rel_tol: solver.rel_tol,
            history_size: solver.history_size,
            preset: Preset::WellSampledFlat.name().into(),
            seed: 0,
            noise_free: false,
        }
    }
}

fn invalid(msg: String) -> CliError {
    CliError::Validation(msg)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pixels < 8 {
            return Err(invalid(format!("n_pixels must be >= 8, got {}", self.n_pixels)));
        }
        if self.n_angles < 2 {
            return Err(invalid(format!("n_angles must be >= 2, got {}", self.n_angles)));
        }
        for (name, v) in [("pixel_size", self.pixel_size), ("period", self.period)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.z >= 0.0 && self.z.is_finite()) {
            return Err(invalid(format!("z must be >= 0, got {}", self.z)));
        }
        if self.offsets.is_empty() || self.offsets.iter().any(|m| !m.is_finite()) {
            return Err(invalid("offsets must be a non-empty list of finite values".into()));
        }
        self.preset()?;
        self.solver().validate()?;
        Ok(())
    }

    pub fn preset(&self) -> Result<Preset> {
        Ok(Preset::from_name(&self.preset)?)
    }

    pub fn geometry(&self) -> Result<Geometry> {
        Ok(Geometry::uniform(self.n_pixels, self.n_angles, self.pixel_size, true)?)
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            lambda: self.lambda,
            gamma: self.gamma,
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            history_size: self.history_size,
            ring_enabled: self.ring_enabled,
            drift_enabled: self.drift_enabled,
        }
    }

    /// Preset settings with this configuration's geometry and optics.
    pub fn simulation(&self) -> Result<SimulationSettings> {
        let mut s = self.preset()?.settings();
        s.phantom = PhantomSpec::granules(self.n_pixels);
        s.n_pixels = self.n_pixels;
        s.n_angles = self.n_angles;
        s.pixel_size = self.pixel_size;
        s.acquisition.z = self.z;
        s.acquisition.gamma = self.gamma;
        s.acquisition.offsets = self.offsets.clone();
        s.acquisition.ic.period = self.period;
        if self.noise_free {
            s.acquisition.exposure = None;
        }
        Ok(s)
    }
}

/// Command-line overrides, one flag per [`RunConfig`] field.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub n_pixels: Option<usize>,
    #[arg(long)]
    pub n_angles: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub pixel_size: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub z: Option<f64>,
    /// Comma-separated list.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub offsets: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub period: Option<f64>,
    #[arg(long)]
    pub ring_enabled: Option<bool>,
    #[arg(long)]
    pub drift_enabled: Option<bool>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub history_size: Option<usize>,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub noise_free: Option<bool>,
}

impl ConfigArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = &self.$f {
                    cfg.$f = v.clone();
                }
            )*};
        }
        set!(
            n_pixels, n_angles, pixel_size, gamma, lambda, z, offsets, period, ring_enabled, drift_enabled,
            max_iters, rel_tol, history_size, preset, seed, noise_free
        );
    }
}
