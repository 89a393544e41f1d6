//! Least-squares reconstruction: cost `Σ r² + λ Σ h²`, its analytic gradient
//! and an L-BFGS driver.
//!
//! All blocks are optimised jointly in their natural units (h in µm⁻¹,
//! offsets in µm) without preconditioning.

mod lbfgs;
mod objective;

use std::time::Instant;

use crate::error::{Error, Result};
use crate::forward_model::{CallCounts, ModelParams, ScanData};
use crate::projector::{Image, OnTheFly, RadonOperator};

use lbfgs::LbfgsOptions;
use objective::{Objective, ParamLayout};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub lambda: f64,
    /// γ used in the refraction term, µm.
    pub gamma: f64,
    pub max_iters: usize,
    /// Stop when one accepted step lowers the cost by less than this fraction.
    pub rel_tol: f64,
    pub history_size: usize,
    pub ring_enabled: bool,
    pub drift_enabled: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-2,
            gamma: 5.0,
            max_iters: 200,
            rel_tol: 1e-9,
            history_size: 10,
            ring_enabled: false,
            drift_enabled: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Domain(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Domain(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if self.max_iters < 1 {
            return Err(Error::Domain("max_iters must be >= 1".into()));
        }
        if self.history_size < 3 {
            return Err(Error::Domain("history_size must be >= 3".into()));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(Error::Domain(format!("rel_tol must be >= 0, got {}", self.rel_tol)));
        }
        Ok(())
    }
}

/// Gradient blocks. `m_o` is `None` when drift is disabled, `m_r` when rings
/// are disabled.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub h: Image,
    pub m_o: Option<Vec<f64>>,
    pub m_r: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Cost and gradient evaluations, line-search probes included.
    pub evaluations: usize,
    pub counts: CallCounts,
    /// Projection values clamped at the attenuation cap at the returned
    /// iterate.
    pub clamped_projections: usize,
    /// `s_exp` was identically zero.
    pub zero_data: bool,
    pub message: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ReconResult {
    pub params: ModelParams,
    /// Cost at the start and after every accepted step.
    pub cost_history: Vec<f64>,
    pub n_iterations: usize,
    pub converged: bool,
    /// Seconds.
    pub wall_time: f64,
    pub diagnostics: Diagnostics,
}

fn check_params(params: &ModelParams, config: &SolverConfig) -> Result<()> {
    if params.ring_enabled != config.ring_enabled {
        return Err(Error::Domain("params.ring_enabled differs from the solver configuration".into()));
    }
    Ok(())
}

pub fn cost(params: &ModelParams, scan: &ScanData, config: &SolverConfig) -> Result<f64> {
    config.validate()?;
    let projector = OnTheFly::new(scan.geometry().clone());
    Objective::new(scan, config, &projector)?.cost(params)
}

pub fn grad(params: &ModelParams, scan: &ScanData, config: &SolverConfig) -> Result<Gradient> {
    config.validate()?;
    let projector = OnTheFly::new(scan.geometry().clone());
    Ok(Objective::new(scan, config, &projector)?.cost_and_grad(params)?.1)
}

/// Cost and gradient from one shared model evaluation, with the operator
/// calls it made.
pub fn cost_and_grad(
    params: &ModelParams,
    scan: &ScanData,
    config: &SolverConfig,
    projector: &dyn RadonOperator,
) -> Result<(f64, Gradient, CallCounts)> {
    config.validate()?;
    let objective = Objective::new(scan, config, projector)?;
    let (c, g) = objective.cost_and_grad(params)?;
    Ok((c, g, objective.counts()))
}

/// Reconstructs with the on-the-fly projector.
pub fn minimize(scan: &ScanData, config: &SolverConfig, initial: Option<ModelParams>) -> Result<ReconResult> {
    let projector = OnTheFly::new(scan.geometry().clone());
    minimize_with(scan, config, initial, &projector)
}

pub fn minimize_with(
    scan: &ScanData,
    config: &SolverConfig,
    initial: Option<ModelParams>,
    projector: &dyn RadonOperator,
) -> Result<ReconResult> {
    config.validate()?;
    let start = Instant::now();
    let geom = scan.geometry();
    let template = match initial {
        Some(p) => {
            check_params(&p, config)?;
            p.validate(geom)?;
            p
        }
        None => ModelParams::zeros(geom, config.ring_enabled),
    };
    let zero_data = scan.s_exp().iter().all(|&v| v == 0.0);
    if zero_data {
        log::warn!("s_exp is identically zero; h is driven towards the attenuation cap");
    }
    let objective = Objective::new(scan, config, projector)?;
    let layout = ParamLayout::new(geom.n_pixels(), geom.n_angles(), config);
    let opts = LbfgsOptions {
        history: config.history_size,
        max_iters: config.max_iters,
        rel_tol: config.rel_tol,
        ..LbfgsOptions::default()
    };
    let outcome = lbfgs::minimize(
        layout.pack(&template),
        |x| {
            let (c, g) = objective.cost_and_grad(&layout.unpack(x, &template))?;
            Ok((c, layout.pack_gradient(&g)))
        },
        &opts,
    )?;
    if let Some(msg) = &outcome.message {
        log::warn!("{msg}");
    }
    let params = layout.unpack(&outcome.x, &template);
    let counts = objective.counts();
    let clamped = objective.clamped(&params)?;
    if clamped > 0 {
        log::warn!("{clamped} projection values of the result exceed the attenuation cap");
    }
    Ok(ReconResult {
        params,
        cost_history: outcome.cost_history,
        n_iterations: outcome.iterations,
        converged: outcome.converged,
        wall_time: start.elapsed().as_secs_f64(),
        diagnostics: Diagnostics {
            evaluations: outcome.evaluations,
            counts,
            clamped_projections: clamped,
            zero_data,
            message: outcome.message,
        },
    })
}

/// Moves the mean of `m_r` into `m_o` so that `m_r` has zero mean.
pub fn gauge_fix(params: &ModelParams) -> ModelParams {
    let mut out = params.clone();
    if out.m_r.is_empty() {
        return out;
    }
    let mean = out.m_r.iter().sum::<f64>() / out.m_r.len() as f64;
    if mean != 0.0 {
        out.m_r.iter_mut().for_each(|v| *v -= mean);
        out.m_o.iter_mut().for_each(|v| *v += mean);
    }
    out
}

#[cfg(test)]
mod tests;
