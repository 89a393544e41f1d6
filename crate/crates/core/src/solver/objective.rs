
use ndarray::Array2;
use rayon::prelude::*;

use super::{Gradient, SolverConfig};
use crate::error::{Error, Result};
use crate::forward_model::{CallCounts, ForwardModel, ModelParams, ScanData};
use crate::projector::{Image, RadonOperator};

/// Packing of the free parameter blocks into one vector: `h` row-major,
/// then `m_o` when drift is enabled, then `m_r` when rings are enabled.
#[derive(Debug, Clone)]
pub(crate) struct ParamLayout {
    n_h: usize,
    n_o: usize,
    n_r: usize,
}

impl ParamLayout {
    pub(crate) fn new(n_pixels: usize, n_angles: usize, config: &SolverConfig) -> Self {
        Self {
            n_h: n_pixels * n_pixels,
            n_o: if config.drift_enabled { n_angles } else { 0 },
            n_r: if config.ring_enabled { n_pixels } else { 0 },
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.n_h + self.n_o + self.n_r
    }

    pub(crate) fn pack(&self, params: &ModelParams) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.len());
        x.extend(params.h.data().iter());
        if self.n_o > 0 {
            x.extend_from_slice(&params.m_o);
        }
        if self.n_r > 0 {
            x.extend_from_slice(&params.m_r);
        }
        x
    }

    pub(crate) fn pack_gradient(&self, grad: &Gradient) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.len());
        x.extend(grad.h.data().iter());
        if let Some(g) = &grad.m_o {
            x.extend_from_slice(g);
        }
        if let Some(g) = &grad.m_r {
            x.extend_from_slice(g);
        }
        x
    }

    /// Free blocks from `x`, fixed blocks from `template`.
    pub(crate) fn unpack(&self, x: &[f64], template: &ModelParams) -> ModelParams {
        let mut params = template.clone();
        let n = template.h.n();
        params.h = Image::from_vec_unchecked(n, x[..self.n_h].to_vec(), template.h.pixel_size());
        if self.n_o > 0 {
            params.m_o.copy_from_slice(&x[self.n_h..self.n_h + self.n_o]);
        }
        if self.n_r > 0 {
            params.m_r.copy_from_slice(&x[self.n_h + self.n_o..]);
        }
        params
    }
}

/// Cost and gradient sharing one model evaluation.
pub(crate) struct Objective<'a> {
    model: ForwardModel<'a>,
    config: &'a SolverConfig,
}

impl<'a> Objective<'a> {
    pub(crate) fn new(scan: &'a ScanData, config: &'a SolverConfig, projector: &'a dyn RadonOperator) -> Result<Self> {
        let model = ForwardModel::new(scan, projector)?.with_gamma(config.gamma)?;
        Ok(Self { model, config })
    }

    pub(crate) fn counts(&self) -> CallCounts {
        self.model.counts()
    }

    /// Projection values above the attenuation cap at `params`.
    pub(crate) fn clamped(&self, params: &ModelParams) -> Result<usize> {
        Ok(self.model.evaluate(params, false)?.clamped)
    }

    fn regularization(&self, h: &Image) -> f64 {
        self.config.lambda * h.data().iter().map(|v| v * v).sum::<f64>()
    }

    pub(crate) fn cost(&self, params: &ModelParams) -> Result<f64> {
        let eval = self.model.evaluate(params, false)?;
        let s_exp = self.model.scan().s_exp();
        let n_am = s_exp.len() / s_exp.dim().0;
        let (exp, model) = (s_exp.as_slice().expect("standard layout"), eval.s_mod.as_slice().expect("standard layout"));
        let partial: Vec<f64> = exp
            .par_chunks(n_am)
            .zip(model.par_chunks(n_am))
            .map(|(e, m)| e.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect();
        let cost = partial.iter().sum::<f64>() + self.regularization(&params.h);
        check_cost(cost, &eval.s_mod)?;
        Ok(cost)
    }

    pub(crate) fn cost_and_grad(&self, params: &ModelParams) -> Result<(f64, Gradient)> {
        let eval = self.model.evaluate(params, true)?;
        let scan = self.model.scan();
        let (n_t, n_a, n_m) = scan.s_exp().dim();
        let row = n_a * n_m;
        let exp = scan.s_exp().as_slice().expect("standard layout");
        let model = eval.s_mod.as_slice().expect("standard layout");
        let slope = eval.slope.as_ref().expect("slope requested");
        let slope = slope.as_slice().expect("standard layout");
        let att = &eval.attenuation;

        // Per detector row: data cost, Σ_m 2r·s_mod and Σ_m 2r·exp(-P)·f′.
        let rows: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..n_t)
            .into_par_iter()
            .map(|t| {
                let range = t * row..(t + 1) * row;
                let (e, m, s) = (&exp[range.clone()], &model[range.clone()], &slope[range]);
                let mut cost = 0.0;
                let mut a_row = vec![0.0; n_a];
                let mut g_row = vec![0.0; n_a];
                for a in 0..n_a {
                    let mut acc_a = 0.0;
                    let mut acc_g = 0.0;
                    for k in 0..n_m {
                        let i = a * n_m + k;
                        let r = e[i] - m[i];
                        cost += r * r;
                        acc_a += 2.0 * r * m[i];
                        acc_g += 2.0 * r * s[i];
                    }
                    a_row[a] = acc_a;
                    g_row[a] = acc_g * att[[t, a]];
                }
                (cost, a_row, g_row)
            })
            .collect();

        let mut cost = self.regularization(&params.h);
        let mut a_term = Array2::zeros((n_t, n_a));
        let mut g_term = Array2::zeros((n_t, n_a));
        for (t, (c, a_row, g_row)) in rows.into_iter().enumerate() {
            cost += c;
            a_term.row_mut(t).assign(&ndarray::ArrayView1::from(&a_row));
            g_term.row_mut(t).assign(&ndarray::ArrayView1::from(&g_row));
        }
        check_cost(cost, &eval.s_mod)?;

        let zg = scan.z() * self.model.gamma();
        let b_term = g_term.mapv(|v| v * zg);
        let mut grad_h = self.model.backproject_chain(a_term, &b_term)?;
        let two_lambda = 2.0 * self.config.lambda;
        grad_h.data_mut().zip_mut_with(params.h.data(), |g, &h| *g += two_lambda * h);

        let grad = Gradient {
            h: grad_h,
            m_o: self.config.drift_enabled.then(|| g_term.sum_axis(ndarray::Axis(0)).to_vec()),
            m_r: self.config.ring_enabled.then(|| g_term.sum_axis(ndarray::Axis(1)).to_vec()),
        };
        if let Some(bad) = grad.h.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite gradient at h pixel {bad}")));
        }
        Ok((cost, grad))
    }
}

fn check_cost(cost: f64, s_mod: &ndarray::Array3<f64>) -> Result<()> {
    if cost.is_finite() {
        return Ok(());
    }
    match s_mod.indexed_iter().find(|(_, v)| !v.is_finite()) {
        Some(((t, a, k), v)) => Err(Error::Numeric(format!("model value {v} at t={t}, angle={a}, offset={k}"))),
        None => Err(Error::Numeric(format!("cost is {cost}"))),
    }
}
