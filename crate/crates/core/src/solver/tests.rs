use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::forward_model::forward;
use crate::illumination::IlluminationCurve;
use crate::projector::{Geometry, LookupTable};

const PERIOD: f64 = 24.0;

fn random_ic(rng: &mut ChaCha8Rng, n_t: usize) -> IlluminationCurve {
    let n_m = 12;
    let samples = Array2::from_shape_fn((n_t, n_m), |(_, k)| {
        let phase = std::f64::consts::TAU * k as f64 / n_m as f64;
        60.0 + 40.0 * phase.cos() + rng.random_range(-3.0..3.0)
    });
    IlluminationCurve::uniform(samples, 0.0, PERIOD).unwrap()
}

fn random_params(rng: &mut ChaCha8Rng, geom: &Geometry, ring: bool) -> ModelParams {
    let n = geom.n_pixels();
    let h = Array2::from_shape_fn((n, n), |_| rng.random_range(0.0..0.02));
    let mut p = ModelParams::zeros(geom, ring);
    p.h = Image::new(h, geom.pixel_size()).unwrap();
    p.m_o = (0..geom.n_angles()).map(|_| rng.random_range(-2.0..2.0)).collect();
    if ring {
        p.m_r = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    }
    p
}

/// Small random instance whose data do not fit the parameters exactly.
fn instance(seed: u64, ring: bool) -> (ScanData, ModelParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geom = Geometry::uniform(8, 4, 2.0, true).unwrap();
    let ic = random_ic(&mut rng, 8);
    let offsets = vec![5.0, 9.5];
    let s_exp = Array3::from_shape_fn((8, 4, 2), |_| rng.random_range(10.0..90.0));
    let scan = ScanData::new(s_exp, offsets, ic, 4.0, 5.0, geom.clone()).unwrap();
    let params = random_params(&mut rng, &geom, ring);
    (scan, params)
}

fn full_config(lambda: f64) -> SolverConfig {
    SolverConfig { lambda, ring_enabled: true, drift_enabled: true, ..SolverConfig::default() }
}

mod oracle {
    use super::*;

    pub fn radon(h: &Image, geom: &Geometry) -> Array2<f64> {
        let n = geom.n_pixels();
        let c = geom.center();
        let radius = std::f64::consts::SQRT_2 * (c + 1.0);
        let mut out = Array2::zeros((n, geom.n_angles()));
        for t in 0..n {
            for (a, &theta) in geom.angles().iter().enumerate() {
                let u = t as f64 - c;
                let half = radius * radius - u * u;
                if half <= 0.0 {
                    continue;
                }
                let k_max = (half.sqrt() / geom.step()).floor() as i64;
                let mut sum = 0.0;
                for k in -k_max..=k_max {
                    let s = k as f64 * geom.step();
                    let x = c + u * theta.cos() - s * theta.sin();
                    let y = c + u * theta.sin() + s * theta.cos();
                    for i in 0..n {
                        for j in 0..n {
                            let wy = 1.0 - (y - i as f64).abs();
                            let wx = 1.0 - (x - j as f64).abs();
                            if wy > 0.0 && wx > 0.0 {
                                sum += wy * wx * h.data()[[i, j]];
                            }
                        }
                    }
                }
                out[[t, a]] = sum * geom.step() * geom.pixel_size();
            }
        }
        out
    }

    pub fn ic(curve: &IlluminationCurve, t: usize, m: f64) -> f64 {
        let n = curve.n_offsets() as i64;
        let u = (m - curve.origin()).rem_euclid(curve.period()) / curve.spacing();
        let k = u.floor() as i64;
        let s = u - k as f64;
        let p = |i: i64| curve.samples()[[t, i.rem_euclid(n) as usize]];
        let basis = [
            (-s * s * s + 2.0 * s * s - s) / 2.0,
            (3.0 * s * s * s - 5.0 * s * s + 2.0) / 2.0,
            (-3.0 * s * s * s + 4.0 * s * s + s) / 2.0,
            (s * s * s - s * s) / 2.0,
        ];
        (0..4).map(|j| basis[j] * p(k - 1 + j as i64)).sum()
    }

    pub fn cost(params: &ModelParams, scan: &ScanData, lambda: f64, gamma: f64) -> f64 {
        let geom = scan.geometry();
        let p = radon(&params.h, geom);
        let n = geom.n_pixels();
        let ps = geom.pixel_size();
        let mut total = 0.0;
        for t in 0..n {
            for a in 0..geom.n_angles() {
                let d = if t == 0 {
                    (p[[1, a]] - p[[0, a]]) / ps
                } else if t == n - 1 {
                    (p[[n - 1, a]] - p[[n - 2, a]]) / ps
                } else {
                    (p[[t + 1, a]] - p[[t - 1, a]]) / (2.0 * ps)
                };
                for (k, &m) in scan.offsets().iter().enumerate() {
                    let arg = m - params.m_o[a] - params.m_r[t] - scan.z() * gamma * d;
                    let model = (-p[[t, a]]).exp() * ic(scan.ic(), t, arg);
                    let r = scan.s_exp()[[t, a, k]] - model;
                    total += r * r;
                }
            }
        }
        total + lambda * params.h.data().iter().map(|v| v * v).sum::<f64>()
    }
}

#[test]
fn cost_matches_scalar_oracle() {
    for seed in 0..5 {
        let (scan, params) = instance(seed, true);
        let config = full_config(0.3);
        let fast = cost(&params, &scan, &config).unwrap();
        let slow = oracle::cost(&params, &scan, 0.3, config.gamma);
        assert!((fast - slow).abs() <= 1e-12 * slow, "{fast} vs {slow}");
    }
}

#[test]
fn exact_fit_costs_only_regularisation() {
    let (scan, params) = instance(3, true);
    let exact = scan.clone().with_s_exp(forward(&params, &scan).unwrap()).unwrap();
    let mut config = full_config(0.0);
    config.gamma = scan.gamma();
    assert_eq!(cost(&params, &exact, &config).unwrap(), 0.0);
    let g = grad(&params, &exact, &config).unwrap();
    assert!(g.h.data().iter().all(|&v| v == 0.0));
    assert!(g.m_o.unwrap().iter().all(|&v| v == 0.0));
    assert!(g.m_r.unwrap().iter().all(|&v| v == 0.0));
    config.lambda = 0.7;
    let reg = 0.7 * params.h.data().iter().map(|v| v * v).sum::<f64>();
    assert_eq!(cost(&params, &exact, &config).unwrap(), reg);
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, x| a.max(x.abs()))
}

#[test]
fn gradient_matches_finite_differences() {
    let step = 1e-6;
    for seed in 0..20 {
        let (scan, params) = instance(100 + seed, true);
        let config = full_config(0.5);
        let g = grad(&params, &scan, &config).unwrap();
        let c = |p: &ModelParams| cost(p, &scan, &config).unwrap();

        let mut err_h: f64 = 0.0;
        for idx in 0..params.h.data().len() {
            let (i, j) = (idx / 8, idx % 8);
            let mut plus = params.clone();
            plus.h.data_mut()[[i, j]] += step;
            let mut minus = params.clone();
            minus.h.data_mut()[[i, j]] -= step;
            let fd = (c(&plus) - c(&minus)) / (2.0 * step);
            err_h = err_h.max((fd - g.h.data()[[i, j]]).abs());
        }
        let rel_h = err_h / max_abs(g.h.data().iter().copied());
        assert!(rel_h < 1e-4, "seed {seed}: h block relative error {rel_h}");

        let check_block = |analytic: &[f64], perturb: &dyn Fn(&mut ModelParams, usize, f64), name: &str| {
            let mut err: f64 = 0.0;
            for (i, &an) in analytic.iter().enumerate() {
                let mut plus = params.clone();
                perturb(&mut plus, i, step);
                let mut minus = params.clone();
                perturb(&mut minus, i, -step);
                let fd = (c(&plus) - c(&minus)) / (2.0 * step);
                err = err.max((fd - an).abs());
            }
            let rel = err / max_abs(analytic.iter().copied());
            assert!(rel < 1e-4, "seed {seed}: {name} block relative error {rel}");
        };
        check_block(g.m_o.as_ref().unwrap(), &|p, i, d| p.m_o[i] += d, "m_o");
        check_block(g.m_r.as_ref().unwrap(), &|p, i, d| p.m_r[i] += d, "m_r");
    }
}

#[test]
fn disabled_blocks_are_omitted() {
    let (scan, params) = instance(7, false);
    let config = SolverConfig { ring_enabled: false, drift_enabled: false, ..SolverConfig::default() };
    let g = grad(&params, &scan, &config).unwrap();
    assert!(g.m_o.is_none() && g.m_r.is_none());
}

#[test]
fn gauge_direction_is_flat() {
    for seed in 0..5 {
        let (scan, params) = instance(200 + seed, true);
        let config = full_config(0.1);
        let g = grad(&params, &scan, &config).unwrap();
        let (go, gr) = (g.m_o.unwrap(), g.m_r.unwrap());
        let directional: f64 = go.iter().sum::<f64>() - gr.iter().sum::<f64>();
        let scale: f64 = go.iter().chain(&gr).map(|v| v.abs()).sum();
        assert!(directional.abs() <= 1e-10 * scale, "{directional} vs {scale}");

        let base = cost(&params, &scan, &config).unwrap();
        let mut shifted = params.clone();
        shifted.m_o.iter_mut().for_each(|v| *v += 1.37);
        shifted.m_r.iter_mut().for_each(|v| *v -= 1.37);
        let moved = cost(&shifted, &scan, &config).unwrap();
        assert!((moved - base).abs() < 1e-12 * base);
    }
}

#[test]
fn one_projection_per_cost_and_gradient() {
    let (scan, params) = instance(11, true);
    let op = OnTheFly::new(scan.geometry().clone());
    let (_, _, counts) = cost_and_grad(&params, &scan, &full_config(0.1), &op).unwrap();
    assert_eq!(counts, CallCounts { radon_forward: 1, radon_adjoint: 1, diff_t: 1, diff_t_adjoint: 1 });
}

#[test]
fn lookup_and_on_the_fly_agree() {
    let (scan, params) = instance(12, true);
    let config = full_config(0.1);
    let a = OnTheFly::new(scan.geometry().clone());
    let b = crate::projector::build_lookup(scan.geometry(), usize::MAX).unwrap();
    let (ca, ga, _) = cost_and_grad(&params, &scan, &config, &a).unwrap();
    let (cb, gb, _) = cost_and_grad(&params, &scan, &config, &b as &LookupTable).unwrap();
    assert_eq!(ca, cb);
    assert_eq!(ga, gb);
}

#[test]
fn non_finite_cost_reports_location() {
    let (scan, mut params) = instance(13, false);
    params.h.data_mut()[[3, 3]] = -1e6;
    let config = SolverConfig::default();
    match cost(&params, &scan, &config) {
        Err(Error::Numeric(msg)) => assert!(msg.contains("t="), "{msg}"),
        other => panic!("expected numeric error, got {other:?}"),
    }
}

#[test]
fn config_validation() {
    for bad in [
        SolverConfig { lambda: -1.0, ..SolverConfig::default() },
        SolverConfig { max_iters: 0, ..SolverConfig::default() },
        SolverConfig { history_size: 2, ..SolverConfig::default() },
        SolverConfig { gamma: 0.0, ..SolverConfig::default() },
    ] {
        assert!(matches!(bad.validate(), Err(Error::Domain(_))));
    }
}

#[test]
fn gauge_fix_moves_mean_into_drift() {
    let geom = Geometry::uniform(8, 4, 1.0, true).unwrap();
    let mut p = ModelParams::zeros(&geom, true);
    p.m_r = vec![1.0, -1.0, 2.0, -2.0, 0.5, -0.5, 0.0, 0.0];
    assert_eq!(gauge_fix(&p), p);
    p.m_r = vec![0.75; 8];
    p.m_o = vec![1.0, 2.0, 3.0, 4.0];
    let fixed = gauge_fix(&p);
    assert_eq!(fixed.m_r, vec![0.0; 8]);
    assert_eq!(fixed.m_o, vec![1.75, 2.75, 3.75, 4.75]);
}

#[test]
fn gauge_fix_preserves_forward_output() {
    let (scan, _) = instance(14, true);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    // Dyadic offsets keep every shift exact, so the output is bitwise equal.
    let mut p = random_params(&mut rng, scan.geometry(), true);
    p.m_o = (0..4).map(|_| rng.random_range(-32..32) as f64 / 8.0).collect();
    p.m_r = (0..8).map(|_| rng.random_range(-32..32) as f64 / 8.0).collect();
    assert_eq!(forward(&gauge_fix(&p), &scan).unwrap(), forward(&p, &scan).unwrap());

    let q = random_params(&mut rng, scan.geometry(), true);
    let a = forward(&gauge_fix(&q), &scan).unwrap();
    let b = forward(&q, &scan).unwrap();
    for (x, y) in a.iter().zip(b.iter()) {
        assert!((x - y).abs() <= 1e-12 * y.abs());
    }
}

/// Noise-free scan of a smooth blob with the true γ.
fn inversion_instance(n: usize, n_angles: usize) -> (ScanData, ModelParams) {
    let geom = Geometry::uniform(n, n_angles, 1.0, true).unwrap();
    let c = (n as f64 - 1.0) / 2.0;
    let h = Array2::from_shape_fn((n, n), |(i, j)| {
        let r2 = ((i as f64 - c).powi(2) + (j as f64 - c - 2.0).powi(2)) / (n as f64 / 5.0).powi(2);
        0.04 * (-r2).exp()
    });
    let mut truth = ModelParams::zeros(&geom, false);
    truth.h = Image::new(h, 1.0).unwrap();
    let samples = Array2::from_shape_fn((n, 16), |(t, k)| {
        let m = k as f64 * PERIOD / 16.0 - PERIOD / 2.0;
        (20.0 + 100.0 * (-m * m / 18.0).exp()) * (1.0 + 0.02 * ((t * 7) % 5) as f64)
    });
    let ic = IlluminationCurve::uniform(samples, -PERIOD / 2.0, PERIOD).unwrap();
    let blank = Array3::zeros((n, n_angles, 1));
    let scan = ScanData::new(blank, vec![3.0], ic, 2.0, 5.0, geom).unwrap();
    let s = forward(&truth, &scan).unwrap();
    (scan.with_s_exp(s).unwrap(), truth)
}

#[test]
fn recovers_smooth_phantom_without_noise() {
    let (scan, truth) = inversion_instance(24, 36);
    let config = SolverConfig { lambda: 0.0, drift_enabled: false, max_iters: 500, rel_tol: 1e-14, ..Default::default() };
    let result = minimize(&scan, &config, None).unwrap();
    assert!(result.cost_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    let n = 24;
    let mut sq = 0.0;
    let mut count = 0.0;
    for i in 2..n - 2 {
        for j in 2..n - 2 {
            sq += (result.params.h.data()[[i, j]] - truth.h.data()[[i, j]]).powi(2);
            count += 1.0;
        }
    }
    let rms = (sq / count).sqrt() / 0.04;
    assert!(rms < 0.02, "rms {rms}, iterations {}", result.n_iterations);
}

#[test]
fn larger_lambda_shrinks_solution() {
    let (scan, _) = inversion_instance(16, 24);
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let noisy = scan.s_exp().mapv(|v| v + rng.random_range(-2.0..2.0));
    let scan = scan.with_s_exp(noisy).unwrap();
    let norms: Vec<f64> = [1e2, 1e3, 1e4]
        .iter()
        .map(|&lambda| {
            let config = SolverConfig { lambda, drift_enabled: false, max_iters: 300, ..Default::default() };
            let r = minimize(&scan, &config, None).unwrap();
            r.params.h.data().iter().map(|v| v * v).sum::<f64>()
        })
        .collect();
    assert!(norms[0] >= norms[1] && norms[1] >= norms[2], "{norms:?}");
}
