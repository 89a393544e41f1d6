use eitomo_core::simulate::{make_phantom, simulate, synthesize_scan, DriftSpec, Preset, SimulationSettings};
use eitomo_core::singleshot::{fbp, retrieve, RetrievalConfig};
use eitomo_core::solver::{gauge_fix, minimize};
use eitomo_core::{Image, SolverConfig};

fn small(preset: Preset) -> SimulationSettings {
    let mut s = preset.settings();
    s.n_pixels = 32;
    s.n_angles = 48;
    s.phantom = eitomo_core::simulate::PhantomSpec::granules(32);
    s
}

fn interior_rms(a: &Image, b: &Image, border: usize) -> f64 {
    let n = a.n();
    let (mut sum, mut count) = (0.0, 0usize);
    for i in border..n - border {
        for j in border..n - border {
            let d = a.data()[[i, j]] - b.data()[[i, j]];
            sum += d * d;
            count += 1;
        }
    }
    (sum / count as f64).sqrt()
}

fn range(img: &Image) -> f64 {
    let (lo, hi) = img.data().iter().fold((f64::MAX, f64::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    hi - lo
}

#[test]
fn noise_free_scan_inverts_with_drift() {
    // with drift on, lambda near 0 lets h soak up the offsets; 1e8 is enough here
    let mut s = small(Preset::Drift);
    s.acquisition.exposure = None;
    let geom = s.geometry().unwrap();
    let phantom = make_phantom(&s.phantom, s.n_pixels, s.pixel_size).unwrap();
    let scan = synthesize_scan(&phantom, &s.acquisition, &geom, 0).unwrap();
    let cfg = SolverConfig { lambda: 1e8, max_iters: 400, ..SolverConfig::default() };
    let result = minimize(&scan, &cfg, None).unwrap();
    let err = interior_rms(&result.params.h, &phantom, 2) / range(&phantom);
    assert!(err < 0.10, "relative h error {err}");

    let truth = s.acquisition.drift.offsets(s.n_angles).unwrap();
    let fitted = gauge_fix(&result.params).m_o;
    let shift = fitted.iter().zip(&truth).map(|(a, b)| a - b).sum::<f64>() / truth.len() as f64;
    let drift_rms = (fitted.iter().zip(&truth).map(|(a, b)| (a - b - shift).powi(2)).sum::<f64>() / truth.len() as f64).sqrt();
    let truth_rms = (truth.iter().map(|v| v * v).sum::<f64>() / truth.len() as f64).sqrt();
    assert!(drift_rms < 0.1 * truth_rms, "drift error {drift_rms} vs {truth_rms}");
    assert!(result.cost_history.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn single_shot_tracks_phantom() {
    let mut s = small(Preset::WellSampledFlat);
    s.acquisition.exposure = None;
    let sim = simulate(&s, 3).unwrap();
    let a = &s.acquisition;
    let sino = eitomo_core::Sinogram::new(
        sim.scan.s_exp().index_axis(ndarray::Axis(2), 0).to_owned(),
        sim.scan.geometry().angles().to_vec(),
        s.pixel_size,
    )
    .unwrap();
    let cfg = RetrievalConfig { gamma: a.gamma, z: a.z, offset: a.offsets[0], pad: None };
    let img = fbp(&retrieve(&sino, sim.scan.ic(), &cfg).unwrap().projections).unwrap();
    let truth = &sim.truth.h;
    let (x, y): (Vec<f64>, Vec<f64>) = img.data().iter().zip(truth.data().iter()).map(|(a, b)| (*a, *b)).unzip();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mx, my) = (mean(&x), mean(&y));
    let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let corr = cov / (vx * vy).sqrt();
    assert!(corr > 0.8, "correlation {corr}");
}

#[test]
fn simulation_is_seeded() {
    let s = small(Preset::UndersampledFlat);
    let a = simulate(&s, 11).unwrap();
    let b = simulate(&s, 11).unwrap();
    let c = simulate(&s, 12).unwrap();
    assert_eq!(a.scan.s_exp(), b.scan.s_exp());
    assert_eq!(a.flat_scans, b.flat_scans);
    assert_ne!(a.scan.s_exp(), c.scan.s_exp());
    assert!(matches!(s.acquisition.drift, DriftSpec::None));
}
