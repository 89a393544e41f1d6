//! `simulate`, `reconstruct` and `metrics`. All paths are relative to a
//! work directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use eitomo_core::illumination::ic_from_scans;
use eitomo_core::metrics::{central_crop, cnr, frc, resolution_from_frc, ring_score, Circle};
use eitomo_core::simulate::{simulate, PhantomSpec};
use eitomo_core::singleshot::{fbp, retrieve, RetrievalConfig};
use eitomo_core::solver::minimize_with;
use eitomo_core::{Image, ScanData};
use ndarray::{Array1, Array2, Array3, ArrayD, Ix1, Ix2};
use serde::{Deserialize, Serialize};

use crate::array_file::{read_array, write_array, Dtype};
use crate::bench::Variant;
use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const PHANTOM: &str = "phantom";
pub const FLAT_SCANS: &str = "flat_scans";
pub const FLAT_OFFSETS: &str = "flat_offsets";
pub const SCAN: &str = "scan";
pub const TRUE_DRIFT: &str = "true_drift";
pub const SIMULATION_MANIFEST: &str = "simulation.json";

fn array_path(workdir: &Path, name: &str) -> PathBuf {
    workdir.join(format!("{name}.json"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serialisable");
    fs::write(path, text + "\n").map_err(CliError::io(path))
}

fn load<D: ndarray::Dimension>(workdir: &Path, name: &str) -> Result<ndarray::Array<f64, D>> {
    let path = array_path(workdir, name);
    let (_, data): (_, ArrayD<f64>) = read_array(&path)?;
    data.into_dimensionality::<D>()
        .map_err(|_| CliError::Validation(format!("{}: unexpected number of dimensions", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationManifest {
    pub provenance: String,
    pub preset: String,
    pub seed: u64,
    pub config: RunConfig,
    pub files: Vec<String>,
}

pub fn cmd_simulate(cfg: &RunConfig, workdir: &Path) -> Result<SimulationManifest> {
    cfg.validate()?;
    let settings = cfg.simulation()?;
    let sim = simulate(&settings, cfg.seed)?;
    let acq = &settings.acquisition;
    fs::create_dir_all(workdir).map_err(CliError::io(workdir))?;
    let arrays: [(&str, ArrayD<f64>, &str, &str); 5] = [
        (PHANTOM, sim.truth.h.data().clone().into_dyn(), "phantom h", "1/um"),
        (FLAT_SCANS, sim.flat_scans.clone().into_dyn(), "flat-field scans [t, step, repeat]", "counts"),
        (FLAT_OFFSETS, Array1::from(acq.ic.step_offsets(acq.n_steps)).into_dyn(), "flat-field mask offsets", "um"),
        (SCAN, sim.scan.s_exp().clone().into_dyn(), "sample scan [t, angle, offset]", "counts"),
        (TRUE_DRIFT, Array1::from(sim.truth.m_o.clone()).into_dyn(), "mask drift m_o", "um"),
    ];
    let mut files = Vec::new();
    for (name, data, semantic, units) in arrays {
        write_array(&array_path(workdir, name), data.view(), Dtype::F64, semantic, units)?;
        files.push(format!("{name}.json"));
    }
    let manifest = SimulationManifest {
        provenance: format!("eitomo {} simulate", env!("CARGO_PKG_VERSION")),
        preset: cfg.preset.clone(),
        seed: cfg.seed,
        config: cfg.clone(),
        files,
    };
    write_json(&workdir.join(SIMULATION_MANIFEST), &manifest)?;
    Ok(manifest)
}

/// Loads the scan written by [`cmd_simulate`] (or any files in that layout).
pub fn load_scan(cfg: &RunConfig, workdir: &Path) -> Result<ScanData> {
    cfg.validate()?;
    let s_exp: Array3<f64> = load(workdir, SCAN)?;
    let flats: Array3<f64> = load(workdir, FLAT_SCANS)?;
    let flat_offsets: Array1<f64> = load::<Ix1>(workdir, FLAT_OFFSETS)?;
    let (n_t, n_angles, n_m) = s_exp.dim();
    if n_t != cfg.n_pixels || n_angles != cfg.n_angles || n_m != cfg.offsets.len() {
        return Err(CliError::Validation(format!(
            "scan is {n_t}x{n_angles}x{n_m}, configuration expects {}x{}x{}",
            cfg.n_pixels,
            cfg.n_angles,
            cfg.offsets.len()
        )));
    }
    let ic = ic_from_scans(&flats, flat_offsets.as_slice().expect("contiguous"), cfg.period)?;
    Ok(ScanData::new(s_exp, cfg.offsets.clone(), ic, cfg.z, cfg.gamma, cfg.geometry()?)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Singleshot,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Subset {
    All,
    Even,
    Odd,
}

impl Subset {
    pub fn indices(self, n: usize) -> Vec<usize> {
        match self {
            Subset::All => (0..n).collect(),
            Subset::Even => (0..n).step_by(2).collect(),
            Subset::Odd => (1..n).step_by(2).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReconOptions {
    pub mode: Mode,
    pub subset: Subset,
    pub projector: Variant,
    /// Base name of the outputs; defaults to `recon_<mode>`.
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconReport {
    pub mode: String,
    pub subset: String,
    pub projector: String,
    pub wall_time: f64,
    pub iterations: usize,
    pub converged: bool,
    pub evaluations: usize,
    pub final_cost: Option<f64>,
    pub cost_history: Vec<f64>,
    pub clamped: usize,
    pub message: Option<String>,
    pub files: Vec<String>,
}

pub fn cmd_reconstruct(cfg: &RunConfig, opts: &ReconOptions, workdir: &Path) -> Result<ReconReport> {
    let full = load_scan(cfg, workdir)?;
    let scan = match opts.subset {
        Subset::All => full,
        s => full.select_angles(&s.indices(cfg.n_angles))?,
    };
    let mode = match opts.mode {
        Mode::Singleshot => "singleshot",
        Mode::Iterative => "iterative",
    };
    let subset = match opts.subset {
        Subset::All => "all",
        Subset::Even => "even",
        Subset::Odd => "odd",
    };
    let base = opts.output.clone().unwrap_or_else(|| format!("recon_{mode}"));
    let mut files = vec![format!("{base}.json")];
    let report = match opts.mode {
        Mode::Singleshot => {
            let start = Instant::now();
            let rc = RetrievalConfig { gamma: cfg.gamma, z: cfg.z, offset: cfg.offsets[0], pad: None };
            let retrieved = retrieve(&scan.sinogram_at(0)?, scan.ic(), &rc)?;
            let image = fbp(&retrieved.projections)?;
            write_array(&array_path(workdir, &base), image.data().view().into_dyn(), Dtype::F64, "h / gamma", "1/um")?;
            ReconReport {
                mode: mode.into(),
                subset: subset.into(),
                projector: "fbp".into(),
                wall_time: start.elapsed().as_secs_f64(),
                iterations: 0,
                converged: true,
                evaluations: 0,
                final_cost: None,
                cost_history: vec![],
                clamped: retrieved.clamped,
                message: None,
                files: vec![],
            }
        }
        Mode::Iterative => {
            let op = opts.projector.build(scan.geometry())?;
            let result = minimize_with(&scan, &cfg.solver(), None, op.as_ref())?;
            let p = &result.params;
            write_array(&array_path(workdir, &base), p.h.data().view().into_dyn(), Dtype::F64, "h", "1/um")?;
            if cfg.drift_enabled {
                let name = format!("{base}_m_o");
                write_array(&array_path(workdir, &name), ndarray::aview1(&p.m_o).into_dyn(), Dtype::F64, "m_o", "um")?;
                files.push(format!("{name}.json"));
            }
            if cfg.ring_enabled {
                let name = format!("{base}_m_r");
                write_array(&array_path(workdir, &name), ndarray::aview1(&p.m_r).into_dyn(), Dtype::F64, "m_r", "um")?;
                files.push(format!("{name}.json"));
            }
            let mut csv = String::from("iteration,cost\n");
            for (k, c) in result.cost_history.iter().enumerate() {
                writeln!(csv, "{k},{c:e}").unwrap();
            }
            let csv_path = workdir.join(format!("{base}_cost.csv"));
            fs::write(&csv_path, csv).map_err(CliError::io(&csv_path))?;
            files.push(format!("{base}_cost.csv"));
            ReconReport {
                mode: mode.into(),
                subset: subset.into(),
                projector: opts.projector.name().into(),
                wall_time: result.wall_time,
                iterations: result.n_iterations,
                converged: result.converged,
                evaluations: result.diagnostics.evaluations,
                final_cost: result.cost_history.last().copied(),
                cost_history: result.cost_history.clone(),
                clamped: result.diagnostics.clamped_projections,
                message: result.diagnostics.message.clone(),
                files: vec![],
            }
        }
    };
    files.push(format!("{base}_report.json"));
    let report = ReconReport { files, ..report };
    write_json(&workdir.join(format!("{base}_report.json")), &report)?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct MetricsOptions {
    pub image: String,
    /// Second reconstruction with independent noise, for FRC.
    pub compare: Option<String>,
    pub rois: Vec<Circle>,
    /// Add ROIs at the simulated granule centres.
    pub granule_rois: bool,
    pub cutoff: f64,
    pub crop: f64,
    pub sigma: f64,
    pub output: String,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self {
            image: String::new(),
            compare: None,
            rois: vec![],
            granule_rois: false,
            cutoff: 0.5,
            crop: 0.64,
            sigma: 2.0,
            output: "metrics".into(),
        }
    }
}

/// ROIs at the centres of [`PhantomSpec::granules`], radius 0.6 of a granule.
pub fn granule_rois(n: usize) -> Vec<Circle> {
    PhantomSpec::granules(n)
        .disks
        .iter()
        .map(|d| Circle { x: d.x, y: d.y, radius: 0.6 * d.radius })
        .collect()
}

/// One `(metric, label, value)` row of the metrics CSV.
pub type MetricRow = (String, String, f64);

pub fn cmd_metrics(cfg: &RunConfig, opts: &MetricsOptions, workdir: &Path) -> Result<Vec<MetricRow>> {
    let load_image = |name: &str| -> Result<Image> {
        let data: Array2<f64> = load::<Ix2>(workdir, name)?;
        if data.nrows() != data.ncols() {
            return Err(CliError::Validation(format!("{name} is not square")));
        }
        Ok(Image::new(data, cfg.pixel_size)?)
    };
    let image = load_image(&opts.image)?;
    let mut rois = opts.rois.clone();
    if opts.granule_rois {
        rois.extend(granule_rois(image.n()));
    }
    if rois.len() == 1 {
        return Err(CliError::Validation("CNR needs at least two ROIs".into()));
    }
    let mut rows: Vec<MetricRow> = vec![("ring_score".into(), opts.image.clone(), ring_score(&image))];
    for i in 0..rois.len() {
        for j in i + 1..rois.len() {
            let c = cnr(&image, rois[i], rois[j])?;
            rows.push(("cnr".into(), format!("roi{i}-roi{j}"), c.value));
        }
    }
    if let Some(other) = &opts.compare {
        let second = load_image(other)?;
        let a = central_crop(&image, opts.crop)?;
        let b = central_crop(&second, opts.crop)?;
        let curve = frc(&a, &b, opts.sigma)?;
        let res = resolution_from_frc(&curve, opts.cutoff)?;
        rows.push(("resolution_px".into(), format!("cutoff {}", opts.cutoff), res.pixels));
        rows.push(("resolution_um".into(), format!("cutoff {}", opts.cutoff), res.micrometers));
        let mut csv = String::from("frequency,raw,smoothed,count\n");
        for k in 0..curve.frequencies.len() {
            writeln!(csv, "{},{:e},{:e},{}", curve.frequencies[k], curve.raw[k], curve.values[k], curve.counts[k]).unwrap();
        }
        let path = workdir.join(format!("{}_frc.csv", opts.output));
        fs::write(&path, csv).map_err(CliError::io(&path))?;
    }
    let mut csv = String::from("metric,label,value\n");
    for (m, l, v) in &rows {
        writeln!(csv, "{m},{l},{v:e}").unwrap();
    }
    let path = workdir.join(format!("{}.csv", opts.output));
    fs::write(&path, csv).map_err(CliError::io(&path))?;
    Ok(rows)
}
