//! Timing and memory comparison of the two projector implementations.

use std::fmt::Write as _;
use std::time::Instant;

use eitomo_core::projector::{build_lookup, DEFAULT_TABLE_BUDGET};
use eitomo_core::{Geometry, Image, OnTheFly, RadonOperator};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alloc;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Lookup,
    OnTheFly,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Lookup => "lookup",
            Variant::OnTheFly => "onthefly",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lookup" => Ok(Variant::Lookup),
            "onthefly" => Ok(Variant::OnTheFly),
            _ => Err(CliError::Validation(format!("unknown projector variant {s:?}"))),
        }
    }

    pub fn build(self, geom: &Geometry) -> Result<Box<dyn RadonOperator>> {
        Ok(match self {
            Variant::Lookup => Box::new(build_lookup(geom, DEFAULT_TABLE_BUDGET)?),
            Variant::OnTheFly => Box::new(OnTheFly::new(geom.clone())),
        })
    }
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub sizes: Vec<usize>,
    /// Projections per detector pixel, over half a turn.
    pub angle_ratio: f64,
    pub threads: Vec<usize>,
    pub variants: Vec<Variant>,
    pub repeats: usize,
    pub seed: u64,
}

impl BenchOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CliError::Validation(m.into()));
        if self.sizes.is_empty() || self.sizes.iter().any(|&n| n < 8) {
            return bad("sizes must be a non-empty list of values >= 8");
        }
        if self.threads.is_empty() || self.threads.contains(&0) {
            return bad("thread counts must be >= 1");
        }
        if self.variants.is_empty() {
            return bad("no projector variant selected");
        }
        if self.repeats == 0 {
            return bad("repeats must be >= 1");
        }
        if !(self.angle_ratio > 0.0 && self.angle_ratio.is_finite()) {
            return bad("angle ratio must be > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub variant: Variant,
    pub n_pixels: usize,
    pub n_angles: usize,
    pub threads: usize,
    /// Median wall time of one forward plus one adjoint projection.
    pub seconds: f64,
    /// Time to construct the operator.
    pub build_seconds: f64,
    /// Heap held by the operator itself after construction.
    pub aux_bytes: usize,
    /// Peak transient heap of one forward plus adjoint, outputs included.
    pub scratch_bytes: usize,
    /// Largest forward-projection difference from the on-the-fly operator.
    pub max_abs_diff: f64,
}

fn thread_pool(n: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::Validation(format!("cannot start {n} threads: {e}")))
}

pub fn run_bench(opts: &BenchOptions) -> Result<Vec<BenchRow>> {
    opts.validate()?;
    let mut rows = Vec::new();
    for &n in &opts.sizes {
        let n_angles = ((opts.angle_ratio * n as f64).round() as usize).max(1);
        let geom = Geometry::uniform(n, n_angles, 1.0, false)?;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ n as u64);
        let image = Image::new(Array2::from_shape_fn((n, n), |_| rng.random::<f64>()), 1.0)?;
        let reference = OnTheFly::new(geom.clone()).forward(&image)?;
        for &variant in &opts.variants {
            let before = alloc::live_bytes();
            let t0 = Instant::now();
            let op = variant.build(&geom)?;
            let build_seconds = t0.elapsed().as_secs_f64();
            let aux_bytes = alloc::live_bytes().saturating_sub(before);

            let sino = op.forward(&image)?;
            let max_abs_diff = sino
                .data()
                .iter()
                .zip(reference.data().iter())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            drop(sino);

            let base = alloc::live_bytes();
            alloc::reset_peak();
            let s = op.forward(&image)?;
            drop(op.adjoint(&s)?);
            drop(s);
            let scratch_bytes = alloc::peak_bytes().saturating_sub(base);

            for &threads in &opts.threads {
                let pool = thread_pool(threads)?;
                let mut times = pool.install(|| -> Result<Vec<f64>> {
                    let mut times = Vec::with_capacity(opts.repeats);
                    for _ in 0..opts.repeats {
                        let t0 = Instant::now();
                        let s = op.forward(&image)?;
                        std::hint::black_box(op.adjoint(&s)?);
                        times.push(t0.elapsed().as_secs_f64());
                    }
                    Ok(times)
                })?;
                times.sort_by(f64::total_cmp);
                rows.push(BenchRow {
                    variant,
                    n_pixels: n,
                    n_angles,
                    threads,
                    seconds: times[times.len() / 2],
                    build_seconds,
                    aux_bytes,
                    scratch_bytes,
                    max_abs_diff,
                });
            }
        }
    }
    Ok(rows)
}

pub const CSV_HEADER: &str =
    "variant,n_pixels,n_angles,threads,seconds,build_seconds,aux_bytes,scratch_bytes,max_abs_diff";

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{:.6e},{:.6e},{},{},{:e}",
            r.variant.name(),
            r.n_pixels,
            r.n_angles,
            r.threads,
            r.seconds,
            r.build_seconds,
            r.aux_bytes,
            r.scratch_bytes,
            r.max_abs_diff
        )
        .unwrap();
    }
    out
}
