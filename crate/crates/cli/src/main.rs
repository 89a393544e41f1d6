use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eitomo_cli::alloc::CountingAlloc;
use eitomo_cli::bench::{run_bench, to_csv, BenchOptions, Variant};
use eitomo_cli::commands::{cmd_metrics, cmd_reconstruct, cmd_simulate, MetricsOptions, Mode, ReconOptions, Subset};
use eitomo_cli::config::{ConfigArgs, RunConfig};
use eitomo_cli::{CliError, Result};
use eitomo_core::metrics::Circle;

#[global_allocator]
static ALLOC: CountingAlloc = CountingAlloc;

/// Iterative and single-shot tomography for edge-illumination X-ray phase contrast.
#[derive(Debug, Parser)]
#[command(name = "eitomo", version)]
struct Cli {
    /// Directory all input and output paths are relative to.
    #[arg(long, global = true, default_value = ".")]
    workdir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON run configuration, relative to the work directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic phantom, flat-field scans and sample scan.
    Simulate {
        #[command(flatten)]
        overrides: ConfigArgs,
    },
    /// Reconstruct the scan in the work directory.
    Reconstruct {
        #[arg(long, value_enum, default_value = "iterative")]
        mode: Mode,
        /// Use every, every even or every odd projection.
        #[arg(long, value_enum, default_value = "all")]
        subset: Subset,
        /// Projector for the iterative mode: onthefly or lookup.
        #[arg(long, default_value = "onthefly")]
        projector: String,
        /// Base name of the output files.
        #[arg(long)]
        output: Option<String>,
        #[command(flatten)]
        overrides: ConfigArgs,
    },
    /// Ring score, CNR between ROIs and FRC resolution of a reconstruction.
    Metrics {
        /// Array name of the reconstruction (without .json).
        #[arg(long)]
        image: String,
        /// Second reconstruction with independent noise, enables FRC.
        #[arg(long)]
        compare: Option<String>,
        /// Circular ROI as x,y,radius in pixels; repeat for several.
        #[arg(long = "roi", value_parser = parse_roi, allow_hyphen_values = true)]
        rois: Vec<Circle>,
        /// Add ROIs at the centres of the simulated granules.
        #[arg(long)]
        granule_rois: bool,
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.5)]
        cutoff: f64,
        /// Side of the central FRC crop as a fraction of the image.
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.64)]
        crop: f64,
        /// Gaussian smoothing of the FRC curve, in frequency bins.
        #[arg(long, allow_negative_numbers = true, default_value_t = 2.0)]
        sigma: f64,
        #[arg(long, default_value = "metrics")]
        output: String,
        #[command(flatten)]
        overrides: ConfigArgs,
    },
    /// Time and memory of the lookup and on-the-fly projectors.
    Bench {
        /// Detector sizes, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "90,180,360")]
        sizes: Vec<usize>,
        /// Projections per detector pixel over half a turn.
        #[arg(long, allow_negative_numbers = true, default_value_t = 0.5)]
        angle_ratio: f64,
        /// Thread counts to time, comma separated (default: 1 and all cores).
        #[arg(long, value_delimiter = ',')]
        thread_counts: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', default_value = "lookup,onthefly")]
        variants: Vec<String>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "bench.csv")]
        output: String,
    },
}

fn parse_roi(s: &str) -> std::result::Result<Circle, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [x, y, radius] if radius > 0.0 => Ok(Circle { x, y, radius }),
        _ => Err("expected x,y,radius with radius > 0".into()),
    }
}

fn config(cli: &Cli, overrides: &ConfigArgs) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(&cli.workdir.join(p))?,
        None => RunConfig::default(),
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("cannot configure threads: {e}")))?;
    }
    let workdir = &cli.workdir;
    match &cli.command {
        Command::Simulate { overrides } => {
            let cfg = config(cli, overrides)?;
            let m = cmd_simulate(&cfg, workdir)?;
            println!("simulated preset {} seed {}: {}", m.preset, m.seed, m.files.join(", "));
        }
        Command::Reconstruct { mode, subset, projector, output, overrides } => {
            let cfg = config(cli, overrides)?;
            let opts = ReconOptions {
                mode: *mode,
                subset: *subset,
                projector: Variant::parse(projector)?,
                output: output.clone(),
            };
            let r = cmd_reconstruct(&cfg, &opts, workdir)?;
            println!(
                "{} reconstruction: {} iterations, converged {}, {:.2} s, wrote {}",
                r.mode,
                r.iterations,
                r.converged,
                r.wall_time,
                r.files.join(", ")
            );
            if let Some(msg) = &r.message {
                println!("note: {msg}");
            }
        }
        Command::Metrics { image, compare, rois, granule_rois, cutoff, crop, sigma, output, overrides } => {
            let cfg = config(cli, overrides)?;
            let opts = MetricsOptions {
                image: image.clone(),
                compare: compare.clone(),
                rois: rois.clone(),
                granule_rois: *granule_rois,
                cutoff: *cutoff,
                crop: *crop,
                sigma: *sigma,
                output: output.clone(),
            };
            for (metric, label, value) in cmd_metrics(&cfg, &opts, workdir)? {
                println!("{metric} {label}: {value:.6e}");
            }
        }
        Command::Bench { sizes, angle_ratio, thread_counts, variants, repeats, seed, output } => {
            let all = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
            let threads = match thread_counts {
                Some(t) => t.clone(),
                None if all > 1 => vec![1, all],
                None => vec![1],
            };
            let opts = BenchOptions {
                sizes: sizes.clone(),
                angle_ratio: *angle_ratio,
                threads,
                variants: variants.iter().map(|v| Variant::parse(v)).collect::<Result<_>>()?,
                repeats: *repeats,
                seed: *seed,
            };
            let csv = to_csv(&run_bench(&opts)?);
            std::fs::create_dir_all(workdir).map_err(|e| CliError::Io { path: workdir.clone(), source: e })?;
            let path = workdir.join(output);
            std::fs::write(&path, &csv).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
            print!("{csv}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
