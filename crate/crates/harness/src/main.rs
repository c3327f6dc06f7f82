use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use probegi_harness::bench::{run_bench, write_rows, BenchMode, BenchOptions};
use probegi_harness::compare::{run_compare, CompareOptions};
use probegi_harness::load_scene;
use probegi_harness::probes::dump_probes;
use probegi_harness::render::{run_render, RenderOptions};

/// SDF probe global illumination renderer and tools.
#[derive(Parser)]
#[command(name = "probegi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scene file, or the name of a bundled scene (cornell, two-room-thin-wall,
    /// sponza-lite, open-field-cascade, dynamic-sphere).
    scene: String,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn pool(&self) -> Result<Option<rayon::ThreadPool>> {
        match self.threads {
            Some(0) => anyhow::bail!("--threads must be at least 1"),
            Some(n) => Ok(Some(rayon::ThreadPoolBuilder::new().num_threads(n).build()?)),
            None => Ok(None),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Render frames and a metrics file.
    Render {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        frames: usize,
        #[arg(long, short, default_value = "out")]
        out: PathBuf,
        /// Reproducible output; requires --threads=1.
        #[arg(long)]
        deterministic: bool,
        /// Also write float frames.
        #[arg(long)]
        hdr: bool,
        /// Write the final probe atlas.
        #[arg(long)]
        dump_atlas: bool,
        #[arg(long, default_value_t = 1.0)]
        exposure: f64,
    },
    /// Time query strategies or measure the visibility budget.
    Bench {
        #[command(flatten)]
        common: Common,
        /// cluster-vs-naive, cluster-vs-bvh or visibility-budget.
        #[arg(long)]
        mode: BenchMode,
        #[arg(long, default_value_t = 1_000_000)]
        queries: usize,
        #[arg(long, default_value_t = 10)]
        repetitions: usize,
        /// Probes in the timed update workload (default: all alive probes).
        #[arg(long)]
        probes: Option<usize>,
        #[arg(long, default_value_t = 4)]
        frames: usize,
    },
    /// Compare indirect light against the path tracer.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 4096)]
        spp: u32,
        #[arg(long, default_value_t = 60)]
        frames: usize,
        /// Oracle pixel stride.
        #[arg(long, default_value_t = 8)]
        stride: usize,
        /// Write the difference image here.
        #[arg(long)]
        diff: Option<PathBuf>,
        /// Render without indirect light (sanity baseline).
        #[arg(long)]
        no_gi: bool,
    },
    /// Write probe positions and the atlas after a number of updates.
    DumpProbes {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 8)]
        frames: usize,
        #[arg(long, short, default_value = "out")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Render {
            common,
            frames,
            out,
            deterministic,
            hdr,
            dump_atlas,
            exposure,
        } => {
            let scene = load_scene(&common.scene)?;
            let opts = RenderOptions {
                frames,
                out_dir: out,
                width: common.width,
                height: common.height,
                seed: common.seed,
                threads: common.threads,
                deterministic,
                write_hdr: hdr,
                dump_atlas,
                exposure,
            };
            let summary = run_render(&scene, &opts)?;
            eprintln!(
                "wrote {} frames and {}",
                summary.frames.len(),
                summary.metrics.display()
            );
        }
        Command::Bench {
            common,
            mode,
            queries,
            repetitions,
            probes,
            frames,
        } => {
            let scene = load_scene(&common.scene)?;
            let opts = BenchOptions {
                queries,
                repetitions: repetitions.max(1),
                probe_subset: probes,
                frames,
                seed: common.seed,
                width: common.width,
                height: common.height,
            };
            let rows = match common.pool()? {
                Some(p) => p.install(|| run_bench(&scene, mode, &opts)),
                None => run_bench(&scene, mode, &opts),
            };
            write_rows(&rows, io::stdout())?;
        }
        Command::Compare {
            common,
            spp,
            frames,
            stride,
            diff,
            no_gi,
        } => {
            let scene = load_scene(&common.scene)?;
            let opts = CompareOptions {
                spp: spp.max(1),
                frames,
                width: common.width,
                height: common.height,
                stride,
                seed: common.seed,
                difference_image: diff,
                disable_gi: no_gi,
                ..CompareOptions::default()
            };
            let report = match common.pool()? {
                Some(p) => p.install(|| run_compare(&scene, &opts)),
                None => run_compare(&scene, &opts),
            }?;
            println!("pixels,mean_rel_error,p95_rel_error,mean_abs_error,oracle_indirect_mean,ours_indirect_mean");
            println!(
                "{},{},{},{},{},{}",
                report.pixels,
                report.mean_rel_error,
                report.p95_rel_error,
                report.mean_abs_error,
                report.oracle_indirect_mean,
                report.ours_indirect_mean
            );
        }
        Command::DumpProbes { common, frames, out } => {
            let scene = load_scene(&common.scene)?;
            let (csv, atlas) = match common.pool()? {
                Some(p) => p.install(|| dump_probes(&scene, frames, common.seed, &out)),
                None => dump_probes(&scene, frames, common.seed, &out),
            }
            .context("dump-probes failed")?;
            eprintln!("wrote {} and {}", csv.display(), atlas.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
