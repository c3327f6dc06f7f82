//! Frame loop with image and metrics output.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use probegi::shading::{write_hdr, write_ppm};
use probegi::{FrameInput, FrameStats, GiConfig, GiRenderer};
use serde::Serialize;

use crate::scene::SceneFile;

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    pub frames: usize,
    pub out_dir: PathBuf,
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Requires a single thread; frames and atlases are then reproducible
    /// bit for bit.
    pub deterministic: bool,
    pub write_hdr: bool,
    /// Writes the final probe atlas as `atlas.sdfa`.
    pub dump_atlas: bool,
    pub exposure: f64,
}

impl RenderOptions {
    pub fn new(frames: usize, out_dir: impl Into<PathBuf>) -> Self {
        RenderOptions {
            frames,
            out_dir: out_dir.into(),
            width: None,
            height: None,
            seed: 0,
            threads: None,
            deterministic: false,
            write_hdr: false,
            dump_atlas: false,
            exposure: 1.0,
        }
    }

    fn check(&self) -> Result<()> {
        if self.frames == 0 {
            bail!("frames must be at least 1");
        }
        if self.threads == Some(0) {
            bail!("--threads must be at least 1");
        }
        if self.deterministic && self.threads.is_some_and(|t| t != 1) {
            bail!("--deterministic needs --threads=1");
        }
        if matches!(self.width, Some(0)) || matches!(self.height, Some(0)) {
            bail!("resolution must be at least 1x1");
        }
        if !(self.exposure > 0.0) {
            bail!("exposure must be positive");
        }
        Ok(())
    }
}

/// One metrics row. Column names are stable; downstream tools read by name.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub frame: u64,
    pub time_s: f64,
    pub cull_ms: f64,
    pub probe_select_ms: f64,
    pub probe_update_ms: f64,
    pub shading_ms: f64,
    pub total_ms: f64,
    pub active_primitives: usize,
    pub clusters: usize,
    pub probes_updated: usize,
    pub probe_rays: usize,
    pub relocated: usize,
    pub rejected: usize,
    pub dead: usize,
    pub visibility_traces: usize,
    pub traces_per_pixel: f64,
    pub jitter: f64,
    pub sdf_queries: u64,
    pub primitive_evals: u64,
    pub mean_luminance: f64,
}

pub const METRICS_HEADER: &str = "frame,time_s,cull_ms,probe_select_ms,probe_update_ms,shading_ms,total_ms,\
active_primitives,clusters,probes_updated,probe_rays,relocated,rejected,dead,visibility_traces,\
traces_per_pixel,jitter,sdf_queries,primitive_evals,mean_luminance";

impl MetricsRow {
    fn new(s: &FrameStats, time_s: f64, mean_luminance: f64) -> Self {
        MetricsRow {
            frame: s.frame,
            time_s,
            cull_ms: s.cull_ms,
            probe_select_ms: s.probe_select_ms,
            probe_update_ms: s.probe_update_ms,
            shading_ms: s.shading_ms,
            total_ms: s.total_ms,
            active_primitives: s.active_primitives,
            clusters: s.clusters,
            probes_updated: s.probes_updated,
            probe_rays: s.probe_rays,
            relocated: s.relocated,
            rejected: s.rejected,
            dead: s.dead,
            visibility_traces: s.visibility_traces,
            traces_per_pixel: s.traces_per_pixel,
            jitter: s.jitter,
            sdf_queries: s.queries.sdf_queries,
            primitive_evals: s.queries.primitive_evals,
            mean_luminance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderSummary {
    pub frames: Vec<PathBuf>,
    pub metrics: PathBuf,
    pub rows: Vec<MetricsRow>,
}

/// Pipeline configuration for a scene with command-line overrides.
pub fn config_for(scene: &SceneFile, opts: &RenderOptions) -> GiConfig {
    let mut cfg = scene.gi_config();
    if let Some(w) = opts.width {
        cfg.width = w;
    }
    if let Some(h) = opts.height {
        cfg.height = h;
    }
    cfg.update.seed = opts.seed;
    cfg
}

pub fn run_render(scene: &SceneFile, opts: &RenderOptions) -> Result<RenderSummary> {
    opts.check()?;
    fs::create_dir_all(&opts.out_dir)
        .with_context(|| format!("cannot create output directory {}", opts.out_dir.display()))?;
    match opts.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("cannot build thread pool")?;
            pool.install(|| render_loop(scene, opts))
        }
        None => render_loop(scene, opts),
    }
}

fn frame_path(dir: &Path, frame: usize, ext: &str) -> PathBuf {
    dir.join(format!("frame_{frame:04}.{ext}"))
}

fn render_loop(scene: &SceneFile, opts: &RenderOptions) -> Result<RenderSummary> {
    let cfg = config_for(scene, opts);
    let camera = scene.camera();
    let (w, h) = (cfg.width, cfg.height);
    let mut renderer = GiRenderer::new(cfg, camera.position);
    let sky = scene.sky();
    let metrics_path = opts.out_dir.join("metrics.csv");
    let mut writer = csv::Writer::from_path(&metrics_path)
        .with_context(|| format!("cannot write {}", metrics_path.display()))?;
    let mut rows = Vec::with_capacity(opts.frames);
    let mut frames = Vec::with_capacity(opts.frames);
    for f in 0..opts.frames {
        let time_s = f as f64 / scene.frame_rate;
        let (prims, lights) = scene.state_at(time_s);
        let input = FrameInput {
            primitives: &prims,
            lights: &lights,
            sky,
            camera,
        };
        let out = renderer.render_frame(&input);
        let path = frame_path(&opts.out_dir, f, "ppm");
        let file = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        write_ppm(BufWriter::new(file), w, h, &out.image, opts.exposure)?;
        if opts.write_hdr {
            let hp = frame_path(&opts.out_dir, f, "hdr");
            let file = File::create(&hp).with_context(|| format!("cannot write {}", hp.display()))?;
            write_hdr(BufWriter::new(file), w, h, &out.image)?;
        }
        frames.push(path);
        let mean = out.image.iter().map(|c| probegi::shading::luminance(*c)).sum::<f64>() / (w * h) as f64;
        let row = MetricsRow::new(&out.stats, time_s, mean);
        writer.serialize(&row)?;
        rows.push(row);
    }
    writer.flush()?;
    if opts.dump_atlas {
        let ap = opts.out_dir.join("atlas.sdfa");
        let file = File::create(&ap).with_context(|| format!("cannot write {}", ap.display()))?;
        renderer.atlas.write_to(BufWriter::new(file))?;
    }
    Ok(RenderSummary {
        frames,
        metrics: metrics_path,
        rows,
    })
}
