//! Indirect-light comparison against the path-traced oracle.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{Context, Result};
use glam::DVec3;
use probegi::oracle::{path_trace_pixels, OracleParams};
use probegi::shading::{luminance, write_ppm};
use probegi::{FrameInput, GiRenderer};

use crate::scene::SceneFile;

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOptions {
    pub spp: u32,
    pub frames: usize,
    pub width: Option<usize>,
    pub height: Option<usize>,
    /// Oracle pixels are taken every `stride` pixels in x and y.
    pub stride: usize,
    pub seed: u64,
    /// Path length cap for the full oracle render.
    pub max_bounces: u32,
    /// Relative errors divide by `max(reference, floor · mean(reference))`.
    pub error_floor: f64,
    /// Turns probe GI and Contact GI off, so ours has no indirect light.
    pub disable_gi: bool,
    pub difference_image: Option<PathBuf>,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            spp: 4096,
            frames: 60,
            width: None,
            height: None,
            stride: 8,
            seed: 7,
            max_bounces: 64,
            error_floor: 0.05,
            disable_gi: false,
            difference_image: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub pixels: usize,
    pub mean_rel_error: f64,
    pub p95_rel_error: f64,
    pub mean_abs_error: f64,
    pub oracle_indirect_mean: f64,
    pub ours_indirect_mean: f64,
}

/// Per-element relative error `|a − b| / max(b, floor · mean(b))`, returning
/// the mean and the 95th percentile. Elements where both are zero count as
/// exact.
pub fn relative_error_stats(ours: &[f64], reference: &[f64], floor: f64) -> (f64, f64) {
    assert_eq!(ours.len(), reference.len());
    assert!(!ours.is_empty());
    let mean_ref = reference.iter().sum::<f64>() / reference.len() as f64;
    let lo = floor * mean_ref;
    let mut errs: Vec<f64> = ours
        .iter()
        .zip(reference)
        .map(|(&a, &b)| {
            let d = (a - b).abs();
            if d == 0.0 {
                0.0
            } else {
                d / b.max(lo).max(1e-12)
            }
        })
        .collect();
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    errs.sort_by(f64::total_cmp);
    let idx = ((errs.len() as f64 * 0.95).ceil() as usize).clamp(1, errs.len()) - 1;
    (mean, errs[idx])
}

/// Sample pixel indices: pixel centres of a regular `stride` lattice.
pub fn strided_pixels(width: usize, height: usize, stride: usize) -> (usize, usize, Vec<usize>) {
    let stride = stride.max(1);
    let off = stride / 2;
    let xs: Vec<usize> = (off..width).step_by(stride).collect();
    let ys: Vec<usize> = (off..height).step_by(stride).collect();
    let idx = ys.iter().flat_map(|&y| xs.iter().map(move |&x| y * width + x)).collect();
    (xs.len(), ys.len(), idx)
}

/// Converges the pipeline, then compares the indirect component on the
/// sampled pixels. Ours is `albedo/π · E_gi`; the oracle's is the full path
/// traced radiance minus a one-bounce render.
pub fn run_compare(scene: &SceneFile, opts: &CompareOptions) -> Result<CompareReport> {
    let mut cfg = scene.gi_config();
    if let Some(w) = opts.width {
        cfg.width = w;
    }
    if let Some(h) = opts.height {
        cfg.height = h;
    }
    cfg.update.seed = opts.seed;
    if opts.disable_gi {
        cfg.shading.probe_gi = false;
        cfg.shading.contact_gi = false;
    }
    let (w, h) = (cfg.width, cfg.height);
    let camera = scene.camera();
    let mut r = GiRenderer::new(cfg, camera.position);
    let (prims, lights) = scene.state_at(0.0);
    let input = FrameInput {
        primitives: &prims,
        lights: &lights,
        sky: scene.sky(),
        camera,
    };
    let mut out = None;
    for _ in 0..opts.frames.max(1) {
        out = Some(r.render_frame(&input));
    }
    let out = out.unwrap();
    let active = r.build_scene(&input);

    let (cols, rows, pixels) = strided_pixels(w, h, opts.stride);
    let ours: Vec<f64> = pixels
        .iter()
        .map(|&i| luminance(out.gbuffer.albedo[i] / std::f64::consts::PI * out.gi[i]))
        .collect();
    let full = path_trace_pixels(
        &active,
        &camera,
        w,
        h,
        &pixels,
        &OracleParams::new(opts.spp, opts.max_bounces, opts.seed),
    );
    // Primary rays and light sampling are deterministic, so one sample suffices.
    let direct = path_trace_pixels(&active, &camera, w, h, &pixels, &OracleParams::new(1, 1, opts.seed));
    let reference: Vec<f64> = full
        .iter()
        .zip(&direct)
        .map(|(f, d)| luminance(*f - *d).max(0.0))
        .collect();
    let (mean_rel_error, p95_rel_error) = relative_error_stats(&ours, &reference, opts.error_floor);

    if let Some(path) = &opts.difference_image {
        let diff: Vec<DVec3> = ours
            .iter()
            .zip(&reference)
            .map(|(a, b)| DVec3::new((a - b).max(0.0), (b - a).max(0.0), 0.0))
            .collect();
        let scale = reference.iter().sum::<f64>() / reference.len() as f64;
        let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
        write_ppm(BufWriter::new(file), cols, rows, &diff, 0.5 / scale.max(1e-12))?;
    }
    let n = pixels.len() as f64;
    Ok(CompareReport {
        pixels: pixels.len(),
        mean_rel_error,
        p95_rel_error,
        mean_abs_error: ours.iter().zip(&reference).map(|(a, b)| (a - b).abs()).sum::<f64>() / n,
        oracle_indirect_mean: reference.iter().sum::<f64>() / n,
        ours_indirect_mean: ours.iter().sum::<f64>() / n,
    })
}
