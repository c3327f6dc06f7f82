//! Per-pixel GI: G-buffer, min/max checkerboard downsampling, deduplicated
//! probe visibility, bilateral upsampling with history, Contact GI and final
//! composition.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{self, Write};

use glam::{DVec2, DVec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::atlas::ProbeAtlas;
use crate::camera::Camera;
use crate::cluster::{ActiveScene, Trace};
use crate::probe::{ProbeId, ProbeVolume};
use crate::stats::{self, QueryStats};
use crate::stencil::{interpolation_stencil, InterpolationStencil, StencilParams};
use crate::update::{shade_hit, IrradianceField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadingParams {
    /// Cone sharpness for probe visibility.
    pub visibility_k: f64,
    /// Cone sharpness for direct-light shadows on screen.
    pub direct_k: f64,
    /// Visibility results are shared between starting points closer than
    /// this (fraction of probe spacing).
    pub dedupe_distance: f64,
    /// Bilateral depth falloff, relative to pixel depth.
    pub depth_sigma: f64,
    /// Neighbours or history differing in depth by more than this fraction
    /// are rejected.
    pub depth_reject: f64,
    pub history_weight: f64,
    /// Contact GI ray length as a fraction of the finest probe spacing.
    pub contact_radius: f64,
    pub ao_samples: usize,
    pub contact_gi: bool,
    pub probe_gi: bool,
    pub primary_ray_length: f64,
}

impl Default for ShadingParams {
    fn default() -> Self {
        ShadingParams {
            visibility_k: 8.0,
            direct_k: 8.0,
            dedupe_distance: 0.25,
            depth_sigma: 0.05,
            depth_reject: 0.1,
            history_weight: 0.4,
            contact_radius: 0.5,
            ao_samples: 8,
            contact_gi: true,
            probe_gi: true,
            primary_ray_length: 1e4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GBuffer {
    pub width: usize,
    pub height: usize,
    /// Distance along the unit view ray; `+∞` for sky.
    pub depth: Vec<f64>,
    pub normal: Vec<DVec3>,
    pub albedo: Vec<DVec3>,
    pub emission: Vec<DVec3>,
    pub world_pos: Vec<DVec3>,
    /// Offset from this pixel to where the surface was in the previous frame.
    pub motion: Vec<DVec2>,
}

impl GBuffer {
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_sky(&self, i: usize) -> bool {
        !self.depth[i].is_finite()
    }
}

/// Sphere-traces one primary ray per pixel.
pub fn render_gbuffer(
    scene: &ActiveScene,
    camera: &Camera,
    previous_camera: Option<&Camera>,
    width: usize,
    height: usize,
    ray_length: f64,
) -> GBuffer {
    assert!(width >= 1 && height >= 1);
    // A static camera reprojects onto itself; skip the round trip so the
    // vectors are exactly zero.
    let prev = previous_camera.filter(|p| *p != camera);
    let texels: Vec<_> = (0..width * height)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % width, i / width);
            let dir = camera.ray_dir(x, y, width, height);
            match scene.sphere_trace(camera.position, dir, ray_length) {
                Trace::Hit(h) | Trace::Exhausted(h) => {
                    let m = scene.primitives()[h.primitive].material;
                    let here = DVec2::new(x as f64 + 0.5, y as f64 + 0.5);
                    let motion = prev
                        .and_then(|c| c.project(h.position, width, height))
                        .map_or(DVec2::ZERO, |p| p - here);
                    (h.t, h.normal, m.albedo, m.emission, h.position, motion)
                }
                Trace::Escaped => (
                    f64::INFINITY,
                    -dir,
                    DVec3::ZERO,
                    DVec3::ZERO,
                    camera.position + dir * ray_length,
                    DVec2::ZERO,
                ),
            }
        })
        .collect();
    let mut g = GBuffer {
        width,
        height,
        depth: Vec::with_capacity(texels.len()),
        normal: Vec::with_capacity(texels.len()),
        albedo: Vec::with_capacity(texels.len()),
        emission: Vec::with_capacity(texels.len()),
        world_pos: Vec::with_capacity(texels.len()),
        motion: Vec::with_capacity(texels.len()),
    };
    for (d, n, a, e, p, m) in texels {
        g.depth.push(d);
        g.normal.push(n);
        g.albedo.push(a);
        g.emission.push(e);
        g.world_pos.push(p);
        g.motion.push(m);
    }
    g
}

/// Half-resolution depth with the full-resolution pixel each value came from.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfDepth {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
    pub source: Vec<usize>,
}

/// Min/max checkerboard: half-res pixel `(i, j)` keeps the maximum of its
/// 2×2 source block when `i + j` is even and the minimum when odd. Odd
/// dimensions are padded by clamping to the edge.
pub fn downsample_depth_checkerboard(depth: &[f64], width: usize, height: usize) -> HalfDepth {
    assert_eq!(depth.len(), width * height);
    let hw = width.div_ceil(2);
    let hh = height.div_ceil(2);
    let mut out = HalfDepth {
        width: hw,
        height: hh,
        depth: Vec::with_capacity(hw * hh),
        source: Vec::with_capacity(hw * hh),
    };
    for j in 0..hh {
        for i in 0..hw {
            let take_max = (i + j) % 2 == 0;
            let mut best: Option<(f64, usize)> = None;
            for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let x = (2 * i + dx).min(width - 1);
                let y = (2 * j + dy).min(height - 1);
                let idx = y * width + x;
                let d = depth[idx];
                let better = match best {
                    None => true,
                    Some((b, _)) => {
                        if take_max {
                            d > b
                        } else {
                            d < b
                        }
                    }
                };
                if better {
                    best = Some((d, idx));
                }
            }
            let (d, idx) = best.unwrap();
            out.depth.push(d);
            out.source.push(idx);
        }
    }
    out
}

/// Relative depth spread above which a block picks its depth extremes.
const EXTREMUM_SPREAD: f64 = 0.1;

/// Picks one half-res pixel per 2×2 half-res block. Blocks with a flat depth
/// range rotate through their four pixels with the frame index; blocks whose
/// depth varies by more than 10% alternate between their nearest (even
/// frames) and farthest (odd frames) pixel. Sky pixels are never picked.
/// Returns one entry per block in raster order.
pub fn select_visibility_pixels(half: &HalfDepth, frame: u64) -> Vec<Option<usize>> {
    let bw = half.width.div_ceil(2);
    let bh = half.height.div_ceil(2);
    let mut out = Vec::with_capacity(bw * bh);
    for by in 0..bh {
        for bx in 0..bw {
            let slots: [Option<usize>; 4] = std::array::from_fn(|k| {
                let x = 2 * bx + (k & 1);
                let y = 2 * by + (k >> 1);
                (x < half.width && y < half.height)
                    .then_some(y * half.width + x)
                    .filter(|&i| half.depth[i].is_finite())
            });
            let valid: Vec<usize> = slots.iter().flatten().copied().collect();
            if valid.is_empty() {
                out.push(None);
                continue;
            }
            let (mut lo, mut hi) = (valid[0], valid[0]);
            for &i in &valid {
                if half.depth[i] < half.depth[lo] {
                    lo = i;
                }
                if half.depth[i] > half.depth[hi] {
                    hi = i;
                }
            }
            let spread = (half.depth[hi] - half.depth[lo]) / half.depth[lo].max(1e-12);
            let pick = if spread > EXTREMUM_SPREAD {
                if frame.is_multiple_of(2) {
                    lo
                } else {
                    hi
                }
            } else {
                let start = (frame % 4) as usize;
                (0..4).find_map(|k| slots[(start + k) % 4]).unwrap()
            };
            out.push(Some(pick));
        }
    }
    out
}

/// Soft visibility from a surface point to a probe. The start is pushed off
/// the surface and the end stops `clearance` short of the probe.
pub fn probe_visibility(
    scene: &ActiveScene,
    point: DVec3,
    normal: DVec3,
    probe_pos: DVec3,
    k: f64,
    clearance: f64,
) -> f64 {
    let eps = scene.trace.surface_epsilon;
    let to_probe = probe_pos - point;
    let dist = to_probe.length();
    if dist <= 0.0 {
        return 1.0;
    }
    let cos = (to_probe / dist).dot(normal);
    let bias = 2.0 * eps / cos.max(0.1);
    let origin = point + normal * bias;
    let seg = probe_pos - origin;
    let len = seg.length();
    let t_max = len - clearance;
    if t_max <= bias {
        return 1.0;
    }
    scene.soft_shadow(origin, seg / len, bias, t_max, k)
}

/// A pixel chosen for visibility tests, with its stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedPixel {
    /// Index of the 4×4 half-res tile the pixel belongs to.
    pub tile: usize,
    pub full_index: usize,
    pub point: DVec3,
    pub normal: DVec3,
    pub stencil: InterpolationStencil,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityTask {
    pub origin_pixel: usize,
    pub point: DVec3,
    pub normal: DVec3,
    pub probes: Vec<ProbeId>,
    pub results: Vec<f64>,
}

/// Where each stencil slot of a selected pixel finds its visibility result.
pub type TaskSlot = Option<(usize, usize)>;

/// Builds visibility tasks, sharing a (probe, start point) trace between
/// pixels of the same tile whose start points fall in the same cell of a
/// grid with pitch `dedupe_distance · spacing`. Returns the tasks and, per
/// selected pixel, the task slot answering each of its 8 stencil entries.
pub fn build_visibility_tasks(
    selected: &[SelectedPixel],
    volume: &ProbeVolume,
    dedupe_distance: f64,
) -> (Vec<VisibilityTask>, Vec<[TaskSlot; 8]>) {
    let mut tasks: Vec<VisibilityTask> = Vec::new();
    let mut lookup = Vec::with_capacity(selected.len());
    // (tile, probe, quantised start point) -> (task, slot)
    let mut seen: HashMap<(usize, ProbeId, [i64; 3]), (usize, usize)> = HashMap::new();
    for px in selected {
        let mut slots: [TaskSlot; 8] = [None; 8];
        let mut own: Option<usize> = None;
        for (k, (&probe, &w)) in px.stencil.probes.iter().zip(px.stencil.weights.iter()).enumerate() {
            if w <= 0.0 {
                continue;
            }
            let cell = (px.point / (dedupe_distance * volume.spacing_of(probe))).floor();
            let key = (px.tile, probe, [cell.x as i64, cell.y as i64, cell.z as i64]);
            if let Some(&slot) = seen.get(&key) {
                slots[k] = Some(slot);
                continue;
            }
            let t = *own.get_or_insert_with(|| {
                tasks.push(VisibilityTask {
                    origin_pixel: px.full_index,
                    point: px.point,
                    normal: px.normal,
                    probes: Vec::with_capacity(8),
                    results: Vec::new(),
                });
                tasks.len() - 1
            });
            let s = tasks[t].probes.len();
            tasks[t].probes.push(probe);
            seen.insert(key, (t, s));
            slots[k] = Some((t, s));
        }
        lookup.push(slots);
    }
    (tasks, lookup)
}

pub fn run_visibility_tasks(
    scene: &ActiveScene,
    volume: &ProbeVolume,
    tasks: &mut [VisibilityTask],
    k: f64,
    threshold1: f64,
) -> QueryStats {
    tasks
        .par_iter_mut()
        .map(|task| {
            task.results = task
                .probes
                .iter()
                .map(|&id| {
                    probe_visibility(
                        scene,
                        task.point,
                        task.normal,
                        volume.probe(id).pos,
                        k,
                        threshold1 * volume.spacing_of(id),
                    )
                })
                .collect();
            stats::take_local()
        })
        .sum()
}

/// Visibility-gated interpolation: `E = Σ wᵢ·visᵢ·atlasᵢ(N) / Σ wᵢ·visᵢ`.
/// `None` when every probe is occluded.
pub fn shade_pixel_gi(
    stencil: &InterpolationStencil,
    visibility: &[f64; 8],
    atlas: &ProbeAtlas,
    normal: DVec3,
) -> Option<DVec3> {
    let mut total = DVec3::ZERO;
    let mut weight = 0.0;
    for ((&probe, &sw), &vis) in stencil.probes.iter().zip(&stencil.weights).zip(visibility) {
        let w = sw * vis;
        if w > 0.0 {
            total += atlas.sample(probe, normal) * w;
            weight += w;
        }
    }
    (weight > 0.0).then(|| total / weight)
}

/// GI state of one selected pixel after visibility gating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseSample {
    pub full_index: usize,
    pub depth: f64,
    pub normal: DVec3,
    pub probes: [ProbeId; 8],
    /// Gated weights, normalised; all zero when invalid.
    pub weights: [f64; 8],
    pub valid: bool,
}

impl SparseSample {
    fn irradiance(&self, atlas: &ProbeAtlas, normal: DVec3) -> DVec3 {
        self.probes
            .iter()
            .zip(self.weights)
            .filter(|(_, w)| *w > 0.0)
            .map(|(&p, w)| atlas.sample(p, normal) * w)
            .sum()
    }
}

/// Sparse GI at quarter density: one entry per 2×2 half-res block.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGi {
    pub blocks_w: usize,
    pub blocks_h: usize,
    pub samples: Vec<Option<SparseSample>>,
    pub visibility_traces: usize,
    pub tasks: usize,
}

/// Runs selection, dedupe and visibility for one frame.
#[allow(clippy::too_many_arguments)]
pub fn compute_sparse_gi(
    scene: &ActiveScene,
    gbuffer: &GBuffer,
    volume: &ProbeVolume,
    stencil_params: StencilParams,
    params: &ShadingParams,
    threshold1: f64,
    frame: u64,
) -> (SparseGi, QueryStats) {
    let half = downsample_depth_checkerboard(&gbuffer.depth, gbuffer.width, gbuffer.height);
    let picks = select_visibility_pixels(&half, frame);
    let blocks_w = half.width.div_ceil(2);
    let blocks_h = half.height.div_ceil(2);
    let tiles_w = blocks_w.div_ceil(2);

    let mut selected = Vec::new();
    let mut block_of = Vec::new();
    for (b, pick) in picks.iter().enumerate() {
        let Some(h) = *pick else { continue };
        let full = half.source[h];
        let (bx, by) = (b % blocks_w, b / blocks_w);
        let point = gbuffer.world_pos[full];
        selected.push(SelectedPixel {
            tile: (by / 2) * tiles_w + bx / 2,
            full_index: full,
            point,
            normal: gbuffer.normal[full],
            stencil: interpolation_stencil(volume, point, stencil_params),
        });
        block_of.push(b);
    }
    let (mut tasks, lookup) = build_visibility_tasks(&selected, volume, params.dedupe_distance);
    let st = run_visibility_tasks(scene, volume, &mut tasks, params.visibility_k, threshold1);
    let traces = tasks.iter().map(|t| t.probes.len()).sum();

    let mut samples = vec![None; blocks_w * blocks_h];
    for ((px, slots), b) in selected.iter().zip(&lookup).zip(block_of) {
        let mut weights = [0.0; 8];
        for k in 0..8 {
            if let Some((t, s)) = slots[k] {
                weights[k] = px.stencil.weights[k] * tasks[t].results[s];
            }
        }
        let total: f64 = weights.iter().sum();
        let valid = px.stencil.is_alive() && total > 0.0;
        if valid {
            weights.iter_mut().for_each(|w| *w /= total);
        } else {
            weights = [0.0; 8];
        }
        samples[b] = Some(SparseSample {
            full_index: px.full_index,
            depth: gbuffer.depth[px.full_index],
            normal: px.normal,
            probes: px.stencil.probes,
            weights,
            valid,
        });
    }
    (
        SparseGi {
            blocks_w,
            blocks_h,
            samples,
            visibility_traces: traces,
            tasks: tasks.len(),
        },
        st,
    )
}

/// Resolved GI of the previous frame, for reprojection.
#[derive(Debug, Clone, PartialEq)]
pub struct GiHistory {
    pub width: usize,
    pub height: usize,
    pub irradiance: Vec<DVec3>,
    pub depth: Vec<f64>,
    pub camera: Camera,
}

impl GiHistory {
    /// History irradiance for a surface at `world_pos` seen at full-res pixel
    /// `i` of the current frame, if it survives reprojection checks.
    fn fetch(&self, gbuffer: &GBuffer, i: usize, depth_reject: f64) -> Option<DVec3> {
        if self.width != gbuffer.width || self.height != gbuffer.height {
            return None;
        }
        let here = DVec2::new((i % gbuffer.width) as f64 + 0.5, (i / gbuffer.width) as f64 + 0.5);
        let prev = here + gbuffer.motion[i];
        if prev.x < 0.0 || prev.y < 0.0 || prev.x >= self.width as f64 || prev.y >= self.height as f64 {
            return None;
        }
        let j = prev.y as usize * self.width + prev.x as usize;
        let expected = gbuffer.world_pos[i].distance(self.camera.position);
        let d = self.depth[j];
        if !d.is_finite() || (d - expected).abs() > depth_reject * expected {
            return None;
        }
        Some(self.irradiance[j])
    }
}

/// Per-pixel result of upsampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolveSource {
    Sky,
    Neighbours,
    History,
    NearestProbe,
    None,
}

/// Bilateral upsample of the sparse GI to full resolution, blended with
/// reprojected history clamped to the current neighbourhood.
#[allow(clippy::too_many_arguments)]
pub fn upsample_and_resolve(
    sparse: &SparseGi,
    gbuffer: &GBuffer,
    history: Option<&GiHistory>,
    volume: &ProbeVolume,
    atlas: &ProbeAtlas,
    stencil_params: StencilParams,
    scene_sky: DVec3,
    params: &ShadingParams,
) -> (Vec<DVec3>, Vec<ResolveSource>) {
    let w = gbuffer.width;
    let out: Vec<(DVec3, ResolveSource)> = (0..gbuffer.len())
        .into_par_iter()
        .map(|i| {
            if gbuffer.is_sky(i) {
                return (DVec3::ZERO, ResolveSource::Sky);
            }
            let (x, y) = (i % w, i / w);
            let (bx, by) = ((x / 4) as isize, (y / 4) as isize);
            let depth = gbuffer.depth[i];
            let normal = gbuffer.normal[i];
            let mut probe_weight: Vec<(ProbeId, f64)> = Vec::with_capacity(16);
            let mut neighbours: Vec<(f64, &SparseSample)> = Vec::with_capacity(9);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (bx + dx, by + dy);
                    if nx < 0 || ny < 0 || nx >= sparse.blocks_w as isize || ny >= sparse.blocks_h as isize {
                        continue;
                    }
                    let Some(s) = &sparse.samples[ny as usize * sparse.blocks_w + nx as usize] else {
                        continue;
                    };
                    if !s.valid {
                        continue;
                    }
                    let dd = (s.depth - depth).abs();
                    if dd > params.depth_reject * depth {
                        continue;
                    }
                    let nw = normal.dot(s.normal).max(0.0).powi(4);
                    let bw = (-dd / (params.depth_sigma * depth)).exp() * nw;
                    if bw <= 0.0 {
                        continue;
                    }
                    neighbours.push((bw, s));
                }
            }
            let total: f64 = neighbours.iter().map(|n| n.0).sum();
            let hist = history.and_then(|h| h.fetch(gbuffer, i, params.depth_reject));
            if total > 0.0 {
                for (bw, s) in &neighbours {
                    for (p, sw) in s.probes.iter().zip(s.weights) {
                        if sw > 0.0 {
                            match probe_weight.iter_mut().find(|e| e.0 == *p) {
                                Some(e) => e.1 += bw * sw,
                                None => probe_weight.push((*p, bw * sw)),
                            }
                        }
                    }
                }
                let current: DVec3 = probe_weight
                    .iter()
                    .map(|(p, pw)| atlas.sample(*p, normal) * *pw)
                    .sum::<DVec3>()
                    / total;
                let resolved = match hist {
                    Some(h) => {
                        let (mut lo, mut hi) = (DVec3::splat(f64::INFINITY), DVec3::splat(f64::NEG_INFINITY));
                        for (_, s) in &neighbours {
                            let e = s.irradiance(atlas, normal);
                            lo = lo.min(e);
                            hi = hi.max(e);
                        }
                        let clamped = h.clamp(lo, hi);
                        current * (1.0 - params.history_weight) + clamped * params.history_weight
                    }
                    None => current,
                };
                return (resolved, ResolveSource::Neighbours);
            }
            if let Some(h) = hist {
                return (h, ResolveSource::History);
            }
            match nearest_probe_irradiance(volume, atlas, stencil_params, gbuffer.world_pos[i], normal) {
                Some(e) => (e, ResolveSource::NearestProbe),
                None => {
                    let stencil = interpolation_stencil(volume, gbuffer.world_pos[i], stencil_params);
                    if stencil.sky_fallback {
                        (scene_sky * PI, ResolveSource::NearestProbe)
                    } else {
                        (DVec3::ZERO, ResolveSource::None)
                    }
                }
            }
        })
        .collect();
    out.into_iter().unzip()
}

/// Irradiance of the highest-weight alive stencil probe in front of the
/// surface, with no visibility test.
fn nearest_probe_irradiance(
    volume: &ProbeVolume,
    atlas: &ProbeAtlas,
    stencil_params: StencilParams,
    point: DVec3,
    normal: DVec3,
) -> Option<DVec3> {
    let stencil = interpolation_stencil(volume, point, stencil_params);
    if stencil.sky_fallback {
        return None;
    }
    let mut best: Option<(f64, ProbeId)> = None;
    for (&p, &w) in stencil.probes.iter().zip(stencil.weights.iter()) {
        let probe = volume.probe(p);
        if probe.dead || (probe.pos - point).dot(normal) <= 0.0 {
            continue;
        }
        let score = w - probe.pos.distance(point) * 1e-9;
        if best.is_none_or(|(b, _)| score > b) {
            best = Some((score, p));
        }
    }
    best.map(|(_, p)| atlas.sample(p, normal))
}

/// Cosine-distributed direction around `normal` from two uniforms.
pub fn cosine_direction(normal: DVec3, u1: f64, u2: f64) -> DVec3 {
    let r = u1.sqrt();
    let phi = 2.0 * PI * u2;
    let (t, b) = normal.any_orthonormal_pair();
    (t * (r * phi.cos()) + b * (r * phi.sin()) + normal * (1.0 - u1).max(0.0).sqrt()).normalize()
}

/// Contact GI: short cosine-distributed rays around each pixel. Open
/// directions keep the probe irradiance, occluded ones are replaced by the
/// radiance of the occluder. Sample patterns are fixed per pixel so a static
/// view converges to a fixed point.
#[allow(clippy::too_many_arguments)]
pub fn contact_gi(
    scene: &ActiveScene,
    gbuffer: &GBuffer,
    probe_gi: &[DVec3],
    field: Option<&IrradianceField>,
    radius: f64,
    samples: usize,
    bounce_coeff: f64,
    shadow_k: f64,
) -> (Vec<DVec3>, QueryStats) {
    assert!(radius > 0.0);
    let eps = scene.trace.surface_epsilon;
    let results: Vec<(DVec3, QueryStats)> = (0..gbuffer.len())
        .into_par_iter()
        .map(|i| {
            if gbuffer.is_sky(i) || samples == 0 {
                return (probe_gi[i], QueryStats::default());
            }
            let p = gbuffer.world_pos[i];
            let n = gbuffer.normal[i];
            let mut rng = ChaCha8Rng::seed_from_u64(0x0C0A_7AC7);
            rng.set_stream(i as u64);
            let jitter: f64 = rng.gen();
            let spin: f64 = rng.gen();
            let golden = 0.618_033_988_749_894_9;
            let origin = p + n * (2.0 * eps);
            let mut open = 0usize;
            let mut occluder = DVec3::ZERO;
            for s in 0..samples {
                let u1 = (s as f64 + jitter) / samples as f64;
                let u2 = (spin + s as f64 * golden).fract();
                let dir = cosine_direction(n, u1, u2);
                match scene.sphere_trace(origin, dir, radius) {
                    Trace::Hit(h) | Trace::Exhausted(h) => {
                        occluder += shade_hit(scene, &h, field, bounce_coeff, shadow_k);
                    }
                    Trace::Escaped => open += 1,
                }
            }
            let ao = open as f64 / samples as f64;
            let e = probe_gi[i] * ao + occluder * (PI / samples as f64);
            (e, stats::take_local())
        })
        .collect();
    let mut st = QueryStats::default();
    let out = results
        .into_iter()
        .map(|(e, s)| {
            st += s;
            e
        })
        .collect();
    (out, st)
}

/// `L = emission + albedo/π · (direct + E_gi)`; sky pixels show the sky.
pub fn compose_frame(gbuffer: &GBuffer, scene: &ActiveScene, gi: &[DVec3], direct_k: f64) -> Vec<DVec3> {
    let sky = scene.environment();
    (0..gbuffer.len())
        .into_par_iter()
        .map(|i| {
            if gbuffer.is_sky(i) {
                return sky;
            }
            let albedo = gbuffer.albedo[i];
            let mut l = gbuffer.emission[i];
            if albedo != DVec3::ZERO {
                let direct = scene.direct_irradiance(gbuffer.world_pos[i], gbuffer.normal[i], direct_k);
                l += albedo / PI * (direct + gi[i]);
            }
            l
        })
        .collect()
}

pub fn luminance(c: DVec3) -> f64 {
    0.2126 * c.x + 0.7152 * c.y + 0.0722 * c.z
}

/// Binary PPM (P6), 8-bit, gamma 2.2 after scaling by `exposure`.
pub fn write_ppm(mut w: impl Write, width: usize, height: usize, pixels: &[DVec3], exposure: f64) -> io::Result<()> {
    assert_eq!(pixels.len(), width * height);
    write!(w, "P6\n{width} {height}\n255\n")?;
    let mut buf = Vec::with_capacity(pixels.len() * 3);
    for p in pixels {
        for c in p.to_array() {
            let v = (c * exposure).max(0.0).powf(1.0 / 2.2).min(1.0);
            buf.push((v * 255.0).round() as u8);
        }
    }
    w.write_all(&buf)
}

pub const HDR_MAGIC: &[u8; 4] = b"SDFI";

/// Flat float dump: magic, width and height as little-endian u32, then f32 RGB.
pub fn write_hdr(mut w: impl Write, width: usize, height: usize, pixels: &[DVec3]) -> io::Result<()> {
    assert_eq!(pixels.len(), width * height);
    w.write_all(HDR_MAGIC)?;
    w.write_all(&(width as u32).to_le_bytes())?;
    w.write_all(&(height as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(pixels.len() * 12);
    for p in pixels {
        for c in p.to_array() {
            buf.extend_from_slice(&(c as f32).to_le_bytes());
        }
    }
    w.write_all(&buf)
}

pub fn read_hdr(bytes: &[u8]) -> io::Result<(usize, usize, Vec<DVec3>)> {
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    if bytes.len() < 12 || &bytes[..4] != HDR_MAGIC {
        return Err(bad("bad HDR magic"));
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != width * height * 12 {
        return Err(bad("HDR size mismatch"));
    }
    let px = body
        .chunks_exact(12)
        .map(|c| {
            let f = |k: usize| f32::from_le_bytes(c[k..k + 4].try_into().unwrap()) as f64;
            DVec3::new(f(0), f(4), f(8))
        })
        .collect();
    Ok((width, height, px))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkerboard_picks_max_on_black_and_min_on_white() {
        // 4×2 image: two 2×2 blocks, both {1, 2, 3, 4}.
        let depth = [1.0, 2.0, 1.0, 2.0, 3.0, 4.0, 3.0, 4.0];
        let half = downsample_depth_checkerboard(&depth, 4, 2);
        assert_eq!((half.width, half.height), (2, 1));
        assert_eq!(half.depth, vec![4.0, 1.0]);
        assert_eq!(half.source, vec![5, 2]);
    }

    #[test]
    fn constant_depth_stays_constant_and_odd_sizes_pad() {
        let depth = vec![3.5; 5 * 3];
        let half = downsample_depth_checkerboard(&depth, 5, 3);
        assert_eq!((half.width, half.height), (3, 2));
        assert!(half.depth.iter().all(|&d| d == 3.5));
    }

    fn half_from(depth: Vec<f64>, width: usize) -> HalfDepth {
        let height = depth.len() / width;
        HalfDepth {
            width,
            height,
            source: (0..depth.len()).collect(),
            depth,
        }
    }

    #[test]
    fn flat_block_rotates_through_all_pixels() {
        let half = half_from(vec![5.0; 4], 2);
        let picks: Vec<_> = (0..4).map(|f| select_visibility_pixels(&half, f)[0].unwrap()).collect();
        let mut sorted = picks.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 4);
    }

    #[test]
    fn foreground_pixel_is_picked_on_even_frames() {
        let half = half_from(vec![100.0, 100.0, 1.0, 100.0], 2);
        assert_eq!(select_visibility_pixels(&half, 0)[0], Some(2));
        assert_eq!(select_visibility_pixels(&half, 2)[0], Some(2));
        assert_eq!(half.depth[select_visibility_pixels(&half, 1)[0].unwrap()], 100.0);
    }

    #[test]
    fn sky_block_has_no_pick() {
        let half = half_from(vec![f64::INFINITY; 4], 2);
        assert_eq!(select_visibility_pixels(&half, 0), vec![None]);
    }

    #[test]
    fn ppm_header_and_size() {
        let mut out = Vec::new();
        write_ppm(&mut out, 2, 1, &[DVec3::ONE, DVec3::ZERO], 1.0).unwrap();
        assert!(out.starts_with(b"P6\n2 1\n255\n"));
        assert_eq!(&out[out.len() - 6..], &[255, 255, 255, 0, 0, 0]);
    }

    #[test]
    fn hdr_round_trip() {
        let px = vec![DVec3::new(0.5, 1.5, 2.5), DVec3::new(3.0, 0.0, 1e3)];
        let mut out = Vec::new();
        write_hdr(&mut out, 1, 2, &px).unwrap();
        assert_eq!(&out[..4], b"SDFI");
        let (w, h, back) = read_hdr(&out).unwrap();
        assert_eq!((w, h), (1, 2));
        assert_eq!(back, px);
    }
}
