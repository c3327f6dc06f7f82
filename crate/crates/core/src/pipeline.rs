//! Frame loop: cull and cluster, place and pick probes, update probes,
//! shade pixels.

use std::time::Instant;

use glam::{DVec3, UVec3};

use crate::atlas::ProbeAtlas;
use crate::camera::Camera;
use crate::cluster::{ActiveScene, ClusterParams, SceneCuller, TraceConfig};
use crate::probe::{
    select_probes_for_update, update_probe_positions, Anchor, ProbeId, ProbeVolume, RelocationParams,
    SchedulerParams,
};
use crate::sdf::{Light, SdfPrimitive};
use crate::shading::{
    compose_frame, compute_sparse_gi, contact_gi, luminance, render_gbuffer, upsample_and_resolve, GBuffer,
    GiHistory, ShadingParams,
};
use crate::stats::{self, QueryStats};
use crate::stencil::StencilParams;
use crate::update::{update_probes, IrradianceField, ProbeUpdateParams};

#[derive(Debug, Clone, PartialEq)]
pub struct GiConfig {
    pub width: usize,
    pub height: usize,
    pub cascade_resolution: UVec3,
    pub base_spacing: f64,
    pub cascade_levels: u32,
    pub anchor: Anchor,
    /// Interior texels per side of each probe tile.
    pub atlas_resolution: usize,
    /// Probes updated per frame.
    pub probe_budget: usize,
    pub cluster: ClusterParams,
    pub trace: TraceConfig,
    pub relocation: RelocationParams,
    pub scheduler: SchedulerParams,
    pub stencil: StencilParams,
    pub update: ProbeUpdateParams,
    pub shading: ShadingParams,
    /// Culling distance per LOD tier (tier 1 first).
    pub lod_distances: Vec<f64>,
}

impl Default for GiConfig {
    fn default() -> Self {
        GiConfig {
            width: 480,
            height: 270,
            cascade_resolution: UVec3::splat(8),
            base_spacing: 1.0,
            cascade_levels: 1,
            anchor: Anchor::Camera,
            atlas_resolution: 8,
            probe_budget: 256,
            cluster: ClusterParams::default(),
            trace: TraceConfig::default(),
            relocation: RelocationParams::default(),
            scheduler: SchedulerParams::default(),
            stencil: StencilParams::default(),
            update: ProbeUpdateParams::default(),
            shading: ShadingParams::default(),
            lod_distances: Vec::new(),
        }
    }
}

/// Scene state for one frame.
#[derive(Debug, Clone, Copy)]
pub struct FrameInput<'a> {
    pub primitives: &'a [SdfPrimitive],
    pub lights: &'a [Light],
    pub sky: DVec3,
    pub camera: Camera,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameStats {
    pub frame: u64,
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
    /// Mean relative per-pixel change of GI luminance against the previous frame.
    pub jitter: f64,
    pub queries: QueryStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub image: Vec<DVec3>,
    pub gbuffer: GBuffer,
    /// Resolved probe irradiance before Contact GI.
    pub probe_gi: Vec<DVec3>,
    /// Irradiance after Contact GI, as used in composition.
    pub gi: Vec<DVec3>,
    pub stats: FrameStats,
}

#[derive(Debug, Clone)]
pub struct GiRenderer {
    pub config: GiConfig,
    pub volume: ProbeVolume,
    pub atlas: ProbeAtlas,
    culler: SceneCuller,
    history: Option<GiHistory>,
    previous_camera: Option<Camera>,
    frame: u64,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

impl GiRenderer {
    pub fn new(config: GiConfig, initial_camera: DVec3) -> Self {
        assert!(config.width >= 1 && config.height >= 1);
        let volume = ProbeVolume::new(
            config.cascade_resolution,
            config.base_spacing,
            config.cascade_levels,
            config.anchor,
            initial_camera,
        );
        let atlas = ProbeAtlas::new(config.atlas_resolution, volume.probe_count());
        GiRenderer {
            config,
            volume,
            atlas,
            culler: SceneCuller::new(),
            history: None,
            previous_camera: None,
            frame: 0,
        }
    }

    /// Index of the next frame to run.
    pub fn frame(&self) -> u64 {
        self.frame
    }

    pub fn field(&self) -> IrradianceField<'_> {
        IrradianceField {
            volume: &self.volume,
            atlas: &self.atlas,
            stencil: self.config.stencil,
            gate: self.config.update.bounce_gate,
            visibility_k: self.config.update.visibility_k,
            threshold1: self.config.relocation.threshold1,
        }
    }

    /// Active scene for `input` as the pipeline would see it.
    pub fn build_scene(&mut self, input: &FrameInput) -> ActiveScene {
        let mut scene = self.culler.update(
            input.primitives,
            input.camera.position,
            &self.config.lod_distances,
            self.config.cluster,
            input.lights.to_vec(),
            input.sky,
        );
        scene.trace = self.config.trace;
        scene.frame_index = self.frame;
        scene
    }

    /// Runs the probe half of a frame (cull, place, pick, update) and
    /// advances the frame counter. Returns the scene used.
    pub fn step_probes(&mut self, input: &FrameInput, stats_out: &mut FrameStats) -> ActiveScene {
        let t = Instant::now();
        let scene = self.build_scene(input);
        stats_out.cull_ms = ms_since(t);
        stats_out.active_primitives = scene.primitives().len();
        stats_out.clusters = scene.clusters().len();

        let t = Instant::now();
        let reset = self.volume.recenter(input.camera.position);
        let zeros = vec![DVec3::ZERO; self.atlas.resolution().pow(2)];
        for id in reset {
            self.atlas.write_interior(id, &zeros);
        }
        let reloc = update_probe_positions(&mut self.volume, &scene, self.config.relocation);
        stats_out.relocated = reloc.relocated;
        stats_out.rejected = reloc.rejected.len();
        stats_out.dead = reloc.dead;
        let ids = select_probes_for_update(
            &self.volume,
            input.camera.viewpoint(),
            self.config.probe_budget.max(1),
            self.frame,
            self.config.scheduler,
        );
        stats_out.probe_select_ms = ms_since(t);

        let t = Instant::now();
        let mut next = self.atlas.clone();
        let report = update_probes(
            &scene,
            &mut self.volume,
            &ids,
            &self.atlas,
            &mut next,
            &self.config.update,
            self.config.stencil,
            self.config.relocation.threshold1,
            self.frame,
        );
        self.atlas = next;
        stats_out.probe_update_ms = ms_since(t);
        stats_out.probes_updated = report.probes_updated;
        stats_out.probe_rays = report.rays;
        stats_out.queries += report.stats;
        stats_out.frame = self.frame;
        self.frame += 1;
        scene
    }

    /// Runs probe updates only, `frames` times; cheaper than full frames for
    /// convergence studies.
    pub fn converge_probes(&mut self, input: &FrameInput, frames: usize) -> ActiveScene {
        let mut last = None;
        for _ in 0..frames {
            let mut s = FrameStats::default();
            last = Some(self.step_probes(input, &mut s));
        }
        last.unwrap_or_else(|| self.build_scene(input))
    }

    /// Shades the current probe state for `input` without touching probes.
    pub fn shade(&mut self, scene: &ActiveScene, camera: &Camera, stats_out: &mut FrameStats) -> FrameOutput {
        let t = Instant::now();
        let cfg = &self.config;
        let (w, h) = (cfg.width, cfg.height);
        stats::take_local();
        let gbuffer = render_gbuffer(
            scene,
            camera,
            self.previous_camera.as_ref(),
            w,
            h,
            cfg.shading.primary_ray_length,
        );
        let frame = self.frame.saturating_sub(1);
        let probe_gi = if cfg.shading.probe_gi {
            let (sparse, vis_stats) = compute_sparse_gi(
                scene,
                &gbuffer,
                &self.volume,
                cfg.stencil,
                &cfg.shading,
                cfg.relocation.threshold1,
                frame,
            );
            stats_out.queries += vis_stats;
            stats_out.visibility_traces = sparse.visibility_traces;
            stats_out.traces_per_pixel = sparse.visibility_traces as f64 / (w * h) as f64;
            upsample_and_resolve(
                &sparse,
                &gbuffer,
                self.history.as_ref(),
                &self.volume,
                &self.atlas,
                cfg.stencil,
                scene.environment(),
                &cfg.shading,
            )
            .0
        } else {
            vec![DVec3::ZERO; w * h]
        };
        let gi = if cfg.shading.contact_gi {
            let field = self.field();
            let radius = cfg.shading.contact_radius * cfg.base_spacing;
            let (gi, st) = contact_gi(
                scene,
                &gbuffer,
                &probe_gi,
                Some(&field),
                radius,
                cfg.shading.ao_samples,
                cfg.update.bounce_coeff,
                cfg.update.shadow_k,
            );
            stats_out.queries += st;
            gi
        } else {
            probe_gi.clone()
        };
        let image = compose_frame(&gbuffer, scene, &gi, cfg.shading.direct_k);
        stats_out.queries += stats::take_local();

        if let Some(prev) = &self.history {
            if prev.irradiance.len() == probe_gi.len() {
                let (mut sum, mut n) = (0.0, 0usize);
                for (a, b) in prev.irradiance.iter().zip(&probe_gi) {
                    let (la, lb) = (luminance(*a), luminance(*b));
                    let scale = la.max(lb);
                    if scale > 1e-9 {
                        sum += (la - lb).abs() / scale;
                        n += 1;
                    }
                }
                stats_out.jitter = if n > 0 { sum / n as f64 } else { 0.0 };
            }
        }
        self.history = Some(GiHistory {
            width: w,
            height: h,
            irradiance: probe_gi.clone(),
            depth: gbuffer.depth.clone(),
            camera: *camera,
        });
        self.previous_camera = Some(*camera);
        stats_out.shading_ms = ms_since(t);
        FrameOutput {
            image,
            gbuffer,
            probe_gi,
            gi,
            stats: stats_out.clone(),
        }
    }

    /// One full frame in pipeline order.
    pub fn render_frame(&mut self, input: &FrameInput) -> FrameOutput {
        let start = Instant::now();
        let mut st = FrameStats::default();
        let scene = self.step_probes(input, &mut st);
        let mut out = self.shade(&scene, &input.camera, &mut st);
        out.stats.total_ms = ms_since(start);
        out
    }

    /// Drops GI history, e.g. after a camera cut.
    pub fn reset_history(&mut self) {
        self.history = None;
        self.previous_camera = None;
    }

    pub fn alive_probes(&self) -> Vec<ProbeId> {
        self.volume.iter().filter(|(_, p)| !p.dead).map(|(id, _)| id).collect()
    }
}
