//! Probe radiance sampling, irradiance convolution and temporal blending.

use std::f64::consts::PI;

use glam::{DQuat, DVec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::atlas::ProbeAtlas;
use crate::cluster::{ActiveScene, Hit, Trace};
use crate::probe::{ProbeId, ProbeVolume};
use crate::shading::probe_visibility;
use crate::stats::{self, QueryStats};
use crate::stencil::{interpolation_stencil, StencilParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeUpdateParams {
    /// Rays for a regular update; doubled when history is rejected.
    pub n_rays_full: usize,
    /// Weight of the previous frame's irradiance at ray hits.
    pub bounce_coeff: f64,
    pub hysteresis: f64,
    pub alpha_min: f64,
    /// Relative texel change that triggers fast blending; `INFINITY` disables it.
    pub fast_response_threshold: f64,
    pub fast_response_alpha: f64,
    /// Cone sharpness for shadows towards lights from ray hits.
    pub shadow_k: f64,
    /// Cone sharpness for visibility towards probes in bounce lookups.
    pub visibility_k: f64,
    pub bounce_gate: BounceGate,
    pub ray_length: f64,
    /// Mixed into the per-frame ray rotation.
    pub seed: u64,
}

impl Default for ProbeUpdateParams {
    fn default() -> Self {
        ProbeUpdateParams {
            n_rays_full: 144,
            bounce_coeff: 0.9,
            hysteresis: 0.9,
            alpha_min: 0.02,
            fast_response_threshold: 0.25,
            fast_response_alpha: 0.5,
            shadow_k: 8.0,
            visibility_k: 8.0,
            bounce_gate: BounceGate::Visibility,
            ray_length: 1000.0,
            seed: 0,
        }
    }
}

/// How probes are screened when a surface point reads irradiance from the
/// previous frame's atlas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BounceGate {
    /// Plain stencil weights.
    None,
    /// Drop probes behind the surface's tangent plane.
    Backface,
    /// Soft-shadow trace to every probe.
    Visibility,
}

/// Unrotated spherical Fibonacci point set.
pub fn fibonacci_sphere(n: usize) -> Vec<DVec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            DVec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Uniform random rotation (Shoemake's subgroup algorithm).
pub fn random_rotation(rng: &mut impl Rng) -> DQuat {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen::<f64>() * 2.0 * PI;
    let u3: f64 = rng.gen::<f64>() * 2.0 * PI;
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    DQuat::from_xyzw(a * u2.sin(), a * u2.cos(), b * u3.sin(), b * u3.cos()).normalize()
}

/// Spherical Fibonacci directions with a rotation that depends only on
/// `(seed, frame, probe)`.
pub fn sample_directions(n: usize, seed: u64, frame: u64, probe: ProbeId) -> Vec<DVec3> {
    assert!(n >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ frame);
    rng.set_stream(u64::from(probe.0));
    let rot = random_rotation(&mut rng);
    fibonacci_sphere(n).into_iter().map(|d| (rot * d).normalize()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadianceSample {
    pub dir: DVec3,
    pub radiance: DVec3,
    pub hit_t: Option<f64>,
}

/// Monte Carlo estimate of cosine-weighted irradiance around `texel_dir`
/// from uniformly distributed samples. `None` when there are no samples.
pub fn convolve_irradiance(samples: &[RadianceSample], texel_dir: DVec3) -> Option<DVec3> {
    if samples.is_empty() {
        return None;
    }
    let sum: DVec3 = samples
        .iter()
        .map(|s| s.radiance * texel_dir.dot(s.dir).max(0.0))
        .sum();
    Some(sum * (4.0 * PI / samples.len() as f64))
}

/// Read access to a probe atlas for irradiance lookups at surface points.
#[derive(Debug, Clone, Copy)]
pub struct IrradianceField<'a> {
    pub volume: &'a ProbeVolume,
    pub atlas: &'a ProbeAtlas,
    pub stencil: StencilParams,
    pub gate: BounceGate,
    pub visibility_k: f64,
    /// Clearance kept from probes, as a fraction of spacing.
    pub threshold1: f64,
}

impl IrradianceField<'_> {
    /// Interpolated irradiance for surface normal `normal` at `point`, or
    /// `None` if no probe survives the gate.
    pub fn irradiance(&self, scene: &ActiveScene, point: DVec3, normal: DVec3) -> Option<DVec3> {
        let stencil = interpolation_stencil(self.volume, point, self.stencil);
        if !stencil.is_alive() {
            return None;
        }
        let mut total = DVec3::ZERO;
        let mut weight = 0.0;
        for (id, w) in stencil.entries() {
            let probe = self.volume.probe(id);
            let gate = match self.gate {
                BounceGate::None => 1.0,
                BounceGate::Backface => {
                    if (probe.pos - point).dot(normal) > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                BounceGate::Visibility => probe_visibility(
                    scene,
                    point,
                    normal,
                    probe.pos,
                    self.visibility_k,
                    self.threshold1 * self.volume.spacing_of(id),
                ),
            };
            let wv = w * gate;
            if wv > 0.0 {
                total += self.atlas.sample(id, normal) * wv;
                weight += wv;
            }
        }
        (weight > 0.0).then(|| total / weight)
    }
}

/// Outgoing radiance at a ray hit: emission, soft-shadowed direct light and
/// the damped previous-frame irradiance.
pub fn shade_hit(
    scene: &ActiveScene,
    hit: &Hit,
    previous: Option<&IrradianceField>,
    bounce_coeff: f64,
    shadow_k: f64,
) -> DVec3 {
    let material = scene.primitives()[hit.primitive].material;
    let mut l = material.emission;
    if material.albedo == DVec3::ZERO {
        return l;
    }
    let brdf = material.albedo / PI;
    l += brdf * scene.direct_irradiance(hit.position, hit.normal, shadow_k);
    if bounce_coeff > 0.0 {
        if let Some(field) = previous {
            if let Some(e) = field.irradiance(scene, hit.position, hit.normal) {
                l += brdf * bounce_coeff * e;
            }
        }
    }
    l
}

/// Traces one ray and returns its radiance sample.
pub fn trace_radiance(
    scene: &ActiveScene,
    origin: DVec3,
    dir: DVec3,
    previous: Option<&IrradianceField>,
    params: &ProbeUpdateParams,
) -> RadianceSample {
    match scene.sphere_trace(origin, dir, params.ray_length) {
        Trace::Hit(h) | Trace::Exhausted(h) => RadianceSample {
            dir,
            radiance: shade_hit(scene, &h, previous, params.bounce_coeff, params.shadow_k),
            hit_t: Some(h.t),
        },
        Trace::Escaped => RadianceSample {
            dir,
            radiance: scene.environment(),
            hit_t: None,
        },
    }
}

/// Blend factor for a texel given the ray count and the size of the change.
pub fn blend_alpha(params: &ProbeUpdateParams, n_rays: usize, reject: bool, old: DVec3, new: DVec3) -> f64 {
    if reject {
        return 1.0;
    }
    let sufficiency = (n_rays as f64 / params.n_rays_full as f64).min(1.0);
    let mut alpha = ((1.0 - params.hysteresis) * sufficiency).clamp(params.alpha_min, 1.0);
    if params.fast_response_threshold.is_finite() {
        let scale = old.max_element().max(new.max_element());
        if scale > 1e-6 && (new - old).abs().max_element() > params.fast_response_threshold * scale {
            alpha = alpha.max(params.fast_response_alpha);
        }
    }
    alpha
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeUpdate {
    pub id: ProbeId,
    pub texels: Vec<DVec3>,
    pub n_rays: usize,
    pub samples: Vec<RadianceSample>,
}

/// Computes one probe's new interior texels from `previous` without writing.
pub fn update_probe(
    scene: &ActiveScene,
    volume: &ProbeVolume,
    id: ProbeId,
    previous: &IrradianceField,
    params: &ProbeUpdateParams,
    frame: u64,
) -> ProbeUpdate {
    let probe = volume.probe(id);
    let n_rays = if probe.reject_history {
        params.n_rays_full * 2
    } else {
        params.n_rays_full
    };
    let bounce = (params.bounce_coeff > 0.0).then_some(previous);
    let samples: Vec<RadianceSample> = sample_directions(n_rays, params.seed, frame, id)
        .into_iter()
        .map(|d| trace_radiance(scene, probe.pos, d, bounce, params))
        .collect();
    let atlas = previous.atlas;
    let r = atlas.resolution();
    let mut texels = Vec::with_capacity(r * r);
    for j in 0..r {
        for i in 0..r {
            let dir = atlas.texel_direction(i, j);
            let new = convolve_irradiance(&samples, dir).unwrap_or(DVec3::ZERO);
            let old = atlas.interior(id, i, j);
            let alpha = blend_alpha(params, n_rays, probe.reject_history, old, new);
            texels.push(old.lerp(new, alpha).max(DVec3::ZERO));
        }
    }
    ProbeUpdate {
        id,
        texels,
        n_rays,
        samples,
    }
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct UpdateReport {
    pub probes_updated: usize,
    pub rays: usize,
    pub stats: QueryStats,
}

/// Updates `ids` in parallel, reading `previous` and writing into `next`
/// (which should start as a copy of `previous`). Marks the probes updated.
#[allow(clippy::too_many_arguments)]
pub fn update_probes(
    scene: &ActiveScene,
    volume: &mut ProbeVolume,
    ids: &[ProbeId],
    previous: &ProbeAtlas,
    next: &mut ProbeAtlas,
    params: &ProbeUpdateParams,
    stencil: StencilParams,
    threshold1: f64,
    frame: u64,
) -> UpdateReport {
    let field = IrradianceField {
        volume,
        atlas: previous,
        stencil,
        gate: params.bounce_gate,
        visibility_k: params.visibility_k,
        threshold1,
    };
    let results: Vec<(ProbeUpdate, QueryStats)> = ids
        .par_iter()
        .map(|&id| {
            let u = update_probe(scene, volume, id, &field, params, frame);
            (u, stats::take_local())
        })
        .collect();
    let mut report = UpdateReport::default();
    for (u, s) in results {
        next.write_interior(u.id, &u.texels);
        report.rays += u.n_rays;
        report.probes_updated += 1;
        report.stats += s;
        let p = volume.probe_mut(u.id);
        p.reject_history = false;
        p.last_update_frame = Some(frame);
        p.updates += 1;
    }
    report
}
