//! Brute-force path tracer over the same SDF scenes, used as ground truth.
//!
//! Cosine-importance sampled Lambertian paths with next-event estimation to
//! point and directional lights under binary occlusion. Emission is added at
//! every vertex; escaping paths pick up the sky. Each pixel (or irradiance
//! query) owns a counter-based RNG stream so results do not depend on
//! scheduling.

use std::f64::consts::PI;

use glam::DVec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::camera::Camera;
use crate::cluster::{ActiveScene, Trace};
use crate::shading::cosine_direction;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleParams {
    pub spp: u32,
    /// Surface interactions per path. `1` gives emission plus direct light
    /// at the first hit only.
    pub max_bounces: u32,
    pub seed: u64,
    /// Russian roulette starts after this many bounces.
    pub roulette_after: u32,
    pub ray_length: f64,
}

impl OracleParams {
    pub fn new(spp: u32, max_bounces: u32, seed: u64) -> Self {
        assert!(spp >= 1 && max_bounces >= 1);
        OracleParams {
            spp,
            max_bounces,
            seed,
            roulette_after: 3,
            ray_length: 1e4,
        }
    }
}

fn occluded(scene: &ActiveScene, origin: DVec3, dir: DVec3, dist: f64, ray_length: f64) -> bool {
    let t_max = if dist.is_finite() { dist } else { ray_length };
    match scene.sphere_trace(origin, dir, t_max) {
        Trace::Hit(h) | Trace::Exhausted(h) => h.t < t_max,
        Trace::Escaped => false,
    }
}

/// Unshadowed-by-penumbra delta-light irradiance with hard occlusion.
fn delta_light_irradiance(scene: &ActiveScene, p: DVec3, n: DVec3, ray_length: f64) -> DVec3 {
    let bias = 2.0 * scene.trace.surface_epsilon;
    let start = p + n * bias;
    let mut total = DVec3::ZERO;
    for light in &scene.lights {
        let Some((e, dir, dist)) = light.incident(p, n) else {
            continue;
        };
        if e == DVec3::ZERO {
            continue;
        }
        if !occluded(scene, start, dir, dist - bias, ray_length) {
            total += e;
        }
    }
    total
}

/// Radiance arriving at `origin` from direction `dir`, with `bounces`
/// surface interactions allowed along the path.
pub fn path_radiance(
    scene: &ActiveScene,
    origin: DVec3,
    dir: DVec3,
    bounces: u32,
    params: &OracleParams,
    rng: &mut impl Rng,
) -> DVec3 {
    let eps = scene.trace.surface_epsilon;
    let sky = scene.environment();
    let mut throughput = DVec3::ONE;
    let mut radiance = DVec3::ZERO;
    let mut o = origin;
    let mut d = dir;
    let mut vertex = 0u32;
    while vertex < bounces {
        let hit = match scene.sphere_trace(o, d, params.ray_length) {
            Trace::Hit(h) | Trace::Exhausted(h) => h,
            Trace::Escaped => {
                radiance += throughput * sky;
                break;
            }
        };
        let m = scene.primitives()[hit.primitive].material;
        radiance += throughput * m.emission;
        if m.albedo == DVec3::ZERO {
            break;
        }
        let n = hit.normal;
        radiance += throughput * m.albedo / PI * delta_light_irradiance(scene, hit.position, n, params.ray_length);
        vertex += 1;
        if vertex >= bounces {
            break;
        }
        // Cosine sampling cancels cos/pdf, leaving the albedo as the weight.
        throughput *= m.albedo;
        if vertex > params.roulette_after {
            let keep = m.albedo.max_element().min(1.0);
            if rng.gen::<f64>() >= keep {
                break;
            }
            throughput /= keep;
        }
        o = hit.position + n * (2.0 * eps);
        d = cosine_direction(n, rng.gen(), rng.gen());
    }
    radiance
}

fn pixel_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mean radiance of `spp` paths through the centre of each listed pixel.
pub fn path_trace_pixels(
    scene: &ActiveScene,
    camera: &Camera,
    width: usize,
    height: usize,
    pixels: &[usize],
    params: &OracleParams,
) -> Vec<DVec3> {
    pixels
        .par_iter()
        .map(|&i| {
            let mut rng = pixel_rng(params.seed, i as u64);
            let dir = camera.ray_dir(i % width, i / width, width, height);
            let mut sum = DVec3::ZERO;
            for _ in 0..params.spp {
                sum += path_radiance(scene, camera.position, dir, params.max_bounces, params, &mut rng);
            }
            sum / f64::from(params.spp)
        })
        .collect()
}

pub fn path_trace_image(
    scene: &ActiveScene,
    camera: &Camera,
    width: usize,
    height: usize,
    params: &OracleParams,
) -> Vec<DVec3> {
    let all: Vec<usize> = (0..width * height).collect();
    path_trace_pixels(scene, camera, width, height, &all, params)
}

/// Cosine-weighted irradiance over the hemisphere around `normal`. Delta
/// lights shining directly on the point are excluded; `max_bounces` counts
/// surface interactions after leaving the point.
pub fn path_trace_irradiance(scene: &ActiveScene, point: DVec3, normal: DVec3, params: &OracleParams) -> DVec3 {
    let origin = point + normal * (2.0 * scene.trace.surface_epsilon);
    let mut rng = pixel_rng(params.seed, u64::MAX);
    let mut sum = DVec3::ZERO;
    for _ in 0..params.spp {
        let d = cosine_direction(normal, rng.gen(), rng.gen());
        sum += path_radiance(scene, origin, d, params.max_bounces, params, &mut rng);
    }
    sum * (PI / f64::from(params.spp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdf::{Material, SdfPrimitive, Shape};
    use crate::cluster::ClusterParams;

    #[test]
    fn black_scene_is_black() {
        let prims = vec![SdfPrimitive::new(
            0,
            Shape::Sphere { radius: 1.0 },
            Default::default(),
            Material::diffuse(DVec3::splat(0.5)),
        )
        .unwrap()];
        let scene = ActiveScene::new(&prims, ClusterParams::default(), vec![], DVec3::ZERO);
        let cam = Camera::look_at(DVec3::new(0.0, 0.0, 5.0), DVec3::ZERO, DVec3::Y, 40.0);
        let img = path_trace_image(&scene, &cam, 8, 6, &OracleParams::new(4, 8, 1));
        assert!(img.iter().all(|&c| c == DVec3::ZERO));
    }
}
