//! Whole-frame behaviour of the renderer on a small lit room.

mod common;

use common::{boxed, closed_room};
use glam::{DVec3, UVec3};
use probegi::{Anchor, Camera, FrameInput, GiConfig, GiRenderer, Light, Material, SdfPrimitive};

fn room() -> (Vec<SdfPrimitive>, Vec<Light>) {
    let mut prims = closed_room(1.0, 0.05, Material::diffuse(DVec3::splat(0.7)));
    // Open the front wall so the camera can look in.
    prims.retain(|p| p.center().z < 1.0);
    prims.push(boxed(20, DVec3::new(0.3, -0.7, -0.2), DVec3::splat(0.3), Material::diffuse(DVec3::new(0.8, 0.3, 0.2))));
    let light = Light::Point {
        position: DVec3::new(0.0, 0.8, 0.0),
        intensity: DVec3::splat(3.0),
    };
    (prims, vec![light])
}

fn config() -> GiConfig {
    GiConfig {
        width: 64,
        height: 36,
        cascade_resolution: UVec3::splat(5),
        base_spacing: 0.5,
        anchor: Anchor::Fixed(DVec3::ZERO),
        probe_budget: 125,
        ..GiConfig::default()
    }
}

fn camera() -> Camera {
    Camera::look_at(DVec3::new(0.0, 0.0, 3.2), DVec3::ZERO, DVec3::Y, 40.0)
}

fn max_delta(a: &[DVec3], b: &[DVec3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (*x - *y).abs().max_element()).fold(0.0, f64::max)
}

#[test]
fn held_frame_shading_reaches_a_fixed_point() {
    let (prims, lights) = room();
    let input = FrameInput {
        primitives: &prims,
        lights: &lights,
        sky: DVec3::ZERO,
        camera: camera(),
    };
    let mut r = GiRenderer::new(config(), input.camera.position);
    let s = r.converge_probes(&input, 30);
    let mut prev = Vec::new();
    let mut delta = f64::INFINITY;
    for _ in 0..25 {
        let mut st = Default::default();
        let out = r.shade(&s, &input.camera, &mut st);
        if !prev.is_empty() {
            delta = max_delta(&out.gi, &prev);
        }
        prev = out.gi;
    }
    assert!(delta < 1e-6, "delta {delta}");
}

#[test]
fn frozen_probes_settle_into_the_selection_cycle() {
    let (prims, lights) = room();
    let input = FrameInput {
        primitives: &prims,
        lights: &lights,
        sky: DVec3::ZERO,
        camera: camera(),
    };
    let mut r = GiRenderer::new(config(), input.camera.position);
    r.converge_probes(&input, 30);
    // Zero blend weight: probe updates still run but leave the atlas as is.
    r.config.update.hysteresis = 1.0;
    r.config.update.alpha_min = 0.0;
    r.config.update.fast_response_threshold = f64::INFINITY;
    let frames: Vec<Vec<DVec3>> = (0..60).map(|_| r.render_frame(&input).gi).collect();
    let n = frames.len();
    let cycle = (1..=4).map(|k| max_delta(&frames[n - k], &frames[n - k - 4])).fold(0.0, f64::max);
    assert!(cycle < 1e-4, "4-frame delta {cycle}");
}

#[test]
fn rendering_is_deterministic() {
    let (prims, lights) = room();
    let input = FrameInput {
        primitives: &prims,
        lights: &lights,
        sky: DVec3::ZERO,
        camera: camera(),
    };
    let run = || {
        let mut r = GiRenderer::new(config(), input.camera.position);
        let images: Vec<Vec<DVec3>> = (0..4).map(|_| r.render_frame(&input).image).collect();
        (images, r.atlas)
    };
    let (a, b) = (run(), run());
    assert!(a.0 == b.0);
    assert!(a.1 == b.1);
}
