//! Scene builders shared by the integration tests.
#![allow(dead_code)]

use glam::DVec3;
use probegi::{ActiveScene, ClusterParams, Light, Material, RigidTransform, SdfPrimitive, Shape};

pub fn boxed(id: u32, at: DVec3, half: DVec3, material: Material) -> SdfPrimitive {
    SdfPrimitive::new(id, Shape::Box { half_extents: half }, RigidTransform::from_translation(at), material).unwrap()
}

pub fn sphere(id: u32, at: DVec3, r: f64, material: Material) -> SdfPrimitive {
    SdfPrimitive::new(id, Shape::Sphere { radius: r }, RigidTransform::from_translation(at), material).unwrap()
}

pub fn floor_plane(id: u32, material: Material) -> SdfPrimitive {
    SdfPrimitive::new(
        id,
        Shape::Plane {
            normal: DVec3::Y,
            offset: 0.0,
        },
        RigidTransform::default(),
        material,
    )
    .unwrap()
}

/// Six slabs of thickness `2·wall` enclosing the cube `[-half, half]³`.
pub fn closed_room(half: f64, wall: f64, material: Material) -> Vec<SdfPrimitive> {
    let mut out = Vec::new();
    for axis in 0..3 {
        for side in [-1.0, 1.0] {
            let mut at = DVec3::ZERO;
            at[axis] = side * (half + wall);
            let mut ext = DVec3::splat(half + 2.0 * wall);
            ext[axis] = wall;
            out.push(boxed(out.len() as u32, at, ext, material));
        }
    }
    out
}

pub fn scene(prims: &[SdfPrimitive], lights: Vec<Light>, sky: DVec3) -> ActiveScene {
    ActiveScene::new(prims, ClusterParams::default(), lights, sky)
}
