//! Analytic signed distance primitives.
//!
//! Every primitive is an exact SDF in its local frame, placed in the world by
//! a rigid transform. Rigid motions preserve distances, so the world-space
//! field stays exact and 1-Lipschitz, which sphere tracing relies on.

use glam::{DQuat, DVec3};
use thiserror::Error;

use crate::aabb::Aabb;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("{field} must be strictly positive and finite (got {value})")]
    NonPositive { field: &'static str, value: f64 },
    #[error("{field} must be a unit vector (length {length})")]
    NotUnit { field: &'static str, length: f64 },
    #[error("{field} must lie in [0, 1] per channel (got {value:?})")]
    AlbedoRange { field: &'static str, value: [f64; 3] },
    #[error("{field} must be finite and non-negative (got {value:?})")]
    Negative { field: &'static str, value: [f64; 3] },
    #[error("{field} must be finite (got {value:?})")]
    NotFinite { field: &'static str, value: [f64; 3] },
}

const UNIT_TOLERANCE: f64 = 1e-6;

fn check_positive(field: &'static str, value: f64) -> Result<(), GeometryError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(GeometryError::NonPositive { field, value })
    }
}

pub(crate) fn check_unit(field: &'static str, v: DVec3) -> Result<(), GeometryError> {
    let length = v.length();
    if (length - 1.0).abs() <= UNIT_TOLERANCE {
        Ok(())
    } else {
        Err(GeometryError::NotUnit { field, length })
    }
}

fn check_non_negative(field: &'static str, v: DVec3) -> Result<(), GeometryError> {
    if v.is_finite() && v.cmpge(DVec3::ZERO).all() {
        Ok(())
    } else {
        Err(GeometryError::Negative {
            field,
            value: v.to_array(),
        })
    }
}

/// Lambertian surface description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    /// Diffuse reflectance per channel; the BRDF is `albedo / π`.
    pub albedo: DVec3,
    /// Emitted radiance.
    pub emission: DVec3,
}

impl Material {
    pub fn new(albedo: DVec3, emission: DVec3) -> Result<Self, GeometryError> {
        if !(albedo.is_finite()
            && albedo.cmpge(DVec3::ZERO).all()
            && albedo.cmple(DVec3::ONE).all())
        {
            return Err(GeometryError::AlbedoRange {
                field: "albedo",
                value: albedo.to_array(),
            });
        }
        check_non_negative("emission", emission)?;
        Ok(Material { albedo, emission })
    }

    pub fn diffuse(albedo: DVec3) -> Self {
        Material {
            albedo,
            emission: DVec3::ZERO,
        }
    }

    pub fn emissive(emission: DVec3) -> Self {
        Material {
            albedo: DVec3::ZERO,
            emission,
        }
    }
}

impl Default for Material {
    fn default() -> Self {
        Material::diffuse(DVec3::splat(0.8))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Light {
    /// Isotropic point light; `intensity` is radiant intensity (W/sr per channel).
    Point { position: DVec3, intensity: DVec3 },
    /// Distant light arriving along `-direction`; `radiance` is the irradiance
    /// delivered to a surface facing it head-on.
    Directional { direction: DVec3, radiance: DVec3 },
    /// Uniform environment radiance seen by rays that escape the scene.
    Sky { radiance: DVec3 },
}

impl Light {
    pub fn validate(&self) -> Result<(), GeometryError> {
        match *self {
            Light::Point {
                position,
                intensity,
            } => {
                if !position.is_finite() {
                    return Err(GeometryError::NotFinite {
                        field: "position",
                        value: position.to_array(),
                    });
                }
                check_non_negative("intensity", intensity)
            }
            Light::Directional {
                direction,
                radiance,
            } => {
                check_unit("direction", direction)?;
                check_non_negative("radiance", radiance)
            }
            Light::Sky { radiance } => check_non_negative("radiance", radiance),
        }
    }

    /// Irradiance this light delivers to `point` with surface normal `normal`,
    /// ignoring occlusion, together with the unit direction towards the light
    /// and the distance to it (infinite for directional lights).
    /// Sky lights are not delta lights and return `None`.
    pub fn incident(&self, point: DVec3, normal: DVec3) -> Option<(DVec3, DVec3, f64)> {
        match *self {
            Light::Point {
                position,
                intensity,
            } => {
                let to_light = position - point;
                let dist2 = to_light.length_squared();
                if dist2 <= 0.0 {
                    return None;
                }
                let dist = dist2.sqrt();
                let dir = to_light / dist;
                let cos = normal.dot(dir).max(0.0);
                Some((intensity * (cos / dist2), dir, dist))
            }
            Light::Directional {
                direction,
                radiance,
            } => {
                let dir = -direction;
                let cos = normal.dot(dir).max(0.0);
                Some((radiance * cos, dir, f64::INFINITY))
            }
            Light::Sky { .. } => None,
        }
    }
}

/// Rotation followed by translation, mapping local to world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: DQuat,
    pub translation: DVec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        RigidTransform {
            rotation: DQuat::IDENTITY,
            translation: DVec3::ZERO,
        }
    }
}

impl RigidTransform {
    pub fn from_translation(translation: DVec3) -> Self {
        RigidTransform {
            rotation: DQuat::IDENTITY,
            translation,
        }
    }

    pub fn new(rotation: DQuat, translation: DVec3) -> Self {
        RigidTransform {
            rotation: rotation.normalize(),
            translation,
        }
    }

    pub fn to_local(&self, p: DVec3) -> DVec3 {
        self.rotation.inverse() * (p - self.translation)
    }

    pub fn to_world(&self, p: DVec3) -> DVec3 {
        self.rotation * p + self.translation
    }

    /// `self` applied after `inner`.
    pub fn compose(&self, inner: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: (self.rotation * inner.rotation).normalize(),
            translation: self.to_world(inner.translation),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Sphere { radius: f64 },
    /// Axis-aligned in local space.
    Box { half_extents: DVec3 },
    /// Half-space `normal · p <= offset` (local space) is solid.
    Plane { normal: DVec3, offset: f64 },
    /// Capped cylinder around the local Y axis.
    Cylinder { radius: f64, half_height: f64 },
    /// Segment from `-half_height` to `+half_height` on local Y, swept by `radius`.
    Capsule { radius: f64, half_height: f64 },
}

impl Shape {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Shape::Sphere { .. } => "sphere",
            Shape::Box { .. } => "box",
            Shape::Plane { .. } => "plane",
            Shape::Cylinder { .. } => "cylinder",
            Shape::Capsule { .. } => "capsule",
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        match *self {
            Shape::Sphere { radius } => check_positive("radius", radius),
            Shape::Box { half_extents } => {
                check_positive("half_extents.x", half_extents.x)?;
                check_positive("half_extents.y", half_extents.y)?;
                check_positive("half_extents.z", half_extents.z)
            }
            Shape::Plane { normal, offset } => {
                check_unit("normal", normal)?;
                if offset.is_finite() {
                    Ok(())
                } else {
                    Err(GeometryError::NotFinite {
                        field: "offset",
                        value: [offset; 3],
                    })
                }
            }
            Shape::Cylinder {
                radius,
                half_height,
            }
            | Shape::Capsule {
                radius,
                half_height,
            } => {
                check_positive("radius", radius)?;
                check_positive("half_height", half_height)
            }
        }
    }

    /// Exact signed distance in the local frame.
    pub fn distance(&self, p: DVec3) -> f64 {
        match *self {
            Shape::Sphere { radius } => p.length() - radius,
            Shape::Box { half_extents } => {
                let q = p.abs() - half_extents;
                q.max(DVec3::ZERO).length() + q.max_element().min(0.0)
            }
            Shape::Plane { normal, offset } => normal.dot(p) - offset,
            Shape::Cylinder {
                radius,
                half_height,
            } => {
                let radial = (p.x * p.x + p.z * p.z).sqrt() - radius;
                let axial = p.y.abs() - half_height;
                let outside = (radial.max(0.0)).hypot(axial.max(0.0));
                outside + radial.max(axial).min(0.0)
            }
            Shape::Capsule {
                radius,
                half_height,
            } => {
                let y = p.y.clamp(-half_height, half_height);
                (p - DVec3::new(0.0, y, 0.0)).length() - radius
            }
        }
    }

    /// Local-space bounding box.
    pub fn local_bounds(&self) -> Aabb {
        match *self {
            Shape::Sphere { radius } => Aabb::from_center_half(DVec3::ZERO, DVec3::splat(radius)),
            Shape::Box { half_extents } => Aabb::from_center_half(DVec3::ZERO, half_extents),
            Shape::Plane { .. } => Aabb::EVERYTHING,
            Shape::Cylinder {
                radius,
                half_height,
            } => Aabb::from_center_half(DVec3::ZERO, DVec3::new(radius, half_height, radius)),
            Shape::Capsule {
                radius,
                half_height,
            } => Aabb::from_center_half(
                DVec3::ZERO,
                DVec3::new(radius, half_height + radius, radius),
            ),
        }
    }
}

/// One shape placed in the world with a material.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdfPrimitive {
    pub id: u32,
    pub shape: Shape,
    pub transform: RigidTransform,
    pub material: Material,
    /// 0 means always active; higher tiers are dropped with camera distance.
    pub lod_tier: u32,
}

impl SdfPrimitive {
    pub fn new(
        id: u32,
        shape: Shape,
        transform: RigidTransform,
        material: Material,
    ) -> Result<Self, GeometryError> {
        shape.validate()?;
        Ok(SdfPrimitive {
            id,
            shape,
            transform,
            material,
            lod_tier: 0,
        })
    }

    pub fn with_lod_tier(mut self, tier: u32) -> Self {
        self.lod_tier = tier;
        self
    }

    #[inline]
    pub fn distance(&self, p: DVec3) -> f64 {
        self.shape.distance(self.transform.to_local(p))
    }

    pub fn gradient(&self, p: DVec3, h: f64) -> Gradient {
        central_gradient(|q| self.distance(q), p, h)
    }

    /// Conservative world-space bounds of the solid.
    pub fn bounds(&self) -> Aabb {
        let local = self.shape.local_bounds();
        if !local.is_finite() {
            return Aabb::EVERYTHING;
        }
        let rot = glam::DMat3::from_quat(self.transform.rotation);
        let abs = glam::DMat3::from_cols(rot.x_axis.abs(), rot.y_axis.abs(), rot.z_axis.abs());
        let half = abs * ((local.max - local.min) * 0.5);
        let center = self.transform.to_world(local.center());
        Aabb::from_center_half(center, half)
    }

    /// Representative point used for clustering and LOD distances.
    pub fn center(&self) -> DVec3 {
        self.transform.translation
    }

    /// Same primitive with `outer` applied on top of its own transform.
    pub fn transformed(&self, outer: &RigidTransform) -> SdfPrimitive {
        SdfPrimitive {
            transform: outer.compose(&self.transform),
            ..*self
        }
    }
}

/// Normalized gradient estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gradient {
    pub dir: DVec3,
    /// Set when the raw gradient vanished (medial axis); `dir` is then +X.
    pub degenerate: bool,
}

const DEGENERATE_NORM: f64 = 1e-6;

/// Central-difference gradient of `f` with step `h`.
pub fn central_gradient(f: impl Fn(DVec3) -> f64, p: DVec3, h: f64) -> Gradient {
    let dx = DVec3::new(h, 0.0, 0.0);
    let dy = DVec3::new(0.0, h, 0.0);
    let dz = DVec3::new(0.0, 0.0, h);
    let raw = DVec3::new(
        f(p + dx) - f(p - dx),
        f(p + dy) - f(p - dy),
        f(p + dz) - f(p - dz),
    ) / (2.0 * h);
    let norm = raw.length();
    if norm < DEGENERATE_NORM || !norm.is_finite() {
        Gradient {
            dir: DVec3::X,
            degenerate: true,
        }
    } else {
        Gradient {
            dir: raw / norm,
            degenerate: false,
        }
    }
}
