//! Real-time diffuse global illumination over signed distance field scenes:
//! clustered SDF queries, relocating probe cascades with octahedral
//! irradiance, visibility-gated per-pixel shading and a path-traced oracle.

pub mod aabb;
pub mod atlas;
pub mod bvh;
pub mod camera;
pub mod cluster;
pub mod oct;
pub mod oracle;
pub mod pipeline;
pub mod probe;
pub mod sdf;
pub mod shading;
pub mod stats;
pub mod stencil;
pub mod update;

pub use aabb::Aabb;
pub use atlas::ProbeAtlas;
pub use camera::Camera;
pub use cluster::{ActiveScene, ClusterParams, SceneCuller, Trace, TraceConfig};
pub use pipeline::{FrameInput, FrameOutput, FrameStats, GiConfig, GiRenderer};
pub use probe::{Anchor, ProbeId, ProbeVolume};
pub use sdf::{GeometryError, Light, Material, RigidTransform, SdfPrimitive, Shape};
pub use stats::QueryStats;
