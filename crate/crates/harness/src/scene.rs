//! TOML scene files.
//!
//! Every table rejects unknown keys. Parse errors, unknown keys and invalid
//! values are all reported with a line and column.
//!
//! | key | default |
//! |-----|---------|
//! | `sky` | `[0, 0, 0]` |
//! | `frame_rate` | `30` |
//! | `camera.up` | `[0, 1, 0]` |
//! | `camera.fov` | `50` (vertical, degrees) |
//! | `primitives[].id` | index in the list |
//! | `primitives[].position`, `rotation_deg` | zero |
//! | `primitives[].albedo` | `[0.8, 0.8, 0.8]` |
//! | `primitives[].emission` | zero |
//! | `primitives[].lod_tier` | `0` |
//! | `probes.resolution` | `[8, 8, 8]` |
//! | `probes.spacing` | `1` |
//! | `probes.levels` | `1` |
//! | `probes.center` | absent: cascades follow the camera |
//! | `config.*` | see [`ConfigOverrides`] |
//!
//! Primitive `size` by kind: sphere `[radius]`, box `[hx, hy, hz]`,
//! cylinder and capsule `[radius, half_height]`, plane `[nx, ny, nz, offset]`.

use glam::{DQuat, DVec3, EulerRot, UVec3};
use probegi::cluster::{ClusterParams, TraceConfig};
use probegi::probe::{Anchor, RelocationParams};
use probegi::update::{BounceGate, ProbeUpdateParams};
use probegi::{Camera, GiConfig, Light, Material, RigidTransform, SdfPrimitive, Shape};
use serde::{Deserialize, Serialize};
use toml::Spanned;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{line}:{column}: {message}")]
pub struct SceneError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    #[serde(default)]
    pub sky: [f64; 3],
    #[serde(default = "default_frame_rate")]
    pub frame_rate: f64,
    pub camera: CameraSpec,
    #[serde(default)]
    pub probes: ProbeSpec,
    #[serde(default)]
    pub config: ConfigOverrides,
    #[serde(default)]
    pub primitives: Vec<Spanned<PrimitiveSpec>>,
    #[serde(default)]
    pub lights: Vec<Spanned<LightSpec>>,
    #[serde(default)]
    pub animation: Vec<Spanned<AnimationTrack>>,
}

fn default_frame_rate() -> f64 {
    30.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub position: [f64; 3],
    pub target: [f64; 3],
    #[serde(default = "default_up")]
    pub up: [f64; 3],
    #[serde(default = "default_fov")]
    pub fov: f64,
}

fn default_up() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

fn default_fov() -> f64 {
    50.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveKind {
    Sphere,
    Box,
    Plane,
    Cylinder,
    Capsule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimitiveSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u32>,
    pub kind: PrimitiveKind,
    pub size: Vec<f64>,
    #[serde(default)]
    pub position: [f64; 3],
    #[serde(default)]
    pub rotation_deg: [f64; 3],
    #[serde(default = "default_albedo")]
    pub albedo: [f64; 3],
    #[serde(default)]
    pub emission: [f64; 3],
    #[serde(default)]
    pub lod_tier: u32,
}

fn default_albedo() -> [f64; 3] {
    [0.8; 3]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LightKind {
    Point,
    Directional,
    Sky,
}

/// `point` uses `position` and `intensity`; `directional` uses `direction`
/// (the way light travels) and `radiance`; `sky` uses `radiance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightSpec {
    pub kind: LightKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radiance: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    #[serde(default = "default_probe_res")]
    pub resolution: [u32; 3],
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default = "default_levels")]
    pub levels: u32,
    /// Fixed cascade centre; absent means camera-anchored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 3]>,
}

fn default_probe_res() -> [u32; 3] {
    [8; 3]
}

fn default_spacing() -> f64 {
    1.0
}

fn default_levels() -> u32 {
    1
}

impl Default for ProbeSpec {
    fn default() -> Self {
        ProbeSpec {
            resolution: default_probe_res(),
            spacing: default_spacing(),
            levels: default_levels(),
            center: None,
        }
    }
}

/// Optional overrides of pipeline defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_rays: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hysteresis: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounce_coeff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shadow_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visibility_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atlas_resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fast_response_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounce_gate: Option<GateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact_gi: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_per_cluster: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merge_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface_epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lod_distances: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateSpec {
    None,
    Backface,
    Visibility,
}

/// Keyframed motion of one primitive (by id) or light (by list index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnimationTrack {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primitive: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub light: Option<usize>,
    pub keyframes: Vec<Keyframe>,
}

/// Missing fields keep the value from the scene itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keyframe {
    pub time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation_deg: Option<[f64; 3]>,
    /// Light intensity, radiance or sky radiance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<[f64; 3]>,
}

fn v3(a: [f64; 3]) -> DVec3 {
    DVec3::from_array(a)
}

fn rotation(deg: [f64; 3]) -> DQuat {
    DQuat::from_euler(
        EulerRot::XYZ,
        deg[0].to_radians(),
        deg[1].to_radians(),
        deg[2].to_radians(),
    )
}

impl PrimitiveSpec {
    pub fn shape(&self) -> Result<Shape, String> {
        let need = |n: usize| -> Result<(), String> {
            if self.size.len() == n {
                Ok(())
            } else {
                Err(format!(
                    "size: {:?} needs {n} values, got {}",
                    self.kind,
                    self.size.len()
                ))
            }
        };
        let s = &self.size;
        let shape = match self.kind {
            PrimitiveKind::Sphere => {
                need(1)?;
                Shape::Sphere { radius: s[0] }
            }
            PrimitiveKind::Box => {
                need(3)?;
                Shape::Box {
                    half_extents: DVec3::new(s[0], s[1], s[2]),
                }
            }
            PrimitiveKind::Cylinder => {
                need(2)?;
                Shape::Cylinder {
                    radius: s[0],
                    half_height: s[1],
                }
            }
            PrimitiveKind::Capsule => {
                need(2)?;
                Shape::Capsule {
                    radius: s[0],
                    half_height: s[1],
                }
            }
            PrimitiveKind::Plane => {
                need(4)?;
                let n = DVec3::new(s[0], s[1], s[2]);
                let len = n.length();
                if !(len > 0.0) {
                    return Err("size: plane normal must be non-zero".into());
                }
                Shape::Plane {
                    normal: n / len,
                    offset: s[3],
                }
            }
        };
        shape.validate().map_err(|e| format!("size: {e}"))?;
        Ok(shape)
    }

    pub fn transform(&self) -> RigidTransform {
        RigidTransform::new(rotation(self.rotation_deg), v3(self.position))
    }

    pub fn build(&self, default_id: u32) -> Result<SdfPrimitive, String> {
        let material = Material::new(v3(self.albedo), v3(self.emission)).map_err(|e| e.to_string())?;
        let prim = SdfPrimitive::new(
            self.id.unwrap_or(default_id),
            self.shape()?,
            self.transform(),
            material,
        )
        .map_err(|e| e.to_string())?;
        Ok(prim.with_lod_tier(self.lod_tier))
    }
}

impl LightSpec {
    pub fn build(&self) -> Result<Light, String> {
        let get = |v: Option<[f64; 3]>, name: &str| v.map(v3).ok_or_else(|| format!("{name} is required"));
        let unused = |v: &Option<[f64; 3]>, name: &str| -> Result<(), String> {
            if v.is_some() {
                Err(format!("{name} does not apply to a {:?} light", self.kind))
            } else {
                Ok(())
            }
        };
        let light = match self.kind {
            LightKind::Point => {
                unused(&self.direction, "direction")?;
                unused(&self.radiance, "radiance")?;
                Light::Point {
                    position: get(self.position, "position")?,
                    intensity: get(self.intensity, "intensity")?,
                }
            }
            LightKind::Directional => {
                unused(&self.position, "position")?;
                unused(&self.intensity, "intensity")?;
                let d = get(self.direction, "direction")?;
                if !(d.length() > 0.0) {
                    return Err("direction must be non-zero".into());
                }
                Light::Directional {
                    direction: d.normalize(),
                    radiance: get(self.radiance, "radiance")?,
                }
            }
            LightKind::Sky => {
                unused(&self.position, "position")?;
                unused(&self.direction, "direction")?;
                unused(&self.intensity, "intensity")?;
                Light::Sky {
                    radiance: get(self.radiance, "radiance")?,
                }
            }
        };
        light.validate().map_err(|e| e.to_string())?;
        Ok(light)
    }
}

/// Parses and fully validates a scene.
pub fn parse_scene(text: &str) -> Result<SceneFile, SceneError> {
    let scene: SceneFile = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        SceneError {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    scene.validate(text)?;
    Ok(scene)
}

pub fn serialize_scene(scene: &SceneFile) -> String {
    toml::to_string(scene).expect("scene values are always representable")
}

impl SceneFile {
    fn validate(&self, text: &str) -> Result<(), SceneError> {
        let at = |offset: usize, message: String| {
            let (line, column) = line_col(text, offset);
            SceneError { line, column, message }
        };
        let top = |message: String| at(0, message);

        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(top("frame_rate must be positive".into()));
        }
        if self.sky.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(top("sky must be non-negative".into()));
        }
        let c = &self.camera;
        if v3(c.target) == v3(c.position) || !(c.fov > 0.0 && c.fov < 180.0) {
            return Err(top("camera: target must differ from position and fov lie in (0, 180)".into()));
        }
        if (v3(c.target) - v3(c.position)).cross(v3(c.up)).length() < 1e-12 {
            return Err(top("camera: up must not be parallel to the view direction".into()));
        }
        let p = &self.probes;
        if p.resolution.iter().any(|&r| r < 2) {
            return Err(top("probes.resolution: every axis needs at least 2 probes".into()));
        }
        if !(p.spacing > 0.0 && p.spacing.is_finite()) {
            return Err(top("probes.spacing must be positive".into()));
        }
        if p.levels == 0 || p.levels > 8 {
            return Err(top("probes.levels must be in 1..=8".into()));
        }
        self.config.validate().map_err(top)?;

        let mut ids = std::collections::HashSet::new();
        for (i, prim) in self.primitives.iter().enumerate() {
            let built = prim
                .get_ref()
                .build(i as u32)
                .map_err(|m| at(prim.span().start, format!("primitives[{i}].{m}")))?;
            if !ids.insert(built.id) {
                return Err(at(prim.span().start, format!("primitives[{i}].id: duplicate id {}", built.id)));
            }
        }
        for (i, light) in self.lights.iter().enumerate() {
            light
                .get_ref()
                .build()
                .map_err(|m| at(light.span().start, format!("lights[{i}].{m}")))?;
        }
        for (i, track) in self.animation.iter().enumerate() {
            let t = track.get_ref();
            let err = |m: String| at(track.span().start, format!("animation[{i}].{m}"));
            match (t.primitive, t.light) {
                (Some(id), None) => {
                    if !ids.contains(&id) {
                        return Err(err(format!("primitive: no primitive with id {id}")));
                    }
                    if t.keyframes.iter().any(|k| k.intensity.is_some()) {
                        return Err(err("keyframes: intensity only applies to lights".into()));
                    }
                }
                (None, Some(l)) => {
                    if l >= self.lights.len() {
                        return Err(err(format!("light: index {l} out of range")));
                    }
                    if t.keyframes.iter().any(|k| k.position.is_some() || k.rotation_deg.is_some()) {
                        return Err(err("keyframes: lights only animate intensity".into()));
                    }
                }
                _ => return Err(err("exactly one of primitive or light is required".into())),
            }
            if t.keyframes.is_empty() {
                return Err(err("keyframes: at least one keyframe is required".into()));
            }
            if t.keyframes.windows(2).any(|w| !(w[1].time > w[0].time)) {
                return Err(err("keyframes: times must be strictly increasing".into()));
            }
            if t.keyframes.iter().any(|k| !k.time.is_finite()) {
                return Err(err("keyframes: times must be finite".into()));
            }
            if t.keyframes.iter().flat_map(|k| k.intensity).flatten().any(|c| c < 0.0) {
                return Err(err("keyframes: intensity must be non-negative".into()));
            }
        }
        Ok(())
    }

    /// Primitives and lights at time `t` seconds, after animation.
    pub fn state_at(&self, t: f64) -> (Vec<SdfPrimitive>, Vec<Light>) {
        let mut specs: Vec<PrimitiveSpec> = self.primitives.iter().map(|p| p.get_ref().clone()).collect();
        let mut lights: Vec<Light> = self
            .lights
            .iter()
            .map(|l| l.get_ref().build().expect("validated"))
            .collect();
        for track in &self.animation {
            let track = track.get_ref();
            if let Some(id) = track.primitive {
                let i = specs
                    .iter()
                    .enumerate()
                    .position(|(i, s)| s.id.unwrap_or(i as u32) == id)
                    .expect("validated");
                let spec = &mut specs[i];
                if let Some(p) = sample_track(&track.keyframes, t, |k| k.position) {
                    spec.position = p;
                }
                if let Some(r) = sample_track(&track.keyframes, t, |k| k.rotation_deg) {
                    spec.rotation_deg = r;
                }
            }
            if let Some(l) = track.light {
                if let Some(v) = sample_track(&track.keyframes, t, |k| k.intensity) {
                    let v = v3(v);
                    match &mut lights[l] {
                        Light::Point { intensity, .. } => *intensity = v,
                        Light::Directional { radiance, .. } | Light::Sky { radiance } => *radiance = v,
                    }
                }
            }
        }
        let prims = specs
            .iter()
            .enumerate()
            .map(|(i, s)| s.build(i as u32).expect("validated"))
            .collect();
        (prims, lights)
    }

    pub fn primitives_static(&self) -> Vec<SdfPrimitive> {
        self.state_at(0.0).0
    }

    pub fn is_animated(&self) -> bool {
        !self.animation.is_empty()
    }

    pub fn camera(&self) -> Camera {
        Camera::look_at(
            v3(self.camera.position),
            v3(self.camera.target),
            v3(self.camera.up),
            self.camera.fov,
        )
    }

    pub fn sky(&self) -> DVec3 {
        v3(self.sky)
    }

    /// Pipeline configuration with this scene's overrides applied.
    pub fn gi_config(&self) -> GiConfig {
        let o = &self.config;
        let mut cfg = GiConfig {
            cascade_resolution: UVec3::from_array(self.probes.resolution),
            base_spacing: self.probes.spacing,
            cascade_levels: self.probes.levels,
            anchor: self.probes.center.map_or(Anchor::Camera, |c| Anchor::Fixed(v3(c))),
            ..GiConfig::default()
        };
        let upd: &mut ProbeUpdateParams = &mut cfg.update;
        let rel: &mut RelocationParams = &mut cfg.relocation;
        let cl: &mut ClusterParams = &mut cfg.cluster;
        let tr: &mut TraceConfig = &mut cfg.trace;
        macro_rules! set {
            ($src:expr => $dst:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(o.width => cfg.width);
        set!(o.height => cfg.height);
        set!(o.threshold1 => rel.threshold1);
        set!(o.threshold2 => rel.threshold2);
        set!(o.n_rays => upd.n_rays_full);
        set!(o.hysteresis => upd.hysteresis);
        set!(o.bounce_coeff => upd.bounce_coeff);
        set!(o.shadow_k => upd.shadow_k);
        set!(o.visibility_k => upd.visibility_k);
        set!(o.fast_response_threshold => upd.fast_response_threshold);
        set!(o.max_per_cluster => cl.max_per_cluster);
        set!(o.merge_radius => cl.merge_radius);
        set!(o.surface_epsilon => tr.surface_epsilon);
        set!(o.max_steps => tr.max_steps);
        set!(o.probe_budget => cfg.probe_budget);
        set!(o.atlas_resolution => cfg.atlas_resolution);
        set!(o.lod_distances => cfg.lod_distances);
        if let Some(v) = o.shadow_k {
            cfg.shading.direct_k = v;
        }
        if let Some(v) = o.visibility_k {
            cfg.shading.visibility_k = v;
        }
        if let Some(v) = o.contact_gi {
            cfg.shading.contact_gi = v;
        }
        if let Some(g) = o.bounce_gate {
            cfg.update.bounce_gate = match g {
                GateSpec::None => BounceGate::None,
                GateSpec::Backface => BounceGate::Backface,
                GateSpec::Visibility => BounceGate::Visibility,
            };
        }
        cfg
    }
}

impl ConfigOverrides {
    fn validate(&self) -> Result<(), String> {
        let positive = |v: Option<f64>, name: &str| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(format!("config.{name} must be positive")),
            _ => Ok(()),
        };
        let unit = |v: Option<f64>, name: &str| match v {
            Some(x) if !(0.0..=1.0).contains(&x) => Err(format!("config.{name} must lie in [0, 1]")),
            _ => Ok(()),
        };
        let nonzero = |v: Option<usize>, name: &str| match v {
            Some(0) => Err(format!("config.{name} must be at least 1")),
            _ => Ok(()),
        };
        nonzero(self.width, "width")?;
        nonzero(self.height, "height")?;
        nonzero(self.n_rays, "n_rays")?;
        nonzero(self.probe_budget, "probe_budget")?;
        nonzero(self.atlas_resolution, "atlas_resolution")?;
        nonzero(self.max_per_cluster, "max_per_cluster")?;
        positive(self.threshold1, "threshold1")?;
        positive(self.threshold2, "threshold2")?;
        unit(self.hysteresis, "hysteresis")?;
        unit(self.bounce_coeff, "bounce_coeff")?;
        positive(self.shadow_k, "shadow_k")?;
        positive(self.visibility_k, "visibility_k")?;
        positive(self.surface_epsilon, "surface_epsilon")?;
        if let Some(m) = self.merge_radius {
            if !(m >= 0.0) {
                return Err("config.merge_radius must be non-negative".into());
            }
        }
        if let Some(t) = self.fast_response_threshold {
            if !(t > 0.0) {
                return Err("config.fast_response_threshold must be positive".into());
            }
        }
        if matches!(self.max_steps, Some(0)) {
            return Err("config.max_steps must be at least 1".into());
        }
        if let Some(d) = &self.lod_distances {
            if d.iter().any(|x| !(*x >= 0.0)) || d.windows(2).any(|w| w[0] > w[1]) {
                return Err("config.lod_distances must be non-negative and ascending".into());
            }
        }
        if let (Some(t1), Some(t2)) = (self.threshold1, self.threshold2) {
            if t1 >= 0.5 || t2 <= 0.0 {
                return Err("config.threshold1 must stay below half the spacing".into());
            }
        } else if matches!(self.threshold1, Some(t) if t >= 0.5) {
            return Err("config.threshold1 must stay below half the spacing".into());
        }
        Ok(())
    }
}

/// Linear interpolation of one keyframed channel, clamped at the ends.
/// `None` if no keyframe sets the channel.
fn sample_track(keys: &[Keyframe], t: f64, channel: impl Fn(&Keyframe) -> Option<[f64; 3]>) -> Option<[f64; 3]> {
    let pts: Vec<(f64, DVec3)> = keys.iter().filter_map(|k| channel(k).map(|v| (k.time, v3(v)))).collect();
    let first = pts.first()?;
    if t <= first.0 {
        return Some(first.1.to_array());
    }
    for w in pts.windows(2) {
        let ((t0, a), (t1, b)) = (w[0], w[1]);
        if t <= t1 {
            return Some(a.lerp(b, (t - t0) / (t1 - t0)).to_array());
        }
    }
    Some(pts.last().unwrap().1.to_array())
}
