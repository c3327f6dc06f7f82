//! Scene files, the frame loop, benchmarks and oracle comparisons.

// `!(x > 0.0)` also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod compare;
pub mod probes;
pub mod render;
pub mod scene;
pub mod suite;

pub use scene::{parse_scene, serialize_scene, SceneError, SceneFile};

/// Reads a scene from a path, or from the bundled suite when the argument
/// names one of its scenes.
pub fn load_scene(arg: &str) -> anyhow::Result<SceneFile> {
    use anyhow::Context;
    let text = match suite::scene_text(arg) {
        Some(t) if !std::path::Path::new(arg).exists() => t.to_string(),
        _ => std::fs::read_to_string(arg).with_context(|| format!("cannot read scene {arg}"))?,
    };
    parse_scene(&text).with_context(|| format!("invalid scene {arg}"))
}
