//! Scene files shipped with the crate.

use crate::scene::{parse_scene, SceneFile};

pub const SCENES: [(&str, &str); 5] = [
    ("cornell", include_str!("../scenes/cornell.toml")),
    ("two-room-thin-wall", include_str!("../scenes/two-room-thin-wall.toml")),
    ("sponza-lite", include_str!("../scenes/sponza-lite.toml")),
    ("open-field-cascade", include_str!("../scenes/open-field-cascade.toml")),
    ("dynamic-sphere", include_str!("../scenes/dynamic-sphere.toml")),
];

pub fn scene_text(name: &str) -> Option<&'static str> {
    SCENES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Parses a bundled scene. Panics if the bundled file is broken.
pub fn load(name: &str) -> SceneFile {
    let text = scene_text(name).unwrap_or_else(|| panic!("no bundled scene named {name}"));
    parse_scene(text).unwrap_or_else(|e| panic!("bundled scene {name}: {e}"))
}

pub fn all() -> Vec<(&'static str, SceneFile)> {
    SCENES.iter().map(|(n, _)| (*n, load(n))).collect()
}
