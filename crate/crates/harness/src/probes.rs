//! Probe state dumps.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use probegi::{FrameInput, GiRenderer};
use serde::Serialize;

use crate::scene::SceneFile;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub id: u32,
    pub cascade: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub displacement: f64,
    pub dead: bool,
    pub updates: u32,
}

/// Runs `frames` probe updates on the scene at time zero and writes
/// `probes.csv` (positions and state) and `atlas.sdfa` into `out_dir`.
pub fn dump_probes(scene: &SceneFile, frames: usize, seed: u64, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let mut cfg = scene.gi_config();
    cfg.update.seed = seed;
    let camera = scene.camera();
    let mut r = GiRenderer::new(cfg, camera.position);
    let (prims, lights) = scene.state_at(0.0);
    let input = FrameInput {
        primitives: &prims,
        lights: &lights,
        sky: scene.sky(),
        camera,
    };
    r.converge_probes(&input, frames.max(1));

    let csv_path = out_dir.join("probes.csv");
    let mut w = csv::Writer::from_path(&csv_path).with_context(|| format!("cannot write {}", csv_path.display()))?;
    for (id, p) in r.volume.iter() {
        w.serialize(ProbeRow {
            id: id.0,
            cascade: r.volume.locate(id).0,
            x: p.pos.x,
            y: p.pos.y,
            z: p.pos.z,
            displacement: p.pos.distance(p.resting_pos),
            dead: p.dead,
            updates: p.updates,
        })?;
    }
    w.flush()?;
    let atlas_path = out_dir.join("atlas.sdfa");
    let file = File::create(&atlas_path).with_context(|| format!("cannot write {}", atlas_path.display()))?;
    r.atlas.write_to(BufWriter::new(file))?;
    Ok((csv_path, atlas_path))
}
