//! Timing comparisons between query strategies and the visibility budget.

use std::time::Instant;

use glam::DVec3;
use probegi::bvh::Bvh;
use probegi::probe::{update_probe_positions, ProbeId};
use probegi::update::update_probes;
use probegi::{ActiveScene, Aabb, FrameInput, GiRenderer, SdfPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::scene::SceneFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMode {
    ClusterVsNaive,
    ClusterVsBvh,
    VisibilityBudget,
}

impl std::str::FromStr for BenchMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cluster-vs-naive" => Ok(BenchMode::ClusterVsNaive),
            "cluster-vs-bvh" => Ok(BenchMode::ClusterVsBvh),
            "visibility-budget" => Ok(BenchMode::VisibilityBudget),
            _ => Err(format!(
                "unknown bench mode {s:?} (expected cluster-vs-naive, cluster-vs-bvh or visibility-budget)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub queries: usize,
    pub repetitions: usize,
    /// Probes per timed update workload; `None` takes every alive probe.
    pub probe_subset: Option<usize>,
    pub frames: usize,
    pub seed: u64,
    pub width: Option<usize>,
    pub height: Option<usize>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            queries: 1_000_000,
            repetitions: 10,
            probe_subset: None,
            frames: 4,
            seed: 1,
            width: None,
            height: None,
        }
    }
}

/// One machine-readable result row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub mode: String,
    pub workload: String,
    pub strategy: String,
    pub median_ms: f64,
    pub mad_ms: f64,
    /// Baseline median over this strategy's median; 1 for the baseline.
    pub speedup: f64,
    pub value: f64,
}

pub fn median(v: &[f64]) -> f64 {
    assert!(!v.is_empty());
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Median absolute deviation.
pub fn mad(v: &[f64]) -> f64 {
    let m = median(v);
    let dev: Vec<f64> = v.iter().map(|x| (x - m).abs()).collect();
    median(&dev)
}

fn time_reps(reps: usize, mut f: impl FnMut()) -> Vec<f64> {
    (0..reps)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64() * 1e3
        })
        .collect()
}

/// Bounds of all bounded primitives, grown by 10%.
pub fn query_bounds(prims: &[SdfPrimitive]) -> Aabb {
    let b = prims
        .iter()
        .map(|p| p.bounds())
        .filter(|b| b.is_finite())
        .fold(Aabb::EMPTY, |a, b| a.union(&b));
    if !b.is_finite() {
        return Aabb::from_center_half(DVec3::ZERO, DVec3::splat(1.0));
    }
    let pad = (b.max - b.min) * 0.05 + DVec3::splat(1e-3);
    Aabb::new(b.min - pad, b.max + pad)
}

pub fn random_points(bounds: &Aabb, n: usize, seed: u64) -> Vec<DVec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u = DVec3::new(rng.gen(), rng.gen(), rng.gen());
            bounds.min + (bounds.max - bounds.min) * u
        })
        .collect()
}

/// The same primitives in one cluster: every query evaluates everything.
pub fn naive_scene(scene: &ActiveScene) -> ActiveScene {
    let prims = scene.primitives().to_vec();
    let all: Vec<usize> = (0..prims.len()).collect();
    let mut naive = ActiveScene::from_groups(&prims, &[all], scene.lights.clone(), scene.sky);
    naive.trace = scene.trace;
    naive.frame_index = scene.frame_index;
    naive
}

fn row(mode: &str, workload: &str, strategy: &str, times: &[f64], baseline: f64, value: f64) -> BenchRow {
    let m = median(times);
    BenchRow {
        mode: mode.into(),
        workload: workload.into(),
        strategy: strategy.into(),
        median_ms: m,
        mad_ms: mad(times),
        speedup: baseline / m,
        value,
    }
}

/// Renderer after one frame, with probes placed, plus the probes to update.
fn prepared(scene: &SceneFile, opts: &BenchOptions) -> (GiRenderer, ActiveScene, Vec<ProbeId>) {
    let mut cfg = scene.gi_config();
    cfg.update.seed = opts.seed;
    let camera = scene.camera();
    let mut r = GiRenderer::new(cfg, camera.position);
    let (prims, lights) = scene.state_at(0.0);
    let input = FrameInput {
        primitives: &prims,
        lights: &lights,
        sky: scene.sky(),
        camera,
    };
    let active = r.converge_probes(&input, 1);
    update_probe_positions(&mut r.volume, &active, r.config.relocation);
    let mut ids = r.alive_probes();
    if let Some(n) = opts.probe_subset {
        let stride = (ids.len() / n.max(1)).max(1);
        ids = ids.into_iter().step_by(stride).take(n).collect();
    }
    (r, active, ids)
}

fn time_update(r: &GiRenderer, scene: &ActiveScene, ids: &[ProbeId], reps: usize) -> Vec<f64> {
    time_reps(reps, || {
        let mut volume = r.volume.clone();
        let mut next = r.atlas.clone();
        update_probes(
            scene,
            &mut volume,
            ids,
            &r.atlas,
            &mut next,
            &r.config.update,
            r.config.stencil,
            r.config.relocation.threshold1,
            1,
        );
    })
}

pub fn run_bench(scene: &SceneFile, mode: BenchMode, opts: &BenchOptions) -> Vec<BenchRow> {
    assert!(opts.repetitions >= 1);
    match mode {
        BenchMode::ClusterVsNaive => {
            let (r, clustered, ids) = prepared(scene, opts);
            let naive = naive_scene(&clustered);
            let pts = random_points(&query_bounds(clustered.primitives()), opts.queries, opts.seed);
            let mut sink = 0.0;
            let tn = time_reps(opts.repetitions, || sink += pts.iter().map(|&p| naive.query_naive(p)).sum::<f64>());
            let tc = time_reps(opts.repetitions, || {
                sink += pts.iter().map(|&p| clustered.query(p, f64::INFINITY)).sum::<f64>()
            });
            std::hint::black_box(sink);
            let un = time_update(&r, &naive, &ids, opts.repetitions);
            let uc = time_update(&r, &clustered, &ids, opts.repetitions);
            let (bq, bu) = (median(&tn), median(&un));
            let n = clustered.clusters().len() as f64;
            vec![
                row("cluster-vs-naive", "sdf-queries", "naive", &tn, bq, pts.len() as f64),
                row("cluster-vs-naive", "sdf-queries", "cluster", &tc, bq, n),
                row("cluster-vs-naive", "probe-update", "naive", &un, bu, ids.len() as f64),
                row("cluster-vs-naive", "probe-update", "cluster", &uc, bu, n),
            ]
        }
        BenchMode::ClusterVsBvh => {
            let (_, clustered, _) = prepared(scene, opts);
            let bvh = Bvh::build(clustered.primitives());
            let pts = random_points(&query_bounds(clustered.primitives()), opts.queries, opts.seed);
            let mut sink = 0.0;
            let tb = time_reps(opts.repetitions, || sink += pts.iter().map(|&p| bvh.query(p)).sum::<f64>());
            let tc = time_reps(opts.repetitions, || {
                sink += pts.iter().map(|&p| clustered.query(p, f64::INFINITY)).sum::<f64>()
            });
            std::hint::black_box(sink);
            let b = median(&tb);
            vec![
                row("cluster-vs-bvh", "sdf-queries", "bvh", &tb, b, bvh.node_count() as f64),
                row("cluster-vs-bvh", "sdf-queries", "cluster", &tc, b, clustered.clusters().len() as f64),
            ]
        }
        BenchMode::VisibilityBudget => {
            let mut cfg = scene.gi_config();
            cfg.update.seed = opts.seed;
            if let Some(w) = opts.width {
                cfg.width = w;
            }
            if let Some(h) = opts.height {
                cfg.height = h;
            }
            let camera = scene.camera();
            let mut r = GiRenderer::new(cfg, camera.position);
            let mut per_pixel = Vec::new();
            let mut times = Vec::new();
            for f in 0..opts.frames.max(1) {
                let (prims, lights) = scene.state_at(f as f64 / scene.frame_rate);
                let input = FrameInput {
                    primitives: &prims,
                    lights: &lights,
                    sky: scene.sky(),
                    camera,
                };
                let out = r.render_frame(&input);
                per_pixel.push(out.stats.traces_per_pixel);
                times.push(out.stats.shading_ms);
            }
            let worst = per_pixel.iter().copied().fold(0.0, f64::max);
            vec![row("visibility-budget", "traces-per-pixel", "max", &times, median(&times), worst)]
        }
    }
}

pub fn write_rows(rows: &[BenchRow], w: impl std::io::Write) -> anyhow::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
