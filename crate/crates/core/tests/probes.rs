//! Probe placement, scheduling, interpolation stencils and the octahedral
//! atlas.

use glam::{DQuat, DVec2, DVec3, UVec3};
use probegi::oct::{oct_decode, oct_encode};
use probegi::probe::{select_probes_for_update, update_priority, update_probe_positions, RelocationParams, SchedulerParams, Viewpoint};
use probegi::stencil::{hex_mean_value_coordinates, interpolation_stencil, trilinear_weights, StencilParams};
use probegi::{ActiveScene, Anchor, ClusterParams, Material, ProbeAtlas, ProbeId, ProbeVolume, RigidTransform, SdfPrimitive, Shape};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn boxed(id: u32, at: DVec3, half: DVec3) -> SdfPrimitive {
    SdfPrimitive::new(id, Shape::Box { half_extents: half }, RigidTransform::from_translation(at), Material::default()).unwrap()
}

fn sphere(id: u32, at: DVec3, r: f64) -> SdfPrimitive {
    SdfPrimitive::new(id, Shape::Sphere { radius: r }, RigidTransform::from_translation(at), Material::default()).unwrap()
}

fn scene(prims: &[SdfPrimitive]) -> ActiveScene {
    ActiveScene::new(prims, ClusterParams::default(), vec![], DVec3::ZERO)
}

fn view() -> Viewpoint {
    Viewpoint {
        position: DVec3::ZERO,
        forward: DVec3::NEG_Z,
    }
}

/// A cluttered room with probes at unit spacing.
fn cluttered(seed: u64) -> (ActiveScene, ProbeVolume) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prims = vec![boxed(0, DVec3::new(0.0, -0.55, 0.0), DVec3::new(6.0, 0.05, 6.0))];
    for i in 1..14 {
        let at = DVec3::new(rng.gen_range(-3.5..3.5), rng.gen_range(0.0..3.0), rng.gen_range(-3.5..3.5));
        prims.push(if i % 2 == 0 {
            sphere(i, at, rng.gen_range(0.2..0.9))
        } else {
            boxed(i, at, DVec3::new(rng.gen_range(0.05..0.8), rng.gen_range(0.05..0.8), rng.gen_range(0.05..0.8)))
        });
    }
    let volume = ProbeVolume::new(UVec3::new(8, 4, 8), 1.0, 1, Anchor::Fixed(DVec3::new(0.0, 1.0, 0.0)), DVec3::ZERO);
    (scene(&prims), volume)
}

// ---------------------------------------------------------------- relocation

#[test]
fn probe_in_open_space_stays_put() {
    let s = scene(&[sphere(0, DVec3::new(100.0, 0.0, 0.0), 1.0)]);
    let mut v = ProbeVolume::new(UVec3::splat(2), 1.0, 1, Anchor::Fixed(DVec3::ZERO), DVec3::ZERO);
    let report = update_probe_positions(&mut v, &s, RelocationParams::default());
    assert_eq!(report.relocated, 0);
    assert!(report.rejected.is_empty());
    assert!(v.iter().all(|(_, p)| p.pos == p.resting_pos));
}

/// Smallest push along `dir` that clears `clearance`, by fine line search.
fn line_search(s: &ActiveScene, from: DVec3, dir: DVec3, clearance: f64) -> DVec3 {
    let mut step = 0.0;
    while s.query_naive(from + dir * step) < clearance {
        step += 1e-6;
    }
    from + dir * step
}

#[test]
fn probe_just_inside_a_wall_is_pushed_out() {
    // Wall face at x = 0.51; the probe at x = 0.5 is 0.01 inside.
    let wall = boxed(0, DVec3::new(-0.49, 0.0, 0.0), DVec3::new(1.0, 5.0, 5.0));
    let s = scene(&[wall]);
    let mut v = ProbeVolume::new(UVec3::splat(2), 1.0, 1, Anchor::Fixed(DVec3::ZERO), DVec3::ZERO);
    let params = RelocationParams {
        threshold1: 0.1,
        ..RelocationParams::default()
    };
    update_probe_positions(&mut v, &s, params);
    let probe = v.iter().find(|(_, p)| p.grid_coord == UVec3::new(1, 0, 0)).unwrap().1;
    assert!((s.query_naive(probe.resting_pos) + 0.01).abs() < 1e-12);
    let oracle = line_search(&s, probe.resting_pos, DVec3::X, 0.1);
    assert!(s.query_naive(probe.pos) >= 0.1);
    assert!(probe.pos.distance(oracle) < 0.01, "{} vs {oracle}", probe.pos);
    assert!(!probe.dead);
}

#[test]
fn relocation_clears_threshold_stays_in_cell_and_is_idempotent() {
    for seed in 0..5 {
        let (s, mut v) = cluttered(seed);
        let params = RelocationParams::default();
        let first = update_probe_positions(&mut v, &s, params);
        assert!(first.relocated > 0);
        let once: Vec<DVec3> = v.iter().map(|(_, p)| p.pos).collect();
        for (id, p) in v.iter() {
            let spacing = v.spacing_of(id);
            assert!(p.pos.distance(p.resting_pos) <= 0.5 * spacing + 1e-12);
            if !p.dead {
                assert!(s.query_naive(p.pos) >= params.threshold1 * spacing);
            }
        }
        let second = update_probe_positions(&mut v, &s, params);
        let twice: Vec<DVec3> = v.iter().map(|(_, p)| p.pos).collect();
        assert_eq!(once, twice);
        assert!(second.rejected.is_empty());
    }
}

#[test]
fn buried_probe_is_dead_and_leaves_stencils() {
    let s = scene(&[boxed(0, DVec3::ZERO, DVec3::splat(3.0))]);
    let mut v = ProbeVolume::new(UVec3::splat(2), 1.0, 1, Anchor::Fixed(DVec3::ZERO), DVec3::ZERO);
    let report = update_probe_positions(&mut v, &s, RelocationParams::default());
    assert_eq!(report.dead, 8);
    let st = interpolation_stencil(&v, DVec3::ZERO, StencilParams::default());
    assert!(!st.is_alive());
}

#[test]
fn large_jump_rejects_history() {
    let mut v = ProbeVolume::new(UVec3::splat(2), 1.0, 1, Anchor::Fixed(DVec3::ZERO), DVec3::ZERO);
    let open = scene(&[sphere(0, DVec3::new(50.0, 0.0, 0.0), 1.0)]);
    update_probe_positions(&mut v, &open, RelocationParams::default());
    // A wall swallows the +x probes by 0.2; leaving it takes a 0.35 push.
    let wall = scene(&[boxed(0, DVec3::new(0.8, 0.0, 0.0), DVec3::new(0.5, 5.0, 5.0))]);
    let report = update_probe_positions(&mut v, &wall, RelocationParams::default());
    assert!(!report.rejected.is_empty());
    for id in &report.rejected {
        assert!(v.probe(*id).reject_history);
    }
}

#[test]
fn cascades_double_in_spacing_and_share_a_centre() {
    let cam = DVec3::new(0.3, 1.7, -2.2);
    let v = ProbeVolume::new(UVec3::splat(8), 0.5, 3, Anchor::Camera, cam);
    for (l, c) in v.cascades.iter().enumerate() {
        assert_eq!(c.spacing, 0.5 * f64::from(1u32 << l));
        assert!(c.center().distance(cam) <= 0.5 * 3f64.sqrt() * c.spacing + 1e-12);
    }
}

#[test]
fn finest_containing_cascade_provides_the_stencil() {
    let v = ProbeVolume::new(UVec3::splat(6), 1.0, 3, Anchor::Fixed(DVec3::ZERO), DVec3::ZERO);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..2000 {
        let p = DVec3::new(rng.gen_range(-12.0..12.0), rng.gen_range(-12.0..12.0), rng.gen_range(-12.0..12.0));
        let s = interpolation_stencil(&v, p, StencilParams::default());
        match v.cascades.iter().position(|c| c.covers(p)) {
            Some(finest) => {
                assert_eq!(s.cascade, finest);
                let min_spacing = v.cascades.iter().filter(|c| c.covers(p)).map(|c| c.spacing).fold(f64::INFINITY, f64::min);
                assert_eq!(v.cascades[s.cascade].spacing, min_spacing);
                assert!((s.weight_sum() - 1.0).abs() <= 1e-6);
            }
            None => assert!(s.sky_fallback),
        }
    }
}

// ---------------------------------------------------------------- scheduling

#[test]
fn nearer_probe_has_higher_priority_and_wins() {
    let v = ProbeVolume::new(UVec3::new(2, 2, 2), 1.0, 1, Anchor::Fixed(DVec3::new(0.0, 0.0, -5.5)), DVec3::ZERO);
    let mut near = v.cascades[0].probes[0].clone();
    let mut far = near.clone();
    near.pos = DVec3::new(0.0, 0.0, -1.0);
    far.pos = DVec3::new(0.0, 0.0, -10.0);
    let s = SchedulerParams::default();
    assert!(update_priority(&near, 1.0, view(), 3, s) > update_priority(&far, 1.0, view(), 3, s));

    // Probes at z = -5 and z = -6 along the view axis; budget 1 goes to z = -5.
    let chosen = select_probes_for_update(&v, view(), 1, 0, s);
    assert_eq!(chosen.len(), 1);
    let p = v.probe(chosen[0]);
    assert_eq!(p.resting_pos.z, -5.0);
}

#[test]
fn saturating_budget_selects_everything() {
    let v = ProbeVolume::new(UVec3::splat(3), 1.0, 1, Anchor::Fixed(DVec3::ZERO), DVec3::ZERO);
    let chosen = select_probes_for_update(&v, view(), 1000, 0, SchedulerParams::default());
    assert_eq!(chosen.len(), 27);
}

/// Runs the scheduler for `frames` frames, marking chosen probes as updated,
/// and returns the longest gap between two updates of any probe.
fn simulate(v: &mut ProbeVolume, budget: usize, frames: u64, viewpoints: &[Viewpoint]) -> (u64, Vec<Vec<u64>>) {
    let mut history = vec![Vec::new(); v.probe_count()];
    for f in 0..frames {
        let vp = viewpoints[f as usize % viewpoints.len()];
        for id in select_probes_for_update(v, vp, budget, f, SchedulerParams::default()) {
            v.probe_mut(id).last_update_frame = Some(f);
            v.probe_mut(id).reject_history = false;
            history[id.index()].push(f);
        }
    }
    let mut worst = 0;
    for h in &history {
        assert!(!h.is_empty());
        worst = worst.max(h[0] + 1);
        for w in h.windows(2) {
            worst = worst.max(w[1] - w[0]);
        }
        worst = worst.max(frames - h.last().unwrap());
    }
    (worst, history)
}

#[test]
fn quarter_budget_updates_every_probe_within_eight_frames() {
    let mut v = ProbeVolume::new(UVec3::new(8, 4, 8), 1.0, 1, Anchor::Fixed(DVec3::ZERO), DVec3::ZERO);
    let budget = v.probe_count() / 4;
    let (_, history) = simulate(&mut v, budget, 64, &[view()]);
    for start in 0..=56u64 {
        for h in &history {
            assert!(h.iter().any(|&f| f >= start && f < start + 8), "starved in window {start}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn scheduler_respects_the_starvation_bound(
        budget in 1usize..40,
        seed in any::<u64>(),
    ) {
        let mut v = ProbeVolume::new(UVec3::new(5, 3, 4), 1.0, 1, Anchor::Fixed(DVec3::ZERO), DVec3::ZERO);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let viewpoints: Vec<Viewpoint> = (0..7)
            .map(|_| Viewpoint {
                position: DVec3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)),
                forward: DQuat::from_rotation_y(rng.gen_range(0.0..6.3)) * DVec3::NEG_Z,
            })
            .collect();
        let total = v.probe_count();
        let bound = (total.div_ceil(budget) * 2) as u64;
        let (worst, _) = simulate(&mut v, budget, 3 * bound + 5, &viewpoints);
        prop_assert!(worst <= bound, "gap {} > bound {}", worst, bound);
    }
}

// ---------------------------------------------------------------- stencils

#[test]
fn cell_centre_and_vertex_weights() {
    let v = ProbeVolume::new(UVec3::splat(4), 1.0, 1, Anchor::Fixed(DVec3::splat(1.5)), DVec3::ZERO);
    let s = interpolation_stencil(&v, DVec3::splat(1.5), StencilParams::default());
    assert!(s.weights.iter().all(|&w| (w - 0.125).abs() < 1e-12));
    let s = interpolation_stencil(&v, DVec3::new(1.0, 2.0, 1.0), StencilParams::default());
    let ones: Vec<_> = s.entries().collect();
    assert_eq!(ones.len(), 1);
    assert_eq!(ones[0].1, 1.0);
    assert_eq!(v.probe(ones[0].0).resting_pos, DVec3::new(1.0, 2.0, 1.0));
}

#[test]
fn stencils_partition_unity_on_relocated_volumes_with_dead_probes() {
    for seed in 0..4 {
        let (s, mut v) = cluttered(seed);
        update_probe_positions(&mut v, &s, RelocationParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        for (i, (id, _)) in v.iter().map(|(id, p)| (id, p.dead)).collect::<Vec<_>>().into_iter().enumerate() {
            if i % 7 == 0 {
                v.probe_mut(id).dead = true;
            }
        }
        let mut alive = 0;
        for _ in 0..3000 {
            let p = DVec3::new(rng.gen_range(-4.0..4.0), rng.gen_range(-0.5..2.5), rng.gen_range(-4.0..4.0));
            let st = interpolation_stencil(&v, p, StencilParams::default());
            assert!(st.weights.iter().all(|&w| w >= 0.0));
            for (id, _) in st.entries() {
                assert!(!v.probe(id).dead);
            }
            if st.is_alive() {
                alive += 1;
                assert!((st.weight_sum() - 1.0).abs() <= 1e-6);
            }
        }
        assert!(alive > 2500);
    }
}

fn affine(p: DVec3) -> f64 {
    1.7 - 0.4 * p.x + 2.3 * p.y + 0.9 * p.z
}

#[test]
fn mean_value_coordinates_reproduce_affine_functions_on_relocated_cells() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mut corners = [DVec3::ZERO; 8];
        for (c, v) in corners.iter_mut().enumerate() {
            let base = DVec3::new((c & 1) as f64, ((c >> 1) & 1) as f64, ((c >> 2) & 1) as f64);
            let shift = DVec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            *v = base + shift * 0.3;
        }
        let x = DVec3::new(rng.gen_range(0.35..0.65), rng.gen_range(0.35..0.65), rng.gen_range(0.35..0.65));
        let w = hex_mean_value_coordinates(&corners, x).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        let interp: f64 = w.iter().zip(&corners).map(|(wi, c)| wi * affine(*c)).sum();
        let pos: DVec3 = w.iter().zip(&corners).map(|(wi, c)| *c * *wi).sum();
        worst = worst.max((interp - affine(x)).abs()).max(pos.distance(x));
    }
    assert!(worst <= 1e-4, "{worst}");
}

#[test]
fn relocated_stencils_switch_to_mvc_and_reproduce_positions() {
    let mut used = 0;
    for seed in 0..4 {
        let (s, mut v) = cluttered(seed);
        update_probe_positions(&mut v, &s, RelocationParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..3000 {
            let p = DVec3::new(rng.gen_range(-3.0..3.0), rng.gen_range(0.0..2.0), rng.gen_range(-3.0..3.0));
            let st = interpolation_stencil(&v, p, StencilParams::default());
            if !st.used_mvc || st.entries().count() < 8 {
                continue;
            }
            used += 1;
            let recon: DVec3 = st.entries().map(|(id, w)| v.probe(id).pos * w).sum();
            assert!(recon.distance(p) <= 1e-4, "{recon} vs {p}");
        }
    }
    assert!(used > 20, "only {used} MVC stencils");
}

#[test]
fn cross_cascade_stencils_stay_normalised_and_affine() {
    let v = ProbeVolume::new(UVec3::splat(6), 1.0, 2, Anchor::Fixed(DVec3::ZERO), DVec3::ZERO);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut crossed = 0;
    for _ in 0..5000 {
        let p = DVec3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let st = interpolation_stencil(&v, p, StencilParams::default());
        assert!((st.weight_sum() - 1.0).abs() <= 1e-6);
        if st.cross_cascade {
            crossed += 1;
            let recon: DVec3 = st.entries().map(|(id, w)| v.probe(id).pos * w).sum();
            assert!(recon.distance(p) <= 1e-4);
        }
    }
    assert!(crossed > 100);
}

#[test]
fn trilinear_weights_are_a_partition_of_unity() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..1000 {
        let f = DVec3::new(rng.gen(), rng.gen(), rng.gen());
        let w = trilinear_weights(f);
        assert!(w.iter().all(|&x| x >= 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

// ---------------------------------------------------------------- octahedral atlas

fn rand_dir(rng: &mut impl Rng) -> DVec3 {
    loop {
        let v = DVec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let l = v.length();
        if l > 1e-3 && l <= 1.0 {
            return v / l;
        }
    }
}

#[test]
fn octahedral_anchors() {
    assert_eq!(oct_encode(DVec3::Z), DVec2::splat(0.5));
    let c = oct_encode(DVec3::NEG_Z);
    assert!((c.x == 0.0 || c.x == 1.0) && (c.y == 0.0 || c.y == 1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..1000 {
        let uv = oct_encode(rand_dir(&mut rng));
        assert!(uv.cmpge(DVec2::ZERO).all() && uv.cmple(DVec2::ONE).all());
    }
}

#[test]
fn octahedral_round_trip_before_quantisation() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let worst = (0..10_000)
        .map(|_| {
            let d = rand_dir(&mut rng);
            oct_decode(oct_encode(d)).dot(d).clamp(-1.0, 1.0).acos()
        })
        .fold(0.0, f64::max);
    assert!(worst <= 1e-5, "{worst} rad");
}

/// Atlas whose texels store their own direction, so a bilinear lookup
/// reconstructs the query direction.
fn direction_atlas(r: usize) -> ProbeAtlas {
    let mut atlas = ProbeAtlas::new(r, 1);
    let dirs = atlas.texel_directions();
    atlas.write_interior(ProbeId(0), &dirs);
    atlas
}

#[test]
fn bilinear_reconstruction_at_r8_is_within_fifteen_degrees() {
    let atlas = direction_atlas(8);
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let worst = (0..10_000)
        .map(|_| {
            let d = rand_dir(&mut rng);
            atlas.sample(ProbeId(0), d).normalize().dot(d).clamp(-1.0, 1.0).acos().to_degrees()
        })
        .fold(0.0, f64::max);
    assert!(worst <= 15.0, "{worst} degrees");
}

#[test]
fn atlas_dump_round_trips() {
    let mut atlas = ProbeAtlas::new(4, 3);
    let vals: Vec<DVec3> = (0..16).map(|i| DVec3::new(i as f64, 0.5, 2.0)).collect();
    atlas.write_interior(ProbeId(1), &vals);
    let mut buf = Vec::new();
    atlas.write_to(&mut buf).unwrap();
    assert_eq!(&buf[..4], b"SDFA");
    assert_eq!(buf.len(), 16 + 3 * 36 * 12);
    let back = ProbeAtlas::read_from(&buf[..]).unwrap();
    assert_eq!(back, atlas);
    assert!(ProbeAtlas::read_from(&b"NOPE0000000000000000"[..]).is_err());
}

#[test]
fn constant_tile_samples_constant_everywhere() {
    let mut atlas = ProbeAtlas::new(8, 1);
    atlas.write_interior(ProbeId(0), &vec![DVec3::splat(std::f64::consts::PI); 64]);
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    for _ in 0..1000 {
        let e = atlas.sample(ProbeId(0), rand_dir(&mut rng));
        assert!((e - DVec3::splat(std::f64::consts::PI)).abs().max_element() < 1e-6);
    }
}
