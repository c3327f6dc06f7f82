//! Cascaded probe grids: placement, relocation and update scheduling.

use glam::{DVec3, IVec3, UVec3};

use crate::cluster::ActiveScene;

/// Global probe index across all cascades of a [`ProbeVolume`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ProbeId(pub u32);

impl ProbeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub grid_coord: UVec3,
    /// Grid position.
    pub resting_pos: DVec3,
    /// Relocated position used for tracing and interpolation.
    pub pos: DVec3,
    pub last_pos: DVec3,
    /// Next update discards history and doubles the ray budget.
    pub reject_history: bool,
    pub last_update_frame: Option<u64>,
    /// Could not be pushed out of geometry; excluded from interpolation.
    pub dead: bool,
    pub updates: u32,
}

impl Probe {
    fn at(grid_coord: UVec3, resting_pos: DVec3) -> Self {
        Probe {
            grid_coord,
            resting_pos,
            pos: resting_pos,
            last_pos: resting_pos,
            reject_history: true,
            last_update_frame: None,
            dead: false,
            updates: 0,
        }
    }

    pub fn staleness(&self, frame: u64) -> u64 {
        match self.last_update_frame {
            Some(f) => frame.saturating_sub(f),
            None => frame + 1,
        }
    }
}

/// One probe grid level.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeVolume {
    pub level: u32,
    pub resolution: UVec3,
    pub spacing: f64,
    /// Position of probe (0, 0, 0).
    pub origin: DVec3,
    pub probes: Vec<Probe>,
}

impl CascadeVolume {
    fn new(level: u32, resolution: UVec3, spacing: f64, center: DVec3) -> Self {
        let mut c = CascadeVolume {
            level,
            resolution,
            spacing,
            origin: DVec3::ZERO,
            probes: Vec::new(),
        };
        c.reset(center);
        c
    }

    fn reset(&mut self, center: DVec3) {
        let half_span = (self.resolution.as_dvec3() - DVec3::ONE) * 0.5 * self.spacing;
        self.origin = center - half_span;
        let r = self.resolution;
        self.probes = (0..r.z)
            .flat_map(|z| (0..r.y).flat_map(move |y| (0..r.x).map(move |x| UVec3::new(x, y, z))))
            .map(|g| Probe::at(g, self.origin + g.as_dvec3() * self.spacing))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }

    pub fn center(&self) -> DVec3 {
        self.origin + (self.resolution.as_dvec3() - DVec3::ONE) * 0.5 * self.spacing
    }

    pub fn local_index(&self, coord: IVec3) -> Option<usize> {
        let r = self.resolution.as_ivec3();
        if coord.cmplt(IVec3::ZERO).any() || coord.cmpge(r).any() {
            return None;
        }
        Some((coord.x + r.x * (coord.y + r.y * coord.z)) as usize)
    }

    pub fn resting_position(&self, coord: IVec3) -> DVec3 {
        self.origin + coord.as_dvec3() * self.spacing
    }

    /// Lattice hull expanded by half a cell on every side.
    pub fn covers(&self, p: DVec3) -> bool {
        let g = (p - self.origin) / self.spacing;
        let hi = self.resolution.as_dvec3() - DVec3::splat(0.5);
        g.cmpge(DVec3::splat(-0.5)).all() && g.cmple(hi).all()
    }

    /// Continuous grid coordinate of a world position.
    pub fn grid_position(&self, p: DVec3) -> DVec3 {
        (p - self.origin) / self.spacing
    }
}

/// Where cascades are centred.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Anchor {
    /// Follow the camera, snapped to each level's spacing.
    Camera,
    /// Fixed world-space centre.
    Fixed(DVec3),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeVolume {
    pub cascades: Vec<CascadeVolume>,
    pub anchor: Anchor,
    offsets: Vec<usize>,
}

impl ProbeVolume {
    /// `levels` concentric grids with the same resolution; level `l` has
    /// spacing `base_spacing · 2^l`.
    pub fn new(resolution: UVec3, base_spacing: f64, levels: u32, anchor: Anchor, camera: DVec3) -> Self {
        assert!(resolution.cmpge(UVec3::splat(2)).all(), "cascade resolution must be >= 2 per axis");
        assert!(levels >= 1 && base_spacing > 0.0);
        let cascades: Vec<CascadeVolume> = (0..levels)
            .map(|l| {
                let spacing = base_spacing * f64::from(1u32 << l);
                CascadeVolume::new(l, resolution, spacing, anchor_center(anchor, camera, spacing))
            })
            .collect();
        let mut v = ProbeVolume {
            cascades,
            anchor,
            offsets: Vec::new(),
        };
        v.recompute_offsets();
        v
    }

    fn recompute_offsets(&mut self) {
        self.offsets.clear();
        let mut acc = 0;
        for c in &self.cascades {
            self.offsets.push(acc);
            acc += c.len();
        }
    }

    pub fn probe_count(&self) -> usize {
        self.cascades.iter().map(|c| c.len()).sum()
    }

    pub fn id(&self, cascade: usize, local: usize) -> ProbeId {
        ProbeId((self.offsets[cascade] + local) as u32)
    }

    pub fn locate(&self, id: ProbeId) -> (usize, usize) {
        let g = id.index();
        let c = self.offsets.partition_point(|&o| o <= g) - 1;
        (c, g - self.offsets[c])
    }

    pub fn probe(&self, id: ProbeId) -> &Probe {
        let (c, l) = self.locate(id);
        &self.cascades[c].probes[l]
    }

    pub fn probe_mut(&mut self, id: ProbeId) -> &mut Probe {
        let (c, l) = self.locate(id);
        &mut self.cascades[c].probes[l]
    }

    pub fn spacing_of(&self, id: ProbeId) -> f64 {
        self.cascades[self.locate(id).0].spacing
    }

    pub fn iter(&self) -> impl Iterator<Item = (ProbeId, &Probe)> + '_ {
        self.cascades.iter().enumerate().flat_map(move |(ci, c)| {
            c.probes
                .iter()
                .enumerate()
                .map(move |(li, p)| (self.id(ci, li), p))
        })
    }

    /// Re-snaps camera-anchored cascades. A cascade whose origin moves is
    /// fully reset; returns the ids of reset probes.
    pub fn recenter(&mut self, camera: DVec3) -> Vec<ProbeId> {
        let mut reset = Vec::new();
        for ci in 0..self.cascades.len() {
            let c = &mut self.cascades[ci];
            let target = anchor_center(self.anchor, camera, c.spacing);
            if (target - c.center()).length() > 1e-9 * c.spacing {
                c.reset(target);
                let n = c.len();
                reset.extend((0..n).map(|l| ProbeId((self.offsets[ci] + l) as u32)));
            }
        }
        reset
    }
}

fn anchor_center(anchor: Anchor, camera: DVec3, spacing: f64) -> DVec3 {
    match anchor {
        Anchor::Fixed(c) => c,
        Anchor::Camera => (camera / spacing).round() * spacing,
    }
}

/// Relocation thresholds as fractions of each cascade's spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelocationParams {
    /// Minimum clearance from geometry.
    pub threshold1: f64,
    /// Displacement since last frame that discards history.
    pub threshold2: f64,
    pub max_descent_steps: u32,
}

impl Default for RelocationParams {
    fn default() -> Self {
        RelocationParams {
            threshold1: 0.15,
            threshold2: 0.3,
            max_descent_steps: 16,
        }
    }
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct RelocationReport {
    pub relocated: usize,
    pub rejected: Vec<ProbeId>,
    pub dead: usize,
}

/// Pushes probes that sit too close to (or inside) geometry out along the
/// scene gradient. Each frame starts again from the resting position, so a
/// static scene reaches the same positions every time.
pub fn update_probe_positions(
    volume: &mut ProbeVolume,
    scene: &ActiveScene,
    params: RelocationParams,
) -> RelocationReport {
    let mut report = RelocationReport::default();
    for ci in 0..volume.cascades.len() {
        let spacing = volume.cascades[ci].spacing;
        let t1 = params.threshold1 * spacing;
        let t2 = params.threshold2 * spacing;
        for li in 0..volume.cascades[ci].len() {
            let id = volume.id(ci, li);
            let probe = &mut volume.cascades[ci].probes[li];
            let (pos, alive) = relocate(scene, probe.resting_pos, t1, 0.5 * spacing, params.max_descent_steps);
            if pos != probe.resting_pos {
                report.relocated += 1;
            }
            probe.last_pos = probe.pos;
            probe.pos = pos;
            if !alive {
                report.dead += 1;
            }
            let revived_or_killed = probe.dead == alive;
            probe.dead = !alive;
            if probe.pos.distance(probe.last_pos) > t2 || (revived_or_killed && alive) {
                probe.reject_history = true;
                report.rejected.push(id);
            }
        }
    }
    report
}

/// Returns the relocated position and whether it clears `clearance`.
fn relocate(scene: &ActiveScene, resting: DVec3, clearance: f64, max_offset: f64, max_steps: u32) -> (DVec3, bool) {
    let mut d = scene.query(resting, f64::INFINITY);
    if d >= clearance {
        return (resting, true);
    }
    let mut pos = resting;
    for _ in 0..max_steps {
        let g = scene.gradient(pos);
        // Small overshoot so the final position clears the threshold after rounding.
        pos += g.dir * ((clearance - d) * 1.02 + 1e-9 * max_offset);
        let offset = pos - resting;
        let len = offset.length();
        if len > max_offset {
            pos = resting + offset * (max_offset / len);
        }
        d = scene.query(pos, f64::INFINITY);
        if d >= clearance {
            return (pos, true);
        }
    }
    (pos, false)
}

/// Weights for the update scheduler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerParams {
    pub facing_floor: f64,
    pub facing_weight: f64,
    pub reject_boost: f64,
}

impl Default for SchedulerParams {
    fn default() -> Self {
        SchedulerParams {
            facing_floor: 0.25,
            facing_weight: 0.75,
            reject_boost: 4.0,
        }
    }
}

/// Viewpoint used by scheduling and cascade anchoring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewpoint {
    pub position: DVec3,
    pub forward: DVec3,
}

pub fn update_priority(probe: &Probe, spacing: f64, view: Viewpoint, frame: u64, params: SchedulerParams) -> f64 {
    let to_probe = probe.pos - view.position;
    let dist = to_probe.length();
    let cos = if dist > 0.0 {
        view.forward.dot(to_probe / dist).max(0.0)
    } else {
        1.0
    };
    let mut p = (1.0 / (1.0 + dist / spacing))
        * (params.facing_floor + params.facing_weight * cos)
        * probe.staleness(frame) as f64;
    if probe.reject_history {
        p *= params.reject_boost;
    }
    p
}

/// Picks at most `budget` alive probes to update this frame.
///
/// Half the budget (rounded up) goes to the stalest probes, the rest to the
/// highest priority. The stale half bounds the gap between two updates of the
/// same probe by `ceil(alive / ceil(budget / 2))` frames, which is at most
/// `2 · ceil(alive / budget)`.
pub fn select_probes_for_update(
    volume: &ProbeVolume,
    view: Viewpoint,
    budget: usize,
    frame: u64,
    params: SchedulerParams,
) -> Vec<ProbeId> {
    assert!(budget >= 1, "probe budget must be >= 1");
    let mut candidates: Vec<(ProbeId, u64, f64)> = volume
        .cascades
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| {
            c.probes.iter().enumerate().filter(|(_, p)| !p.dead).map(move |(li, p)| {
                (
                    volume.id(ci, li),
                    p.staleness(frame),
                    update_priority(p, c.spacing, view, frame, params),
                )
            })
        })
        .collect();
    if budget >= candidates.len() {
        return candidates.into_iter().map(|c| c.0).collect();
    }
    candidates.sort_by(|a, b| b.1.cmp(&a.1).then(b.2.total_cmp(&a.2)).then(a.0.cmp(&b.0)));
    let stale_share = budget.div_ceil(2);
    let mut chosen: Vec<ProbeId> = candidates[..stale_share].iter().map(|c| c.0).collect();
    let mut rest: Vec<_> = candidates[stale_share..].to_vec();
    rest.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    chosen.extend(rest.iter().take(budget - stale_share).map(|c| c.0));
    chosen.sort_unstable();
    chosen
}
