//! Cluster-culled scene distance queries, sphere tracing and soft shadows.

use glam::DVec3;

use crate::aabb::Aabb;
use crate::sdf::{Gradient, Light, SdfPrimitive};
use crate::stats;

/// Group of nearby primitives that is accepted or rejected as a whole.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub aabb: Aabb,
    pub member_ids: Vec<u32>,
    pub lod_tier: u32,
    /// Members occupy this contiguous range of the scene's primitive array.
    range: std::ops::Range<usize>,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterParams {
    pub max_per_cluster: usize,
    pub merge_radius: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            max_per_cluster: 8,
            merge_radius: 4.0,
        }
    }
}

/// Greedy agglomerative grouping of primitives.
///
/// Starting from singletons, the pair whose union box adds the least surface
/// area is merged while the merged size stays within `max_per_cluster` and the
/// member-centroid distance within `merge_radius`. Unbounded primitives
/// (planes) always stay alone. Returns groups of indices into `primitives`,
/// ordered by their smallest member index.
pub fn build_clusters(primitives: &[SdfPrimitive], params: ClusterParams) -> Vec<Vec<usize>> {
    assert!(params.max_per_cluster >= 1, "max_per_cluster must be >= 1");

    struct Group {
        aabb: Aabb,
        members: Vec<usize>,
        centroid_sum: DVec3,
    }
    impl Group {
        fn centroid(&self) -> DVec3 {
            self.centroid_sum / self.members.len() as f64
        }
    }

    let mut groups: Vec<Group> = primitives
        .iter()
        .enumerate()
        .map(|(i, p)| Group {
            aabb: p.bounds(),
            members: vec![i],
            centroid_sum: p.center(),
        })
        .collect();

    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..groups.len() {
            for j in (i + 1)..groups.len() {
                let (a, b) = (&groups[i], &groups[j]);
                if a.members.len() + b.members.len() > params.max_per_cluster {
                    continue;
                }
                if a.centroid().distance(b.centroid()) > params.merge_radius {
                    continue;
                }
                let merged = a.aabb.union(&b.aabb);
                if !merged.is_finite() {
                    continue;
                }
                let cost = merged.surface_area() - a.aabb.surface_area() - b.aabb.surface_area();
                if best.is_none_or(|(c, _, _)| cost < c) {
                    best = Some((cost, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else { break };
        let b = groups.swap_remove(j);
        let a = &mut groups[i];
        a.aabb = a.aabb.union(&b.aabb);
        a.members.extend(b.members);
        a.centroid_sum += b.centroid_sum;
    }

    let mut out: Vec<Vec<usize>> = groups
        .into_iter()
        .map(|mut g| {
            g.members.sort_unstable();
            g.members
        })
        .collect();
    out.sort_by_key(|m| m[0]);
    out
}

/// Tracing parameters shared by every query against a scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceConfig {
    pub surface_epsilon: f64,
    pub max_steps: u32,
    /// Central-difference step for normals.
    pub gradient_step: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            surface_epsilon: 1e-3,
            max_steps: 128,
            gradient_step: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub position: DVec3,
    pub normal: DVec3,
    /// Index into [`ActiveScene::primitives`].
    pub primitive: usize,
    pub primitive_id: u32,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trace {
    Hit(Hit),
    /// The ray left through `t_max`.
    Escaped,
    /// Step budget ran out before converging; carries the last position with
    /// `converged == false`.
    Exhausted(Hit),
}

impl Trace {
    pub fn hit(&self) -> Option<&Hit> {
        match self {
            Trace::Hit(h) => Some(h),
            _ => None,
        }
    }
}

const PRUNE_SLACK: f64 = 1e-9;

/// Primitives that survived culling, grouped into clusters, plus lighting.
#[derive(Debug, Clone)]
pub struct ActiveScene {
    primitives: Vec<SdfPrimitive>,
    clusters: Vec<Cluster>,
    pub lights: Vec<Light>,
    pub sky: DVec3,
    pub frame_index: u64,
    pub trace: TraceConfig,
}

impl ActiveScene {
    /// Builds a scene from `primitives` grouped by `groups` (indices into
    /// `primitives`; every primitive must appear in exactly one group).
    pub fn from_groups(
        primitives: &[SdfPrimitive],
        groups: &[Vec<usize>],
        lights: Vec<Light>,
        sky: DVec3,
    ) -> Self {
        let mut seen = vec![false; primitives.len()];
        let mut ordered = Vec::with_capacity(primitives.len());
        let mut clusters = Vec::with_capacity(groups.len());
        for group in groups {
            let start = ordered.len();
            let mut aabb = Aabb::EMPTY;
            let mut tier = 0;
            let mut ids = Vec::with_capacity(group.len());
            for &i in group {
                assert!(!seen[i], "primitive {i} assigned to two clusters");
                seen[i] = true;
                let p = primitives[i];
                aabb = aabb.union(&p.bounds());
                tier = tier.max(p.lod_tier);
                ids.push(p.id);
                ordered.push(p);
            }
            if group.is_empty() {
                continue;
            }
            clusters.push(Cluster {
                aabb,
                member_ids: ids,
                lod_tier: tier,
                range: start..ordered.len(),
            });
        }
        assert!(seen.iter().all(|&s| s), "every primitive needs a cluster");
        ActiveScene {
            primitives: ordered,
            clusters,
            lights,
            sky,
            frame_index: 0,
            trace: TraceConfig::default(),
        }
    }

    pub fn new(
        primitives: &[SdfPrimitive],
        params: ClusterParams,
        lights: Vec<Light>,
        sky: DVec3,
    ) -> Self {
        let groups = if primitives.is_empty() {
            Vec::new()
        } else {
            build_clusters(primitives, params)
        };
        Self::from_groups(primitives, &groups, lights, sky)
    }

    pub fn with_trace(mut self, trace: TraceConfig) -> Self {
        self.trace = trace;
        self
    }

    pub fn primitives(&self) -> &[SdfPrimitive] {
        &self.primitives
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn primitive_by_id(&self, id: u32) -> Option<&SdfPrimitive> {
        self.primitives.iter().find(|p| p.id == id)
    }

    /// Cluster-culled scene distance. Starts from `init_d` (use `f64::INFINITY`
    /// for a cold query) and skips clusters whose box lower bound cannot beat
    /// the running minimum.
    #[inline]
    pub fn query(&self, p: DVec3, init_d: f64) -> f64 {
        self.query_closest(p, init_d).0
    }

    /// Like [`query`](Self::query) but also reports the primitive index that
    /// produced the minimum, if any primitive beat `init_d`.
    pub fn query_closest(&self, p: DVec3, init_d: f64) -> (f64, Option<usize>) {
        let mut d = init_d;
        let mut best = None;
        let mut visited = 0u64;
        let mut evals = 0u64;
        // Primitive distances can round a few ulps below their box distance;
        // the slack keeps pruning from skipping the exact minimum.
        let slack = PRUNE_SLACK * (1.0 + p.abs().max_element());
        for cluster in &self.clusters {
            if cluster.aabb.signed_distance(p) - slack >= d {
                continue;
            }
            visited += 1;
            for i in cluster.range.clone() {
                evals += 1;
                let di = self.primitives[i].distance(p);
                if di < d {
                    d = di;
                    best = Some(i);
                }
            }
        }
        let skipped = self.clusters.len() as u64 - visited;
        stats::record(|s| {
            s.sdf_queries += 1;
            s.clusters_visited += visited;
            s.clusters_skipped += skipped;
            s.primitive_evals += evals;
        });
        (d, best)
    }

    /// Minimum over every primitive with no culling.
    pub fn query_naive(&self, p: DVec3) -> f64 {
        let mut d = f64::INFINITY;
        for prim in &self.primitives {
            d = d.min(prim.distance(p));
        }
        stats::record(|s| {
            s.sdf_queries += 1;
            s.primitive_evals += self.primitives.len() as u64;
        });
        d
    }

    pub fn gradient(&self, p: DVec3) -> Gradient {
        crate::sdf::central_gradient(|q| self.query(q, f64::INFINITY), p, self.trace.gradient_step)
    }

    pub fn sphere_trace(&self, origin: DVec3, dir: DVec3, t_max: f64) -> Trace {
        self.sphere_trace_with(
            origin,
            dir,
            t_max,
            self.trace.surface_epsilon,
            self.trace.max_steps,
        )
    }

    /// Sphere tracing where each query after the first is seeded with twice
    /// the previous distance, letting far clusters be skipped early.
    pub fn sphere_trace_with(
        &self,
        origin: DVec3,
        dir: DVec3,
        t_max: f64,
        surface_epsilon: f64,
        max_steps: u32,
    ) -> Trace {
        let mut t = 0.0;
        let mut last = f64::INFINITY;
        let mut closest = None;
        let mut steps = 0;
        let outcome = loop {
            if steps >= max_steps {
                break None;
            }
            steps += 1;
            let p = origin + dir * t;
            let seed = if last.is_finite() { 2.0 * last } else { f64::INFINITY };
            let (d, prim) = self.query_closest(p, seed);
            if prim.is_some() {
                closest = prim;
            }
            if d < surface_epsilon {
                break Some(true);
            }
            t += d;
            last = d;
            if t > t_max {
                break Some(false);
            }
        };
        stats::record(|s| {
            s.rays_traced += 1;
            s.trace_steps += u64::from(steps);
        });
        let make_hit = |converged: bool| -> Option<Hit> {
            let position = origin + dir * t;
            let index = match closest {
                Some(i) => i,
                None => self.query_closest(position, f64::INFINITY).1?,
            };
            let prim = &self.primitives[index];
            Some(Hit {
                t,
                position,
                normal: prim.gradient(position, self.trace.gradient_step).dir,
                primitive: index,
                primitive_id: prim.id,
                converged,
            })
        };
        match outcome {
            Some(true) => make_hit(true).map_or(Trace::Escaped, Trace::Hit),
            Some(false) => Trace::Escaped,
            None => make_hit(false).map_or(Trace::Escaped, Trace::Exhausted),
        }
    }

    /// Cone-style soft visibility along `origin + t·dir`, `t ∈ [t_min, t_max]`.
    /// Returns the minimum of `clamp(k·d/t, 0, 1)` over the march, or 0 as soon
    /// as the march touches a surface or visibility drops below 1e-3.
    pub fn soft_shadow(&self, origin: DVec3, dir: DVec3, t_min: f64, t_max: f64, k: f64) -> f64 {
        let eps = self.trace.surface_epsilon;
        let mut t = t_min;
        let mut v: f64 = 1.0;
        let mut last = f64::INFINITY;
        let mut steps = 0u32;
        let result = loop {
            if t >= t_max || steps >= self.trace.max_steps {
                break v;
            }
            steps += 1;
            let seed = if last.is_finite() { 2.0 * last } else { f64::INFINITY };
            let d = self.query(origin + dir * t, seed);
            if d < eps {
                break 0.0;
            }
            v = v.min((k * d / t).clamp(0.0, 1.0));
            if v < 1e-3 {
                break 0.0;
            }
            t += d;
            last = d;
        };
        stats::record(|s| {
            s.shadow_rays += 1;
            s.trace_steps += u64::from(steps);
        });
        result
    }

    /// Soft-shadowed irradiance from every delta light at a surface point.
    pub fn direct_irradiance(&self, position: DVec3, normal: DVec3, k: f64) -> DVec3 {
        let bias = 2.0 * self.trace.surface_epsilon;
        let mut total = DVec3::ZERO;
        for light in &self.lights {
            let Some((e, dir, dist)) = light.incident(position, normal) else {
                continue;
            };
            if e == DVec3::ZERO {
                continue;
            }
            let start = position + normal * bias;
            let t_max = if dist.is_finite() { dist - bias } else { 1e6 };
            let vis = self.soft_shadow(start, dir, bias, t_max, k);
            total += e * vis;
        }
        total
    }

    /// Total uniform radiance returned by escaping rays.
    pub fn environment(&self) -> DVec3 {
        let mut sky = self.sky;
        for light in &self.lights {
            if let Light::Sky { radiance } = light {
                sky += *radiance;
            }
        }
        sky
    }
}

/// Frame-to-frame culling and LOD selection with cluster caching.
#[derive(Debug, Default, Clone)]
pub struct SceneCuller {
    last_active: Option<Vec<u32>>,
    groups: Vec<Vec<u32>>,
    rebuilds: u64,
}

impl SceneCuller {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of cluster rebuilds so far.
    pub fn rebuilds(&self) -> u64 {
        self.rebuilds
    }

    /// Drops tier ≥ 1 primitives farther from `camera` than
    /// `lod_distances[tier - 1]` (the last entry covers higher tiers), then
    /// clusters the survivors. Clustering is reused while membership is
    /// unchanged; boxes are always recomputed so moving primitives stay bounded.
    pub fn update(
        &mut self,
        all: &[SdfPrimitive],
        camera: DVec3,
        lod_distances: &[f64],
        params: ClusterParams,
        lights: Vec<Light>,
        sky: DVec3,
    ) -> ActiveScene {
        debug_assert!(lod_distances.windows(2).all(|w| w[0] <= w[1]));
        let active: Vec<SdfPrimitive> = all
            .iter()
            .filter(|p| lod_keeps(p, camera, lod_distances))
            .copied()
            .collect();
        let ids: Vec<u32> = active.iter().map(|p| p.id).collect();
        if self.last_active.as_ref() != Some(&ids) {
            self.groups = if active.is_empty() {
                Vec::new()
            } else {
                build_clusters(&active, params)
                    .into_iter()
                    .map(|g| g.into_iter().map(|i| active[i].id).collect())
                    .collect()
            };
            self.last_active = Some(ids);
            self.rebuilds += 1;
        }
        let index_of = |id: u32| active.iter().position(|p| p.id == id).unwrap();
        let groups: Vec<Vec<usize>> = self
            .groups
            .iter()
            .map(|g| g.iter().map(|&id| index_of(id)).collect())
            .collect();
        ActiveScene::from_groups(&active, &groups, lights, sky)
    }
}

fn lod_keeps(p: &SdfPrimitive, camera: DVec3, lod_distances: &[f64]) -> bool {
    if p.lod_tier == 0 || lod_distances.is_empty() {
        return true;
    }
    let idx = (p.lod_tier as usize - 1).min(lod_distances.len() - 1);
    p.bounds().signed_distance(camera).max(0.0) <= lod_distances[idx]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdf::{Material, RigidTransform, Shape};

    fn sphere(id: u32, c: DVec3, r: f64) -> SdfPrimitive {
        SdfPrimitive::new(
            id,
            Shape::Sphere { radius: r },
            RigidTransform::from_translation(c),
            Material::default(),
        )
        .unwrap()
    }

    #[test]
    fn singleton_cluster() {
        let prims = [sphere(0, DVec3::ZERO, 1.0)];
        assert_eq!(build_clusters(&prims, ClusterParams::default()), vec![vec![0]]);
    }

    #[test]
    fn far_primitive_stays_separate() {
        let prims = [
            sphere(0, DVec3::ZERO, 0.5),
            sphere(1, DVec3::new(1.1, 0.0, 0.0), 0.5),
            sphere(2, DVec3::new(100.0, 0.0, 0.0), 0.5),
        ];
        let groups = build_clusters(
            &prims,
            ClusterParams {
                max_per_cluster: 8,
                merge_radius: 10.0,
            },
        );
        assert_eq!(groups, vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn max_per_cluster_is_respected() {
        let prims: Vec<_> = (0..10)
            .map(|i| sphere(i, DVec3::new(i as f64 * 0.5, 0.0, 0.0), 0.2))
            .collect();
        let groups = build_clusters(
            &prims,
            ClusterParams {
                max_per_cluster: 3,
                merge_radius: 100.0,
            },
        );
        assert!(groups.iter().all(|g| g.len() <= 3));
        let mut all: Vec<usize> = groups.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn query_single_sphere() {
        let scene = ActiveScene::new(
            &[sphere(0, DVec3::ZERO, 1.0)],
            ClusterParams::default(),
            vec![],
            DVec3::ZERO,
        );
        assert_eq!(scene.query(DVec3::new(3.0, 0.0, 0.0), f64::INFINITY), 2.0);
    }

    #[test]
    fn query_skips_far_cluster() {
        // Three clusters along x; the query point sits next to the middle one
        // so the far cluster's box is beyond the running minimum.
        let prims = [
            sphere(0, DVec3::new(-3.0, 0.0, 0.0), 0.5),
            sphere(1, DVec3::new(-3.0, 1.0, 0.0), 0.5),
            sphere(2, DVec3::new(0.0, 0.0, 0.0), 0.5),
            sphere(3, DVec3::new(0.0, 1.0, 0.0), 0.5),
            sphere(4, DVec3::new(6.0, 0.0, 0.0), 0.5),
            sphere(5, DVec3::new(6.0, 1.0, 0.0), 0.5),
        ];
        let scene = ActiveScene::new(
            &prims,
            ClusterParams {
                max_per_cluster: 2,
                merge_radius: 1.5,
            },
            vec![],
            DVec3::ZERO,
        );
        assert_eq!(scene.clusters().len(), 3);
        let p = DVec3::new(-1.5, -1.0, 0.0);
        stats::take_local();
        let d = scene.query(p, f64::INFINITY);
        let s = stats::take_local();
        let naive = prims.iter().map(|q| q.distance(p)).fold(f64::INFINITY, f64::min);
        assert_eq!(d, naive);
        assert!(s.clusters_skipped >= 1, "{s:?}");
    }

    #[test]
    fn trace_hits_sphere_from_outside() {
        let scene = ActiveScene::new(
            &[sphere(7, DVec3::ZERO, 1.0)],
            ClusterParams::default(),
            vec![],
            DVec3::ZERO,
        );
        let hit = *scene
            .sphere_trace(DVec3::new(-3.0, 0.0, 0.0), DVec3::X, 100.0)
            .hit()
            .unwrap();
        assert!((hit.t - 2.0).abs() <= scene.trace.surface_epsilon);
        assert!(hit.normal.dot(-DVec3::X) > 0.999);
        assert_eq!(hit.primitive_id, 7);
        assert!(hit.converged);
        assert_eq!(
            scene.sphere_trace(DVec3::new(-3.0, 0.0, 0.0), -DVec3::X, 100.0),
            Trace::Escaped
        );
    }

    #[test]
    fn exhausted_trace_is_distinguishable() {
        let scene = ActiveScene::new(
            &[sphere(0, DVec3::ZERO, 1.0)],
            ClusterParams::default(),
            vec![],
            DVec3::ZERO,
        );
        // Grazing ray: one step is not enough to converge.
        let r = scene.sphere_trace_with(DVec3::new(-3.0, 0.0, 0.0), DVec3::X, 100.0, 1e-3, 1);
        match r {
            Trace::Exhausted(h) => assert!(!h.converged),
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn soft_shadow_extremes() {
        let empty = ActiveScene::new(&[], ClusterParams::default(), vec![], DVec3::ZERO);
        assert_eq!(empty.soft_shadow(DVec3::ZERO, DVec3::X, 0.01, 10.0, 8.0), 1.0);

        let boxed = ActiveScene::new(
            &[SdfPrimitive::new(
                0,
                Shape::Box {
                    half_extents: DVec3::splat(0.5),
                },
                RigidTransform::from_translation(DVec3::new(2.0, 0.0, 0.0)),
                Material::default(),
            )
            .unwrap()],
            ClusterParams::default(),
            vec![],
            DVec3::ZERO,
        );
        assert_eq!(boxed.soft_shadow(DVec3::ZERO, DVec3::X, 0.01, 10.0, 8.0), 0.0);
    }

    #[test]
    fn lod_drops_far_detail() {
        let prims = [
            sphere(0, DVec3::ZERO, 0.5),
            sphere(1, DVec3::new(10.0, 0.0, 0.0), 0.5).with_lod_tier(1),
        ];
        let mut culler = SceneCuller::new();
        let near = culler.update(
            &prims,
            DVec3::new(8.0, 0.0, 0.0),
            &[5.0],
            ClusterParams::default(),
            vec![],
            DVec3::ZERO,
        );
        assert_eq!(near.primitives().len(), 2);
        let far = culler.update(
            &prims,
            DVec3::new(-0.5, 0.0, 0.0),
            &[5.0],
            ClusterParams::default(),
            vec![],
            DVec3::ZERO,
        );
        assert_eq!(far.primitives().len(), 1);
        assert_eq!(culler.rebuilds(), 2);
        let again = culler.update(
            &prims,
            DVec3::new(-0.6, 0.0, 0.0),
            &[5.0],
            ClusterParams::default(),
            vec![],
            DVec3::ZERO,
        );
        assert_eq!(again.primitives().len(), 1);
        assert_eq!(culler.rebuilds(), 2);
    }
}
