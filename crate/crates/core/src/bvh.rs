//! Binary AABB hierarchy over primitives, used as a benchmark baseline for
//! cluster culling. Unbounded primitives sit outside the tree and are always
//! evaluated.

use glam::DVec3;

use crate::aabb::Aabb;
use crate::sdf::SdfPrimitive;
use crate::stats;

#[derive(Debug, Clone)]
enum Node {
    Leaf { aabb: Aabb, first: usize, count: usize },
    Inner { aabb: Aabb, left: usize, right: usize },
}

impl Node {
    fn aabb(&self) -> &Aabb {
        match self {
            Node::Leaf { aabb, .. } | Node::Inner { aabb, .. } => aabb,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Bvh {
    primitives: Vec<SdfPrimitive>,
    unbounded: Vec<SdfPrimitive>,
    nodes: Vec<Node>,
}

/// Primitives per leaf.
const LEAF_SIZE: usize = 2;

impl Bvh {
    /// Median split on the longest axis of the centroid bounds.
    pub fn build(primitives: &[SdfPrimitive]) -> Self {
        let (mut bounded, unbounded): (Vec<_>, Vec<_>) =
            primitives.iter().copied().partition(|p| p.bounds().is_finite());
        let mut nodes = Vec::new();
        if !bounded.is_empty() {
            let n = bounded.len();
            build_node(&mut bounded, 0, n, &mut nodes);
        }
        Bvh {
            primitives: bounded,
            unbounded,
            nodes,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Exact scene distance.
    pub fn query(&self, p: DVec3) -> f64 {
        let mut best = f64::INFINITY;
        let mut evals = self.unbounded.len() as u64;
        let mut visited = 0u64;
        for u in &self.unbounded {
            best = best.min(u.distance(p));
        }
        if !self.nodes.is_empty() {
            // Same rounding slack as the cluster query.
            let slack = 1e-9 * (1.0 + p.abs().max_element());
            let mut stack = vec![0usize];
            while let Some(i) = stack.pop() {
                visited += 1;
                let node = &self.nodes[i];
                if node.aabb().signed_distance(p) - slack >= best {
                    continue;
                }
                match *node {
                    Node::Leaf { first, count, .. } => {
                        for prim in &self.primitives[first..first + count] {
                            best = best.min(prim.distance(p));
                        }
                        evals += count as u64;
                    }
                    Node::Inner { left, right, .. } => {
                        // Visit the nearer child first so the farther one can be pruned.
                        let dl = self.nodes[left].aabb().signed_distance(p);
                        let dr = self.nodes[right].aabb().signed_distance(p);
                        if dl < dr {
                            stack.push(right);
                            stack.push(left);
                        } else {
                            stack.push(left);
                            stack.push(right);
                        }
                    }
                }
            }
        }
        stats::record(|s| {
            s.sdf_queries += 1;
            s.primitive_evals += evals;
            s.clusters_visited += visited;
        });
        best
    }
}

fn build_node(prims: &mut [SdfPrimitive], first: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
    let slice = &mut prims[first..end];
    let aabb = slice.iter().fold(Aabb::EMPTY, |a, p| a.union(&p.bounds()));
    let index = nodes.len();
    if slice.len() <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            aabb,
            first,
            count: slice.len(),
        });
        return index;
    }
    let centroids = slice.iter().fold(Aabb::EMPTY, |a, p| {
        let c = p.bounds().center();
        a.union(&Aabb::new(c, c))
    });
    let ext = centroids.max - centroids.min;
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |a, b| {
        a.bounds().center()[axis].total_cmp(&b.bounds().center()[axis])
    });
    nodes.push(Node::Leaf {
        aabb,
        first,
        count: 0,
    });
    let left = build_node(prims, first, first + mid, nodes);
    let right = build_node(prims, first + mid, end, nodes);
    nodes[index] = Node::Inner { aabb, left, right };
    index
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdf::{Material, RigidTransform, Shape};

    #[test]
    fn matches_brute_force() {
        let mut prims = Vec::new();
        for i in 0..20 {
            let c = DVec3::new((i % 5) as f64 * 2.0, (i / 5) as f64 * 1.5, (i % 3) as f64);
            prims.push(
                SdfPrimitive::new(
                    i,
                    Shape::Sphere { radius: 0.3 + 0.05 * (i % 4) as f64 },
                    RigidTransform::from_translation(c),
                    Material::default(),
                )
                .unwrap(),
            );
        }
        prims.push(
            SdfPrimitive::new(
                99,
                Shape::Plane {
                    normal: DVec3::Y,
                    offset: -1.0,
                },
                RigidTransform::default(),
                Material::default(),
            )
            .unwrap(),
        );
        let bvh = Bvh::build(&prims);
        for k in 0..500 {
            let f = k as f64;
            let p = DVec3::new((f * 0.37).sin() * 6.0 + 4.0, (f * 0.73).cos() * 4.0 + 2.0, (f * 0.11).sin() * 3.0);
            let naive = prims.iter().map(|q| q.distance(p)).fold(f64::INFINITY, f64::min);
            assert_eq!(bvh.query(p), naive);
        }
    }
}
