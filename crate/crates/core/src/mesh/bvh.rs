//! Binary bounding-volume hierarchy over triangles.
//!
//! Construction splits the centroid set at its median along the longest axis
//! until at most [`LEAF_SIZE`] triangles remain. Ties in the sort key are broken
//! by triangle index, so the tree is a pure function of the input.

use nalgebra::Vector3;

use super::intersect::ShearedRay;
use super::Ray;

pub const LEAF_SIZE: usize = 4;

/// Relative slack applied to slab distances so box culling stays conservative
/// under rounding.
const SLAB_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Vector3::repeat(f64::INFINITY),
            max: Vector3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn grow(&mut self, p: &Vector3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    pub fn center(&self) -> Vector3<f64> {
        (self.min + self.max) * 0.5
    }

    fn longest_axis(&self) -> usize {
        let e = self.max - self.min;
        if e.x >= e.y && e.x >= e.z {
            0
        } else if e.y >= e.z {
            1
        } else {
            2
        }
    }

    /// Entry distance of the ray into the box if the slab interval overlaps
    /// `[t_min, t_max]`.
    fn entry(&self, ray: &Ray, inv_dir: &Vector3<f64>, t_min: f64, t_max: f64) -> Option<f64> {
        let mut near = f64::NEG_INFINITY;
        let mut far = f64::INFINITY;
        for a in 0..3 {
            let o = ray.origin[a];
            if ray.direction[a] == 0.0 {
                if o < self.min[a] || o > self.max[a] {
                    return None;
                }
                continue;
            }
            let t1 = (self.min[a] - o) * inv_dir[a];
            let t2 = (self.max[a] - o) * inv_dir[a];
            near = near.max(t1.min(t2));
            far = far.min(t1.max(t2));
        }
        near -= near.abs() * SLAB_SLACK;
        far += far.abs() * SLAB_SLACK;
        if near <= far && far >= t_min && near <= t_max {
            Some(near)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf { start: usize, count: usize },
    Interior { left: usize, right: usize },
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    kind: NodeKind,
}

/// Nearest hit found by [`Bvh::nearest`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawHit {
    pub t: f64,
    pub triangle: u32,
    pub barycentric: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    /// Triangle indices, permuted so each leaf owns a contiguous range.
    order: Vec<u32>,
}

impl Bvh {
    pub fn build(positions: &[Vector3<f64>], triangles: &[[u32; 3]]) -> Self {
        let bounds: Vec<Aabb> = triangles
            .iter()
            .map(|t| {
                let mut b = Aabb::empty();
                for &i in t {
                    b.grow(&positions[i as usize]);
                }
                b
            })
            .collect();
        let centroids: Vec<Vector3<f64>> = bounds.iter().map(Aabb::center).collect();
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * triangles.len() / LEAF_SIZE + 1);
        if !triangles.is_empty() {
            build_node(&mut nodes, &mut order, 0, &bounds, &centroids);
        }
        Self { nodes, order }
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes.first().map(|n| n.bounds).unwrap_or_else(Aabb::empty)
    }

    /// Triangle indices in leaf order. Every triangle appears exactly once.
    pub fn leaf_order(&self) -> &[u32] {
        &self.order
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Nearest hit in `(t_min, t_max)`; equal distances go to the lower triangle id.
    pub fn nearest(
        &self,
        ray: &Ray,
        t_min: f64,
        t_max: f64,
        positions: &[Vector3<f64>],
        triangles: &[[u32; 3]],
    ) -> Option<RawHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let sheared = ShearedRay::new(ray);
        let inv = ray.direction.map(|d| 1.0 / d);
        let mut best: Option<RawHit> = None;
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx];
            let limit = best.map_or(t_max, |b| b.t);
            let Some(near) = node.bounds.entry(ray, &inv, t_min, limit) else {
                continue;
            };
            if best.is_some_and(|b| near > b.t) {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for &tri in &self.order[start..start + count] {
                        let [a, b, c] = triangles[tri as usize].map(|i| &positions[i as usize]);
                        // Keep the current best reachable so equal-t ties can be resolved.
                        let upper = best.map_or(t_max, |b| b.t.next_up());
                        if let Some(h) = sheared.intersect(a, b, c, t_min, upper) {
                            let better = match best {
                                None => true,
                                Some(b) => h.t < b.t || (h.t == b.t && tri < b.triangle),
                            };
                            if better {
                                best = Some(RawHit {
                                    t: h.t,
                                    triangle: tri,
                                    barycentric: h.barycentric,
                                });
                            }
                        }
                    }
                }
                NodeKind::Interior { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        best
    }

    /// Whether any triangle accepted by `accept` is hit in `(t_min, t_max)`.
    pub fn any_hit(
        &self,
        ray: &Ray,
        t_min: f64,
        t_max: f64,
        positions: &[Vector3<f64>],
        triangles: &[[u32; 3]],
        accept: impl Fn(u32) -> bool,
    ) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let sheared = ShearedRay::new(ray);
        let inv = ray.direction.map(|d| 1.0 / d);
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx];
            if node.bounds.entry(ray, &inv, t_min, t_max).is_none() {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for &tri in &self.order[start..start + count] {
                        let [a, b, c] = triangles[tri as usize].map(|i| &positions[i as usize]);
                        if sheared.intersect(a, b, c, t_min, t_max).is_some() && accept(tri) {
                            return true;
                        }
                    }
                }
                NodeKind::Interior { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        false
    }
}

fn build_node(
    nodes: &mut Vec<Node>,
    order: &mut [u32],
    offset: usize,
    bounds: &[Aabb],
    centroids: &[Vector3<f64>],
) -> usize {
    let node_bounds = order
        .iter()
        .fold(Aabb::empty(), |acc, &i| acc.merge(&bounds[i as usize]));
    let idx = nodes.len();
    nodes.push(Node {
        bounds: node_bounds,
        kind: NodeKind::Leaf {
            start: offset,
            count: order.len(),
        },
    });
    if order.len() <= LEAF_SIZE {
        return idx;
    }

    let mut cbounds = Aabb::empty();
    for &i in order.iter() {
        cbounds.grow(&centroids[i as usize]);
    }
    let axis = cbounds.longest_axis();
    order.sort_by(|&a, &b| {
        centroids[a as usize][axis]
            .total_cmp(&centroids[b as usize][axis])
            .then(a.cmp(&b))
    });
    let mid = order.len() / 2;
    let (lo, hi) = order.split_at_mut(mid);
    let left = build_node(nodes, lo, offset, bounds, centroids);
    let right = build_node(nodes, hi, offset + mid, bounds, centroids);
    nodes[idx].kind = NodeKind::Interior { left, right };
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaves_cover_each_triangle_once() {
        let positions: Vec<Vector3<f64>> = (0..60)
            .map(|i| Vector3::new((i * 7 % 13) as f64, (i * 5 % 11) as f64, (i % 3) as f64))
            .collect();
        let triangles: Vec<[u32; 3]> = (0..58).map(|i| [i, i + 1, i + 2]).collect();
        let bvh = Bvh::build(&positions, &triangles);
        let mut seen = bvh.leaf_order().to_vec();
        seen.sort();
        assert_eq!(seen, (0..58).collect::<Vec<u32>>());
        for n in &bvh.nodes {
            if let NodeKind::Leaf { count, .. } = n.kind {
                assert!(count <= LEAF_SIZE);
            }
        }
    }

    #[test]
    fn empty_tree_never_hits() {
        let bvh = Bvh::build(&[], &[]);
        let ray = Ray::new(Vector3::zeros(), Vector3::z()).unwrap();
        assert!(bvh.nearest(&ray, 0.0, f64::INFINITY, &[], &[]).is_none());
        assert!(!bvh.any_hit(&ray, 0.0, f64::INFINITY, &[], &[], |_| true));
    }
}
