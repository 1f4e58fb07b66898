//! Collision primitives: exact closest point on a triangle, an AABB tree over
//! the body mesh with per-frame refitting, and the bed / sphere colliders.

use std::sync::Arc;

use crate::body::SkinnedMesh;
use crate::scene::BedFrame;
use crate::Vec3;

/// Result of a point-triangle closest-point query. `degenerate` marks
/// triangles below the area threshold, where the closest point falls back to
/// the longest edge segment.
#[derive(Debug, Clone, Copy)]
pub struct ClosestPoint {
    pub point: Vec3,
    pub distance: f64,
    pub degenerate: bool,
}

fn closest_point_on_segment(p: &Vec3, a: &Vec3, b: &Vec3) -> Vec3 {
    let ab = b - a;
    let len_sq = ab.norm_squared();
    if len_sq < 1e-30 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len_sq).clamp(0.0, 1.0);
    a + t * ab
}

/// Exact closest point on a triangle (interior, edge, or vertex region),
/// after Ericson's region decomposition.
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> ClosestPoint {
    let ab = b - a;
    let ac = c - a;
    if 0.5 * ab.cross(&ac).norm() <= 1e-12 {
        // Degenerate: use the longest of the three edges.
        let edges = [(*a, *b), (*b, *c), (*c, *a)];
        let longest = edges
            .iter()
            .max_by(|x, y| {
                (x.1 - x.0)
                    .norm_squared()
                    .partial_cmp(&(y.1 - y.0).norm_squared())
                    .unwrap()
            })
            .unwrap();
        let q = closest_point_on_segment(p, &longest.0, &longest.1);
        return ClosestPoint { point: q, distance: (p - q).norm(), degenerate: true };
    }

    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return finish(p, *a);
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return finish(p, *b);
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let t = d1 / (d1 - d3);
        return finish(p, a + t * ab);
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return finish(p, *c);
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let t = d2 / (d2 - d6);
        return finish(p, a + t * ac);
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return finish(p, b + t * (c - b));
    }

    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    finish(p, a + v * ab + w * ac)
}

fn finish(p: &Vec3, q: Vec3) -> ClosestPoint {
    ClosestPoint { point: q, distance: (p - q).norm(), degenerate: false }
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: Vec3,
    max: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Self { min: Vec3::repeat(f64::INFINITY), max: Vec3::repeat(f64::NEG_INFINITY) }
    }

    fn grow_point(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn grow(&mut self, other: &Aabb) {
        self.min = self.min.inf(&other.min);
        self.max = self.max.sup(&other.max);
    }

    /// Distance from a point to the box (zero inside).
    fn distance(&self, p: &Vec3) -> f64 {
        let mut d2 = 0.0;
        for i in 0..3 {
            let lo = self.min[i] - p[i];
            let hi = p[i] - self.max[i];
            let d = lo.max(hi).max(0.0);
            d2 += d * d;
        }
        d2.sqrt()
    }
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf { start: usize, count: usize },
    Inner { left: usize, right: usize },
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    kind: NodeKind,
}

const LEAF_SIZE: usize = 4;

/// Axis-aligned bounding-box tree over a triangle mesh. Topology is fixed at
/// build time; [`Bvh::refit`] recomputes the boxes for new vertex positions.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    /// Triangle indices grouped by leaf.
    order: Vec<u32>,
}

fn triangle_bounds(vertices: &[Vec3], face: &[u32; 3]) -> Aabb {
    let mut b = Aabb::empty();
    for &i in face {
        b.grow_point(&vertices[i as usize]);
    }
    b
}

impl Bvh {
    pub fn build(vertices: &[Vec3], faces: &[[u32; 3]]) -> Self {
        assert!(!faces.is_empty(), "cannot build a BVH over an empty mesh");
        let centroids: Vec<Vec3> = faces
            .iter()
            .map(|f| {
                (vertices[f[0] as usize] + vertices[f[1] as usize] + vertices[f[2] as usize]) / 3.0
            })
            .collect();
        let mut order: Vec<u32> = (0..faces.len() as u32).collect();
        let mut nodes = Vec::new();
        Self::split(vertices, faces, &centroids, &mut order, 0, faces.len(), &mut nodes);
        Self { nodes, order }
    }

    /// Recursively build the subtree over `order[start..start+count]`;
    /// returns the node index. Children always have larger indices than
    /// their parent, so refit can walk the vector in reverse.
    fn split(
        vertices: &[Vec3],
        faces: &[[u32; 3]],
        centroids: &[Vec3],
        order: &mut [u32],
        start: usize,
        count: usize,
        nodes: &mut Vec<Node>,
    ) -> usize {
        let mut bounds = Aabb::empty();
        for &t in &order[start..start + count] {
            bounds.grow(&triangle_bounds(vertices, &faces[t as usize]));
        }
        let idx = nodes.len();
        if count <= LEAF_SIZE {
            nodes.push(Node { bounds, kind: NodeKind::Leaf { start, count } });
            return idx;
        }
        // Split at the median along the longest axis of the centroid bounds.
        let mut cb = Aabb::empty();
        for &t in &order[start..start + count] {
            cb.grow_point(&centroids[t as usize]);
        }
        let extent = cb.max - cb.min;
        let axis = if extent.x >= extent.y && extent.x >= extent.z {
            0
        } else if extent.y >= extent.z {
            1
        } else {
            2
        };
        let slice = &mut order[start..start + count];
        let mid = count / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            centroids[a as usize][axis]
                .partial_cmp(&centroids[b as usize][axis])
                .unwrap()
                .then(a.cmp(&b))
        });
        nodes.push(Node { bounds, kind: NodeKind::Leaf { start: 0, count: 0 } }); // placeholder
        let left = Self::split(vertices, faces, centroids, order, start, mid, nodes);
        let right = Self::split(vertices, faces, centroids, order, start + mid, count - mid, nodes);
        nodes[idx] = Node { bounds, kind: NodeKind::Inner { left, right } };
        idx
    }

    /// Recompute all boxes for new vertex positions (same topology).
    pub fn refit(&mut self, vertices: &[Vec3], faces: &[[u32; 3]]) {
        for i in (0..self.nodes.len()).rev() {
            let bounds = match self.nodes[i].kind {
                NodeKind::Leaf { start, count } => {
                    let mut b = Aabb::empty();
                    for &t in &self.order[start..start + count] {
                        b.grow(&triangle_bounds(vertices, &faces[t as usize]));
                    }
                    b
                }
                NodeKind::Inner { left, right } => {
                    let mut b = self.nodes[left].bounds;
                    b.grow(&self.nodes[right].bounds);
                    b
                }
            };
            self.nodes[i].bounds = bounds;
        }
    }

    /// Closest point on the mesh: identical to a brute-force scan over all
    /// triangles, with distance ties broken by the lowest triangle index.
    pub fn closest(&self, vertices: &[Vec3], faces: &[[u32; 3]], p: &Vec3) -> (usize, Vec3, f64) {
        let mut best_tri = usize::MAX;
        let mut best_point = Vec3::zeros();
        let mut best_dist = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(node_idx) = stack.pop() {
            let node = &self.nodes[node_idx];
            if node.bounds.distance(p) > best_dist {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for &t in &self.order[start..start + count] {
                        let f = &faces[t as usize];
                        let cp = closest_point_on_triangle(
                            p,
                            &vertices[f[0] as usize],
                            &vertices[f[1] as usize],
                            &vertices[f[2] as usize],
                        );
                        let t = t as usize;
                        if cp.distance < best_dist || (cp.distance == best_dist && t < best_tri) {
                            best_tri = t;
                            best_point = cp.point;
                            best_dist = cp.distance;
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    let dl = self.nodes[left].bounds.distance(p);
                    let dr = self.nodes[right].bounds.distance(p);
                    // Push the farther child first so the nearer is explored
                    // first; on equal box distance visit the left child first.
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        (best_tri, best_point, best_dist)
    }
}

/// Animated body mesh with its acceleration structure. Faces are fixed;
/// vertices are swapped per frame and the tree is refit.
#[derive(Debug, Clone)]
pub struct BodyCollider {
    pub vertices: Vec<Vec3>,
    pub faces: Arc<Vec<[u32; 3]>>,
    bvh: Bvh,
}

impl BodyCollider {
    pub fn new(mesh: &SkinnedMesh) -> Self {
        let bvh = Bvh::build(&mesh.vertices, &mesh.faces);
        Self { vertices: mesh.vertices.clone(), faces: Arc::clone(&mesh.faces), bvh }
    }

    pub fn update_vertices(&mut self, vertices: &[Vec3]) {
        assert_eq!(vertices.len(), self.vertices.len());
        self.vertices.clear();
        self.vertices.extend_from_slice(vertices);
        self.bvh.refit(&self.vertices, &self.faces);
    }

    pub fn closest(&self, p: &Vec3) -> (usize, Vec3, f64) {
        self.bvh.closest(&self.vertices, &self.faces, p)
    }

    /// Geometric normal of a triangle (unit length, winding orientation).
    pub fn face_normal(&self, tri: usize) -> Vec3 {
        let f = &self.faces[tri];
        let a = self.vertices[f[0] as usize];
        let n = (self.vertices[f[1] as usize] - a).cross(&(self.vertices[f[2] as usize] - a));
        let len = n.norm();
        if len < 1e-18 {
            Vec3::new(0.0, 0.0, 1.0)
        } else {
            n / len
        }
    }
}

/// Oriented bed cuboid derived from the bed frame.
#[derive(Debug, Clone)]
pub struct BedCollider {
    center: Vec3,
    axes: [Vec3; 3],
    half: Vec3,
}

impl BedCollider {
    pub fn new(bed: &BedFrame) -> Self {
        Self {
            center: bed.cuboid_center(),
            axes: [bed.a1, bed.a2, bed.a3],
            half: bed.half_extents(),
        }
    }

    fn to_local(&self, p: &Vec3) -> Vec3 {
        let rel = p - self.center;
        Vec3::new(rel.dot(&self.axes[0]), rel.dot(&self.axes[1]), rel.dot(&self.axes[2]))
    }

    fn to_world(&self, local: &Vec3) -> Vec3 {
        self.center + local.x * self.axes[0] + local.y * self.axes[1] + local.z * self.axes[2]
    }

    /// Signed distance to the cuboid surface (negative inside).
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        let l = self.to_local(p);
        let d = Vec3::new(l.x.abs() - self.half.x, l.y.abs() - self.half.y, l.z.abs() - self.half.z);
        let outside = Vec3::new(d.x.max(0.0), d.y.max(0.0), d.z.max(0.0)).norm();
        let inside = d.x.max(d.y).max(d.z).min(0.0);
        outside + inside
    }

    /// Position projected to at least `margin` outside the cuboid, or `None`
    /// if the point is already clear.
    pub fn resolve(&self, p: &Vec3, margin: f64) -> Option<Vec3> {
        let l = self.to_local(p);
        let inside = l.x.abs() < self.half.x && l.y.abs() < self.half.y && l.z.abs() < self.half.z;
        if inside {
            // Push out through the nearest face.
            let mut axis = 0;
            let mut best = f64::INFINITY;
            for i in 0..3 {
                let pen = self.half[i] - l[i].abs();
                if pen < best {
                    best = pen;
                    axis = i;
                }
            }
            let mut out = l;
            out[axis] = (self.half[axis] + margin) * if l[axis] >= 0.0 { 1.0 } else { -1.0 };
            return Some(self.to_world(&out));
        }
        let clamped = Vec3::new(
            l.x.clamp(-self.half.x, self.half.x),
            l.y.clamp(-self.half.y, self.half.y),
            l.z.clamp(-self.half.z, self.half.z),
        );
        let away = l - clamped;
        let dist = away.norm();
        if dist >= margin {
            return None;
        }
        // On-surface points have no direction; nudge along the first axis.
        let dir = if dist < 1e-12 { Vec3::new(1.0, 0.0, 0.0) } else { away / dist };
        Some(self.to_world(&(clamped + dir * margin)))
    }
}

/// Analytic sphere collider (tests and simple body proxies).
#[derive(Debug, Clone, Copy)]
pub struct SphereCollider {
    pub center: Vec3,
    pub radius: f64,
}

impl SphereCollider {
    pub fn distance(&self, p: &Vec3) -> f64 {
        (p - self.center).norm() - self.radius
    }

    pub fn resolve(&self, p: &Vec3, margin: f64) -> Option<Vec3> {
        let rel = p - self.center;
        let dist = rel.norm();
        if dist - self.radius >= margin {
            return None;
        }
        let dir = if dist < 1e-12 { Vec3::new(0.0, 0.0, 1.0) } else { rel / dist };
        Some(self.center + dir * (self.radius + margin))
    }
}

/// Everything the cloth can collide with, plus the collision margin.
#[derive(Debug, Clone, Default)]
pub struct ColliderSet {
    pub body: Option<BodyCollider>,
    pub bed: Option<BedCollider>,
    pub spheres: Vec<SphereCollider>,
    pub margin: f64,
}

impl ColliderSet {
    pub fn empty(margin: f64) -> Self {
        Self { body: None, bed: None, spheres: Vec::new(), margin }
    }
}
