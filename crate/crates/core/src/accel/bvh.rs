use nalgebra::{Point3, Vector3};

use super::probe::{hits_beyond, ProbeFrame};
use crate::geom::{Aabb, TriangleMesh};

/// Default escape-test offset in normalized units.
pub const DEFAULT_T_MIN: f64 = 1e-4;

const SAH_BUCKETS: usize = 16;
const MAX_DEPTH: usize = 64;
// Past this depth splits fall back to the object median, which bounds the
// remaining depth by log2(n).
const MEDIAN_DEPTH: usize = 40;

#[derive(Debug, Clone, Copy)]
struct Node {
    bounds: Aabb,
    // leaf: first triangle slot and count; interior: child indices
    a: u32,
    b: u32,
    leaf: bool,
}

/// Bounding-volume hierarchy over the triangles of one mesh.
///
/// Immutable after [`TriangleBvh::build`]; every query is read-only.
#[derive(Debug, Clone)]
pub struct TriangleBvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
    tris: Vec<[Point3<f64>; 3]>,
    // per slot bounding sphere, used to skip exact tests
    spheres: Vec<(Point3<f64>, f64)>,
    leaf_size: usize,
}

/// Result of [`TriangleBvh::closest_point`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestHit {
    pub distance: f64,
    /// Index into the source mesh's triangle list.
    pub triangle: usize,
    pub foot: Point3<f64>,
    pub barycentric: [f64; 3],
}

impl TriangleBvh {
    /// SAH build with 16 centroid buckets. Equal costs resolve to the lower
    /// axis and bucket, and partitions are stable, so the tree is a pure
    /// function of the input.
    pub fn build(mesh: &TriangleMesh, leaf_size: usize) -> Self {
        let leaf_size = leaf_size.max(1);
        let n = mesh.triangles().len();
        let src: Vec<[Point3<f64>; 3]> = (0..n).map(|i| mesh.triangle(i)).collect();
        let boxes: Vec<Aabb> = src
            .iter()
            .map(|t| {
                let mut b = Aabb::empty();
                t.iter().for_each(|p| b.grow(p));
                b
            })
            .collect();
        let centroids: Vec<Point3<f64>> = boxes.iter().map(Aabb::center).collect();

        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut nodes = Vec::with_capacity(2 * n / leaf_size + 1);
        if n == 0 {
            nodes.push(Node {
                bounds: Aabb::empty(),
                a: 0,
                b: 0,
                leaf: true,
            });
        } else {
            let mut builder = Builder {
                boxes: &boxes,
                centroids: &centroids,
                leaf_size,
                nodes: &mut nodes,
                scratch: Vec::with_capacity(n),
            };
            builder.recurse(&mut order, 0, 0);
        }
        let tris: Vec<[Point3<f64>; 3]> = order.iter().map(|&i| src[i as usize]).collect();
        let spheres = tris
            .iter()
            .map(|t| {
                let c = Point3::from((t[0].coords + t[1].coords + t[2].coords) / 3.0);
                let r = t.iter().map(|v| (v - c).norm()).fold(0.0, f64::max);
                (c, r * (1.0 + 1e-12) + 1e-15)
            })
            .collect();
        Self {
            nodes,
            order,
            tris,
            spheres,
            leaf_size,
        }
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    /// Triangle corners in leaf-slot order.
    pub fn triangle_soup(&self) -> &[[Point3<f64>; 3]] {
        &self.tris
    }

    /// Permutation from leaf slots to source triangle indices.
    pub fn triangle_order(&self) -> &[u32] {
        &self.order
    }

    /// Exact closest point on the mesh.
    pub fn closest_point(&self, p: &Point3<f64>) -> Option<ClosestHit> {
        self.closest_slot(p, None).map(|(slot, d2, foot, bary)| ClosestHit {
            distance: d2.sqrt(),
            triangle: self.order[slot] as usize,
            foot,
            barycentric: bary,
        })
    }

    /// Unsigned distance plus the internal slot of the closest triangle. Passing
    /// that slot back as the hint for a nearby query tightens the initial search
    /// bound; the result does not depend on the hint.
    pub fn distance_hinted(&self, p: &Point3<f64>, hint_slot: Option<usize>) -> Option<(f64, usize)> {
        self.closest_slot(p, hint_slot).map(|(slot, d2, _, _)| (d2.sqrt(), slot))
    }

    fn closest_slot(
        &self,
        p: &Point3<f64>,
        hint_slot: Option<usize>,
    ) -> Option<(usize, f64, Point3<f64>, [f64; 3])> {
        if self.tris.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY, *p, [0.0; 3]);
        let consider = |slot: usize, best: &mut (usize, f64, Point3<f64>, [f64; 3])| {
            let (center, radius) = &self.spheres[slot];
            let gap = (p - center).norm() - radius;
            if gap > 0.0 && gap * gap > best.1 {
                return;
            }
            let [a, b, c] = &self.tris[slot];
            let (foot, bary) = closest_on_triangle(p, a, b, c);
            let d2 = (foot - p).norm_squared();
            // ties resolve to the lower source index
            let incumbent = self.order.get(best.0).copied().unwrap_or(u32::MAX);
            if d2 < best.1 || (d2 == best.1 && self.order[slot] < incumbent) {
                *best = (slot, d2, foot, bary);
            }
        };
        if let Some(h) = hint_slot.filter(|&h| h < self.tris.len()) {
            consider(h, &mut best);
        }

        let mut stack: [(u32, f64); MAX_DEPTH * 2] = [(0, 0.0); MAX_DEPTH * 2];
        let mut sp = 1;
        stack[0] = (0, self.nodes[0].bounds.distance_squared(p));
        while sp > 0 {
            sp -= 1;
            let (ni, nd) = stack[sp];
            if nd > best.1 {
                continue;
            }
            let node = &self.nodes[ni as usize];
            if node.leaf {
                for slot in node.a as usize..(node.a + node.b) as usize {
                    consider(slot, &mut best);
                }
            } else {
                let da = self.nodes[node.a as usize].bounds.distance_squared(p);
                let db = self.nodes[node.b as usize].bounds.distance_squared(p);
                // push the farther child first so the nearer one pops next
                let (near, dn, far, df) = if da <= db {
                    (node.a, da, node.b, db)
                } else {
                    (node.b, db, node.a, da)
                };
                if df <= best.1 {
                    stack[sp] = (far, df);
                    sp += 1;
                }
                if dn <= best.1 {
                    stack[sp] = (near, dn);
                    sp += 1;
                }
            }
        }
        Some(best)
    }

    /// Appends the slot of every triangle that may lie within `radius` of `p`,
    /// with a lower bound on its distance, to `out`. Sorted by that bound.
    pub fn candidates_within(&self, p: &Point3<f64>, radius: f64, out: &mut Vec<(f64, u32)>) {
        out.clear();
        if self.tris.is_empty() {
            return;
        }
        let r2 = radius * radius;
        let mut stack: [u32; MAX_DEPTH * 2] = [0; MAX_DEPTH * 2];
        let mut sp = 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if node.bounds.distance_squared(p) > r2 {
                continue;
            }
            if node.leaf {
                for slot in node.a..node.a + node.b {
                    let (center, rad) = &self.spheres[slot as usize];
                    let gap = ((p - center).norm() - rad).max(0.0);
                    if gap <= radius {
                        out.push((gap, slot));
                    }
                }
            } else {
                stack[sp] = node.b;
                stack[sp + 1] = node.a;
                sp += 2;
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    }

    /// Closest triangle to `p` among `candidates`, as produced by
    /// [`candidates_within`](Self::candidates_within) around a point `c` with
    /// `|p - c| <= slack`. Returns the distance and slot.
    ///
    /// Gives the same answer as [`distance_hinted`](Self::distance_hinted)
    /// whenever the candidate set contains the closest triangle.
    pub fn closest_among(&self, p: &Point3<f64>, candidates: &[(f64, u32)], slack: f64) -> Option<(f64, usize)> {
        let mut best = (usize::MAX, f64::INFINITY);
        let mut best_d = f64::INFINITY;
        for &(bound, slot) in candidates {
            if bound - slack > best_d {
                break;
            }
            let slot = slot as usize;
            let (center, radius) = &self.spheres[slot];
            let reach = radius + best_d;
            if (p - center).norm_squared() > reach * reach {
                continue;
            }
            let [a, b, c] = &self.tris[slot];
            let (foot, _) = closest_on_triangle(p, a, b, c);
            let d2 = (foot - p).norm_squared();
            let incumbent = self.order.get(best.0).copied().unwrap_or(u32::MAX);
            if d2 < best.1 || (d2 == best.1 && self.order[slot] < incumbent) {
                best = (slot, d2);
                best_d = d2.sqrt();
            }
        }
        (best.0 != usize::MAX).then(|| (best.1.sqrt(), best.0))
    }

    /// True iff the ray `origin + t dir`, `t > t_min`, hits no triangle.
    pub fn any_ray_escape(&self, origin: &Point3<f64>, dir: &Vector3<f64>, t_min: f64) -> bool {
        let frame = ProbeFrame::new(dir);
        self.escape_in_frame(&frame, origin, t_min)
    }

    /// [`any_ray_escape`](Self::any_ray_escape) with a prebuilt frame.
    pub fn escape_in_frame(&self, frame: &ProbeFrame, origin: &Point3<f64>, t_min: f64) -> bool {
        if self.tris.is_empty() {
            return true;
        }
        let dir = frame.dir();
        let inv = Vector3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let po = frame.project(origin);

        let mut stack = [0u32; MAX_DEPTH * 2];
        let mut sp = 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if !slab_hit(&node.bounds, origin, &inv, t_min) {
                continue;
            }
            if node.leaf {
                for slot in node.a as usize..(node.a + node.b) as usize {
                    let [a, b, c] = &self.tris[slot];
                    let pa = frame.project(a);
                    let pb = frame.project(b);
                    let pc = frame.project(c);
                    if hits_beyond(&pa, &pb, &pc, &po, t_min) {
                        return false;
                    }
                }
            } else {
                stack[sp] = node.b;
                stack[sp + 1] = node.a;
                sp += 2;
            }
        }
        true
    }

    /// Depth-first walk over all nodes.
    pub fn visit_nodes(&self, mut f: impl FnMut(NodeView<'_>)) {
        let mut stack = vec![(0u32, 0usize)];
        while let Some((ni, depth)) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.leaf {
                let slots = node.a as usize..(node.a + node.b) as usize;
                f(NodeView {
                    bounds: node.bounds,
                    depth,
                    leaf_triangles: Some(&self.order[slots.clone()]),
                    leaf_vertices: Some(&self.tris[slots]),
                });
            } else {
                f(NodeView {
                    bounds: node.bounds,
                    depth,
                    leaf_triangles: None,
                    leaf_vertices: None,
                });
                stack.push((node.b, depth + 1));
                stack.push((node.a, depth + 1));
            }
        }
    }

    /// Source indices of every triangle below `node`.
    pub fn subtree_triangles(&self, node: usize) -> Vec<u32> {
        let mut out = Vec::new();
        let mut stack = vec![node as u32];
        while let Some(ni) = stack.pop() {
            let n = &self.nodes[ni as usize];
            if n.leaf {
                out.extend_from_slice(&self.order[n.a as usize..(n.a + n.b) as usize]);
            } else {
                stack.push(n.a);
                stack.push(n.b);
            }
        }
        out
    }

    pub fn node_bounds(&self, node: usize) -> Aabb {
        self.nodes[node].bounds
    }
}

/// Read-only view of one node handed to [`TriangleBvh::visit_nodes`].
#[derive(Debug)]
pub struct NodeView<'a> {
    pub bounds: Aabb,
    pub depth: usize,
    pub leaf_triangles: Option<&'a [u32]>,
    pub leaf_vertices: Option<&'a [[Point3<f64>; 3]]>,
}

struct Builder<'a> {
    boxes: &'a [Aabb],
    centroids: &'a [Point3<f64>],
    leaf_size: usize,
    nodes: &'a mut Vec<Node>,
    scratch: Vec<u32>,
}

impl Builder<'_> {
    fn recurse(&mut self, items: &mut [u32], first: usize, depth: usize) -> u32 {
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &i in items.iter() {
            bounds = bounds.union(&self.boxes[i as usize]);
            cbounds.grow(&self.centroids[i as usize]);
        }
        let index = self.nodes.len() as u32;
        self.nodes.push(Node {
            bounds,
            a: first as u32,
            b: items.len() as u32,
            leaf: true,
        });
        if items.len() <= self.leaf_size {
            return index;
        }

        let mid = if depth < MEDIAN_DEPTH {
            self.sah_split(items, &cbounds)
        } else {
            None
        }
        .unwrap_or_else(|| self.median_split(items, &cbounds));

        let (left, right) = items.split_at_mut(mid);
        let a = self.recurse(left, first, depth + 1);
        let b = self.recurse(right, first + mid, depth + 1);
        let node = &mut self.nodes[index as usize];
        node.a = a;
        node.b = b;
        node.leaf = false;
        index
    }

    fn sah_split(&mut self, items: &mut [u32], cbounds: &Aabb) -> Option<usize> {
        let extent = cbounds.extent();
        let mut best: Option<(f64, usize, usize)> = None;
        for axis in 0..3 {
            if !(extent[axis] > 0.0) {
                continue;
            }
            let lo = cbounds.min[axis];
            let scale = SAH_BUCKETS as f64 / extent[axis];
            let bucket_of = |c: f64| (((c - lo) * scale) as usize).min(SAH_BUCKETS - 1);
            let mut counts = [0usize; SAH_BUCKETS];
            let mut boxes = [Aabb::empty(); SAH_BUCKETS];
            for &i in items.iter() {
                let k = bucket_of(self.centroids[i as usize][axis]);
                counts[k] += 1;
                boxes[k] = boxes[k].union(&self.boxes[i as usize]);
            }
            // prefix sweeps
            let mut right_area = [0.0; SAH_BUCKETS];
            let mut right_count = [0usize; SAH_BUCKETS];
            let (mut acc, mut cnt) = (Aabb::empty(), 0);
            for k in (1..SAH_BUCKETS).rev() {
                acc = acc.union(&boxes[k]);
                cnt += counts[k];
                right_area[k] = acc.surface_area();
                right_count[k] = cnt;
            }
            let (mut acc, mut cnt) = (Aabb::empty(), 0);
            for k in 0..SAH_BUCKETS - 1 {
                acc = acc.union(&boxes[k]);
                cnt += counts[k];
                let rc = right_count[k + 1];
                if cnt == 0 || rc == 0 {
                    continue;
                }
                let cost = acc.surface_area() * cnt as f64 + right_area[k + 1] * rc as f64;
                if best.map_or(true, |(c, _, _)| cost < c) {
                    best = Some((cost, axis, k));
                }
            }
        }
        let (_, axis, split) = best?;
        let lo = cbounds.min[axis];
        let scale = SAH_BUCKETS as f64 / cbounds.extent()[axis];
        let goes_left =
            |i: u32| (((self.centroids[i as usize][axis] - lo) * scale) as usize).min(SAH_BUCKETS - 1) <= split;
        Some(stable_partition(items, &mut self.scratch, goes_left))
    }

    fn median_split(&mut self, items: &mut [u32], cbounds: &Aabb) -> usize {
        let extent = cbounds.extent();
        let axis = if extent.x >= extent.y && extent.x >= extent.z {
            0
        } else if extent.y >= extent.z {
            1
        } else {
            2
        };
        items.sort_by(|&i, &j| {
            self.centroids[i as usize][axis]
                .total_cmp(&self.centroids[j as usize][axis])
                .then(i.cmp(&j))
        });
        items.len() / 2
    }
}

fn stable_partition(items: &mut [u32], scratch: &mut Vec<u32>, pred: impl Fn(u32) -> bool) -> usize {
    scratch.clear();
    let mut w = 0;
    for r in 0..items.len() {
        let v = items[r];
        if pred(v) {
            items[w] = v;
            w += 1;
        } else {
            scratch.push(v);
        }
    }
    items[w..].copy_from_slice(scratch);
    w
}

// Boxes are inflated slightly so that rounding in the slab test can never cull
// a triangle the exact hit predicate would accept.
#[inline]
fn slab_hit(b: &Aabb, o: &Point3<f64>, inv: &Vector3<f64>, t_min: f64) -> bool {
    let pad = 1e-9 * (1.0 + b.extent().max());
    let mut t0 = t_min - pad;
    let mut t1 = f64::INFINITY;
    for k in 0..3 {
        let lo = b.min[k] - pad;
        let hi = b.max[k] + pad;
        if inv[k].is_infinite() {
            if o[k] < lo || o[k] > hi {
                return false;
            }
            continue;
        }
        let mut ta = (lo - o[k]) * inv[k];
        let mut tb = (hi - o[k]) * inv[k];
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return false;
        }
    }
    true
}

/// Closest point on triangle `abc` to `p` with its barycentric coordinates.
#[inline]
pub fn closest_on_triangle(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> (Point3<f64>, [f64; 3]) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, [1.0, 0.0, 0.0]);
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, [0.0, 1.0, 0.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0]);
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, [0.0, 0.0, 1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}
