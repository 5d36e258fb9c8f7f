//! Ray probes shared by the BVH escape test and the per-direction caster.
//!
//! Both routes project vertices into the same orthonormal frame and evaluate
//! the same edge functions, so they agree bit for bit. Edge functions of a
//! shared edge are exact negations of each other, and the inside test is
//! inclusive, so a ray can never slip between two triangles that share an edge.

use nalgebra::{Point3, Vector3};


/// Orthonormal frame `(u, w, d)` attached to a probe direction `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeFrame {
    u: Vector3<f64>,
    w: Vector3<f64>,
    d: Vector3<f64>,
}

impl ProbeFrame {
    pub fn new(dir: &Vector3<f64>) -> Self {
        let d = dir.normalize();
        // axis least aligned with d
        let a = d.abs();
        let helper = if a.x <= a.y && a.x <= a.z {
            Vector3::x()
        } else if a.y <= a.z {
            Vector3::y()
        } else {
            Vector3::z()
        };
        let u = d.cross(&helper).normalize();
        let w = d.cross(&u);
        Self { u, w, d }
    }

    #[inline]
    pub fn dir(&self) -> Vector3<f64> {
        self.d
    }

    /// The frame axes `[u, w, d]`.
    pub fn axes(&self) -> [Vector3<f64>; 3] {
        [self.u, self.w, self.d]
    }

    /// `(p.u, p.w, p.d)`, evaluated in a fixed operation order.
    #[inline]
    pub fn project(&self, p: &Point3<f64>) -> [f64; 3] {
        [
            p.x * self.u.x + p.y * self.u.y + p.z * self.u.z,
            p.x * self.w.x + p.y * self.w.y + p.z * self.w.z,
            p.x * self.d.x + p.y * self.d.y + p.z * self.d.z,
        ]
    }
}

/// Ray parameter at which the probe through projected origin `o` meets the
/// projected triangle `abc`, or `None` if it misses. Edge-on triangles miss.
#[inline]
pub fn hit_depth(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3], o: &[f64; 3]) -> Option<f64> {
    let (ax, ay) = (a[0] - o[0], a[1] - o[1]);
    let (bx, by) = (b[0] - o[0], b[1] - o[1]);
    let (cx, cy) = (c[0] - o[0], c[1] - o[1]);
    let e0 = bx * cy - by * cx;
    let e1 = cx * ay - cy * ax;
    let e2 = ax * by - ay * bx;
    let has_neg = e0 < 0.0 || e1 < 0.0 || e2 < 0.0;
    let has_pos = e0 > 0.0 || e1 > 0.0 || e2 > 0.0;
    if has_neg && has_pos {
        return None;
    }
    let det = e0 + e1 + e2;
    if det == 0.0 {
        return None;
    }
    Some((e0 * (a[2] - o[2]) + e1 * (b[2] - o[2]) + e2 * (c[2] - o[2])) / det)
}

/// True iff the probe through projected origin `o` meets triangle `abc` at a
/// depth beyond `t_min`. Same edge test as [`hit_depth`], with the depth
/// comparison done without a division. Every escape query uses this predicate.
#[inline]
pub fn hits_beyond(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3], o: &[f64; 3], t_min: f64) -> bool {
    let (ax, ay) = (a[0] - o[0], a[1] - o[1]);
    let (bx, by) = (b[0] - o[0], b[1] - o[1]);
    let (cx, cy) = (c[0] - o[0], c[1] - o[1]);
    let e0 = bx * cy - by * cx;
    let e1 = cx * ay - cy * ax;
    let e2 = ax * by - ay * bx;
    let has_neg = e0 < 0.0 || e1 < 0.0 || e2 < 0.0;
    let has_pos = e0 > 0.0 || e1 > 0.0 || e2 > 0.0;
    if has_neg && has_pos {
        return false;
    }
    let det = e0 + e1 + e2;
    let num = e0 * (a[2] - o[2]) + e1 * (b[2] - o[2]) + e2 * (c[2] - o[2]);
    if det > 0.0 {
        num > t_min * det
    } else if det < 0.0 {
        num < t_min * det
    } else {
        false
    }
}

/// `n` unit directions on a Fibonacci lattice; deterministic in `n`.
pub fn fibonacci_directions(n: usize) -> Vec<Vector3<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Vector3::new(r * phi.cos(), r * phi.sin(), z).normalize()
        })
        .collect()
}

/// Escape tester for one fixed direction.
///
/// Triangles are projected once onto the plane orthogonal to the direction and
/// bucketed in a uniform 2D grid, which turns each probe into a short scan of
/// one bucket. Results are identical to [`super::TriangleBvh::any_ray_escape`].
#[derive(Debug, Clone)]
pub struct DirectionalCaster {
    frame: ProbeFrame,
    // projected triangle corners
    proj: Vec<[[f64; 3]; 3]>,
    // per triangle, maximum projected depth
    zmax: Vec<f64>,
    origin: [f64; 2],
    limit: [f64; 2],
    inv_cell: f64,
    dims: [usize; 2],
    cell_start: Vec<u32>,
    cell_tris: Vec<u32>,
    // finer grid; per cell, the largest minimum depth among triangles that
    // cover the whole cell, or -inf
    cover_inv_cell: f64,
    cover_dims: [usize; 2],
    cover: Vec<f32>,
}

// Depth pruning slack; far larger than the rounding error of `hit_depth`.
const DEPTH_SLACK: f64 = 1e-7;

// Cover cells per bucket cell along each axis.
const COVER_SUBDIV: usize = 8;

/// True if `o` is inside the projected triangle with every edge function at
/// least `tol` away from zero, so [`hit_depth`] reports a hit at any point of a
/// convex region whose corners all pass.
fn strictly_inside(t: &[[f64; 3]; 3], o: &[f64; 2], tol: f64) -> bool {
    let (ax, ay) = (t[0][0] - o[0], t[0][1] - o[1]);
    let (bx, by) = (t[1][0] - o[0], t[1][1] - o[1]);
    let (cx, cy) = (t[2][0] - o[0], t[2][1] - o[1]);
    let e0 = bx * cy - by * cx;
    let e1 = cx * ay - cy * ax;
    let e2 = ax * by - ay * bx;
    (e0 > tol && e1 > tol && e2 > tol) || (e0 < -tol && e1 < -tol && e2 < -tol)
}

impl DirectionalCaster {
    pub fn new(triangles: &[[Point3<f64>; 3]], dir: &Vector3<f64>) -> Self {
        Self::with_cover_cell(triangles, dir, None)
    }

    /// Like [`new`](Self::new), with the size of the cells used to answer
    /// blocked probes without a scan. About half the spacing of the query
    /// points works well.
    pub fn with_cover_cell(triangles: &[[Point3<f64>; 3]], dir: &Vector3<f64>, cover_cell: Option<f64>) -> Self {
        let frame = ProbeFrame::new(dir);
        let proj: Vec<[[f64; 3]; 3]> = triangles
            .iter()
            .map(|t| t.map(|v| frame.project(&v)))
            .collect();

        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut mean_extent = 0.0;
        let mut boxes = Vec::with_capacity(proj.len());
        let mut zmax = Vec::with_capacity(proj.len());
        for t in &proj {
            let mut bl = [f64::INFINITY; 2];
            let mut bh = [f64::NEG_INFINITY; 2];
            let mut zm = f64::NEG_INFINITY;
            for p in t {
                for k in 0..2 {
                    bl[k] = bl[k].min(p[k]);
                    bh[k] = bh[k].max(p[k]);
                }
                zm = zm.max(p[2]);
            }
            mean_extent += (bh[0] - bl[0]).max(bh[1] - bl[1]);
            for k in 0..2 {
                lo[k] = lo[k].min(bl[k]);
                hi[k] = hi[k].max(bh[k]);
            }
            boxes.push((bl, bh));
            zmax.push(zm);
        }

        if proj.is_empty() {
            return Self {
                frame,
                proj,
                zmax,
                origin: [0.0; 2],
                limit: [0.0; 2],
                inv_cell: 1.0,
                dims: [0, 0],
                cell_start: vec![0],
                cell_tris: Vec::new(),
                cover_inv_cell: 1.0,
                cover_dims: [0, 0],
                cover: Vec::new(),
            };
        }

        mean_extent /= proj.len() as f64;
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
        let pad = 1e-9 * (1.0 + span);
        let cell = (0.5 * mean_extent).max(span / 1024.0).max(1e-12);
        let inv_cell = 1.0 / cell;
        let origin = [lo[0] - 2.0 * pad, lo[1] - 2.0 * pad];
        let dims = [
            (((hi[0] - origin[0] + 2.0 * pad) * inv_cell) as usize + 1).min(4096),
            (((hi[1] - origin[1] + 2.0 * pad) * inv_cell) as usize + 1).min(4096),
        ];
        let cell_of = |v: f64, k: usize| -> usize {
            let c = ((v - origin[k]) * inv_cell).floor();
            if c <= 0.0 {
                0
            } else {
                (c as usize).min(dims[k] - 1)
            }
        };

        // counting sort into a CSR layout; within a cell triangles are ordered
        // by decreasing zmax so depth pruning can stop early
        let mut by_depth: Vec<u32> = (0..proj.len() as u32).collect();
        by_depth.sort_by(|&a, &b| zmax[b as usize].total_cmp(&zmax[a as usize]).then(a.cmp(&b)));

        let mut counts = vec![0u32; dims[0] * dims[1] + 1];
        let range = |t: usize| {
            let (bl, bh) = boxes[t];
            (
                cell_of(bl[0] - pad, 0)..=cell_of(bh[0] + pad, 0),
                cell_of(bl[1] - pad, 1)..=cell_of(bh[1] + pad, 1),
            )
        };
        for &t in &by_depth {
            let (rx, ry) = range(t as usize);
            for y in ry {
                for x in rx.clone() {
                    counts[y * dims[0] + x + 1] += 1;
                }
            }
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        let mut cell_tris = vec![0u32; *counts.last().unwrap() as usize];
        for &t in &by_depth {
            let (rx, ry) = range(t as usize);
            for y in ry {
                for x in rx.clone() {
                    let c = y * dims[0] + x;
                    cell_tris[fill[c] as usize] = t;
                    fill[c] += 1;
                }
            }
        }

        let cover_cell = cover_cell
            .filter(|c| *c > 0.0)
            .unwrap_or(cell / COVER_SUBDIV as f64)
            .max(span / 2048.0);
        let cover_inv_cell = 1.0 / cover_cell;
        let cover_dims = [
            (((hi[0] - origin[0] + 2.0 * pad) * cover_inv_cell) as usize + 1).min(4096),
            (((hi[1] - origin[1] + 2.0 * pad) * cover_inv_cell) as usize + 1).min(4096),
        ];
        let mut cover = vec![f32::NEG_INFINITY; cover_dims[0] * cover_dims[1]];
        // edge-function margin, far above rounding error
        let tol = 1e-9 * span * span;
        for (t, tri) in proj.iter().enumerate() {
            let (bl, bh) = boxes[t];
            // rounded down so the stored bound stays conservative
            let zmin = tri[0][2].min(tri[1][2]).min(tri[2][2]);
            let zmin = match zmin as f32 {
                z if z as f64 > zmin => z.next_down(),
                z => z,
            };
            let first = |v: f64, k: usize| (((v - origin[k]) * cover_inv_cell).ceil().max(0.0) as usize).min(cover_dims[k]);
            let last = |v: f64, k: usize| (((v - origin[k]) * cover_inv_cell).floor().max(0.0) as usize).min(cover_dims[k]);
            // cells whose both corners lie inside the triangle's box
            let (x0, x1) = (first(bl[0], 0), last(bh[0], 0));
            let (y0, y1) = (first(bl[1], 1), last(bh[1], 1));
            for y in y0..y1 {
                for x in x0..x1 {
                    let c = y * cover_dims[0] + x;
                    if cover[c] >= zmin {
                        continue;
                    }
                    let corners = [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)]
                        .map(|(cx, cy)| [origin[0] + cx as f64 * cover_cell, origin[1] + cy as f64 * cover_cell]);
                    if corners.iter().all(|o| strictly_inside(tri, o, tol)) {
                        cover[c] = zmin;
                    }
                }
            }
        }

        Self {
            frame,
            proj,
            zmax,
            origin,
            limit: [hi[0] + 2.0 * pad, hi[1] + 2.0 * pad],
            inv_cell,
            dims,
            cell_start: counts,
            cell_tris,
            cover_inv_cell,
            cover_dims,
            cover,
        }
    }

    pub fn frame(&self) -> &ProbeFrame {
        &self.frame
    }

    /// True iff the probe from `p` along this direction hits nothing beyond
    /// `t_min`.
    #[inline]
    pub fn escapes(&self, p: &Point3<f64>, t_min: f64) -> bool {
        self.escapes_projected(&self.frame.project(p), t_min)
    }

    /// [`escapes`](Self::escapes) for a point already projected with
    /// [`ProbeFrame::project`].
    #[inline]
    pub fn escapes_projected(&self, o: &[f64; 3], t_min: f64) -> bool {
        if self.dims[0] == 0 {
            return true;
        }
        if o[0] < self.origin[0] || o[1] < self.origin[1] || o[0] > self.limit[0] || o[1] > self.limit[1] {
            return true;
        }
        let cx = ((o[0] - self.origin[0]) * self.cover_inv_cell) as usize;
        let cy = ((o[1] - self.origin[1]) * self.cover_inv_cell) as usize;
        if cx < self.cover_dims[0] && cy < self.cover_dims[1] {
            // a triangle covering the whole cell lies in front of the point
            if o[2] + t_min < self.cover[cy * self.cover_dims[0] + cx] as f64 - DEPTH_SLACK {
                return false;
            }
        }
        // o is at or beyond the origin here, so truncation is floor
        let fx = (((o[0] - self.origin[0]) * self.inv_cell) as usize).min(self.dims[0] - 1);
        let fy = (((o[1] - self.origin[1]) * self.inv_cell) as usize).min(self.dims[1] - 1);
        let c = fy * self.dims[0] + fx;
        let cutoff = o[2] + t_min - DEPTH_SLACK;
        for &t in &self.cell_tris[self.cell_start[c] as usize..self.cell_start[c + 1] as usize] {
            let t = t as usize;
            if self.zmax[t] < cutoff {
                break;
            }
            let [a, b, cc] = &self.proj[t];
            if hits_beyond(a, b, cc, o, t_min) {
                return false;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accel::TriangleBvh;
    use crate::geom::shapes;
    use rand::{Rng, SeedableRng};

    #[test]
    fn caster_matches_bvh_probe() {
        let m = shapes::icosphere(0.8, 2).merged(&shapes::torus(0.5, 0.15, 12, 6));
        let bvh = TriangleBvh::build(&m, 4);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for (n, d) in fibonacci_directions(12).into_iter().enumerate() {
            let cover = [None, Some(0.004), Some(0.05)][n % 3];
            let caster = DirectionalCaster::with_cover_cell(bvh.triangle_soup(), &d, cover);
            let frame = ProbeFrame::new(&d);
            for _ in 0..2000 {
                let p = Point3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                assert_eq!(caster.escapes(&p, 1e-4), bvh.escape_in_frame(&frame, &p, 1e-4));
            }
            // mesh vertices sit exactly on shared edges
            for v in m.vertices() {
                assert_eq!(caster.escapes(v, 1e-4), bvh.escape_in_frame(&frame, v, 1e-4));
            }
        }
    }

    #[test]
    fn frame_is_orthonormal() {
        for d in fibonacci_directions(50) {
            let f = ProbeFrame::new(&d);
            assert!((f.u.norm() - 1.0).abs() < 1e-12);
            assert!((f.w.norm() - 1.0).abs() < 1e-12);
            assert!(f.u.dot(&f.w).abs() < 1e-12);
            assert!(f.u.dot(&f.d).abs() < 1e-12);
        }
    }

    #[test]
    fn fibonacci_directions_are_unit_and_spread() {
        let dirs = fibonacci_directions(64);
        assert_eq!(dirs.len(), 64);
        let mean: Vector3<f64> = dirs.iter().sum::<Vector3<f64>>() / 64.0;
        assert!(mean.norm() < 0.05);
        for d in &dirs {
            assert!((d.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hit_depth_basic() {
        let a = [0.0, 0.0, 2.0];
        let b = [1.0, 0.0, 2.0];
        let c = [0.0, 1.0, 2.0];
        assert_eq!(hit_depth(&a, &b, &c, &[0.2, 0.2, 0.5]), Some(1.5));
        assert_eq!(hit_depth(&a, &b, &c, &[0.8, 0.8, 0.5]), None);
        // on the edge: inclusive from both windings
        assert!(hit_depth(&a, &b, &c, &[0.5, 0.0, 0.0]).is_some());
        assert!(hit_depth(&a, &c, &b, &[0.5, 0.0, 0.0]).is_some());
        assert!(hits_beyond(&a, &b, &c, &[0.2, 0.2, 0.5], 1.0));
        assert!(!hits_beyond(&a, &b, &c, &[0.2, 0.2, 0.5], 1.5));
        assert!(hits_beyond(&a, &c, &b, &[0.2, 0.2, 0.5], 1.4));
        assert!(!hits_beyond(&a, &b, &c, &[0.8, 0.8, 0.5], 0.0));
    }
}
