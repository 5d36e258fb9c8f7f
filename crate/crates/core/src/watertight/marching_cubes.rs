//! Table-driven marching cubes.
//!
//! The 256-entry triangle table is derived at first use from a single rule:
//! on a face whose corners alternate in sign, the two inside corners stay
//! connected. Because that choice depends only on the face itself, adjacent
//! cubes always agree on how the surface crosses their shared face, and the
//! extracted surface is a closed, consistently oriented 2-manifold whenever
//! the inside region does not touch the grid boundary.

use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::{Point3, Vector3};

use super::grid::ScalarGrid;
use crate::geom::TriangleMesh;

/// Corner `c` of the unit cube sits at `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
fn corner_pos(c: usize) -> Vector3<f64> {
    Vector3::new((c & 1) as f64, ((c >> 1) & 1) as f64, ((c >> 2) & 1) as f64)
}

/// Edge `e = 4 * axis + n` joins corner `lo` to `lo | (1 << axis)`, where `lo`
/// is the `n`-th corner with a zero bit on `axis`.
pub const EDGES: [(usize, usize); 12] = {
    let mut out = [(0, 0); 12];
    let mut axis = 0;
    while axis < 3 {
        let mut n = 0;
        let mut c = 0;
        while c < 8 {
            if c & (1 << axis) == 0 {
                out[axis * 4 + n] = (c, c | (1 << axis));
                n += 1;
            }
            c += 1;
        }
        axis += 1;
    }
    out
};

fn edge_between(a: usize, b: usize) -> usize {
    let (lo, hi) = (a.min(b), a.max(b));
    EDGES.iter().position(|&e| e == (lo, hi)).expect("corners are adjacent")
}

/// Bit mask of the two cube faces containing edge `e`; face `2 * axis + side`.
fn edge_faces(e: usize) -> u8 {
    let (lo, _) = EDGES[e];
    let axis = e / 4;
    let mut mask = 0;
    for other in (0..3).filter(|&b| b != axis) {
        mask |= 1 << (2 * other + ((lo >> other) & 1));
    }
    mask
}

/// Triangles (as edge triples) for each of the 256 sign configurations. Bit
/// `c` of the case index is set when corner `c` is inside.
pub fn triangle_table() -> &'static [Vec<[u8; 3]>; 256] {
    static TABLE: OnceLock<[Vec<[u8; 3]>; 256]> = OnceLock::new();
    TABLE.get_or_init(|| std::array::from_fn(build_case))
}

fn build_case(case: usize) -> Vec<[u8; 3]> {
    let inside = |c: usize| case & (1 << c) != 0;
    let mid = |e: usize| (corner_pos(EDGES[e].0) + corner_pos(EDGES[e].1)) * 0.5;
    let mut next: [Option<usize>; 12] = [None; 12];

    for axis in 0..3 {
        let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in 0..2 {
            // face corners in cyclic order
            let q: [usize; 4] = [(0, 0), (1, 0), (1, 1), (0, 1)].map(|(u, v)| (side << axis) | (u << b) | (v << c));
            let mut normal = Vector3::zeros();
            normal[axis] = if side == 1 { 1.0 } else { -1.0 };
            let crossing: Vec<usize> = (0..4).filter(|&i| inside(q[i]) != inside(q[(i + 1) % 4])).collect();
            let Some(&probe) = q.iter().find(|&&c| inside(c)) else {
                continue;
            };
            let mut segments: Vec<(usize, usize)> = Vec::new();
            match crossing.len() {
                0 => {}
                2 => segments.push((
                    edge_between(q[crossing[0]], q[(crossing[0] + 1) % 4]),
                    edge_between(q[crossing[1]], q[(crossing[1] + 1) % 4]),
                )),
                4 => {
                    // cut off each outside corner, keeping the inside diagonal joined
                    for i in 0..4 {
                        if !inside(q[i]) {
                            let prev = q[(i + 3) % 4];
                            let next = q[(i + 1) % 4];
                            segments.push((edge_between(prev, q[i]), edge_between(q[i], next)));
                        }
                    }
                }
                _ => unreachable!("a square has an even number of sign changes"),
            }
            for (ea, eb) in segments {
                let (ma, mb) = (mid(ea), mid(eb));
                // orient so that (b - a) x n points toward the inside
                let toward_inside = (mb - ma).cross(&normal).dot(&(corner_pos(probe) - ma));
                let (from, to) = if toward_inside > 0.0 { (ea, eb) } else { (eb, ea) };
                assert!(next[from].is_none(), "case {case}: edge {from} has two successors");
                next[from] = Some(to);
            }
        }
    }

    let mut tris = Vec::new();
    let mut used = [false; 12];
    for start in 0..12 {
        if used[start] || next[start].is_none() {
            continue;
        }
        let mut loop_edges = vec![start];
        used[start] = true;
        let mut e = next[start].unwrap();
        while e != start {
            assert!(!used[e], "case {case}: loop does not close");
            used[e] = true;
            loop_edges.push(e);
            e = next[e].expect("every crossing edge continues");
        }
        // Fan from a vertex that shares no cube face with any vertex it gets a
        // chord to. A chord lying in a face could coincide with a chord of the
        // neighboring cube and make that edge non-manifold.
        let n = loop_edges.len();
        let apex = (0..n)
            .find(|&a| {
                (2..n - 1).all(|off| edge_faces(loop_edges[a]) & edge_faces(loop_edges[(a + off) % n]) == 0)
            })
            .unwrap_or_else(|| panic!("case {case}: no admissible fan apex"));
        for k in 1..n - 1 {
            let at = |o: usize| loop_edges[(apex + o) % n] as u8;
            tris.push([at(0), at(k), at(k + 1)]);
        }
    }
    tris
}

// Keeps vertices off the grid corners. A sample exactly at `iso` would
// otherwise put several vertices on one point and produce zero-area triangles.
const EDGE_SNAP: f64 = 1e-3;

/// Extracts the `iso` level set. Points with `value < iso` are inside, and
/// triangle normals point toward increasing values.
///
/// Every grid edge with a sign change carries exactly one vertex, interpolated
/// from the edge's lower endpoint, so neighboring cubes share vertices exactly.
pub fn marching_cubes(grid: &ScalarGrid, iso: f64) -> TriangleMesh {
    let spec = grid.spec();
    let r = spec.res;
    let values = grid.values();
    let table = triangle_table();
    let inside = |idx: usize| values[idx] < iso;

    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut vertex_of: HashMap<u64, u32> = HashMap::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    let stride = [1usize, r, r * r];

    for k in 0..r - 1 {
        for j in 0..r - 1 {
            for i in 0..r - 1 {
                let base = spec.index(i, j, k);
                let mut case = 0usize;
                for c in 0..8 {
                    let idx = base + (c & 1) * stride[0] + ((c >> 1) & 1) * stride[1] + ((c >> 2) & 1) * stride[2];
                    if inside(idx) {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                for tri in &table[case] {
                    let ids = tri.map(|e| {
                        let (lo, _) = EDGES[e as usize];
                        let axis = e as usize / 4;
                        let a = base + (lo & 1) * stride[0] + ((lo >> 1) & 1) * stride[1] + ((lo >> 2) & 1) * stride[2];
                        let key = (a as u64) * 3 + axis as u64;
                        *vertex_of.entry(key).or_insert_with(|| {
                            let b = a + stride[axis];
                            let (va, vb) = (values[a], values[b]);
                            let t = ((iso - va) / (vb - va)).clamp(EDGE_SNAP, 1.0 - EDGE_SNAP);
                            let (ai, aj, ak) = spec.coords(a);
                            let pa = spec.point(ai, aj, ak);
                            let mut p = pa;
                            let pb = spec.coordinate([ai, aj, ak][axis] + 1);
                            p[axis] = pa[axis] + t * (pb - pa[axis]);
                            vertices.push(p);
                            (vertices.len() - 1) as u32
                        })
                    });
                    triangles.push(ids);
                }
            }
        }
    }
    TriangleMesh::new(vertices, triangles).expect("grid values are finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{is_watertight, mesh_volume};
    use crate::watertight::{FieldKind, GridSpec};

    #[test]
    fn table_has_expected_shape() {
        let t = triangle_table();
        assert!(t[0].is_empty());
        assert!(t[255].is_empty());
        assert_eq!(t[1].len(), 1);
        assert_eq!(t[254].len(), 1);
        assert_eq!(t[0b0000_1111].len(), 2);
        assert!(t.iter().all(|c| c.len() <= 12));
    }

    #[test]
    fn every_case_is_closed_in_isolation() {
        // One cube surrounded by outside samples: embed the case in a 4^3 grid
        // so the surface closes inside the domain.
        let spec = GridSpec::new(4).unwrap();
        for case in 0..256 {
            let values: Vec<f64> = (0..spec.len())
                .map(|idx| {
                    let (i, j, k) = spec.coords(idx);
                    if (1..=2).contains(&i) && (1..=2).contains(&j) && (1..=2).contains(&k) {
                        let c = (i - 1) | ((j - 1) << 1) | ((k - 1) << 2);
                        if case & (1 << c) != 0 { -1.0 } else { 1.0 }
                    } else {
                        1.0
                    }
                })
                .collect();
            let g = ScalarGrid::new(spec, FieldKind::Signed, values).unwrap();
            let m = marching_cubes(&g, 0.0);
            if case == 0 {
                assert!(m.is_empty());
                continue;
            }
            let w = is_watertight(&m);
            assert!(w.watertight, "case {case}: {w:?}");
            assert!(mesh_volume(&m) > 0.0, "case {case}");
        }
    }

    #[test]
    fn sphere_area_and_volume() {
        let spec = GridSpec::new(65).unwrap();
        let g = ScalarGrid::from_fn(spec, FieldKind::Signed, |p| p.coords.norm() - 0.5).unwrap();
        let m = marching_cubes(&g, 0.0);
        assert!(is_watertight(&m).watertight);
        let area = m.surface_area();
        let vol = mesh_volume(&m);
        let (a0, v0) = (std::f64::consts::PI, std::f64::consts::PI / 6.0);
        assert!((area - a0).abs() / a0 < 0.02, "area {area}");
        assert!((vol - v0).abs() / v0 < 0.02, "volume {vol}");
    }

    #[test]
    fn samples_on_the_level_set_keep_the_mesh_closed() {
        // faces of the cube fall exactly on grid planes
        let spec = GridSpec::new(11).unwrap();
        let g = ScalarGrid::from_fn(spec, FieldKind::Signed, |p| p.x.abs().max(p.y.abs()).max(p.z.abs()) - 0.6).unwrap();
        let m = marching_cubes(&g, 0.0);
        assert_eq!(m.dropped_degenerate(), 0);
        assert!(is_watertight(&m).watertight);
    }

    #[test]
    fn uniform_positive_is_empty() {
        let g = ScalarGrid::from_fn(GridSpec::new(8).unwrap(), FieldKind::Signed, |_| 0.3).unwrap();
        assert!(marching_cubes(&g, 0.0).is_empty());
    }

    #[test]
    fn cube_field() {
        let spec = GridSpec::new(65).unwrap();
        let a = 0.6;
        let g = ScalarGrid::from_fn(spec, FieldKind::Signed, |p| p.x.abs().max(p.y.abs()).max(p.z.abs()) - a).unwrap();
        let m = marching_cubes(&g, 0.0);
        let w = is_watertight(&m);
        assert!(w.watertight);
        assert_eq!(w.boundary_edges, 0);
        let v0 = (2.0 * a).powi(3);
        assert!((mesh_volume(&m) - v0).abs() / v0 < 0.02);
    }
}
