//! Procedural meshes used by the examples, the synthetic pipeline corpus and
//! the test suites.

use std::collections::HashMap;
use std::f64::consts::TAU;

use nalgebra::{Point3, Vector3};

use super::mesh::{mesh_volume, TriangleMesh};

// Outward-oriented faces of the box whose corner `i` has bits (x, y, z).
const BOX_TRIANGLES: [[u32; 3]; 12] = [
    [0, 4, 6],
    [0, 6, 2],
    [1, 3, 7],
    [1, 7, 5],
    [0, 1, 5],
    [0, 5, 4],
    [2, 6, 7],
    [2, 7, 3],
    [0, 2, 3],
    [0, 3, 1],
    [4, 5, 7],
    [4, 7, 6],
];

fn build(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> TriangleMesh {
    TriangleMesh::new(vertices, triangles).expect("procedural mesh is valid")
}

/// Flips every triangle if the signed volume is negative.
pub fn oriented_outward(mesh: TriangleMesh) -> TriangleMesh {
    if mesh_volume(&mesh) >= 0.0 {
        return mesh;
    }
    let tris = mesh.triangles().iter().map(|&[a, b, c]| [a, c, b]).collect();
    build(mesh.vertices().to_vec(), tris).with_provenance(mesh.provenance().to_owned())
}

pub fn box_mesh(min: Point3<f64>, max: Point3<f64>) -> TriangleMesh {
    let verts = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { min.x } else { max.x },
                if i & 2 == 0 { min.y } else { max.y },
                if i & 4 == 0 { min.z } else { max.z },
            )
        })
        .collect();
    build(verts, BOX_TRIANGLES.to_vec())
}

/// `[0, 1]^3`, 8 vertices, 12 outward triangles.
pub fn unit_cube() -> TriangleMesh {
    box_mesh(Point3::origin(), Point3::new(1.0, 1.0, 1.0))
}

/// Box with its `+z` face removed.
pub fn open_top_box(min: Point3<f64>, max: Point3<f64>) -> TriangleMesh {
    let b = box_mesh(min, max);
    b.filter_triangles(|i| i < 10)
}

/// Cube of half-size `half` whose `+y` wall is pierced by `slits` horizontal
/// slots, each `slit_length` long (along x, centered) and `slit_width` tall.
/// The result is an open shell; sealing the slots gives the full cube.
pub fn slit_box(half: f64, slits: usize, slit_width: f64, slit_length: f64) -> TriangleMesh {
    let min = Point3::new(-half, -half, -half);
    let max = Point3::new(half, half, half);
    // drop the +y wall (triangles 6 and 7)
    let mut shell = box_mesh(min, max).filter_triangles(|i| i != 6 && i != 7);

    let bar = (2.0 * half - slits as f64 * slit_width) / (slits + 1) as f64;
    assert!(bar > 0.0 && slit_length < 2.0 * half, "slits do not fit");
    let mut panel = |x0: f64, x1: f64, z0: f64, z1: f64| {
        let verts = vec![
            Point3::new(x0, half, z0),
            Point3::new(x1, half, z0),
            Point3::new(x0, half, z1),
            Point3::new(x1, half, z1),
        ];
        // outward normal +y
        shell = shell.merged(&build(verts, vec![[0, 2, 3], [0, 3, 1]]));
    };
    let l = slit_length / 2.0;
    let mut z = -half;
    for s in 0..=slits {
        panel(-half, half, z, z + bar);
        z += bar;
        if s < slits {
            panel(-half, -l, z, z + slit_width);
            panel(l, half, z, z + slit_width);
            z += slit_width;
        }
    }
    shell
}

/// Square sheet of side `size` in the `z = 0` plane, centered at the origin.
pub fn sheet(size: f64) -> TriangleMesh {
    let h = size / 2.0;
    build(
        vec![
            Point3::new(-h, -h, 0.0),
            Point3::new(h, -h, 0.0),
            Point3::new(-h, h, 0.0),
            Point3::new(h, h, 0.0),
        ],
        vec![[0, 1, 3], [0, 3, 2]],
    )
}

/// Icosahedron refined `subdivisions` times and projected onto the sphere.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Vector3::from(*v).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vector3<f64>>| -> u32 {
            *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                verts.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let verts = verts.into_iter().map(|v| Point3::from(v * radius)).collect();
    oriented_outward(build(verts, faces))
}

/// Axis-aligned ellipsoid built from an icosphere.
pub fn ellipsoid(radii: Vector3<f64>, subdivisions: u32) -> TriangleMesh {
    icosphere(1.0, subdivisions).map_vertices(|p| Point3::from(p.coords.component_mul(&radii)))
}

/// Torus around the `z` axis.
pub fn torus(major: f64, minor: f64, major_segments: usize, minor_segments: usize) -> TriangleMesh {
    let (nu, nv) = (major_segments, minor_segments);
    let mut verts = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = TAU * i as f64 / nu as f64;
        for j in 0..nv {
            let v = TAU * j as f64 / nv as f64;
            let ring = major + minor * v.cos();
            verts.push(Point3::new(ring * u.cos(), ring * u.sin(), minor * v.sin()));
        }
    }
    let idx = |i: usize, j: usize| ((i % nu) * nv + (j % nv)) as u32;
    let mut tris = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    oriented_outward(build(verts, tris))
}

/// Closed cylinder along `z` with capped ends.
pub fn cylinder(radius: f64, half_height: f64, segments: usize) -> TriangleMesh {
    let mut verts = Vec::with_capacity(2 * segments + 2);
    for z in [-half_height, half_height] {
        for i in 0..segments {
            let a = TAU * i as f64 / segments as f64;
            verts.push(Point3::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    let bottom = verts.len() as u32;
    verts.push(Point3::new(0.0, 0.0, -half_height));
    let top = verts.len() as u32;
    verts.push(Point3::new(0.0, 0.0, half_height));
    let n = segments as u32;
    let mut tris = Vec::with_capacity(4 * segments);
    for i in 0..n {
        let j = (i + 1) % n;
        tris.push([i, j, n + j]);
        tris.push([i, n + j, n + i]);
        tris.push([bottom, j, i]);
        tris.push([top, n + i, n + j]);
    }
    oriented_outward(build(verts, tris))
}

/// "L" shaped prism (extruded along `z`), a simple non-convex solid.
pub fn l_prism(size: f64, thickness: f64, depth: f64) -> TriangleMesh {
    let outline = [
        (0.0, 0.0),
        (size, 0.0),
        (size, thickness),
        (thickness, thickness),
        (thickness, size),
        (0.0, size),
    ];
    extrude(&outline, -depth / 2.0, depth / 2.0)
}

/// Extrudes a counter-clockwise simple polygon between `z0` and `z1`; caps are
/// ear-clipped.
pub fn extrude(outline: &[(f64, f64)], z0: f64, z1: f64) -> TriangleMesh {
    let n = outline.len();
    let mut verts = Vec::with_capacity(2 * n);
    for z in [z0, z1] {
        verts.extend(outline.iter().map(|&(x, y)| Point3::new(x, y, z)));
    }
    let cap = ear_clip(outline);
    let n32 = n as u32;
    let mut tris = Vec::new();
    for &[a, b, c] in &cap {
        tris.push([a, c, b]);
        tris.push([n32 + a, n32 + b, n32 + c]);
    }
    for i in 0..n32 {
        let j = (i + 1) % n32;
        tris.push([i, j, n32 + j]);
        tris.push([i, n32 + j, n32 + i]);
    }
    oriented_outward(build(verts, tris))
}

fn ear_clip(poly: &[(f64, f64)]) -> Vec<[u32; 3]> {
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut out = Vec::new();
    let cross = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| {
        (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
    };
    while idx.len() > 3 {
        let m = idx.len();
        let ear = (0..m).find(|&k| {
            let (ia, ib, ic) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            let (a, b, c) = (poly[ia], poly[ib], poly[ic]);
            if cross(a, b, c) <= 0.0 {
                return false;
            }
            idx.iter().all(|&o| {
                if o == ia || o == ib || o == ic {
                    return true;
                }
                let p = poly[o];
                !(cross(a, b, p) >= 0.0 && cross(b, c, p) >= 0.0 && cross(c, a, p) >= 0.0)
            })
        });
        let k = ear.expect("polygon must be simple and counter-clockwise");
        out.push([idx[(k + m - 1) % m] as u32, idx[k] as u32, idx[(k + 1) % m] as u32]);
        idx.remove(k);
    }
    out.push([idx[0] as u32, idx[1] as u32, idx[2] as u32]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::is_watertight;

    #[test]
    fn closed_shapes_are_watertight_and_positive() {
        let shapes = [
            unit_cube(),
            icosphere(1.0, 2),
            torus(0.6, 0.25, 24, 12),
            cylinder(0.5, 0.7, 20),
            l_prism(1.0, 0.3, 0.5),
            ellipsoid(Vector3::new(0.9, 0.5, 0.3), 2),
        ];
        for s in &shapes {
            assert!(is_watertight(s).watertight, "{s:?}");
            assert!(mesh_volume(s) > 0.0);
        }
    }

    #[test]
    fn l_prism_volume() {
        let v = mesh_volume(&l_prism(1.0, 0.3, 0.5));
        let area = 1.0 * 0.3 + 0.3 * 0.7;
        assert!((v - area * 0.5).abs() < 1e-12);
    }

    #[test]
    fn slit_box_is_open() {
        let b = slit_box(0.9, 3, 0.01, 0.6);
        let r = is_watertight(&b);
        assert!(!r.watertight);
        assert!(r.boundary_edges > 0);
        // the wall panels cover everything but the slots
        let wall: f64 = b.surface_area() - 5.0 * 1.8 * 1.8;
        assert!((wall - (1.8 * 1.8 - 3.0 * 0.01 * 0.6)).abs() < 1e-9);
    }
}
