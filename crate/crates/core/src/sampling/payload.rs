//! Conditioning payloads: coarse voxels, box corners, sparse and partial
//! point clouds.

use nalgebra::{Point3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::surface::{surface_points, PointCloud, SurfaceSampler};
use crate::error::{Error, Result};
use crate::geom::{Aabb, TriangleMesh};
use crate::watertight::LabelGrid;

pub const VOXEL_RES: usize = 16;
pub const SPARSE_POINTS: usize = 512;
pub const PARTIAL_POINTS: usize = 2048;
/// Smallest share of the surface area a partial crop must keep.
pub const MIN_RETAINED_FRACTION: f64 = 0.05;

/// Occupancy over `res^3` cells tiling `[-1, 1]^3`, x fastest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoxelGrid {
    pub res: usize,
    pub occupied: Vec<bool>,
}

impl VoxelGrid {
    pub fn empty(res: usize) -> Self {
        Self {
            res,
            occupied: vec![false; res * res * res],
        }
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.res * (j + self.res * k)
    }

    pub fn cell_size(&self) -> f64 {
        2.0 / self.res as f64
    }

    pub fn cell_bounds(&self, i: usize, j: usize, k: usize) -> Aabb {
        let s = self.cell_size();
        let lo = Point3::new(-1.0 + i as f64 * s, -1.0 + j as f64 * s, -1.0 + k as f64 * s);
        Aabb::new(lo, lo + Vector3::repeat(s))
    }

    pub fn count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    /// Bits packed little-endian within each byte, cell order as `occupied`.
    pub fn to_bits(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.occupied.len().div_ceil(8)];
        for (i, _) in self.occupied.iter().enumerate().filter(|(_, &o)| o) {
            out[i / 8] |= 1 << (i % 8);
        }
        out
    }

    pub fn from_bits(res: usize, bits: &[u8]) -> Result<Self> {
        let n = res * res * res;
        if bits.len() != n.div_ceil(8) {
            return Err(Error::SizeMismatch(n.div_ceil(8), bits.len()));
        }
        Ok(Self {
            res,
            occupied: (0..n).map(|i| bits[i / 8] & (1 << (i % 8)) != 0).collect(),
        })
    }
}

/// Cells touched by a triangle, plus cells containing an inside point of
/// `labels` when given.
pub fn voxelize(mesh: &TriangleMesh, labels: Option<&LabelGrid>, res: usize) -> VoxelGrid {
    let mut grid = VoxelGrid::empty(res);
    let s = grid.cell_size();
    let cell_of = |v: f64| (((v + 1.0) / s).floor().max(0.0) as usize).min(res - 1);
    for t in 0..mesh.triangles().len() {
        let tri = mesh.triangle(t);
        let b = Aabb::from_points(&tri).expect("three points");
        for k in cell_of(b.min.z)..=cell_of(b.max.z) {
            for j in cell_of(b.min.y)..=cell_of(b.max.y) {
                for i in cell_of(b.min.x)..=cell_of(b.max.x) {
                    let idx = grid.index(i, j, k);
                    if !grid.occupied[idx] && triangle_box_overlap(&tri, &grid.cell_bounds(i, j, k)) {
                        grid.occupied[idx] = true;
                    }
                }
            }
        }
    }
    if let Some(labels) = labels {
        // a cell counts as solid if any fine grid point in it (boundary
        // included) is inside
        let spec = labels.spec();
        for idx in (0..spec.len()).filter(|&i| labels.is_inside(i)) {
            let (i, j, k) = spec.coords(idx);
            let p = spec.point(i, j, k);
            let range = |v: f64| {
                let x = (v + 1.0) / s;
                let hi = (x.floor() as usize).min(res - 1);
                let lo = if x.fract() == 0.0 && x > 0.0 { hi.min(x as usize - 1) } else { hi };
                lo..=hi
            };
            for ck in range(p.z) {
                for cj in range(p.y) {
                    for ci in range(p.x) {
                        let c = grid.index(ci, cj, ck);
                        grid.occupied[c] = true;
                    }
                }
            }
        }
    }
    grid
}

/// [`voxelize`] at the 16^3 conditioning resolution.
pub fn voxelize16(mesh: &TriangleMesh, labels: Option<&LabelGrid>) -> VoxelGrid {
    voxelize(mesh, labels, VOXEL_RES)
}

/// Separating-axis test between a triangle and a closed box.
pub fn triangle_box_overlap(tri: &[Point3<f64>; 3], b: &Aabb) -> bool {
    let c = b.center();
    let e = (b.max - b.min) * 0.5;
    let v = tri.map(|p| p - c);
    let f = [v[1] - v[0], v[2] - v[1], v[0] - v[2]];

    // box face normals
    for k in 0..3 {
        let lo = v[0][k].min(v[1][k]).min(v[2][k]);
        let hi = v[0][k].max(v[1][k]).max(v[2][k]);
        if lo > e[k] || hi < -e[k] {
            return false;
        }
    }
    // triangle normal
    let n = f[0].cross(&f[1]);
    let r = e.x * n.x.abs() + e.y * n.y.abs() + e.z * n.z.abs();
    if n.dot(&v[0]).abs() > r {
        return false;
    }
    // edge cross products
    for edge in &f {
        for k in 0..3 {
            let mut axis = Vector3::zeros();
            axis[k] = 1.0;
            let a = axis.cross(edge);
            if a == Vector3::zeros() {
                continue;
            }
            let p = v.map(|x| x.dot(&a));
            let r = e.x * a.x.abs() + e.y * a.y.abs() + e.z * a.z.abs();
            if p.iter().copied().fold(f64::INFINITY, f64::min) > r || p.iter().copied().fold(f64::NEG_INFINITY, f64::max) < -r {
                return false;
            }
        }
    }
    true
}

/// Corners of the mesh's tight box in the fixed order of [`Aabb::corners`].
pub fn bbox_corners(mesh: &TriangleMesh) -> Result<[Point3<f64>; 8]> {
    mesh.aabb().map(|b| b.corners()).ok_or(Error::NoTriangles)
}

/// 512 area-uniform surface points.
pub fn sparse_cloud(mesh: &TriangleMesh, seed: u64) -> Result<PointCloud> {
    surface_points(mesh, SPARSE_POINTS, seed)
}

/// Surface points outside a crop box, followed by the box corners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialCloud {
    pub points: Vec<Point3<f64>>,
    pub corners: [Point3<f64>; 8],
}

impl PartialCloud {
    /// Points then corners, `2048 + 8` in total.
    pub fn flattened(&self) -> Vec<Point3<f64>> {
        self.points.iter().chain(self.corners.iter()).copied().collect()
    }
}

/// 2048 surface points outside `crop`, then the 8 corners of `crop`.
///
/// Fails if less than 5% of the surface area lies outside the box.
pub fn make_partial(mesh: &TriangleMesh, crop: &Aabb, seed: u64) -> Result<PartialCloud> {
    let total = mesh.surface_area();
    if !(total > 0.0) {
        return Err(Error::ZeroArea);
    }
    let inside: f64 = (0..mesh.triangles().len())
        .map(|t| clipped_area(&mesh.triangle(t), crop))
        .sum();
    let kept = ((total - inside) / total).max(0.0);
    if kept < MIN_RETAINED_FRACTION {
        return Err(Error::BoxCoversSurface(100.0 * (1.0 - kept)));
    }
    let sampler = SurfaceSampler::new(mesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(PARTIAL_POINTS);
    while points.len() < PARTIAL_POINTS {
        let (_, p) = sampler.sample(&mut rng);
        if !crop.contains(&p) {
            points.push(p);
        }
    }
    Ok(PartialCloud {
        points,
        corners: crop.corners(),
    })
}

/// Area of the part of a triangle inside a box.
pub fn clipped_area(tri: &[Point3<f64>; 3], b: &Aabb) -> f64 {
    let mut poly: Vec<Point3<f64>> = tri.to_vec();
    for k in 0..3 {
        for (bound, keep_below) in [(b.min[k], false), (b.max[k], true)] {
            let inside = |p: &Point3<f64>| if keep_below { p[k] <= bound } else { p[k] >= bound };
            let mut out = Vec::with_capacity(poly.len() + 2);
            for i in 0..poly.len() {
                let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
                let (pi, qi) = (inside(&p), inside(&q));
                if pi {
                    out.push(p);
                }
                if pi != qi {
                    let t = (bound - p[k]) / (q[k] - p[k]);
                    out.push(p + (q - p) * t);
                }
            }
            poly = out;
            if poly.len() < 3 {
                return 0.0;
            }
        }
    }
    let mut twice = Vector3::zeros();
    for i in 1..poly.len() - 1 {
        twice += (poly[i] - poly[0]).cross(&(poly[i + 1] - poly[0]));
    }
    0.5 * twice.norm()
}
