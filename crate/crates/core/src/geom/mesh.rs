use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Triangles whose area falls below this value, measured in the normalized
/// frame, are dropped on construction.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Default inset of the longest bounding-box axis inside `[-1, 1]^3`.
pub const DEFAULT_MARGIN: f64 = 0.02;

/// Indexed triangle mesh.
///
/// Construction through [`TriangleMesh::new`] guarantees that indices are in
/// range, coordinates are finite, and no triangle repeats a vertex or has
/// (near) zero area.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[u32; 3]>,
    provenance: String,
    dropped: usize,
}

impl TriangleMesh {
    /// Builds a mesh, dropping degenerate triangles.
    ///
    /// An empty triangle list is accepted here (marching cubes may legitimately
    /// produce one); [`crate::geom::load_mesh`] rejects it.
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if let Some(i) = vertices
            .iter()
            .position(|v| !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()))
        {
            return Err(Error::NonFinite(i));
        }
        let n = vertices.len();
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i as usize >= n)) {
            return Err(Error::invalid(format!(
                "triangle {t:?} references a vertex beyond {n}"
            )));
        }

        // Area threshold is expressed in the normalized frame, where the longest
        // axis spans 2 units.
        let extent = Aabb::from_points(&vertices).map_or(0.0, |b| b.longest_extent());
        let area_scale = if extent > 0.0 { (extent / 2.0).powi(2) } else { 1.0 };
        let min_area = DEGENERATE_AREA * area_scale;

        let before = triangles.len();
        let triangles: Vec<[u32; 3]> = triangles
            .into_iter()
            .filter(|&[a, b, c]| {
                if a == b || b == c || a == c {
                    return false;
                }
                let (pa, pb, pc) = (
                    vertices[a as usize],
                    vertices[b as usize],
                    vertices[c as usize],
                );
                0.5 * (pb - pa).cross(&(pc - pa)).norm() > min_area
            })
            .collect();
        let dropped = before - triangles.len();

        Ok(Self {
            vertices,
            triangles,
            provenance: String::new(),
            dropped,
        })
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    #[inline]
    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    #[inline]
    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Number of degenerate triangles removed during construction.
    pub fn dropped_degenerate(&self) -> usize {
        self.dropped
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    #[inline]
    pub fn triangle(&self, i: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[i];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, i: usize) -> f64 {
        let [a, b, c] = self.triangle(i);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|i| self.triangle_area(i)).sum()
    }

    pub fn aabb(&self) -> Option<Aabb> {
        Aabb::from_points(&self.vertices)
    }

    /// Returns a copy with every vertex mapped through `f`.
    pub fn map_vertices(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Self {
        Self {
            vertices: self.vertices.iter().map(f).collect(),
            triangles: self.triangles.clone(),
            provenance: self.provenance.clone(),
            dropped: self.dropped,
        }
    }

    /// Concatenates two meshes into one soup.
    pub fn merged(&self, other: &TriangleMesh) -> Self {
        let offset = self.vertices.len() as u32;
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut triangles = self.triangles.clone();
        triangles.extend(other.triangles.iter().map(|t| t.map(|i| i + offset)));
        Self {
            vertices,
            triangles,
            provenance: self.provenance.clone(),
            dropped: self.dropped + other.dropped,
        }
    }

    /// Keeps the triangles for which `keep` returns true; vertices are retained.
    pub fn filter_triangles(&self, mut keep: impl FnMut(usize) -> bool) -> Self {
        Self {
            vertices: self.vertices.clone(),
            triangles: (0..self.triangles.len())
                .filter(|&i| keep(i))
                .map(|i| self.triangles[i])
                .collect(),
            provenance: self.provenance.clone(),
            dropped: self.dropped,
        }
    }

    /// Number of connected components under shared-vertex adjacency.
    pub fn component_count(&self) -> usize {
        let mut parent: Vec<u32> = (0..self.vertices.len() as u32).collect();
        fn find(parent: &mut [u32], mut x: u32) -> u32 {
            while parent[x as usize] != x {
                parent[x as usize] = parent[parent[x as usize] as usize];
                x = parent[x as usize];
            }
            x
        }
        for &[a, b, c] in &self.triangles {
            for (u, v) in [(a, b), (b, c)] {
                let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
                if ru != rv {
                    parent[ru.max(rv) as usize] = ru.min(rv);
                }
            }
        }
        let mut used = vec![false; self.vertices.len()];
        for t in &self.triangles {
            for &i in t {
                used[i as usize] = true;
            }
        }
        let mut roots: Vec<u32> = (0..self.vertices.len() as u32)
            .filter(|&i| used[i as usize])
            .map(|i| find(&mut parent, i))
            .collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn new(min: Point3<f64>, max: Point3<f64>) -> Self {
        Self { min, max }
    }

    pub fn from_points(points: &[Point3<f64>]) -> Option<Self> {
        if points.is_empty() {
            return None;
        }
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        Some(b)
    }

    #[inline]
    pub fn grow(&mut self, p: &Point3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    #[inline]
    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn longest_extent(&self) -> f64 {
        self.extent().max()
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn surface_area(&self) -> f64 {
        let e = self.extent();
        if e.x < 0.0 {
            return 0.0;
        }
        2.0 * (e.x * e.y + e.y * e.z + e.z * e.x)
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x.max(0.0) * e.y.max(0.0) * e.z.max(0.0)
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        self.contains(&other.min) && self.contains(&other.max)
    }

    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.max[k] && other.min[k] <= self.max[k])
    }

    /// Squared distance from `p` to the box (0 inside).
    #[inline]
    pub fn distance_squared(&self, p: &Point3<f64>) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let v = if p[k] < self.min[k] {
                self.min[k] - p[k]
            } else if p[k] > self.max[k] {
                p[k] - self.max[k]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }

    /// Corners in the fixed order `---, +--, -+-, ++-, --+, +-+, -++, +++`.
    pub fn corners(&self) -> [Point3<f64>; 8] {
        let (lo, hi) = (self.min, self.max);
        std::array::from_fn(|i| {
            Point3::new(
                if i & 1 == 0 { lo.x } else { hi.x },
                if i & 2 == 0 { lo.y } else { hi.y },
                if i & 4 == 0 { lo.z } else { hi.z },
            )
        })
    }
}

/// Similarity transform mapping source coordinates into the normalized cube.
///
/// `normalized = (source - center) * scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationTransform {
    pub center: [f64; 3],
    pub scale: f64,
}

impl NormalizationTransform {
    pub fn identity() -> Self {
        Self {
            center: [0.0; 3],
            scale: 1.0,
        }
    }

    #[inline]
    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        let c = Point3::from(self.center);
        Point3::from((p - c) * self.scale)
    }

    #[inline]
    pub fn inverse(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.center) + p.coords / self.scale
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &NormalizationTransform) -> NormalizationTransform {
        // (((p - c1) s1) - c2) s2 = (p - (c1 + c2 / s1)) s1 s2
        let c1 = Vector3::from(self.center);
        let c2 = Vector3::from(next.center);
        NormalizationTransform {
            center: (c1 + c2 / self.scale).into(),
            scale: self.scale * next.scale,
        }
    }
}

/// Centers the bounding box at the origin and scales the longest axis to span
/// `2 (1 - margin)`.
pub fn normalize_mesh(
    mesh: &TriangleMesh,
    margin: f64,
) -> Result<(TriangleMesh, NormalizationTransform)> {
    if !(0.0..0.5).contains(&margin) {
        return Err(Error::invalid(format!("margin {margin} outside [0, 0.5)")));
    }
    let aabb = mesh.aabb().ok_or(Error::NoTriangles)?;
    let extent = aabb.longest_extent();
    if !(extent > 0.0) {
        return Err(Error::ZeroExtent);
    }
    let transform = NormalizationTransform {
        center: aabb.center().into(),
        scale: 2.0 * (1.0 - margin) / extent,
    };
    Ok((mesh.map_vertices(|p| transform.apply(p)), transform))
}

/// Signed volume from tetrahedra against the origin.
///
/// Positive and meaningful only for closed, outward-oriented meshes; pair with
/// [`is_watertight`].
pub fn mesh_volume(mesh: &TriangleMesh) -> f64 {
    mesh.triangles
        .iter()
        .map(|&[a, b, c]| {
            let (a, b, c) = (
                mesh.vertices[a as usize].coords,
                mesh.vertices[b as usize].coords,
                mesh.vertices[c as usize].coords,
            );
            a.dot(&b.cross(&c))
        })
        .sum::<f64>()
        / 6.0
}

/// Edge census produced by [`is_watertight`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WatertightReport {
    pub watertight: bool,
    /// Undirected edges with exactly one incident triangle.
    pub boundary_edges: usize,
    /// Undirected edges with more than two incident triangles.
    pub non_manifold_edges: usize,
    /// Two-triangle edges traversed twice in the same direction.
    pub inconsistent_edges: usize,
}

/// Every undirected edge must be used exactly once in each direction.
pub fn is_watertight(mesh: &TriangleMesh) -> WatertightReport {
    // key: (lo, hi) -> (count lo->hi, count hi->lo)
    let mut edges: HashMap<(u32, u32), (u32, u32)> =
        HashMap::with_capacity(mesh.triangles.len() * 3 / 2 + 1);
    for &[a, b, c] in &mesh.triangles {
        for (u, v) in [(a, b), (b, c), (c, a)] {
            let e = edges.entry((u.min(v), u.max(v))).or_default();
            if u < v {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
    }
    let mut report = WatertightReport::default();
    for &(fwd, bwd) in edges.values() {
        match fwd + bwd {
            1 => report.boundary_edges += 1,
            2 if fwd != 1 => report.inconsistent_edges += 1,
            2 => {}
            _ => report.non_manifold_edges += 1,
        }
    }
    report.watertight = !mesh.triangles.is_empty()
        && report.boundary_edges == 0
        && report.non_manifold_edges == 0
        && report.inconsistent_edges == 0;
    report
}
