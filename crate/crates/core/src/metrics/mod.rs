//! Point-cloud and occupancy metrics: Chamfer distance, exact EMD, F-score,
//! voxel IoU and volume conservation.

mod assignment;
mod nn;

use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use assignment::{min_cost_assignment, EMD_MAX_POINTS};
pub use nn::NnGrid;

use crate::error::{Error, Result};
use crate::geom::{is_watertight, mesh_volume, TriangleMesh};
use crate::sampling::{surface_points, voxelize, VoxelGrid, VOXEL_RES};
use crate::watertight::RemeshResult;

pub const DEFAULT_FSCORE_D: f64 = 0.02;

/// Squared nearest-neighbor distance from every point of `from` to `to`, in
/// the order of `from`.
pub fn nearest_squared(from: &[Point3<f64>], to: &[Point3<f64>]) -> Vec<f64> {
    let grid = NnGrid::new(to);
    from.par_iter().map(|p| grid.nearest(p).0).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn check_clouds(a: &[Point3<f64>], b: &[Point3<f64>]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(())
}

/// `mean_a min_b |a - b|^2 + mean_b min_a |a - b|^2`.
pub fn chamfer(a: &[Point3<f64>], b: &[Point3<f64>]) -> Result<f64> {
    check_clouds(a, b)?;
    Ok(mean(&nearest_squared(a, b)) + mean(&nearest_squared(b, a)))
}

/// Harmonic mean of precision (share of `a` within `d` of `b`) and recall
/// (share of `b` within `d` of `a`).
pub fn f_score(a: &[Point3<f64>], b: &[Point3<f64>], d: f64) -> Result<f64> {
    check_clouds(a, b)?;
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::invalid(format!("F-score threshold {d} must be positive")));
    }
    let d2 = d * d;
    let share = |v: Vec<f64>| v.iter().filter(|&&x| x <= d2).count() as f64 / v.len() as f64;
    let precision = share(nearest_squared(a, b));
    let recall = share(nearest_squared(b, a));
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Mean Euclidean cost of an optimal one-to-one matching.
pub fn emd_exact(a: &[Point3<f64>], b: &[Point3<f64>]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(a.len(), b.len()));
    }
    if a.len() > EMD_MAX_POINTS {
        return Err(Error::SizeCap {
            cap: EMD_MAX_POINTS,
            got: a.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let n = a.len();
    let cost: Vec<f64> = a.iter().flat_map(|p| b.iter().map(move |q| (p - q).norm())).collect();
    let assignment = min_cost_assignment(&cost, n);
    Ok(assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>() / n as f64)
}

/// `|A and B| / |A or B|`, 1 when both are empty.
pub fn voxel_iou(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64> {
    if a.res != b.res {
        return Err(Error::ResolutionMismatch(a.res, b.res));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.occupied.iter().zip(&b.occupied) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Output volume over a reference: the input's own volume if it is
/// watertight, otherwise the inside-point count of the label grid times
/// `h^3`. Both volumes are taken in the normalized frame.
pub fn volume_conservation(input: &TriangleMesh, result: &RemeshResult) -> Result<f64> {
    let reference = if is_watertight(input).watertight {
        mesh_volume(input) * result.transform.scale.powi(3)
    } else {
        let h = result.label_grid.spec().spacing();
        result.label_grid.inside_count() as f64 * h.powi(3)
    };
    if !(reference.abs() > 0.0) {
        return Err(Error::ZeroReferenceVolume);
    }
    Ok(mesh_volume(&result.mesh) / reference)
}

/// Generalized winding number of `mesh` around `p`.
pub fn winding_number(mesh: &TriangleMesh, p: &Point3<f64>) -> f64 {
    let mut total = 0.0;
    for t in 0..mesh.triangles().len() {
        let [a, b, c] = mesh.triangle(t).map(|v| v - p);
        let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
        let num = a.dot(&b.cross(&c));
        let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
        total += 2.0 * num.atan2(den);
    }
    total / (4.0 * std::f64::consts::PI)
}

/// Solid occupancy at `res^3`: cells touched by the surface plus cells whose
/// center has winding number at least one half.
pub fn solid_voxels(mesh: &TriangleMesh, res: usize) -> VoxelGrid {
    let mut grid = voxelize(mesh, None, res);
    let centers: Vec<usize> = (0..grid.occupied.len()).filter(|&i| !grid.occupied[i]).collect();
    let s = grid.cell_size();
    let inside: Vec<bool> = centers
        .par_iter()
        .map(|&idx| {
            let (i, j, k) = (idx % res, (idx / res) % res, idx / (res * res));
            let c = Point3::new(-1.0 + (i as f64 + 0.5) * s, -1.0 + (j as f64 + 0.5) * s, -1.0 + (k as f64 + 0.5) * s);
            winding_number(mesh, &c).abs() >= 0.5
        })
        .collect();
    for (&idx, &inside) in centers.iter().zip(&inside) {
        grid.occupied[idx] |= inside;
    }
    grid
}

/// Thresholds and sample sizes behind a [`MetricReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricParams {
    pub fscore_d: f64,
    /// Surface samples per mesh for CD and F-score.
    pub points: usize,
    /// Points matched for EMD; 0 skips it.
    pub emd_points: usize,
    pub voxel_res: usize,
    pub seed: u64,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self {
            fscore_d: DEFAULT_FSCORE_D,
            points: 8192,
            emd_points: 0,
            voxel_res: VOXEL_RES,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub cd: f64,
    pub emd: Option<f64>,
    pub voxel_iou: f64,
    pub f_score: f64,
    pub volume_ratio: Option<f64>,
    pub params: MetricParams,
}

impl MetricReport {
    /// One `key=value` pair per line.
    pub fn to_kv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| format!("{x:.9e}"));
        let p = &self.params;
        [
            format!("cd={:.9e}", self.cd),
            format!("emd={}", opt(self.emd)),
            format!("voxel_iou={:.6}", self.voxel_iou),
            format!("f_score={:.6}", self.f_score),
            format!("volume_ratio={}", opt(self.volume_ratio)),
            format!("fscore_d={}", p.fscore_d),
            format!("points={}", p.points),
            format!("emd_points={}", p.emd_points),
            format!("voxel_res={}", p.voxel_res),
            format!("seed={}", p.seed),
        ]
        .join("\n")
    }
}

/// Compares two meshes in one frame: surface samples for CD, F-score and
/// optionally EMD, solid voxels for IoU, and the volume ratio `b / a` when
/// both are watertight.
pub fn compare_meshes(a: &TriangleMesh, b: &TriangleMesh, params: &MetricParams) -> Result<MetricReport> {
    let sa = surface_points(a, params.points, params.seed)?;
    let sb = surface_points(b, params.points, params.seed ^ 0x9e37_79b9_7f4a_7c15)?;
    let emd = match params.emd_points {
        0 => None,
        n => {
            let ea = surface_points(a, n, params.seed.wrapping_add(1))?;
            let eb = surface_points(b, n, params.seed.wrapping_add(2))?;
            Some(emd_exact(&ea.points, &eb.points)?)
        }
    };
    let volume_ratio = if is_watertight(a).watertight && is_watertight(b).watertight {
        let va = mesh_volume(a);
        (va.abs() > 0.0).then(|| mesh_volume(b) / va)
    } else {
        None
    };
    Ok(MetricReport {
        cd: chamfer(&sa.points, &sb.points)?,
        emd,
        voxel_iou: voxel_iou(&solid_voxels(a, params.voxel_res), &solid_voxels(b, params.voxel_res))?,
        f_score: f_score(&sa.points, &sb.points, params.fscore_d)?,
        volume_ratio,
        params: *params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::shapes;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, seed: u64) -> Vec<Point3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Point3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn chamfer_basics() {
        let a = cloud(100, 1);
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
        let one = [Point3::origin()];
        let other = [Point3::new(1.0, 0.0, 0.0)];
        assert_eq!(chamfer(&one, &other).unwrap(), 2.0);
        assert!(matches!(chamfer(&[], &one), Err(Error::EmptyCloud)));
    }

    #[test]
    fn f_score_basics() {
        let a = cloud(100, 2);
        assert_eq!(f_score(&a, &a, 1e-6).unwrap(), 1.0);
        let far: Vec<_> = a.iter().map(|p| p + nalgebra::Vector3::new(10.0, 0.0, 0.0)).collect();
        assert_eq!(f_score(&a, &far, 0.5).unwrap(), 0.0);
        assert!(f_score(&a, &a, 0.0).is_err());
    }

    #[test]
    fn emd_basics() {
        let a = cloud(20, 3);
        assert_eq!(emd_exact(&a, &a).unwrap(), 0.0);
        let two = [Point3::origin(), Point3::new(1.0, 0.0, 0.0)];
        let swapped = [two[1], two[0]];
        assert_eq!(emd_exact(&two, &swapped).unwrap(), 0.0);
        assert!(matches!(emd_exact(&a, &a[..3]), Err(Error::SizeMismatch(20, 3))));
        let big = cloud(1025, 4);
        assert!(matches!(emd_exact(&big, &big), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn iou_identities() {
        let mut half = VoxelGrid::empty(16);
        for i in 0..2048 {
            half.occupied[i] = true;
        }
        let full = VoxelGrid {
            res: 16,
            occupied: vec![true; 4096],
        };
        let mut other_half = VoxelGrid::empty(16);
        for i in 2048..4096 {
            other_half.occupied[i] = true;
        }
        assert_eq!(voxel_iou(&half, &half).unwrap(), 1.0);
        assert_eq!(voxel_iou(&half, &other_half).unwrap(), 0.0);
        assert_eq!(voxel_iou(&half, &full).unwrap(), 0.5);
        assert_eq!(voxel_iou(&VoxelGrid::empty(16), &VoxelGrid::empty(16)).unwrap(), 1.0);
        assert!(voxel_iou(&half, &VoxelGrid::empty(8)).is_err());
    }

    #[test]
    fn winding_number_of_a_cube() {
        let m = shapes::box_mesh(Point3::new(-0.5, -0.5, -0.5), Point3::new(0.5, 0.5, 0.5));
        assert!((winding_number(&m, &Point3::origin()) - 1.0).abs() < 1e-12);
        assert!(winding_number(&m, &Point3::new(0.9, 0.1, 0.0)).abs() < 1e-12);
    }

    #[test]
    fn solid_voxels_of_full_cube() {
        let m = shapes::box_mesh(Point3::new(-0.99, -0.99, -0.99), Point3::new(0.99, 0.99, 0.99));
        assert_eq!(solid_voxels(&m, 16).count(), 4096);
    }

    #[test]
    fn identical_meshes_compare_perfectly() {
        let m = shapes::icosphere(0.5, 2);
        let p = MetricParams {
            points: 2048,
            emd_points: 64,
            fscore_d: 0.1,
            ..MetricParams::default()
        };
        let r = compare_meshes(&m, &m, &p).unwrap();
        assert_eq!(r.voxel_iou, 1.0);
        assert_eq!(r.volume_ratio, Some(1.0));
        assert!(r.f_score > 0.99);
        assert!(r.cd < 1e-3);
        let kv = r.to_kv();
        assert!(kv.lines().any(|l| l == "voxel_iou=1.000000"));
        assert!(kv.lines().any(|l| l == "fscore_d=0.1"));
        let back: MetricReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
