use nalgebra::Point3;
use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::WeightedAliasIndex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::TriangleMesh;

/// Surface sizes the downstream encoder is trained with.
pub const SURFACE_SIZES: [usize; 3] = [2048, 4096, 8192];

/// Points in `[-1, 1]^3` plus the seed that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    pub seed: u64,
    pub source: String,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Self {
        Self {
            points,
            seed: 0,
            source: String::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Area-weighted triangle picker over one mesh.
pub struct SurfaceSampler<'a> {
    mesh: &'a TriangleMesh,
    alias: WeightedAliasIndex<f64>,
}

impl<'a> SurfaceSampler<'a> {
    pub fn new(mesh: &'a TriangleMesh) -> Result<Self> {
        let areas: Vec<f64> = (0..mesh.triangles().len()).map(|i| mesh.triangle_area(i)).collect();
        if !(areas.iter().sum::<f64>() > 0.0) {
            return Err(Error::ZeroArea);
        }
        let alias = WeightedAliasIndex::new(areas).map_err(|_| Error::ZeroArea)?;
        Ok(Self { mesh, alias })
    }

    /// Triangle index and a uniform point on it.
    pub fn sample(&self, rng: &mut impl Rng) -> (usize, Point3<f64>) {
        let t = self.alias.sample(rng);
        let [a, b, c] = self.mesh.triangle(t);
        let r1: f64 = rng.gen();
        let r2: f64 = rng.gen();
        let s = r1.sqrt();
        let p = a.coords * (1.0 - s) + b.coords * (s * (1.0 - r2)) + c.coords * (s * r2);
        (t, Point3::from(p))
    }
}

/// `n` area-uniform surface points; a pure function of `(mesh, n, seed)`.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    if !SURFACE_SIZES.contains(&n) {
        log::warn!("surface size {n} is outside the usual set {SURFACE_SIZES:?}");
    }
    surface_points(mesh, n, seed)
}

/// [`sample_surface`] without the size check.
pub fn surface_points(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    let sampler = SurfaceSampler::new(mesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n).map(|_| sampler.sample(&mut rng).1).collect();
    Ok(PointCloud {
        points,
        seed,
        source: mesh.provenance().to_string(),
    })
}

/// Greedy farthest-point subset of size `k`.
///
/// The first pick is drawn from `seed`; every later pick maximizes the
/// distance to the picked set, ties going to the lower index. Output order is
/// pick order.
pub fn fps_downsample(cloud: &PointCloud, k: usize, seed: u64) -> Result<PointCloud> {
    let n = cloud.len();
    if k > n {
        return Err(Error::invalid(format!("cannot pick {k} of {n} points")));
    }
    if k == 0 {
        return Ok(PointCloud { points: Vec::new(), seed, source: cloud.source.clone() });
    }
    let pts = &cloud.points;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = rng.gen_range(0..n);
    let mut min_d2 = vec![f64::INFINITY; n];
    let mut picked = Vec::with_capacity(k);
    for _ in 0..k {
        picked.push(current);
        let c = pts[current];
        min_d2[current] = f64::NEG_INFINITY;
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for (i, p) in pts.iter().enumerate() {
            let d = &mut min_d2[i];
            let d2 = (p - c).norm_squared();
            if d2 < *d {
                *d = d2;
            }
            if *d > best.1 {
                best = (i, *d);
            }
        }
        current = best.0;
    }
    Ok(PointCloud {
        points: picked.iter().map(|&i| pts[i]).collect(),
        seed,
        source: cloud.source.clone(),
    })
}
