//! Model-facing payloads: surface clouds and their downsamples, occupancy
//! queries, and conditioning payloads, plus the OCCS container they ship in.

mod occs;
mod payload;
mod queries;
mod surface;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use occs::{occs_voxels, OccsFile, Section, SectionKind, OCCS_MAGIC, OCCS_VERSION};
pub use payload::{
    bbox_corners, clipped_area, make_partial, sparse_cloud, triangle_box_overlap, voxelize, voxelize16, PartialCloud,
    VoxelGrid, MIN_RETAINED_FRACTION, PARTIAL_POINTS, SPARSE_POINTS, VOXEL_RES,
};
pub use queries::{occupancy, sample_queries, QuerySet};
pub use surface::{fps_downsample, sample_surface, surface_points, PointCloud, SurfaceSampler, SURFACE_SIZES};

use crate::error::{Error, Result};
use crate::geom::{Aabb, TriangleMesh};
use crate::watertight::{LabelGrid, ScalarGrid};

/// How a surface cloud is reduced to a quarter of its size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DownsampleMethod {
    #[default]
    Fps,
    /// Seeded uniform subset, in original order.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingSpec {
    pub surface_sizes: Vec<usize>,
    pub downsample_ratio: usize,
    pub downsample: DownsampleMethod,
    pub uniform_queries: usize,
    pub near_queries: usize,
    pub near_sigma: f64,
    pub seed: u64,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self {
            surface_sizes: SURFACE_SIZES.to_vec(),
            downsample_ratio: 4,
            downsample: DownsampleMethod::Fps,
            uniform_queries: 8192,
            near_queries: 8192,
            near_sigma: 0.01,
            seed: 0,
        }
    }
}

impl SamplingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.downsample_ratio == 0 {
            return Err(Error::invalid("downsample ratio must be positive"));
        }
        if self.surface_sizes.is_empty() {
            return Err(Error::invalid("no surface sizes"));
        }
        for &n in &self.surface_sizes {
            if n == 0 || n % self.downsample_ratio != 0 {
                return Err(Error::invalid(format!(
                    "surface size {n} is not a positive multiple of {}",
                    self.downsample_ratio
                )));
            }
        }
        if !(self.near_sigma > 0.0) || !self.near_sigma.is_finite() {
            return Err(Error::invalid(format!("near sigma {} must be positive", self.near_sigma)));
        }
        Ok(())
    }

    /// Downsample length for surface size `n`.
    pub fn quarter(&self, n: usize) -> usize {
        n / self.downsample_ratio
    }
}

/// Stable 64-bit id for an asset name.
pub fn asset_hash(asset_id: &str) -> u64 {
    xxhash_rust::xxh3::xxh3_64(asset_id.as_bytes())
}

/// Independent RNG seed for one `purpose` of one asset.
pub fn derive_seed(global: u64, asset_id: &str, purpose: &str) -> u64 {
    let mut buf = Vec::with_capacity(16 + asset_id.len() + purpose.len());
    buf.extend_from_slice(&global.to_le_bytes());
    buf.extend_from_slice(&(asset_id.len() as u64).to_le_bytes());
    buf.extend_from_slice(asset_id.as_bytes());
    buf.extend_from_slice(purpose.as_bytes());
    xxhash_rust::xxh3::xxh3_64(&buf)
}

/// Reduces `cloud` to `k` points with `method`.
pub fn downsample(cloud: &PointCloud, k: usize, method: DownsampleMethod, seed: u64) -> Result<PointCloud> {
    match method {
        DownsampleMethod::Fps => fps_downsample(cloud, k, seed),
        DownsampleMethod::Random => {
            if k > cloud.len() {
                return Err(Error::invalid(format!("cannot pick {k} of {} points", cloud.len())));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = rand::seq::index::sample(&mut rng, cloud.len(), k).into_vec();
            idx.sort_unstable();
            Ok(PointCloud {
                points: idx.iter().map(|&i| cloud.points[i]).collect(),
                seed,
                source: cloud.source.clone(),
            })
        }
    }
}

/// A seeded crop box covering 10% to 40% of `bounds` by volume.
pub fn random_crop_box(bounds: &Aabb, seed: u64) -> Aabb {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frac: f64 = rng.gen_range(0.1..=0.4);
    let side = frac.cbrt();
    let ext = bounds.extent();
    let size = ext * side;
    let lo = Vector3::from_fn(|k, _| bounds.min[k] + rng.gen::<f64>() * (ext[k] - size[k]));
    let min = Point3::from(lo);
    Aabb::new(min, min + size)
}

/// Every payload emitted for one asset.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetSamples {
    pub asset_id: String,
    /// `(surface, downsample)` per surface size, in spec order.
    pub surfaces: Vec<(PointCloud, PointCloud)>,
    pub queries: QuerySet,
    pub voxels: VoxelGrid,
    pub bbox: [Point3<f64>; 8],
    pub sparse: PointCloud,
    pub partial: PartialCloud,
}

/// Samples all payloads from a watertight mesh and its signed and label
/// grids. Every stream is seeded from `(spec.seed, asset_id)`.
pub fn sample_asset(
    asset_id: &str,
    mesh: &TriangleMesh,
    signed: &ScalarGrid,
    labels: &LabelGrid,
    spec: &SamplingSpec,
    iso: f64,
) -> Result<AssetSamples> {
    spec.validate()?;
    let seed = |purpose: &str| derive_seed(spec.seed, asset_id, purpose);
    let mut surfaces = Vec::with_capacity(spec.surface_sizes.len());
    for &n in &spec.surface_sizes {
        let mut s = sample_surface(mesh, n, seed(&format!("surface-{n}")))?;
        s.source = asset_id.to_string();
        let d = downsample(&s, spec.quarter(n), spec.downsample, seed(&format!("downsample-{n}")))?;
        surfaces.push((s, d));
    }
    let largest = &surfaces
        .iter()
        .max_by_key(|(s, _)| s.len())
        .expect("at least one surface size")
        .0;
    let qspec = SamplingSpec {
        seed: seed("queries"),
        ..spec.clone()
    };
    let queries = sample_queries(signed, largest, &qspec, iso)?;
    let voxels = voxelize16(mesh, Some(labels));
    let bbox = bbox_corners(mesh)?;
    let mut sparse = sparse_cloud(mesh, seed("sparse"))?;
    sparse.source = asset_id.to_string();
    let bounds = mesh.aabb().ok_or(Error::NoTriangles)?;
    let mut partial = None;
    for attempt in 0..16 {
        let crop = random_crop_box(&bounds, seed(&format!("crop-{attempt}")));
        match make_partial(mesh, &crop, seed("partial")) {
            Ok(p) => {
                partial = Some(p);
                break;
            }
            Err(Error::BoxCoversSurface(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    let partial = partial.ok_or_else(|| Error::invalid("no crop box keeps enough surface"))?;
    Ok(AssetSamples {
        asset_id: asset_id.to_string(),
        surfaces,
        queries,
        voxels,
        bbox,
        sparse,
        partial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(SamplingSpec::default().validate().is_ok());
        let bad = SamplingSpec {
            surface_sizes: vec![2050],
            ..SamplingSpec::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(SamplingSpec::default().quarter(8192), 2048);
    }

    #[test]
    fn seeds_differ_by_asset_and_purpose() {
        let a = derive_seed(1, "a", "surface");
        assert_eq!(a, derive_seed(1, "a", "surface"));
        assert_ne!(a, derive_seed(1, "b", "surface"));
        assert_ne!(a, derive_seed(1, "a", "sparse"));
        assert_ne!(a, derive_seed(2, "a", "surface"));
        // length prefix keeps the id and purpose apart
        assert_ne!(derive_seed(0, "ab", "c"), derive_seed(0, "a", "bc"));
    }

    #[test]
    fn random_downsample_is_an_ordered_subset() {
        let c = PointCloud::new((0..40).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect());
        let d = downsample(&c, 10, DownsampleMethod::Random, 3).unwrap();
        assert_eq!(d.len(), 10);
        assert!(d.points.windows(2).all(|w| w[0].x < w[1].x));
    }

    #[test]
    fn crop_boxes_cover_the_requested_share() {
        let b = Aabb::new(Point3::new(-1.0, -0.5, -0.2), Point3::new(1.0, 0.5, 0.2));
        for s in 0..50 {
            let c = random_crop_box(&b, s);
            let f = c.volume() / b.volume();
            assert!((0.1 - 1e-12..=0.4 + 1e-12).contains(&f), "{f}");
            assert!(b.contains_box(&c));
        }
    }
}
