use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::surface::PointCloud;
use super::SamplingSpec;
use crate::error::{Error, Result};
use crate::watertight::ScalarGrid;

/// Occupancy queries with their labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySet {
    pub queries: Vec<Point3<f64>>,
    /// 1 inside, 0 outside.
    pub labels: Vec<u8>,
    /// Whether each query was drawn near the surface.
    pub near: Vec<bool>,
    pub near_fraction: f64,
    pub sigma: f64,
}

impl QuerySet {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

/// Occupancy of `p`: 1 iff the trilinear value of `signed` is below `iso`.
pub fn occupancy(signed: &ScalarGrid, p: &Point3<f64>, iso: f64) -> u8 {
    u8::from(signed.sample(p) < iso)
}

/// `spec.uniform_queries` uniform points in the cube followed by
/// `spec.near_queries` jittered surface points, labeled from `signed` at `iso`.
pub fn sample_queries(signed: &ScalarGrid, surface: &PointCloud, spec: &SamplingSpec, iso: f64) -> Result<QuerySet> {
    if spec.near_queries > 0 && surface.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut queries = Vec::with_capacity(spec.uniform_queries + spec.near_queries);
    for _ in 0..spec.uniform_queries {
        queries.push(Point3::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)));
    }
    let jitter = Normal::new(0.0, spec.near_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    for _ in 0..spec.near_queries {
        let base = surface.points[rng.gen_range(0..surface.len())];
        let p = base.map(|v| (v + jitter.sample(&mut rng)).clamp(-1.0, 1.0));
        queries.push(p);
    }
    let labels = queries.iter().map(|p| occupancy(signed, p, iso)).collect();
    let mut near = vec![false; spec.uniform_queries];
    near.resize(queries.len(), true);
    let total = queries.len().max(1) as f64;
    Ok(QuerySet {
        queries,
        labels,
        near,
        near_fraction: spec.near_queries as f64 / total,
        sigma: spec.near_sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::watertight::{FieldKind, GridSpec};

    fn sphere_grid(res: usize) -> ScalarGrid {
        ScalarGrid::from_fn(GridSpec::new(res).unwrap(), FieldKind::Signed, |p| p.coords.norm() - 0.5).unwrap()
    }

    #[test]
    fn sphere_labels() {
        let g = sphere_grid(33);
        assert_eq!(occupancy(&g, &Point3::origin(), 0.0), 1);
        assert_eq!(occupancy(&g, &Point3::new(0.9, 0.9, 0.9), 0.0), 0);
    }

    #[test]
    fn near_flags_are_bookkept() {
        let g = sphere_grid(17);
        let surface = PointCloud::new(vec![Point3::new(0.5, 0.0, 0.0), Point3::new(0.0, -0.5, 0.0)]);
        let spec = SamplingSpec {
            uniform_queries: 100,
            near_queries: 100,
            ..SamplingSpec::default()
        };
        let q = sample_queries(&g, &surface, &spec, 0.0).unwrap();
        assert_eq!(q.len(), 200);
        assert_eq!(q.near.iter().filter(|&&n| n).count(), 100);
        assert_eq!(q.near_fraction, 0.5);
        assert!(q.queries.iter().all(|p| p.iter().all(|v| (-1.0..=1.0).contains(v))));
        assert_eq!(q, sample_queries(&g, &surface, &spec, 0.0).unwrap());
    }

    #[test]
    fn labels_match_analytic_sphere() {
        let g = sphere_grid(128);
        let h = g.spacing();
        // trilinear error bound for |p| - r: h^2 / 8 times the Hessian trace
        // 2 / |p|, taken over the cells next to the surface
        let band = h * h / (4.0 * (0.5 - 3f64.sqrt() * h));
        let surface = crate::sampling::sample_surface(&crate::geom::shapes::icosphere(0.5, 4), 8192, 1).unwrap();
        let q = sample_queries(&g, &surface, &SamplingSpec::default(), 0.0).unwrap();
        let mut wrong = [0usize; 2];
        for ((p, &l), &near) in q.queries.iter().zip(&q.labels).zip(&q.near) {
            let truth = u8::from(p.coords.norm() < 0.5);
            if truth != l {
                wrong[near as usize] += 1;
                assert!((p.coords.norm() - 0.5).abs() <= band, "{p} off by {}", p.coords.norm() - 0.5);
            }
        }
        assert!(wrong[0] as f64 <= 0.001 * 8192.0, "{wrong:?}");
        // near-surface queries crowd the interpolation band; they still
        // disagree only inside it
        assert!(wrong[1] as f64 <= 0.01 * 8192.0, "{wrong:?}");
    }
}
