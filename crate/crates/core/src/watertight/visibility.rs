use std::collections::VecDeque;

use rayon::prelude::*;

use super::grid::{GridSpec, LabelGrid, ScalarGrid};
use crate::accel::{fibonacci_directions, DirectionalCaster, TriangleBvh};
use crate::error::{Error, Result};

/// Probe settings for [`compute_visibility_labels`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityParams {
    /// Number of Fibonacci-sphere probe directions.
    pub directions: usize,
    /// A point is outside iff `escaping / directions > tau`.
    pub tau: f64,
    /// Hits closer than this along a probe are ignored.
    pub t_min: f64,
}

impl Default for VisibilityParams {
    fn default() -> Self {
        Self {
            directions: 64,
            tau: 0.0,
            t_min: crate::accel::DEFAULT_T_MIN,
        }
    }
}

impl VisibilityParams {
    pub fn validate(&self) -> Result<()> {
        if self.directions == 0 || self.directions > u16::MAX as usize {
            return Err(Error::invalid(format!("direction count {} out of range", self.directions)));
        }
        if !(0.0..1.0).contains(&self.tau) {
            return Err(Error::invalid(format!("escape threshold {} outside [0, 1)", self.tau)));
        }
        if !(self.t_min >= 0.0) {
            return Err(Error::invalid("t_min must be non-negative"));
        }
        Ok(())
    }

    /// Escapes needed to call a point outside.
    pub fn escapes_needed(&self) -> usize {
        (self.tau * self.directions as f64).floor() as usize + 1
    }
}

/// Labels a grid point inside when it is obscured from (nearly) every probe
/// direction: outside iff more than `tau * D` of the `D` probes escape.
///
/// Directions are processed one at a time; for each, triangles are bucketed in
/// the plane orthogonal to the probe and every still-undecided point is tested.
/// Per-point outcomes do not depend on scheduling.
pub fn compute_visibility_labels(bvh: &TriangleBvh, spec: GridSpec, params: &VisibilityParams) -> Result<LabelGrid> {
    params.validate()?;
    let r = spec.res;
    let needed = params.escapes_needed();
    let total = params.directions;
    let mut escapes = vec![0u16; spec.len()];
    let mut hits = vec![0u16; spec.len()];
    let soup = bvh.triangle_soup();

    let coords: Vec<f64> = (0..r).map(|i| spec.coordinate(i)).collect();
    for dir in fibonacci_directions(total) {
        let caster = DirectionalCaster::with_cover_cell(soup, &dir, Some(0.5 * spec.spacing()));
        // per-axis products, summed in the same order as ProbeFrame::project
        let axes = caster.frame().axes();
        let px: Vec<[f64; 3]> = coords.iter().map(|&x| axes.map(|a| x * a.x)).collect();
        let py: Vec<[f64; 3]> = coords.iter().map(|&y| axes.map(|a| y * a.y)).collect();
        let pz: Vec<[f64; 3]> = coords.iter().map(|&z| axes.map(|a| z * a.z)).collect();
        escapes
            .par_chunks_mut(r * r)
            .zip(hits.par_chunks_mut(r * r))
            .enumerate()
            .for_each(|(k, (esc, hit))| {
                let z = pz[k];
                for j in 0..r {
                    let y = py[j];
                    for i in 0..r {
                        let idx = i + r * j;
                        let e = esc[idx] as usize;
                        // decided either way
                        if e >= needed || total - hit[idx] as usize <= needed - 1 {
                            continue;
                        }
                        let x = px[i];
                        let o = [0, 1, 2].map(|c| x[c] + y[c] + z[c]);
                        if caster.escapes_projected(&o, params.t_min) {
                            esc[idx] += 1;
                        } else {
                            hit[idx] += 1;
                        }
                    }
                }
            });
    }
    let inside = escapes.iter().map(|&e| (e as usize) < needed).collect();
    LabelGrid::new(spec, inside)
}

/// Reference labeling through [`TriangleBvh::any_ray_escape`], one point at a
/// time. Slow; kept for cross-checking the bucketed path.
pub fn visibility_label_at(bvh: &TriangleBvh, p: &nalgebra::Point3<f64>, params: &VisibilityParams) -> bool {
    let needed = params.escapes_needed();
    let escapes = fibonacci_directions(params.directions)
        .iter()
        .filter(|d| bvh.any_ray_escape(p, d, params.t_min))
        .count();
    escapes < needed
}

/// Six-connected flood fill from the cube boundary through points whose UDF
/// exceeds `open_threshold` voxels. Boundary points and every point reached
/// from them are outside.
///
/// A wall only blocks the fill if one endpoint of each grid edge crossing it is
/// closed, which needs `open_threshold >= 0.5`.
pub fn exterior_flood_fill(udf: &ScalarGrid, open_threshold: f64) -> LabelGrid {
    let spec = udf.spec();
    let r = spec.res;
    let limit = open_threshold * spec.spacing();
    let values = udf.values();
    let open = |idx: usize| values[idx] > limit;
    let mut reached = vec![false; spec.len()];
    let mut queue = VecDeque::new();
    for k in 0..r {
        for j in 0..r {
            for i in 0..r {
                if spec.is_boundary(i, j, k) {
                    let idx = spec.index(i, j, k);
                    reached[idx] = true;
                    // closed boundary points are outside but do not spread
                    if open(idx) {
                        queue.push_back(idx);
                    }
                }
            }
        }
    }
    while let Some(idx) = queue.pop_front() {
        let (i, j, k) = spec.coords(idx);
        let mut visit = |ni: usize, nj: usize, nk: usize| {
            let n = spec.index(ni, nj, nk);
            if !reached[n] && open(n) {
                reached[n] = true;
                queue.push_back(n);
            }
        };
        if i > 0 {
            visit(i - 1, j, k);
        }
        if i + 1 < r {
            visit(i + 1, j, k);
        }
        if j > 0 {
            visit(i, j - 1, k);
        }
        if j + 1 < r {
            visit(i, j + 1, k);
        }
        if k > 0 {
            visit(i, j, k - 1);
        }
        if k + 1 < r {
            visit(i, j, k + 1);
        }
    }
    LabelGrid::new(spec, reached.into_iter().map(|b| !b).collect()).expect("shape matches")
}
