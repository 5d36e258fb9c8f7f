use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::grid::{GridSpec, LabelGrid, ScalarGrid};
use super::marching_cubes::marching_cubes;
use super::signed::synthesize_signed_grid;
use super::udf::compute_udf_grid;
use super::visibility::{compute_visibility_labels, exterior_flood_fill, VisibilityParams};
use crate::accel::{TriangleBvh, DEFAULT_T_MIN};
use crate::error::{Error, Result};
use crate::geom::{is_watertight, mesh_volume, normalize_mesh, NormalizationTransform, TriangleMesh, DEFAULT_MARGIN};

/// BVH leaf size used by the remesher.
pub const REMESH_LEAF_SIZE: usize = 4;

/// How grid points are split into inside and outside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelingMode {
    /// Probe rays in `directions` Fibonacci directions.
    #[default]
    RayVisibility,
    /// Six-connected fill from the domain boundary.
    ExteriorFloodFill,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemeshConfig {
    pub grid_res: usize,
    pub directions: usize,
    pub escape_threshold: f64,
    /// Level set to extract, in voxels.
    pub iso_level: f64,
    /// Thickness, in voxels, given to surfaces seen from both sides.
    pub shell_epsilon: Option<f64>,
    pub labeling_mode: LabelingMode,
    /// Flood fill passes through points farther than this many voxels from
    /// the surface.
    pub open_threshold: f64,
}

impl Default for RemeshConfig {
    fn default() -> Self {
        Self {
            grid_res: 256,
            directions: 64,
            escape_threshold: 0.0,
            iso_level: 0.0,
            shell_epsilon: None,
            labeling_mode: LabelingMode::RayVisibility,
            open_threshold: 0.5,
        }
    }
}

impl RemeshConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_res < 8 {
            return Err(Error::invalid(format!("grid resolution {} below 8", self.grid_res)));
        }
        if self.directions < 6 {
            return Err(Error::invalid(format!("direction count {} below 6", self.directions)));
        }
        if !(self.iso_level >= 0.0) || !self.iso_level.is_finite() {
            return Err(Error::invalid(format!("iso level {} must be finite and >= 0", self.iso_level)));
        }
        if let Some(e) = self.shell_epsilon {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::invalid(format!("shell epsilon {e} must be positive")));
            }
        }
        if !(self.open_threshold >= 0.0) || !self.open_threshold.is_finite() {
            return Err(Error::invalid("open threshold must be finite and >= 0"));
        }
        self.visibility().validate()
    }

    pub fn visibility(&self) -> VisibilityParams {
        VisibilityParams {
            directions: self.directions,
            tau: self.escape_threshold,
            t_min: DEFAULT_T_MIN,
        }
    }
}

/// Wall-clock time spent in each stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub bvh: Duration,
    pub udf: Duration,
    pub labels: Duration,
    pub signed: Duration,
    pub extract: Duration,
    pub total: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemeshStats {
    pub input_boundary_edges: usize,
    pub input_triangles: usize,
    pub inside_fraction: f64,
    pub output_volume: f64,
    pub output_triangles: usize,
    pub timings: StageTimings,
}

#[derive(Debug, Clone)]
pub struct RemeshResult {
    /// Watertight output, in the normalized frame.
    pub mesh: TriangleMesh,
    pub signed_grid: ScalarGrid,
    pub label_grid: LabelGrid,
    /// Maps input coordinates into the frame of `mesh`.
    pub transform: NormalizationTransform,
    pub stats: RemeshStats,
}

/// Normalizes `mesh`, computes its UDF on an `R^3` grid, labels grid points,
/// and extracts the signed field's level set as a closed mesh.
pub fn remesh_watertight(mesh: &TriangleMesh, cfg: &RemeshConfig) -> Result<RemeshResult> {
    cfg.validate()?;
    if mesh.is_empty() {
        return Err(Error::NoTriangles);
    }
    let start = Instant::now();
    let mut timings = StageTimings::default();
    let (normalized, transform) = normalize_mesh(mesh, DEFAULT_MARGIN)?;
    let spec = GridSpec::new(cfg.grid_res)?;
    let h = spec.spacing();

    let t = Instant::now();
    let bvh = TriangleBvh::build(&normalized, REMESH_LEAF_SIZE);
    timings.bvh = t.elapsed();

    let t = Instant::now();
    let udf = compute_udf_grid(&bvh, spec);
    timings.udf = t.elapsed();

    let t = Instant::now();
    let labels = match cfg.labeling_mode {
        LabelingMode::RayVisibility => compute_visibility_labels(&bvh, spec, &cfg.visibility())?,
        LabelingMode::ExteriorFloodFill => exterior_flood_fill(&udf, cfg.open_threshold),
    };
    timings.labels = t.elapsed();

    let t = Instant::now();
    let signed = synthesize_signed_grid(&udf, &labels, cfg.shell_epsilon)?;
    let iso = cfg.iso_level * h;
    check_inset(&signed, iso)?;
    timings.signed = t.elapsed();

    let t = Instant::now();
    let out = marching_cubes(&signed, iso);
    timings.extract = t.elapsed();
    if out.is_empty() {
        return Err(Error::EmptyOutput);
    }
    let output_volume = mesh_volume(&out);
    timings.total = start.elapsed();

    let stats = RemeshStats {
        input_boundary_edges: is_watertight(mesh).boundary_edges,
        input_triangles: mesh.triangles().len(),
        inside_fraction: labels.inside_fraction(),
        output_volume,
        output_triangles: out.triangles().len(),
        timings,
    };
    Ok(RemeshResult {
        mesh: out.with_provenance(mesh.provenance()),
        signed_grid: signed,
        label_grid: labels,
        transform,
        stats,
    })
}

/// The extracted surface stays closed only if every boundary grid point lies
/// strictly outside the level set.
fn check_inset(signed: &ScalarGrid, iso: f64) -> Result<()> {
    let spec = signed.spec();
    let r = spec.res;
    for k in 0..r {
        for j in 0..r {
            for i in 0..r {
                if spec.is_boundary(i, j, k) {
                    let v = signed.get(i, j, k);
                    if !(v > iso) {
                        return Err(Error::NotInset(v));
                    }
                }
            }
        }
    }
    Ok(())
}
