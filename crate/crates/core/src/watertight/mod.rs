//! Watertight remeshing: UDF grid, inside/outside labels, signed field and
//! isosurface extraction.

mod grid;
mod marching_cubes;
mod remesh;
mod signed;
mod udf;
mod visibility;

pub use grid::{read_grid_dump, FieldKind, GridDump, GridDumpKind, GridSpec, LabelGrid, ScalarGrid};
pub use marching_cubes::{marching_cubes, triangle_table, EDGES};
pub use remesh::{
    remesh_watertight, LabelingMode, RemeshConfig, RemeshResult, RemeshStats, StageTimings, REMESH_LEAF_SIZE,
};
pub use signed::synthesize_signed_grid;
pub use udf::compute_udf_grid;
pub use visibility::{compute_visibility_labels, exterior_flood_fill, visibility_label_at, VisibilityParams};
