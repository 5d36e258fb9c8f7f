//! Mesh representation, loading, normalization and exact mesh measurements.

mod io;
mod mesh;
pub mod shapes;

pub use io::{load_mesh, mesh_from_bytes, obj_bytes, parse_obj, parse_ply, ply_bytes, write_mesh, write_obj, write_ply};
pub use mesh::{
    is_watertight, mesh_volume, normalize_mesh, Aabb, NormalizationTransform, TriangleMesh,
    WatertightReport, DEFAULT_MARGIN, DEGENERATE_AREA,
};
