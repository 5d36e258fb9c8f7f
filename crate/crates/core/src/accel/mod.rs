//! Triangle BVH with exact closest-point queries and ray escape probes.

mod bvh;
mod probe;

pub use bvh::{closest_on_triangle, ClosestHit, NodeView, TriangleBvh, DEFAULT_T_MIN};
pub use probe::{fibonacci_directions, hit_depth, hits_beyond, DirectionalCaster, ProbeFrame};
