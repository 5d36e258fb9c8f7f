//! The remesher's intermediate grids: the unsigned distance field,
//! ray-visibility labels and the flood-fill alternative, for a box with a
//! missing lid and a box with thin slits in its lid.

use geoforge::accel::TriangleBvh;
use geoforge::geom::{normalize_mesh, shapes, DEFAULT_MARGIN};
use geoforge::watertight::{compute_udf_grid, compute_visibility_labels, exterior_flood_fill, GridSpec, VisibilityParams};
use nalgebra::Point3;

fn main() -> geoforge::Result<()> {
    let open = shapes::open_top_box(Point3::new(-0.5, -0.5, -0.5), Point3::new(0.5, 0.5, 0.3));
    for (name, mesh) in [("open top", open), ("slit lid", shapes::slit_box(0.5, 3, 0.004, 0.3))] {
        println!("{name}:");
        grids(&mesh)?;
    }
    Ok(())
}

fn grids(mesh: &geoforge::geom::TriangleMesh) -> geoforge::Result<()> {
    let (mesh, _) = normalize_mesh(mesh, DEFAULT_MARGIN)?;
    let bvh = TriangleBvh::build(&mesh, 4);
    let spec = GridSpec::new(64)?;

    let udf = compute_udf_grid(&bvh, spec);
    println!("  udf: h = {:.5}, range [{:.4}, {:.4}]", spec.spacing(), udf.min_value(), udf.max_value());

    for directions in [16, 64] {
        let params = VisibilityParams {
            directions,
            ..VisibilityParams::default()
        };
        let labels = compute_visibility_labels(&bvh, spec, &params)?;
        println!("  ray labels, {directions} directions: inside fraction {:.4}", labels.inside_fraction());
    }

    // points within half a voxel of the surface block the fill
    let flood = exterior_flood_fill(&udf, 0.5);
    println!("  flood fill: inside fraction {:.4}", flood.inside_fraction());
    Ok(())
}
