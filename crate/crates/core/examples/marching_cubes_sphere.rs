//! Isosurface extraction from an analytic signed field, compared with the
//! exact sphere.

use std::f64::consts::PI;

use geoforge::geom::{is_watertight, mesh_volume};
use geoforge::watertight::{marching_cubes, FieldKind, GridSpec, ScalarGrid};

fn main() -> geoforge::Result<()> {
    let r = 0.6;
    for res in [17, 33, 65] {
        let grid = ScalarGrid::from_fn(GridSpec::new(res)?, FieldKind::Signed, |p| p.coords.norm() - r)?;
        let mesh = marching_cubes(&grid, 0.0);
        let area = mesh.surface_area() / (4.0 * PI * r * r) - 1.0;
        let volume = mesh_volume(&mesh) / (4.0 / 3.0 * PI * r * r * r) - 1.0;
        println!(
            "R={res:3}: {:6} triangles, watertight {}, area error {:+.3}%, volume error {:+.3}%",
            mesh.triangles().len(),
            is_watertight(&mesh).watertight,
            100.0 * area,
            100.0 * volume
        );
    }
    Ok(())
}
