//! Closes a box with slits in its lid and writes the result next to the
//! input in the system temp dir.

use geoforge::geom::{is_watertight, mesh_volume, shapes, write_obj};
use geoforge::watertight::{remesh_watertight, RemeshConfig};

fn main() -> geoforge::Result<()> {
    let input = shapes::slit_box(0.5, 3, 0.004, 0.3);
    let report = is_watertight(&input);
    println!("input: {} triangles, {} boundary edges", input.triangles().len(), report.boundary_edges);

    let cfg = RemeshConfig {
        grid_res: 128,
        ..RemeshConfig::default()
    };
    let r = remesh_watertight(&input, &cfg)?;
    println!(
        "output: {} triangles, watertight {}, volume {:.4}, inside fraction {:.3}",
        r.mesh.triangles().len(),
        is_watertight(&r.mesh).watertight,
        mesh_volume(&r.mesh),
        r.stats.inside_fraction
    );
    println!("timings: {:?}", r.stats.timings);

    let dir = std::env::temp_dir();
    write_obj(&input, dir.join("slit_box_in.obj"))?;
    // back into the input's coordinates
    let out = r.mesh.map_vertices(|p| r.transform.inverse(p));
    write_obj(&out, dir.join("slit_box_out.obj"))?;
    println!("wrote {}", dir.join("slit_box_out.obj").display());
    Ok(())
}
