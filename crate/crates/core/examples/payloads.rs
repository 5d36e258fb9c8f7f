//! Conditioning payloads for one mesh: voxels, box corners, a sparse cloud
//! and a cropped partial cloud.

use geoforge::geom::{normalize_mesh, shapes, Aabb, DEFAULT_MARGIN};
use geoforge::sampling::{bbox_corners, make_partial, sparse_cloud, voxelize16};
use nalgebra::Point3;

fn main() -> geoforge::Result<()> {
    let (mesh, _) = normalize_mesh(&shapes::cylinder(0.3, 0.5, 32), DEFAULT_MARGIN)?;

    // surface cells only; the pipeline adds interior cells from its labels
    let v = voxelize16(&mesh, None);
    println!("voxels: {} of {} occupied", v.count(), v.res.pow(3));
    for k in (0..v.res).step_by(5) {
        let row: String = (0..v.res).map(|i| if v.occupied[v.index(i, v.res / 2, k)] { '#' } else { '.' }).collect();
        println!("  {row}");
    }

    let corners = bbox_corners(&mesh)?;
    println!("bbox: {} to {}", corners[0], corners[7]);

    let sparse = sparse_cloud(&mesh, 1)?;
    println!("sparse: {} points", sparse.len());

    let crop = Aabb::new(Point3::new(-1.0, -1.0, -1.0), Point3::new(0.0, 1.0, 1.0));
    let partial = make_partial(&mesh, &crop, 1)?;
    let min_x = partial.points.iter().map(|p| p.x).fold(f64::MAX, f64::min);
    println!("partial: {} points with x >= {min_x:.4}, plus the crop corners", partial.points.len());

    let all = Aabb::new(Point3::new(-1.0, -1.0, -1.0), Point3::new(1.0, 1.0, 1.0));
    match make_partial(&mesh, &all, 1) {
        Err(e) => println!("full crop rejected: {e}"),
        Ok(_) => println!("full crop accepted"),
    }
    Ok(())
}
