//! Reconstruction metrics between a sphere and a slightly squashed copy.

use geoforge::geom::shapes;
use geoforge::metrics::{chamfer, compare_meshes, emd_exact, f_score, MetricParams};
use geoforge::sampling::surface_points;
use nalgebra::Vector3;

fn main() -> geoforge::Result<()> {
    let a = shapes::icosphere(0.5, 3);
    let b = shapes::ellipsoid(Vector3::new(0.5, 0.5, 0.45), 3);

    let report = compare_meshes(
        &a,
        &b,
        &MetricParams {
            emd_points: 512,
            ..MetricParams::default()
        },
    )?;
    println!("{}", report.to_kv());

    // the same quantities on raw clouds
    let pa = surface_points(&a, 1024, 1)?.points;
    let pb = surface_points(&b, 1024, 2)?.points;
    println!("cloud cd {:.3e}", chamfer(&pa, &pb)?);
    for d in [0.01, 0.02, 0.05] {
        println!("cloud f-score @ {d}: {:.4}", f_score(&pa, &pb, d)?);
    }
    println!("cloud emd {:.4e}", emd_exact(&pa[..256], &pb[..256])?);
    Ok(())
}
