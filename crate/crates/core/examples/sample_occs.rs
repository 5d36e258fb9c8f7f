//! Remeshes a torus, samples every payload and round-trips the OCCS file.

use geoforge::geom::shapes;
use geoforge::sampling::{sample_asset, OccsFile, SamplingSpec};
use geoforge::watertight::{remesh_watertight, RemeshConfig};

fn main() -> geoforge::Result<()> {
    let cfg = RemeshConfig {
        grid_res: 96,
        ..RemeshConfig::default()
    };
    let r = remesh_watertight(&shapes::torus(0.5, 0.2, 32, 16), &cfg)?;
    let spec = SamplingSpec {
        surface_sizes: vec![2048, 8192],
        seed: 42,
        ..SamplingSpec::default()
    };
    let iso = cfg.iso_level * r.signed_grid.spacing();
    let samples = sample_asset("torus", &r.mesh, &r.signed_grid, &r.label_grid, &spec, iso)?;

    let inside = samples.queries.labels.iter().filter(|&&l| l == 1).count();
    println!("queries: {} ({} inside)", samples.queries.len(), inside);

    let bytes = samples.to_occs().to_bytes();
    let file = OccsFile::from_bytes(&bytes)?;
    println!("OCCS: {} bytes, asset hash {:016x}", bytes.len(), file.asset_hash);
    for s in &file.sections {
        println!("  {:?}: {} elements, {} bytes", s.kind, s.count, s.data.len());
    }
    assert_eq!(file, samples.to_occs());
    Ok(())
}
