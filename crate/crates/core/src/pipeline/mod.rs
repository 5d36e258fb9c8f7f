//! Manifest-driven batch processing: remesh, sample and score every asset,
//! write checksummed outputs, resume after interruption, and validate what
//! was written.

mod manifest;
mod run;
mod store;
mod validate;

use std::path::Path;

use nalgebra::{Point3, Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use manifest::{check_asset_id, AssetSettings, Defaults, GlobalSettings, Manifest, ManifestEntry, Overrides, DEFAULT_BUDGET_SECS};
pub use run::{run, AssetRecord, AssetReport, AssetStatus, FilterFlags, RunOptions, RunSummary, VolumeStats};
pub use store::{
    hash_hex, read_checksums, write_atomic, Checksums, ASSET_FILE, CHECKSUM_FILE, DATA_FILES, FIELD_FILE, MESH_FILE,
    REPORT_FILE, SAMPLES_FILE,
};
pub use validate::{validate, validate_asset, AssetValidation, Check, ValidationReport, LABEL_BAND};

use crate::error::{Error, Result};
use crate::geom::{shapes, write_obj, TriangleMesh};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "GEOFORGE_WORKERS";

/// Small procedural mesh number `i` of a seeded family: closed solids of
/// several kinds plus slotted open boxes, randomly rotated, scaled and moved.
pub fn synthetic_mesh(i: usize, seed: u64) -> TriangleMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let base = match i % 8 {
        0 => shapes::icosphere(0.5, 2),
        1 => shapes::torus(0.5, rng.gen_range(0.12..0.25), 24, 12),
        2 => shapes::cylinder(rng.gen_range(0.2..0.4), 0.5, 24),
        3 => shapes::box_mesh(Point3::new(-0.5, -0.3, -0.2), Point3::new(0.5, 0.3, 0.2)),
        4 => shapes::l_prism(1.0, rng.gen_range(0.2..0.4), 0.5),
        5 => shapes::ellipsoid(Vector3::new(0.5, rng.gen_range(0.2..0.45), 0.3), 2),
        6 => {
            let star: Vec<(f64, f64)> = (0..10)
                .map(|k| {
                    let a = std::f64::consts::TAU * k as f64 / 10.0;
                    let r = if k % 2 == 0 { 0.5 } else { 0.22 };
                    (r * a.cos(), r * a.sin())
                })
                .collect();
            shapes::extrude(&star, -0.15, 0.15)
        }
        _ => shapes::slit_box(0.5, 2, 0.004, 0.3),
    };
    let axis = Unit::new_normalize(Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.1..1.0)));
    let rot = Rotation3::from_axis_angle(&axis, rng.gen_range(0.0..std::f64::consts::TAU));
    let scale = rng.gen_range(0.5..3.0);
    let shift = Vector3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
    base.map_vertices(|p| Point3::from(rot * p.coords * scale + shift))
}

/// Writes `n` synthetic OBJ meshes into `dir` and returns a manifest for
/// them with relative paths resolved against `dir`.
pub fn write_synthetic_corpus(dir: &Path, n: usize, seed: u64) -> Result<Manifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        let name = format!("asset_{i:04}");
        let path = dir.join(format!("{name}.obj"));
        write_obj(&synthetic_mesh(i, seed), &path)?;
        entries.push(ManifestEntry {
            asset_id: name,
            input_path: path,
            overrides: Overrides::default(),
        });
    }
    Ok(Manifest {
        global: GlobalSettings {
            seed,
            ..GlobalSettings::default()
        },
        entries,
    })
}

/// Worker count from [`WORKERS_ENV`], else the number of available cores.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::is_watertight;

    #[test]
    fn synthetic_meshes_are_deterministic() {
        for i in 0..8 {
            let a = synthetic_mesh(i, 3);
            assert_eq!(a, synthetic_mesh(i, 3));
            assert!(!a.is_empty());
            // only the slotted box is open
            assert_eq!(is_watertight(&a).watertight, i % 8 != 7, "{i}");
        }
        assert_ne!(synthetic_mesh(0, 3), synthetic_mesh(0, 4));
    }
}
