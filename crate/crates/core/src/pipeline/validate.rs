use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::store::{self, Checksums, ASSET_FILE, CHECKSUM_FILE, DATA_FILES, FIELD_FILE, MESH_FILE, SAMPLES_FILE};
use crate::geom::{is_watertight, load_mesh};
use crate::sampling::{OccsFile, SectionKind, PARTIAL_POINTS, SPARSE_POINTS, VOXEL_RES};
use crate::watertight::{read_grid_dump, GridDump, ScalarGrid};

/// Field values closer than this to the iso level are too close to call
/// after the `f32` round trip.
pub const LABEL_BAND: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetValidation {
    pub asset_id: String,
    pub checks: Vec<Check>,
}

impl AssetValidation {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub output_dir: PathBuf,
    pub assets: Vec<AssetValidation>,
    /// Ids listed in the index whose directory is gone.
    pub missing: Vec<String>,
    pub ok: bool,
}

impl ValidationReport {
    pub fn asset(&self, id: &str) -> Option<&AssetValidation> {
        self.assets.iter().find(|a| a.asset_id == id)
    }
}

struct Checks(Vec<Check>);

impl Checks {
    fn push(&mut self, name: &str, result: std::result::Result<String, String>) -> bool {
        let ok = result.is_ok();
        let detail = result.unwrap_or_else(|e| e);
        self.0.push(Check {
            name: name.to_string(),
            ok,
            detail,
        });
        ok
    }
}

/// Re-checks every asset directory under `out`: files and checksums, mesh
/// watertightness, payload lengths, and query labels against the stored
/// field. Problems are reported per asset, never raised.
pub fn validate(out: &Path) -> crate::Result<ValidationReport> {
    let mut ids: Vec<String> = Vec::new();
    let entries = fs::read_dir(out).map_err(|e| crate::Error::io(out, e))?;
    for e in entries.flatten() {
        let name = e.file_name().to_string_lossy().into_owned();
        if e.path().is_dir() && !name.starts_with('.') {
            ids.push(name);
        }
    }
    ids.sort();
    let mut missing = Vec::new();
    if let Ok(bytes) = fs::read(out.join("index.json")) {
        if let Ok(index) = serde_json::from_slice::<std::collections::BTreeMap<String, Checksums>>(&bytes) {
            missing = index.keys().filter(|k| !ids.contains(k)).cloned().collect();
        }
    }
    let assets: Vec<AssetValidation> = ids.iter().map(|id| validate_asset(&out.join(id), id)).collect();
    let ok = missing.is_empty() && assets.iter().all(AssetValidation::ok);
    Ok(ValidationReport {
        output_dir: out.to_path_buf(),
        assets,
        missing,
        ok,
    })
}

pub fn validate_asset(dir: &Path, asset_id: &str) -> AssetValidation {
    let mut c = Checks(Vec::new());
    let absent: Vec<&str> = DATA_FILES
        .iter()
        .chain(std::iter::once(&CHECKSUM_FILE))
        .copied()
        .filter(|f| !dir.join(f).is_file())
        .collect();
    c.push(
        "files_present",
        if absent.is_empty() { Ok(String::new()) } else { Err(format!("missing {}", absent.join(", "))) },
    );
    c.push(
        "checksums",
        match store::read_checksums(dir) {
            Ok(sums) => {
                let bad = store::mismatched_files(dir, &sums);
                if bad.is_empty() {
                    Ok(format!("{} files", sums.files.len()))
                } else {
                    Err(format!("mismatch: {}", bad.join(", ")))
                }
            }
            Err(e) => Err(e.to_string()),
        },
    );
    c.push(
        "watertight",
        match load_mesh(dir.join(MESH_FILE)) {
            Ok(m) => {
                let w = is_watertight(&m);
                if w.watertight {
                    Ok(format!("{} triangles", m.triangles().len()))
                } else {
                    Err(format!("{w:?}"))
                }
            }
            Err(e) => Err(e.to_string()),
        },
    );
    let occs = fs::read(dir.join(SAMPLES_FILE))
        .map_err(|e| e.to_string())
        .and_then(|b| OccsFile::from_bytes(&b).map_err(|e| e.to_string()));
    c.push(
        "payload_lengths",
        occs.as_ref().map_err(Clone::clone).and_then(|f| payload_lengths(f)),
    );
    let field = fs::File::open(dir.join(FIELD_FILE))
        .map_err(|e| e.to_string())
        .and_then(|f| read_grid_dump(std::io::BufReader::new(f)).map_err(|e| e.to_string()))
        .and_then(|d| match d {
            GridDump::Field(g) => Ok(g),
            GridDump::Labels(_) => Err("field file holds labels".to_string()),
        });
    let iso = store::read_record(dir).map(|r| r.iso).map_err(|e| e.to_string());
    c.push(
        "label_consistency",
        match (&occs, &field, &iso) {
            (Ok(f), Ok(g), Ok(iso)) => label_consistency(f, g, *iso),
            (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => Err(e.clone()),
        },
    );
    if iso.is_err() {
        c.push("record", Err(format!("unreadable {ASSET_FILE}")));
    }
    AssetValidation {
        asset_id: asset_id.to_string(),
        checks: c.0,
    }
}

fn payload_lengths(f: &OccsFile) -> std::result::Result<String, String> {
    let count = |k: SectionKind| f.sections_of(k).count();
    let surfaces: Vec<u32> = f.sections_of(SectionKind::Surface).map(|s| s.count).collect();
    let downs: Vec<u32> = f.sections_of(SectionKind::Downsample).map(|s| s.count).collect();
    if surfaces.is_empty() || surfaces.len() != downs.len() {
        return Err(format!("{} surface vs {} downsample sections", surfaces.len(), downs.len()));
    }
    for (n, k) in surfaces.iter().zip(&downs) {
        if n % 4 != 0 || n / 4 != *k {
            return Err(format!("surface {n} with downsample {k}"));
        }
    }
    let one = |k: SectionKind, want: Option<u32>| -> std::result::Result<u32, String> {
        if count(k) != 1 {
            return Err(format!("{} {k:?} sections", count(k)));
        }
        let got = f.section(k).expect("counted").count;
        match want {
            Some(w) if w != got => Err(format!("{k:?} holds {got}, expected {w}")),
            _ => Ok(got),
        }
    };
    let q = one(SectionKind::Queries, None)?;
    one(SectionKind::Labels, Some(q))?;
    one(SectionKind::NearFlags, Some(q))?;
    one(SectionKind::Voxel16, Some((VOXEL_RES * VOXEL_RES * VOXEL_RES) as u32))?;
    one(SectionKind::Bbox8, Some(8))?;
    one(SectionKind::Sparse512, Some(SPARSE_POINTS as u32))?;
    one(SectionKind::Partial, Some(PARTIAL_POINTS as u32 + 8))?;
    Ok(format!("surfaces {surfaces:?}, downsamples {downs:?}, queries {q}"))
}

fn label_consistency(f: &OccsFile, field: &ScalarGrid, iso: f64) -> std::result::Result<String, String> {
    let queries = f
        .section(SectionKind::Queries)
        .ok_or("no queries")?
        .as_points()
        .map_err(|e| e.to_string())?;
    let labels = &f.section(SectionKind::Labels).ok_or("no labels")?.data;
    if labels.len() != queries.len() {
        return Err("label count differs from query count".into());
    }
    let (mut checked, mut ambiguous) = (0usize, 0usize);
    for (i, (q, &l)) in queries.iter().zip(labels).enumerate() {
        if l > 1 {
            return Err(format!("query {i}: label byte {l}"));
        }
        let p = Point3::new(q.x as f64, q.y as f64, q.z as f64);
        let v = field.sample(&p);
        if (v - iso).abs() <= LABEL_BAND {
            ambiguous += 1;
            continue;
        }
        checked += 1;
        if u8::from(v < iso) != l {
            return Err(format!("query {i} at {p}: label {l} but field {v:.3e} vs iso {iso:.3e}"));
        }
    }
    Ok(format!("{checked} checked, {ambiguous} within the band"))
}
