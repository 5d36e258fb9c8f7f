use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64;

use super::manifest::AssetSettings;
use super::run::AssetRecord;
use crate::error::{Error, Result};

pub const MESH_FILE: &str = "mesh.ply";
pub const SAMPLES_FILE: &str = "samples.occs";
pub const FIELD_FILE: &str = "field.clgd";
pub const ASSET_FILE: &str = "asset.json";
pub const CHECKSUM_FILE: &str = "checksums.json";
/// Run-specific report with timings; not checksummed.
pub const REPORT_FILE: &str = "report.json";
/// Files every completed asset directory holds, all checksummed.
pub const DATA_FILES: [&str; 4] = [MESH_FILE, SAMPLES_FILE, FIELD_FILE, ASSET_FILE];
const STAGING: &str = ".staging";

/// 64-bit content hashes, hex encoded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checksums {
    /// Hash of the input bytes and the resolved settings.
    pub fingerprint: String,
    pub files: BTreeMap<String, String>,
}

pub fn hash_hex(bytes: &[u8]) -> String {
    format!("{:016x}", xxh3_64(bytes))
}

pub fn fingerprint(input: &[u8], settings: &AssetSettings) -> u64 {
    let mut buf = Vec::with_capacity(input.len() + 512);
    buf.extend_from_slice(env!("CARGO_PKG_VERSION").as_bytes());
    buf.push(0);
    buf.extend_from_slice(&serde_json::to_vec(settings).expect("serializable"));
    buf.push(0);
    buf.extend_from_slice(input);
    xxh3_64(&buf)
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Removes leftovers of interrupted commits.
pub fn clear_staging(out: &Path) -> Result<()> {
    let staging = out.join(STAGING);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    Ok(())
}

/// Writes `files` plus their checksums into a staging directory, then swaps
/// it in for `out/asset_id` with one rename.
pub fn commit(out: &Path, asset_id: &str, fingerprint: u64, files: &[(&str, Vec<u8>)]) -> Result<()> {
    let stage = out.join(STAGING).join(asset_id);
    let io = |p: &PathBuf| {
        let p = p.clone();
        move |e| Error::io(p, e)
    };
    if stage.exists() {
        fs::remove_dir_all(&stage).map_err(io(&stage))?;
    }
    fs::create_dir_all(&stage).map_err(io(&stage))?;
    let result = (|| {
        let mut sums = BTreeMap::new();
        for (name, bytes) in files {
            write_atomic(&stage.join(name), bytes)?;
            sums.insert(name.to_string(), hash_hex(bytes));
        }
        let checksums = Checksums {
            fingerprint: format!("{fingerprint:016x}"),
            files: sums,
        };
        write_atomic(&stage.join(CHECKSUM_FILE), &serde_json::to_vec_pretty(&checksums).expect("serializable"))?;
        let dest = out.join(asset_id);
        if dest.exists() {
            fs::remove_dir_all(&dest).map_err(io(&dest))?;
        }
        fs::rename(&stage, &dest).map_err(io(&dest))
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&stage);
    }
    result
}

pub fn read_checksums(dir: &Path) -> Result<Checksums> {
    let path = dir.join(CHECKSUM_FILE);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
        format: "checksums",
        msg: e.to_string(),
    })
}

pub fn read_record(dir: &Path) -> Result<AssetRecord> {
    let path = dir.join(ASSET_FILE);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Parse {
        format: "asset record",
        msg: e.to_string(),
    })
}

/// Names of files whose content no longer matches the recorded checksum, or
/// that are missing.
pub fn mismatched_files(dir: &Path, sums: &Checksums) -> Vec<String> {
    let mut bad = Vec::new();
    for name in DATA_FILES {
        match (sums.files.get(name), fs::read(dir.join(name))) {
            (Some(h), Ok(bytes)) if *h == hash_hex(&bytes) => {}
            _ => bad.push(name.to_string()),
        }
    }
    bad
}

/// Succeeds iff `dir` holds a complete output set for `fingerprint`.
pub fn verify(dir: &Path, fingerprint: u64) -> Result<()> {
    let sums = read_checksums(dir)?;
    if sums.fingerprint != format!("{fingerprint:016x}") {
        return Err(Error::invalid("inputs or settings changed"));
    }
    let bad = mismatched_files(dir, &sums);
    if !bad.is_empty() {
        return Err(Error::invalid(format!("checksum mismatch: {}", bad.join(", "))));
    }
    Ok(())
}
