use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{AssetSettings, Manifest, ManifestEntry};
use super::store::{self, ASSET_FILE, FIELD_FILE, MESH_FILE, REPORT_FILE, SAMPLES_FILE};
use crate::error::{Error, Result};
use crate::geom::{is_watertight, mesh_from_bytes, ply_bytes, TriangleMesh};
use crate::metrics::{chamfer, emd_exact, f_score, solid_voxels, volume_conservation, voxel_iou, MetricReport};
use crate::sampling::{derive_seed, sample_asset, surface_points};
use crate::watertight::{remesh_watertight, StageTimings};

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub workers: usize,
    pub resume: bool,
    /// Overrides the manifest's output directory.
    pub output_dir: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            resume: false,
            output_dir: None,
        }
    }
}

/// Mechanical flags for dataset filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterFlags {
    pub input_triangles: usize,
    pub input_boundary_edges: usize,
    pub input_components: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeStats {
    pub output_volume: f64,
    pub inside_fraction: f64,
    pub volume_ratio: f64,
}

/// Deterministic per-asset record, stored next to the payloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetRecord {
    pub asset_id: String,
    pub settings: AssetSettings,
    /// Absolute iso value the samples were labeled at.
    pub iso: f64,
    pub flags: FilterFlags,
    pub watertight: bool,
    pub output_triangles: usize,
    pub volume: VolumeStats,
    pub metrics: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum AssetStatus {
    Ok,
    Skipped,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetReport {
    pub asset_id: String,
    pub status: AssetStatus,
    pub timings: Option<StageTimings>,
    /// Sampling, metrics and writing, after the remesh stages.
    pub post_remesh: Option<Duration>,
    pub elapsed: Duration,
    pub record: Option<AssetRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub ok: usize,
    pub skipped: usize,
    pub failed: usize,
    pub elapsed: Duration,
    pub output_dir: PathBuf,
    pub reports: Vec<AssetReport>,
}

impl RunSummary {
    pub fn success(&self) -> bool {
        self.failed == 0
    }
}

/// Runs every entry through remesh, sampling and metrics, writing one
/// directory per asset. With `resume`, entries whose outputs are present with
/// matching checksums are skipped. Per-asset failures are reported, never
/// fatal.
pub fn run(manifest: &Manifest, opts: &RunOptions) -> Result<RunSummary> {
    let start = Instant::now();
    let out = opts
        .output_dir
        .clone()
        .or_else(|| manifest.global.output_dir.clone())
        .ok_or_else(|| Error::invalid("no output directory given"))?;
    if opts.workers == 0 {
        return Err(Error::invalid("workers must be at least 1"));
    }
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    store::clear_staging(&out)?;
    let settings: Vec<AssetSettings> = manifest.entries.iter().map(|e| manifest.settings(e)).collect::<Result<_>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    let budget = Duration::from_secs_f64(manifest.global.budget_secs);
    let reports: Vec<AssetReport> = pool.install(|| {
        manifest
            .entries
            .par_iter()
            .zip(&settings)
            .with_max_len(1)
            .map(|(entry, s)| {
                let r = process_entry(entry, s, &out, opts.resume, budget, manifest.global.seed);
                match &r.status {
                    AssetStatus::Failed(reason) => log::warn!("{}: failed: {reason}", r.asset_id),
                    status => log::info!("{}: {status:?} in {:.2?}", r.asset_id, r.elapsed),
                }
                r
            })
            .collect()
    });
    let count = |f: fn(&AssetStatus) -> bool| reports.iter().filter(|r| f(&r.status)).count();
    let summary = RunSummary {
        ok: count(|s| matches!(s, AssetStatus::Ok)),
        skipped: count(|s| matches!(s, AssetStatus::Skipped)),
        failed: count(|s| matches!(s, AssetStatus::Failed(_))),
        elapsed: start.elapsed(),
        output_dir: out.clone(),
        reports,
    };
    write_index(&out, manifest)?;
    let json = serde_json::to_vec_pretty(&summary).expect("serializable");
    store::write_atomic(&out.join("run_report.json"), &json)?;
    Ok(summary)
}

/// `index.json`: checksums of every completed asset, keyed by id.
fn write_index(out: &Path, manifest: &Manifest) -> Result<()> {
    let mut index = BTreeMap::new();
    for e in &manifest.entries {
        if let Ok(c) = store::read_checksums(&out.join(&e.asset_id)) {
            index.insert(e.asset_id.clone(), c);
        }
    }
    let json = serde_json::to_vec_pretty(&index).expect("serializable");
    store::write_atomic(&out.join("index.json"), &json)
}

fn process_entry(
    entry: &ManifestEntry,
    settings: &AssetSettings,
    out: &Path,
    resume: bool,
    budget: Duration,
    seed: u64,
) -> AssetReport {
    let start = Instant::now();
    let mut report = AssetReport {
        asset_id: entry.asset_id.clone(),
        status: AssetStatus::Ok,
        timings: None,
        post_remesh: None,
        elapsed: Duration::ZERO,
        record: None,
    };
    let result = (|| -> Result<()> {
        let input = fs::read(&entry.input_path).map_err(|e| Error::io(&entry.input_path, e))?;
        let fingerprint = store::fingerprint(&input, settings);
        let dir = out.join(&entry.asset_id);
        if resume && store::verify(&dir, fingerprint).is_ok() {
            report.status = AssetStatus::Skipped;
            report.record = store::read_record(&dir).ok();
            return Ok(());
        }
        let mesh = mesh_from_bytes(&input, &entry.input_path)?;
        let files = produce(&entry.asset_id, &mesh, settings, seed, start, budget, &mut report)?;
        store::commit(out, &entry.asset_id, fingerprint, &files)?;
        Ok(())
    })();
    if let Err(e) = result {
        report.status = AssetStatus::Failed(e.to_string());
        report.record = None;
        // outputs of an earlier run no longer describe this entry
        let _ = fs::remove_dir_all(out.join(&entry.asset_id));
    }
    report.elapsed = start.elapsed();
    if let Some(r) = report.record.as_ref().filter(|_| report.status == AssetStatus::Ok) {
        let json = serde_json::to_vec_pretty(&report).expect("serializable");
        let path = out.join(&r.asset_id).join(REPORT_FILE);
        if let Err(e) = store::write_atomic(&path, &json) {
            report.status = AssetStatus::Failed(e.to_string());
        }
    }
    report
}

fn over_budget(start: Instant, budget: Duration) -> Result<()> {
    if start.elapsed() > budget {
        return Err(Error::Budget(budget));
    }
    Ok(())
}

/// Computes every output file of one asset in memory.
fn produce(
    asset_id: &str,
    mesh: &TriangleMesh,
    settings: &AssetSettings,
    seed: u64,
    start: Instant,
    budget: Duration,
    report: &mut AssetReport,
) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let input_check = is_watertight(mesh);
    let flags = FilterFlags {
        input_triangles: mesh.triangles().len(),
        input_boundary_edges: input_check.boundary_edges,
        input_components: mesh.component_count(),
    };
    let result = remesh_watertight(mesh, &settings.remesh)?;
    report.timings = Some(result.stats.timings);
    over_budget(start, budget)?;
    let post = Instant::now();

    let iso = settings.remesh.iso_level * result.signed_grid.spacing();
    let samples = sample_asset(asset_id, &result.mesh, &result.signed_grid, &result.label_grid, &settings.sampling, iso)?;
    over_budget(start, budget)?;

    let normalized_input = mesh.map_vertices(|p| result.transform.apply(p));
    let mut params = settings.metrics;
    params.seed = derive_seed(seed, asset_id, "metrics");
    let a = surface_points(&normalized_input, params.points, params.seed)?;
    let b = surface_points(&result.mesh, params.points, params.seed ^ 1)?;
    let emd = match params.emd_points {
        0 => None,
        n => {
            let ea = surface_points(&normalized_input, n, params.seed ^ 2)?;
            let eb = surface_points(&result.mesh, n, params.seed ^ 3)?;
            Some(emd_exact(&ea.points, &eb.points)?)
        }
    };
    let volume_ratio = volume_conservation(mesh, &result)?;
    let metrics = MetricReport {
        cd: chamfer(&a.points, &b.points)?,
        emd,
        voxel_iou: voxel_iou(&solid_voxels(&normalized_input, samples.voxels.res), &samples.voxels)?,
        f_score: f_score(&a.points, &b.points, params.fscore_d)?,
        volume_ratio: Some(volume_ratio),
        params,
    };
    over_budget(start, budget)?;

    let record = AssetRecord {
        asset_id: asset_id.to_string(),
        settings: settings.clone(),
        iso,
        flags,
        watertight: is_watertight(&result.mesh).watertight,
        output_triangles: result.mesh.triangles().len(),
        volume: VolumeStats {
            output_volume: result.stats.output_volume,
            inside_fraction: result.stats.inside_fraction,
            volume_ratio,
        },
        metrics,
    };
    let mut field = Vec::new();
    result.signed_grid.write_dump(&mut field).expect("writing to memory");
    let files = vec![
        (MESH_FILE, ply_bytes(&result.mesh)),
        (SAMPLES_FILE, samples.to_occs().to_bytes()),
        (FIELD_FILE, field),
        (ASSET_FILE, serde_json::to_vec_pretty(&record).expect("serializable")),
    ];
    report.record = Some(record);
    report.post_remesh = Some(post.elapsed());
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{validate, write_synthetic_corpus};
    use crate::sampling::SamplingSpec;
    use crate::watertight::RemeshConfig;

    fn small_manifest(dir: &Path, n: usize) -> Manifest {
        let mut m = write_synthetic_corpus(dir, n, 11).unwrap();
        m.global.defaults.remesh = RemeshConfig {
            grid_res: 40,
            directions: 16,
            ..RemeshConfig::default()
        };
        m.global.defaults.sampling = SamplingSpec {
            surface_sizes: vec![512],
            uniform_queries: 256,
            near_queries: 256,
            ..SamplingSpec::default()
        };
        m.global.defaults.metrics.points = 512;
        m
    }

    #[test]
    fn run_resume_and_failures() {
        let tmp = tempfile::tempdir().unwrap();
        let mut m = small_manifest(&tmp.path().join("in"), 3);
        m.entries.push(ManifestEntry {
            asset_id: "broken".into(),
            input_path: tmp.path().join("does_not_exist.obj"),
            overrides: Default::default(),
        });
        let out = tmp.path().join("out");
        let opts = RunOptions {
            output_dir: Some(out.clone()),
            ..RunOptions::default()
        };
        let s = run(&m, &opts).unwrap();
        assert_eq!((s.ok, s.skipped, s.failed), (3, 0, 1));
        assert!(!s.success());
        assert!(!out.join("broken").exists());
        let r = s.reports[0].record.as_ref().unwrap();
        assert!(r.watertight);
        assert!(r.metrics.voxel_iou > 0.3, "{}", r.metrics.voxel_iou);

        let again = run(&m, &RunOptions { resume: true, ..opts.clone() }).unwrap();
        assert_eq!((again.ok, again.skipped, again.failed), (0, 3, 1));
        assert_eq!(again.reports[1].record, s.reports[1].record);

        // a changed setting invalidates the stored outputs
        let mut m2 = m.clone();
        m2.global.defaults.remesh.directions = 17;
        let third = run(&m2, &RunOptions { resume: true, ..opts.clone() }).unwrap();
        assert_eq!(third.ok, 3);

        let v = validate(&out).unwrap();
        assert_eq!(v.assets.len(), 3);
        assert!(v.assets.iter().all(|a| a.ok()), "{v:#?}");
    }

    #[test]
    fn worker_count_does_not_change_outputs() {
        let tmp = tempfile::tempdir().unwrap();
        let m = small_manifest(&tmp.path().join("in"), 4);
        let mut sums = Vec::new();
        for workers in [1, 3] {
            let out = tmp.path().join(format!("out{workers}"));
            let s = run(&m, &RunOptions { workers, output_dir: Some(out.clone()), ..RunOptions::default() }).unwrap();
            assert!(s.success());
            sums.push(std::fs::read(out.join("index.json")).unwrap());
        }
        assert_eq!(sums[0], sums[1]);
    }
}
