//! Acceptance checks, one per criterion. Runs without the libtest harness so
//! every verdict line reaches the console:
//!
//! ```text
//! cargo test --test acceptance            # all
//! cargo test --test acceptance -- 3 7     # selected
//! ```

mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use common::*;
use geoforge::accel::TriangleBvh;
use geoforge::geom::{is_watertight, mesh_volume, normalize_mesh, shapes, TriangleMesh, DEFAULT_MARGIN};
use geoforge::metrics::{chamfer, emd_exact, f_score, voxel_iou};
use geoforge::pipeline::{
    self, read_checksums, run, synthetic_mesh, validate, write_synthetic_corpus, RunOptions, CHECKSUM_FILE, DATA_FILES,
};
use geoforge::sampling::{
    fps_downsample, sample_asset, surface_points, OccsFile, PointCloud, SamplingSpec, SectionKind, VoxelGrid,
    SURFACE_SIZES,
};
use geoforge::watertight::{
    compute_udf_grid, compute_visibility_labels, marching_cubes, remesh_watertight, FieldKind, GridSpec, RemeshConfig,
    ScalarGrid, VisibilityParams,
};
use nalgebra::{Point3, Vector3};

/// Wall-clock limits are stated for 8 cores; fewer cores stretch them.
fn scaled_limit(secs_on_8: f64) -> Duration {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get()).min(8);
    Duration::from_secs_f64(secs_on_8 * 8.0 / cores as f64)
}

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// Several sub-checks folded into one verdict.
#[derive(Default)]
struct Tally {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Tally {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if ok {
            self.notes.push(what);
        } else {
            self.failures.push(what);
        }
    }

    fn verdict(self) -> Verdict {
        if self.failures.is_empty() {
            Verdict::new(true, self.notes.join("; "))
        } else {
            Verdict::new(false, format!("failed: {}", self.failures.join("; ")))
        }
    }
}

fn sealing() -> Verdict {
    let mut t = Tally::default();
    let input = shapes::slit_box(0.5, 3, 0.005, 0.3);
    let w = is_watertight(&input);
    t.check(w.boundary_edges > 0, format!("input open ({} boundary edges)", w.boundary_edges));
    let cfg = RemeshConfig {
        grid_res: 128,
        directions: 64,
        escape_threshold: 0.0,
        ..RemeshConfig::default()
    };
    let start = Instant::now();
    let r = match remesh_watertight(&input, &cfg) {
        Ok(r) => r,
        Err(e) => return Verdict::new(false, format!("remesh failed: {e}")),
    };
    let elapsed = start.elapsed();
    t.check(is_watertight(&r.mesh).watertight, "output watertight");
    // closing the slots gives the unit cube, scaled into the normalized frame
    let sealed = r.transform.scale.powi(3);
    let ratio = mesh_volume(&r.mesh) / sealed;
    t.check(ratio >= 0.90, format!("volume / sealed volume {ratio:.4} (>= 0.90)"));
    let spec = r.label_grid.spec();
    let c = spec.index(64, 64, 64);
    t.check(r.label_grid.is_inside(c), "box center labeled inside");
    let limit = scaled_limit(30.0);
    t.check(elapsed < limit, format!("{:.1}s (limit {:.0}s)", elapsed.as_secs_f64(), limit.as_secs_f64()));
    t.verdict()
}

fn two_sided_surface_distance(a: &TriangleMesh, b: &TriangleMesh, n: usize) -> (f64, f64) {
    let ba = TriangleBvh::build(a, 4);
    let bb = TriangleBvh::build(b, 4);
    let sa = surface_points(a, n, 11).unwrap();
    let sb = surface_points(b, n, 12).unwrap();
    let d_ab: Vec<f64> = sa.points.iter().map(|p| bb.closest_point(p).unwrap().distance).collect();
    let d_ba: Vec<f64> = sb.points.iter().map(|p| ba.closest_point(p).unwrap().distance).collect();
    let mean = (d_ab.iter().sum::<f64>() + d_ba.iter().sum::<f64>()) / (2 * n) as f64;
    let max = d_ab.iter().chain(&d_ba).copied().fold(0.0, f64::max);
    (mean, max)
}

fn preservation() -> Verdict {
    let mut t = Tally::default();
    let input = shapes::icosphere(0.5, 4);
    let cfg = RemeshConfig {
        grid_res: 256,
        ..RemeshConfig::default()
    };
    let start = Instant::now();
    let r = match remesh_watertight(&input, &cfg) {
        Ok(r) => r,
        Err(e) => return Verdict::new(false, format!("remesh failed: {e}")),
    };
    let elapsed = start.elapsed();
    let h = r.signed_grid.spacing();
    t.check(is_watertight(&r.mesh).watertight, "output watertight");
    let normalized = input.map_vertices(|p| r.transform.apply(p));
    let a = surface_points(&normalized, 8192, 1).unwrap();
    let b = surface_points(&r.mesh, 8192, 2).unwrap();
    let cd = chamfer(&a.points, &b.points).unwrap();
    t.check(cd <= 1.5 * h, format!("chamfer {cd:.3e} (<= 1.5h = {:.3e})", 1.5 * h));
    // the same bound on actual point-to-surface distances
    let (mean, max) = two_sided_surface_distance(&normalized, &r.mesh, 8192);
    t.check(mean <= 1.5 * h, format!("mean surface distance {mean:.2e}, max {max:.2e}"));
    let dv = mesh_volume(&r.mesh) / mesh_volume(&normalized) - 1.0;
    t.check(dv.abs() <= 0.02, format!("volume change {:+.3}%", 100.0 * dv));
    let limit = scaled_limit(120.0);
    t.check(elapsed < limit, format!("{:.1}s (limit {:.0}s)", elapsed.as_secs_f64(), limit.as_secs_f64()));
    t.verdict()
}

fn udf_exactness() -> Verdict {
    let spec = GridSpec::new(32).unwrap();
    let mut worst = 0.0f64;
    for m in 0..10 {
        let mesh = random_soup(200, 1000 + m);
        let udf = compute_udf_grid(&TriangleBvh::build(&mesh, 4), spec);
        for idx in 0..spec.len() {
            let (i, j, k) = spec.coords(idx);
            let want = brute_udf(&mesh, &spec.point(i, j, k));
            worst = worst.max((udf.values()[idx] - want).abs());
        }
    }
    Verdict::new(
        worst <= 1e-9,
        format!("10 meshes x 200 triangles x 32^3 points, max |grid - brute force| {worst:.2e} (<= 1e-9)"),
    )
}

fn label_correctness() -> Verdict {
    let spec = GridSpec::new(64).unwrap();
    let h = spec.spacing();
    let params = VisibilityParams {
        directions: 64,
        tau: 0.0,
        ..VisibilityParams::default()
    };
    let meshes: Vec<TriangleMesh> = (0..16)
        .map(|i| synthetic_mesh(i, 21))
        .filter(|m| is_watertight(m).watertight)
        .take(10)
        .collect();
    let mut t = Tally::default();
    let (mut total, mut agree, mut outside_band) = (0usize, 0usize, 0usize);
    let mut worst = 1.0f64;
    for mesh in &meshes {
        let (mesh, _) = normalize_mesh(mesh, DEFAULT_MARGIN).unwrap();
        let labels = compute_visibility_labels(&TriangleBvh::build(&mesh, 4), spec, &params).unwrap();
        let mut ok = 0;
        for idx in 0..spec.len() {
            let (i, j, k) = spec.coords(idx);
            let p = spec.point(i, j, k);
            let inside = ray_winding(&mesh, &p) != 0;
            if inside == labels.is_inside(idx) {
                ok += 1;
            } else if brute_udf(&mesh, &p) >= h {
                outside_band += 1;
            }
        }
        worst = worst.min(ok as f64 / spec.len() as f64);
        total += spec.len();
        agree += ok;
    }
    t.check(meshes.len() == 10, format!("{} watertight meshes", meshes.len()));
    let rate = agree as f64 / total as f64;
    t.check(rate >= 0.995, format!("agreement {:.4}% overall, {:.4}% worst mesh (>= 99.5%)", 100.0 * rate, 100.0 * worst));
    t.check(outside_band == 0, format!("{} of {} disagreements outside |udf| < h", outside_band, total - agree));
    t.verdict()
}

fn marching_cubes_manifold() -> Verdict {
    let mut t = Tally::default();
    let spec = GridSpec::new(65).unwrap();
    let r = 0.5;
    let grid = ScalarGrid::from_fn(spec, FieldKind::Signed, |p| p.coords.norm() - r).unwrap();
    let sphere = marching_cubes(&grid, 0.0);
    t.check(is_watertight(&sphere).watertight, "sphere watertight");
    let da = sphere.surface_area() / (4.0 * PI * r * r) - 1.0;
    let dv = mesh_volume(&sphere) / (4.0 / 3.0 * PI * r.powi(3)) - 1.0;
    t.check(da.abs() <= 0.02, format!("area {:+.3}%", 100.0 * da));
    t.check(dv.abs() <= 0.02, format!("volume {:+.3}%", 100.0 * dv));

    let cube = ScalarGrid::from_fn(spec, FieldKind::Signed, |p| p.coords.amax() - 0.5).unwrap();
    let cube = marching_cubes(&cube, 0.0);
    let dv = mesh_volume(&cube) - 1.0;
    t.check(is_watertight(&cube).watertight && dv.abs() <= 0.02, format!("cube watertight, volume {:+.3}%", 100.0 * dv));

    // noise with a positive boundary hits every ambiguous case
    let mut open = 0;
    let n = 300;
    for seed in 0..n {
        let spec = GridSpec::new(6 + (seed as usize % 10)).unwrap();
        let noise = random_cloud(spec.len(), seed);
        let values = (0..spec.len())
            .map(|idx| {
                let (i, j, k) = spec.coords(idx);
                if spec.is_boundary(i, j, k) {
                    1.0
                } else {
                    noise[idx].x
                }
            })
            .collect();
        let mesh = marching_cubes(&ScalarGrid::new(spec, FieldKind::Signed, values).unwrap(), 0.0);
        open += usize::from(!is_watertight(&mesh).watertight);
    }
    t.check(open == 0, format!("{open} of {n} random fields not closed"));
    t.verdict()
}

fn sampling_contracts() -> Verdict {
    let mut t = Tally::default();
    let cfg = RemeshConfig {
        grid_res: 64,
        ..RemeshConfig::default()
    };
    let r = remesh_watertight(&shapes::torus(0.5, 0.2, 32, 16), &cfg).unwrap();
    t.check(is_watertight(&r.mesh).watertight, "remeshed torus watertight");
    let spec = SamplingSpec::default();
    let iso = cfg.iso_level * r.signed_grid.spacing();
    let samples = sample_asset("torus", &r.mesh, &r.signed_grid, &r.label_grid, &spec, iso).unwrap();
    let sizes: Vec<(usize, usize)> = samples.surfaces.iter().map(|(s, d)| (s.len(), d.len())).collect();
    t.check(
        sizes == vec![(2048, 512), (4096, 1024), (8192, 2048)] && SURFACE_SIZES == [2048, 4096, 8192],
        format!("surface/downsample sizes {sizes:?}"),
    );
    let file = OccsFile::from_bytes(&samples.to_occs().to_bytes()).unwrap();
    let count = |k| file.section(k).map(|s| (s.count, s.data.len()));
    let payloads = [
        (SectionKind::Voxel16, (4096, 512)),
        (SectionKind::Bbox8, (8, 96)),
        (SectionKind::Sparse512, (512, 512 * 12)),
        (SectionKind::Partial, (2056, 2056 * 12)),
    ];
    for (k, want) in payloads {
        t.check(count(k) == Some(want), format!("{k:?} {:?}", count(k).unwrap_or_default()));
    }

    let mut mismatched = 0;
    let cases = [(512, 128), (512, 512), (300, 75), (64, 64), (200, 50), (17, 5)];
    for (c, &(n, k)) in cases.iter().enumerate() {
        let pts = if c % 2 == 0 {
            random_cloud(n, c as u64)
        } else {
            surface_points(&r.mesh, n, c as u64).unwrap().points
        };
        let out = fps_downsample(&PointCloud::new(pts.clone()), k, c as u64).unwrap();
        let first = pts.iter().position(|p| *p == out.points[0]).unwrap();
        let want: Vec<Point3<f64>> = brute_fps(&pts, k, first).into_iter().map(|i| pts[i]).collect();
        mismatched += usize::from(out.points != want);
    }
    t.check(mismatched == 0, format!("FPS equals greedy brute force on {} instances, N <= 512", cases.len()));
    t.verdict()
}

fn metric_oracles() -> Verdict {
    let mut t = Tally::default();
    let (mut cd_err, mut f_err) = (0.0f64, 0.0f64);
    for s in 0..10 {
        let a = random_cloud(512, 2 * s);
        let b: Vec<Point3<f64>> = random_cloud(512, 2 * s + 1).iter().map(|p| p * 0.9).collect();
        cd_err = cd_err.max((chamfer(&a, &b).unwrap() - brute_chamfer(&a, &b)).abs());
        for d in [0.02, 0.05, 0.1, 0.2] {
            f_err = f_err.max((f_score(&a, &b, d).unwrap() - brute_f_score(&a, &b, d)).abs());
        }
    }
    t.check(cd_err <= 1e-12, format!("CD max error {cd_err:.1e}"));
    t.check(f_err <= 1e-12, format!("F-score max error {f_err:.1e}"));
    let mut emd_err = 0.0f64;
    for s in 0..10 {
        let a = random_cloud(64, 100 + s);
        let b: Vec<Point3<f64>> = random_cloud(64, 200 + s).iter().map(|p| p + Vector3::new(0.3, 0.0, 0.0)).collect();
        emd_err = emd_err.max((emd_exact(&a, &b).unwrap() - flow_emd(&a, &b)).abs());
    }
    t.check(emd_err <= 1e-9, format!("EMD vs min-cost flow max error {emd_err:.1e}"));

    let full = VoxelGrid {
        res: 16,
        occupied: vec![true; 4096],
    };
    let low = VoxelGrid {
        res: 16,
        occupied: (0..4096).map(|i| i < 2048).collect(),
    };
    let high = VoxelGrid {
        res: 16,
        occupied: (0..4096).map(|i| i >= 2048).collect(),
    };
    let ious = [
        voxel_iou(&full, &full).unwrap(),
        voxel_iou(&low, &high).unwrap(),
        voxel_iou(&low, &full).unwrap(),
    ];
    t.check(ious == [1.0, 0.0, 0.5], format!("IoU identities {ious:?}"));
    t.verdict()
}

fn data_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    DATA_FILES
        .iter()
        .chain(std::iter::once(&CHECKSUM_FILE))
        .map(|f| (f.to_string(), std::fs::read(dir.join(f)).unwrap_or_default()))
        .collect()
}

fn committed(out: &Path) -> usize {
    std::fs::read_dir(out)
        .map(|d| d.flatten().filter(|e| e.path().join(CHECKSUM_FILE).is_file()).count())
        .unwrap_or(0)
}

fn geoforge_run(manifest: &Path, out: &Path, workers: usize) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_geoforge"));
    c.args(["run", manifest.to_str().unwrap(), "--resume", "--out", out.to_str().unwrap()])
        .args(["--workers", &workers.to_string()])
        .env("RUST_LOG", "warn")
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit());
    c
}

fn pipeline_determinism() -> Verdict {
    const N: usize = 100;
    let mut t = Tally::default();
    let root = tempfile::tempdir().unwrap();
    let mut manifest = write_synthetic_corpus(&root.path().join("inputs"), N, 2024).unwrap();
    manifest.global.defaults.remesh.grid_res = 128;
    let manifest_path = root.path().join("manifest.jsonl");
    std::fs::write(&manifest_path, manifest.to_jsonl()).unwrap();
    let (dir_a, dir_b): (PathBuf, PathBuf) = (root.path().join("w1"), root.path().join("w8"));
    let start = Instant::now();

    let a = run(
        &manifest,
        &RunOptions {
            workers: 1,
            resume: false,
            output_dir: Some(dir_a.clone()),
        },
    )
    .unwrap();
    t.check(a.ok == N, format!("workers=1: {} ok in {:.0}s", a.ok, a.elapsed.as_secs_f64()));

    // workers=8 through the binary, killed part way
    let run_b = Instant::now();
    let mut child = geoforge_run(&manifest_path, &dir_b, 8).spawn().unwrap();
    let target = N / 3;
    while committed(&dir_b) < target {
        if child.try_wait().unwrap().is_some() {
            break;
        }
        std::thread::sleep(Duration::from_millis(50));
    }
    let killed = child.try_wait().unwrap().is_none();
    child.kill().ok();
    child.wait().unwrap();
    let before = committed(&dir_b);
    t.check(killed && before < N, format!("killed with {before} of {N} committed"));

    let out = geoforge_run(&manifest_path, &dir_b, 8).output().unwrap();
    let line = String::from_utf8_lossy(&out.stdout).trim().to_string();
    t.check(out.status.success(), format!("workers=8 resume: {line}"));
    let b_secs = run_b.elapsed().as_secs_f64();

    let mut differing = Vec::new();
    for e in &manifest.entries {
        if data_files(&dir_a.join(&e.asset_id)) != data_files(&dir_b.join(&e.asset_id)) {
            differing.push(e.asset_id.clone());
        }
    }
    t.check(differing.is_empty(), format!("{} assets differ between runs {differing:?}", differing.len()));
    let index = |d: &Path| std::fs::read(d.join("index.json")).unwrap_or_default();
    t.check(index(&dir_a) == index(&dir_b), "index.json identical");
    let sums_equal = manifest.entries.iter().all(|e| {
        let sa = read_checksums(&dir_a.join(&e.asset_id));
        let sb = read_checksums(&dir_b.join(&e.asset_id));
        matches!((sa, sb), (Ok(x), Ok(y)) if x == y)
    });
    t.check(sums_equal, "checksums identical after kill and resume");

    let rerun = Instant::now();
    let out = geoforge_run(&manifest_path, &dir_b, 8).output().unwrap();
    let line = String::from_utf8_lossy(&out.stdout).trim().to_string();
    let rerun = rerun.elapsed();
    t.check(
        out.status.success() && line.contains(&format!("ok=0 skipped={N} failed=0")) && rerun < Duration::from_secs(10),
        format!("rerun {line:?} in {:.2}s", rerun.as_secs_f64()),
    );
    let report = validate(&dir_b).unwrap();
    t.check(report.ok && report.assets.len() == N, format!("validate: {} assets ok", report.assets.len()));

    let total = start.elapsed();
    let limit = scaled_limit(15.0 * 60.0);
    t.check(
        total < limit,
        format!(
            "total {:.0}s, workers=8 leg {b_secs:.0}s (limit {:.0}s, {} worker default)",
            total.as_secs_f64(),
            limit.as_secs_f64(),
            pipeline::default_workers()
        ),
    );
    t.verdict()
}

type Criterion = (usize, &'static str, fn() -> Verdict);

const CRITERIA: [Criterion; 8] = [
    (1, "non_watertight_sealing", sealing),
    (2, "geometric_preservation", preservation),
    (3, "udf_exactness", udf_exactness),
    (4, "label_correctness", label_correctness),
    (5, "marching_cubes_manifoldness", marching_cubes_manifold),
    (6, "sampling_contracts", sampling_contracts),
    (7, "metric_oracles", metric_oracles),
    (8, "pipeline_determinism_and_resume", pipeline_determinism),
];

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        for (n, name, _) in CRITERIA {
            println!("criterion_{n}_{name}: test");
        }
        return;
    }
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    let selected: Vec<&Criterion> = CRITERIA
        .iter()
        .filter(|(n, name, _)| {
            filters.is_empty() || filters.iter().any(|f| *f == &n.to_string() || format!("criterion_{n}_{name}").contains(f.as_str()))
        })
        .collect();
    let mut failed = 0;
    for (n, name, f) in &selected {
        let start = Instant::now();
        let v = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::new(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!v.pass);
        println!(
            "criterion {n} {name}: {} ({:.1}s) {}",
            if v.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", selected.len() - failed, selected.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
