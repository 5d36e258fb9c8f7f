use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use geoforge::geom::{is_watertight, load_mesh, write_mesh};
use geoforge::metrics::{compare_meshes, MetricParams, DEFAULT_FSCORE_D};
use geoforge::pipeline::{self, Manifest, RunOptions, WORKERS_ENV};
use geoforge::sampling::{sample_asset, voxelize16, DownsampleMethod, SamplingSpec};
use geoforge::watertight::{remesh_watertight, LabelingMode, RemeshConfig, RemeshResult};

#[derive(Parser)]
#[command(name = "geoforge", version, about = "Watertight remeshing and occupancy sampling for 3D datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Labeling {
    Ray,
    Flood,
}

#[derive(Args, Clone)]
struct RemeshArgs {
    /// Grid resolution per axis.
    #[arg(long)]
    res: Option<usize>,
    /// Probe directions.
    #[arg(long)]
    dirs: Option<usize>,
    /// Escape threshold as a fraction of the directions.
    #[arg(long)]
    tau: Option<f64>,
    /// Iso level in voxels.
    #[arg(long)]
    iso: Option<f64>,
    /// Shell thickness in voxels for surfaces seen from both sides.
    #[arg(long)]
    shell: Option<f64>,
    #[arg(long, value_enum)]
    labeling: Option<Labeling>,
}

impl RemeshArgs {
    fn apply(&self, mut c: RemeshConfig) -> RemeshConfig {
        if let Some(v) = self.res {
            c.grid_res = v;
        }
        if let Some(v) = self.dirs {
            c.directions = v;
        }
        if let Some(v) = self.tau {
            c.escape_threshold = v;
        }
        if let Some(v) = self.iso {
            c.iso_level = v;
        }
        if self.shell.is_some() {
            c.shell_epsilon = self.shell;
        }
        if let Some(l) = self.labeling {
            c.labeling_mode = match l {
                Labeling::Ray => LabelingMode::RayVisibility,
                Labeling::Flood => LabelingMode::ExteriorFloodFill,
            };
        }
        c
    }

    fn config(&self) -> RemeshConfig {
        self.apply(RemeshConfig::default())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Convert a mesh into a watertight one.
    Remesh {
        input: PathBuf,
        #[command(flatten)]
        remesh: RemeshArgs,
        /// Output mesh (.obj or .ply).
        #[arg(long)]
        out: PathBuf,
        /// Write the result in the input's coordinates instead of the
        /// normalized cube.
        #[arg(long)]
        original_frame: bool,
    },
    /// Remesh, then write surface clouds, queries and conditioning payloads
    /// as an OCCS file.
    Sample {
        input: PathBuf,
        #[command(flatten)]
        remesh: RemeshArgs,
        /// Surface sizes, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = vec![8192usize])]
        surface: Vec<usize>,
        /// Uniform and near-surface query counts.
        #[arg(long, value_delimiter = ',', num_args = 1, default_value = "8192,8192")]
        queries: Vec<usize>,
        #[arg(long, default_value_t = 0.01)]
        sigma: f64,
        #[arg(long, value_enum, default_value = "fps")]
        downsample: Downsample,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Asset id recorded in the file; defaults to the input file stem.
        #[arg(long)]
        id: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Remesh, then write the 16^3 occupancy grid as 512 packed bytes.
    Voxelize {
        input: PathBuf,
        #[command(flatten)]
        remesh: RemeshArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two meshes given in the same frame.
    Metrics {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FSCORE_D)]
        fscore_d: f64,
        #[arg(long, default_value_t = 8192)]
        points: usize,
        /// Points for exact EMD; 0 skips it.
        #[arg(long, default_value_t = 0)]
        emd: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Process a JSONL manifest.
    Run {
        manifest: PathBuf,
        #[command(flatten)]
        remesh: RemeshArgs,
        #[arg(long, env = WORKERS_ENV)]
        workers: Option<usize>,
        #[arg(long)]
        resume: bool,
        /// Overrides the manifest's global seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check a pipeline output directory.
    Validate {
        dir: PathBuf,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Downsample {
    Fps,
    Random,
}

fn remesh_file(input: &Path, cfg: &RemeshConfig) -> Result<(geoforge::geom::TriangleMesh, RemeshResult)> {
    let mesh = load_mesh(input).with_context(|| format!("loading {}", input.display()))?;
    let result = remesh_watertight(&mesh, cfg).with_context(|| format!("remeshing {}", input.display()))?;
    Ok((mesh, result))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(value)?;
    pipeline::write_atomic(path, &bytes)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Remesh {
            input,
            remesh,
            out,
            original_frame,
        } => {
            let (mesh, r) = remesh_file(&input, &remesh.config())?;
            let output = if original_frame {
                r.mesh.map_vertices(|p| r.transform.inverse(p))
            } else {
                r.mesh.clone()
            };
            write_mesh(&output, &out)?;
            let s = &r.stats;
            println!(
                "watertight={} triangles_in={} triangles_out={} boundary_edges_in={} inside_fraction={:.4} volume={:.6} seconds={:.2}",
                is_watertight(&r.mesh).watertight,
                mesh.triangles().len(),
                s.output_triangles,
                s.input_boundary_edges,
                s.inside_fraction,
                s.output_volume,
                s.timings.total.as_secs_f64()
            );
            Ok(true)
        }
        Command::Sample {
            input,
            remesh,
            surface,
            queries,
            sigma,
            downsample,
            seed,
            id,
            out,
        } => {
            let [uniform, near] = queries[..] else {
                bail!("--queries takes two counts, uniform and near-surface");
            };
            let cfg = remesh.config();
            let spec = SamplingSpec {
                surface_sizes: surface,
                uniform_queries: uniform,
                near_queries: near,
                near_sigma: sigma,
                downsample: match downsample {
                    Downsample::Fps => DownsampleMethod::Fps,
                    Downsample::Random => DownsampleMethod::Random,
                },
                seed,
                ..SamplingSpec::default()
            };
            spec.validate()?;
            let id = id.unwrap_or_else(|| input.file_stem().map_or("asset".into(), |s| s.to_string_lossy().into_owned()));
            let (_, r) = remesh_file(&input, &cfg)?;
            let iso = cfg.iso_level * r.signed_grid.spacing();
            let samples = sample_asset(&id, &r.mesh, &r.signed_grid, &r.label_grid, &spec, iso)?;
            let bytes = samples.to_occs().to_bytes();
            pipeline::write_atomic(&out, &bytes)?;
            let sizes: Vec<String> = samples.surfaces.iter().map(|(s, d)| format!("{}/{}", s.len(), d.len())).collect();
            println!(
                "surfaces={} queries={} inside={} voxels={} sparse={} partial={} bytes={}",
                sizes.join(","),
                samples.queries.len(),
                samples.queries.labels.iter().filter(|&&l| l == 1).count(),
                samples.voxels.count(),
                samples.sparse.len(),
                samples.partial.flattened().len(),
                bytes.len()
            );
            Ok(true)
        }
        Command::Voxelize { input, remesh, out } => {
            let (_, r) = remesh_file(&input, &remesh.config())?;
            let v = voxelize16(&r.mesh, Some(&r.label_grid));
            pipeline::write_atomic(&out, &v.to_bits())?;
            println!("res={} occupied={}", v.res, v.count());
            Ok(true)
        }
        Command::Metrics {
            a,
            b,
            fscore_d,
            points,
            emd,
            seed,
            out,
        } => {
            let ma = load_mesh(&a).with_context(|| format!("loading {}", a.display()))?;
            let mb = load_mesh(&b).with_context(|| format!("loading {}", b.display()))?;
            let params = MetricParams {
                fscore_d,
                points,
                emd_points: emd,
                seed,
                ..MetricParams::default()
            };
            let report = compare_meshes(&ma, &mb, &params)?;
            println!("{}", report.to_kv());
            if let Some(out) = out {
                write_json(&out, &report)?;
            }
            Ok(true)
        }
        Command::Run {
            manifest,
            remesh,
            workers,
            resume,
            seed,
            out,
        } => {
            let mut m = Manifest::load(&manifest)?;
            m.global.defaults.remesh = remesh.apply(m.global.defaults.remesh);
            if let Some(s) = seed {
                m.global.seed = s;
            }
            // re-check the merged settings before any work
            for e in &m.entries {
                m.settings(e).with_context(|| format!("asset {}", e.asset_id))?;
            }
            let opts = RunOptions {
                workers: workers.unwrap_or_else(pipeline::default_workers),
                resume,
                output_dir: out,
            };
            let s = pipeline::run(&m, &opts)?;
            for r in &s.reports {
                if let pipeline::AssetStatus::Failed(reason) = &r.status {
                    println!("failed {}: {reason}", r.asset_id);
                }
            }
            println!(
                "ok={} skipped={} failed={} seconds={:.1} out={}",
                s.ok,
                s.skipped,
                s.failed,
                s.elapsed.as_secs_f64(),
                s.output_dir.display()
            );
            Ok(s.success())
        }
        Command::Validate { dir, out } => {
            let report = pipeline::validate(&dir)?;
            for a in &report.assets {
                let failed: Vec<String> = a.checks.iter().filter(|c| !c.ok).map(|c| format!("{}: {}", c.name, c.detail)).collect();
                if failed.is_empty() {
                    println!("ok {}", a.asset_id);
                } else {
                    println!("FAIL {} | {}", a.asset_id, failed.join(" | "));
                }
            }
            for m in &report.missing {
                println!("MISSING {m}");
            }
            println!("assets={} ok={}", report.assets.len(), report.ok);
            if let Some(out) = out {
                write_json(&out, &report)?;
            }
            Ok(report.ok)
        }
    }
}
