//! A small batch run: writes a synthetic corpus, processes it, resumes it
//! and validates the output.

use geoforge::pipeline::{run, validate, write_synthetic_corpus, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::temp_dir().join("geoforge-pipeline-example");
    let _ = std::fs::remove_dir_all(&root);
    let mut manifest = write_synthetic_corpus(&root.join("inputs"), 8, 7)?;
    manifest.global.defaults.remesh.grid_res = 64;
    manifest.global.defaults.sampling.surface_sizes = vec![2048];
    std::fs::write(root.join("manifest.jsonl"), manifest.to_jsonl())?;

    let opts = RunOptions {
        workers: 4,
        resume: true,
        output_dir: Some(root.join("out")),
    };
    let first = run(&manifest, &opts)?;
    println!("first run: {} ok, {} failed, {:.1}s", first.ok, first.failed, first.elapsed.as_secs_f64());
    for r in &first.reports {
        if let Some(rec) = &r.record {
            println!(
                "  {}: {} -> {} triangles, cd {:.2e}, iou {:.3}",
                r.asset_id, rec.flags.input_triangles, rec.output_triangles, rec.metrics.cd, rec.metrics.voxel_iou
            );
        }
    }

    let second = run(&manifest, &opts)?;
    println!("resumed: {} skipped, {:.2}s", second.skipped, second.elapsed.as_secs_f64());

    let report = validate(&root.join("out"))?;
    println!("validation ok: {}", report.ok);
    Ok(())
}
