//! Run the batch pipeline over a small synthetic study (2 subjects ×
//! 2 activities × 2 trials) and print the resulting KLD heatmaps.
//!
//! ```bash
//! cargo run --release -p lgm-emg --example batch_pipeline
//! ```

use std::fmt::Write as _;
use std::fs;

use lgm::commands::cmd_batch;
use lgm::distributions::sample_lgm;
use lgm::ingestion::write_matrix;
use lgm::report::PipelineOptions;
use lgm::{LgmParams, ModelKind};

fn main() -> lgm::Result<()> {
    let dir = tempfile::tempdir().expect("temporary directory");
    let mut manifest = String::new();
    let mut seed = 0;
    for subject in ["s01", "s02"] {
        // Light activity is Laplacian-dominated, intense activity Gaussian-dominated.
        for (activity, lambda1) in [("light", 0.8), ("intense", 0.2)] {
            for trial in 1..=2 {
                seed += 1;
                let p = LgmParams::from_parts(lambda1, 0.0, 1.0, 0.0, 9.0)?;
                let name = format!("{subject}_{activity}_{trial}.csv");
                write_matrix(&dir.path().join(&name), &[sample_lgm(20_000, &p, seed)?])?;
                writeln!(
                    manifest,
                    "[[trial]]\npath = \"{name}\"\nsubject = \"{subject}\"\nactivity = \"{activity}\"\n\
                     trial = {trial}\nsample_rate = 2000.0\nchannel_count = 1\n"
                )
                .expect("writing to a String");
            }
        }
    }
    let manifest_path = dir.path().join("manifest.toml");
    fs::write(&manifest_path, manifest).expect("write manifest");

    let out = dir.path().join("results");
    let outcome = cmd_batch(&manifest_path, false, &PipelineOptions::default(), &out)?;
    println!("{} trials, {} failures", outcome.reports.len(), outcome.failures.len());
    for kind in ModelKind::ALL {
        println!("\nKLD heatmap, {kind}:\n{}", outcome.heatmaps.get(kind).to_csv());
    }
    println!("Laplacian weight:\n{}", outcome.lambda1.to_csv());

    let mut files: Vec<String> = fs::read_dir(&out)
        .expect("results directory")
        .map(|e| e.expect("dir entry").file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    println!("written: {}", files.join(", "));
    Ok(())
}
