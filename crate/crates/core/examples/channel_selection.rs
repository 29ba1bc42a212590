//! Load a multi-channel recording through a manifest, apply its window and
//! pick the channel with the largest energy.
//!
//! ```bash
//! cargo run -p lgm-emg --example channel_selection
//! ```

use std::fs;

use lgm::distributions::sample_lgm;
use lgm::ingestion::{channel_energy, load_manifest, load_trial, select_max_energy_channel, write_matrix};
use lgm::LgmParams;

fn main() -> lgm::Result<()> {
    let dir = tempfile::tempdir().expect("temporary directory");

    // Three electrodes recording the same source at different gains.
    let source = sample_lgm(4_000, &LgmParams::from_parts(0.7, 0.0, 1.0, 0.0, 6.0)?, 3)?;
    let channels: Vec<Vec<f64>> = [0.2, 1.5, 0.8]
        .iter()
        .map(|g| source.iter().map(|v| g * v).collect())
        .collect();
    write_matrix(&dir.path().join("trial.csv"), &channels)?;

    fs::write(
        dir.path().join("manifest.toml"),
        r#"
[[trial]]
path = "trial.csv"
subject = "s01"
activity = "grasp"
trial = 1
sample_rate = 2000.0
channel_count = 3
window = [1000, 3000]
"#,
    )
    .expect("write manifest");

    let manifest = load_manifest(dir.path().join("manifest.toml"))?;
    let entry = &manifest.entries[0];
    let record = load_trial(entry, false)?;
    println!(
        "{}/{}/{}: {} channels × {} samples ({:.2} s window)",
        entry.subject,
        entry.activity,
        entry.trial,
        record.channel_count(),
        record.sample_count(),
        entry.window_seconds().unwrap_or(0.0)
    );
    for (i, ch) in record.channels.iter().enumerate() {
        println!("  channel {i}: energy {:.1}", channel_energy(ch));
    }
    let (best, _) = select_max_energy_channel(&record);
    println!("modelling channel {best}");
    Ok(())
}
