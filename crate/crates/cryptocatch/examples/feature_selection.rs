//! Univariate significance testing with Benjamini-Hochberg FDR control.
//!
//! Synthesizes a labeled corpus, scores every catalog feature against the
//! mining/benign split and prints the strongest survivors.
//!
//! ```bash
//! cargo run --example feature_selection
//! ```

use cryptocatch::features::FeatureMatrix;
use cryptocatch::ingest::{self, Label};
use cryptocatch::select;
use cryptocatch::sim::{self, SynthProfile};

fn main() -> anyhow::Result<()> {
    let (mut records, mining_labels) = sim::synthesize(&SynthProfile::mining(Label::Xmr, 1), 120);
    let (benign, benign_labels) = sim::synthesize(&SynthProfile::benign(2), 120);
    records.extend(benign);
    let labels: std::collections::HashMap<_, _> =
        mining_labels.into_iter().chain(benign_labels).collect();

    let mut windows = ingest::segment_flows(&records, 10, 120.0)?;
    ingest::attach_labels(&mut windows, &labels);
    let matrix = FeatureMatrix::from_windows(&windows, &cryptocatch::features::default_catalog());
    let truth: Vec<bool> = matrix.labels.iter().map(|l| l.unwrap().is_mining()).collect();

    let report = select::select_features_binary(&matrix, &truth, 0.01)?;
    let selected = report.selected_names();
    println!(
        "{} of {} features significant at adjusted p < 0.01",
        selected.len(),
        matrix.feature_names.len()
    );

    let mut entries = report.entries.clone();
    entries.sort_by(|a, b| a.p_adjusted.total_cmp(&b.p_adjusted));
    println!("\nstrongest features (feature, p, adjusted p):");
    for entry in entries.iter().take(8) {
        println!("  {:<42} {:>10.3e} {:>10.3e}", entry.feature, entry.p, entry.p_adjusted);
    }
    println!("\nweakest features:");
    for entry in entries.iter().rev().take(3) {
        println!("  {:<42} {:>10.3e} {:>10.3e}", entry.feature, entry.p, entry.p_adjusted);
    }
    Ok(())
}
