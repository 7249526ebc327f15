//! Evaluate the time-series feature catalog on one window.
//!
//! Every feature has a canonical name that round-trips through
//! `FeatureSpec::parse`, and names with the `__iat` suffix read the
//! inter-arrival times instead of the packet lengths.
//!
//! ```bash
//! cargo run --example feature_catalog
//! ```

use cryptocatch::features::{self, FeatureSpec};
use cryptocatch::ingest::{FlowKey, Proto, Window};

fn main() -> anyhow::Result<()> {
    let catalog = features::default_catalog();
    println!("catalog holds {} features; a few names:", catalog.len());
    for spec in catalog.iter().take(5) {
        println!("  {}", spec.name());
    }

    // A mining-looking window: job-sized packets with near-periodic timing.
    let window = Window {
        key: FlowKey {
            src_ip: "10.0.0.2".into(),
            src_port: 50000,
            dst_ip: "203.0.113.9".into(),
            dst_port: 3333,
            proto: Proto::Tcp,
        },
        seq_index: 0,
        packets: vec![
            (0.00, 107),
            (0.31, 64),
            (0.58, 108),
            (0.90, 61),
            (1.21, 107),
            (1.49, 66),
            (1.80, 109),
            (2.11, 63),
            (2.40, 108),
            (2.71, 107),
        ],
        label: None,
    };

    let vector = features::extract(&window, &catalog);
    println!("\nextracted {} finite values for {}", vector.values.len(), vector.window_id);

    for name in [
        "sum_values",
        "binned_entropy__max_bins_10",
        "number_cwt_peaks__max_width_5",
        "index_mass_quantile__q_0.1",
        "autocorrelation__lag_2",
        "max_langevin_fixed_point__m_3__r_30",
        "mean__iat",
    ] {
        let spec = FeatureSpec::parse(name)?;
        let idx = catalog.iter().position(|s| s == &spec).unwrap();
        println!("  {name:<42} = {:>12.4}", vector.values[idx]);
    }
    Ok(())
}
