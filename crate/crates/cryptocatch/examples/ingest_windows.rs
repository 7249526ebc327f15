//! Parse packet records, group them into directional flows and cut the
//! flows into windows — the unit everything downstream works on.
//!
//! ```bash
//! cargo run --example ingest_windows
//! ```

use std::io::Cursor;

use cryptocatch::ingest::{self, RecordFormat};

fn main() -> anyhow::Result<()> {
    // Two flows: one with 23 packets (windows of 10, 10, 3) and a short one.
    let mut ndjson = String::new();
    for i in 0..23 {
        ndjson.push_str(&format!(
            r#"{{"ts":{},"src_ip":"10.0.0.2","src_port":50000,"dst_ip":"203.0.113.9","dst_port":3333,"proto":"TCP","len":{}}}"#,
            i as f64 * 0.5,
            if i % 2 == 0 { 107 } else { 64 },
        ));
        ndjson.push('\n');
    }
    ndjson.push_str(
        r#"{"ts":1.0,"src_ip":"10.0.0.7","src_port":40123,"dst_ip":"198.51.100.20","dst_port":443,"proto":"TCP","len":1460}"#,
    );
    ndjson.push_str("\nthis line is garbage and gets tallied\n");

    let parsed = ingest::parse_records(Cursor::new(ndjson), RecordFormat::Ndjson, false)?;
    println!("parsed {} records, skipped {}", parsed.records.len(), parsed.skipped);

    let windows = ingest::segment_flows(&parsed.records, 10, 120.0)?;
    for window in &windows {
        println!(
            "window {} -> {} packets, first ts {:.1}",
            window.id(),
            window.packets.len(),
            window.packets[0].0
        );
    }

    // The single-packet flow was discarded: lone packets carry no
    // time-series signal. Packet-length bands are a quick sanity check.
    let bands = ingest::length_distribution(&windows, &[(105, 110), (36, 80)]);
    println!("fraction of packet lengths in 105-110: {:.2}", bands[0]);
    println!("fraction of packet lengths in  36-80 : {:.2}", bands[1]);
    Ok(())
}
