//! Synthetic labeled packet-record corpora.
//!
//! Mining flows combine three packet populations: short share submissions
//! (36-80 bytes, around 40% of packets), job/keepalive exchanges sitting in
//! the narrow 105-110 byte band (just over half of all packets), and an
//! occasional larger transfer. Inter-arrivals are near-periodic for jobs and
//! exponential for shares. Benign flows draw from a broad web-like length
//! mixture with bursty timing. The seven mining classes differ by documented
//! per-coin offsets of share-length center, job-length mode, job period and
//! share rate, which keeps them statistically distinguishable at window
//! scale.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ingest::{FlowKey, Label, PacketRecord, Proto};

/// What a profile generates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Mining { coin: Label },
    Benign,
}

/// Generator profile: packet-count range, destination plan and seed.
/// Length/timing mixtures are fixed per kind (see module docs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthProfile {
    pub kind: ProfileKind,
    /// Inclusive range of packets per flow.
    pub packets_per_flow: (usize, usize),
    /// Destinations to cycle flows through; empty picks random documentation
    /// addresses.
    pub destinations: Vec<(String, u16)>,
    pub seed: u64,
}

impl SynthProfile {
    pub fn mining(coin: Label, seed: u64) -> SynthProfile {
        assert!(coin.coin_index().is_some(), "mining profile needs a coin label");
        SynthProfile {
            kind: ProfileKind::Mining { coin },
            packets_per_flow: (24, 60),
            destinations: Vec::new(),
            seed,
        }
    }

    pub fn benign(seed: u64) -> SynthProfile {
        SynthProfile {
            kind: ProfileKind::Benign,
            packets_per_flow: (12, 60),
            destinations: Vec::new(),
            seed,
        }
    }

    pub fn with_destinations(mut self, destinations: Vec<(String, u16)>) -> SynthProfile {
        self.destinations = destinations;
        self
    }

    fn label(&self) -> Label {
        match self.kind {
            ProfileKind::Mining { coin } => coin,
            ProfileKind::Benign => Label::Benign,
        }
    }
}

/// Per-coin parameter offsets; index = coin position in [`Label::COINS`].
struct CoinParams {
    share_len_center: u32,
    job_len_mode: u32,
    job_period_secs: f64,
    share_mean_secs: f64,
}

fn coin_params(coin: Label) -> CoinParams {
    let i = coin.coin_index().expect("coin label") as u32;
    CoinParams {
        share_len_center: 40 + 5 * i,
        job_len_mode: 105 + (i % 6),
        job_period_secs: 20.0 + 5.0 * i as f64,
        share_mean_secs: 2.0 + i as f64,
    }
}

fn mining_packet(rng: &mut ChaCha8Rng, params: &CoinParams) -> (u32, f64) {
    let roll: f64 = rng.gen();
    if roll < 0.52 {
        // Job/keepalive band; clamp keeps the mode inside 105..=110.
        let len = (params.job_len_mode as i64 + rng.gen_range(-1i64..=1)).clamp(105, 110) as u32;
        let jitter = rng.gen_range(0.9..1.1);
        let dt = params.job_period_secs * jitter / 10.0; // several jobs per window
        (len, dt)
    } else if roll < 0.92 {
        let len = (params.share_len_center as i64 + rng.gen_range(-3i64..=3)).clamp(36, 80) as u32;
        let u: f64 = rng.gen_range(1e-6..1.0);
        let dt = -params.share_mean_secs * u.ln() / 4.0;
        (len, dt)
    } else {
        (rng.gen_range(200..=1400), rng.gen_range(0.05..1.0))
    }
}

fn benign_packet(rng: &mut ChaCha8Rng) -> (u32, f64) {
    let roll: f64 = rng.gen();
    let len = if roll < 0.35 {
        rng.gen_range(40..=100)
    } else if roll < 0.55 {
        rng.gen_range(120..=600)
    } else if roll < 0.80 {
        rng.gen_range(600..=1459)
    } else if roll < 0.95 {
        1460
    } else {
        rng.gen_range(100..=160)
    };
    let dt = if rng.gen_bool(0.7) {
        rng.gen_range(0.001..0.05) // burst
    } else {
        rng.gen_range(0.2..5.0) // think time
    };
    (len, dt)
}

/// Generate `flows` labeled flows of packet records. Deterministic for a
/// fixed profile (seed included): the same call yields byte-identical
/// output.
pub fn synthesize(profile: &SynthProfile, flows: usize) -> (Vec<PacketRecord>, Vec<(FlowKey, Label)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let mut records = Vec::new();
    let mut labels = Vec::new();
    let label = profile.label();

    for flow_index in 0..flows {
        let src_ip = format!(
            "10.{}.{}.{}",
            rng.gen_range(0..=255),
            rng.gen_range(0..=255),
            rng.gen_range(2..=254)
        );
        let src_port: u16 = rng.gen_range(29000..=60000);
        let (dst_ip, dst_port) = if profile.destinations.is_empty() {
            match profile.kind {
                ProfileKind::Mining { .. } => (
                    format!("203.0.113.{}", rng.gen_range(1..=254)),
                    rng.gen_range(3333..=14444),
                ),
                ProfileKind::Benign => (
                    format!("198.51.100.{}", rng.gen_range(1..=254)),
                    if rng.gen_bool(0.8) { 443 } else { 80 },
                ),
            }
        } else {
            profile.destinations[flow_index % profile.destinations.len()].clone()
        };

        let key = FlowKey {
            src_ip: src_ip.clone(),
            src_port,
            dst_ip: dst_ip.clone(),
            dst_port,
            proto: Proto::Tcp,
        };
        labels.push((key, label));

        let count = rng.gen_range(profile.packets_per_flow.0..=profile.packets_per_flow.1);
        let mut ts = rng.gen_range(0.0..3600.0);
        for _ in 0..count {
            let (len, dt) = match profile.kind {
                ProfileKind::Mining { coin } => mining_packet(&mut rng, &coin_params(coin)),
                ProfileKind::Benign => benign_packet(&mut rng),
            };
            ts += dt;
            records.push(PacketRecord {
                ts,
                src_ip: src_ip.clone(),
                src_port,
                dst_ip: dst_ip.clone(),
                dst_port,
                proto: Proto::Tcp,
                len,
            });
        }
    }
    (records, labels)
}

/// Serialize records as NDJSON, one per line.
pub fn write_records<W: std::io::Write>(
    mut writer: W,
    records: &[PacketRecord],
) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
