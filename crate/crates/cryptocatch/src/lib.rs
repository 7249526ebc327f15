//! Two-stage detector for encrypted cryptomining traffic.
//!
//! Stage 1 classifies traffic: packet streams are grouped into flows by
//! five-tuple, segmented into short windows, turned into time-series feature
//! vectors and scored by a gradient-boosted tree ensemble with a tunable
//! decision threshold. Stage 2 verifies: destinations that produced positive
//! windows are actively probed with protocol-specific subscription messages
//! (Stratum over TCP/TLS, plus a WebSocket browser-miner dialect), and only
//! endpoints that answer like a mining pool enter the dynamic blacklist.
//!
//! The crate ships a pool/traffic simulator ([`sim`]) so the whole pipeline
//! can be exercised on loopback without touching any real mining
//! infrastructure. Start with the runnable programs under `examples/`:
//!
//! ```bash
//! cargo run --example detect_end_to_end
//! cargo run --example probe_simulated_pool
//! cargo run --example train_binary
//! ```
//!
//! A thin `cryptocatch` binary exposes the same capabilities as subcommands
//! (`ingest`, `features`, `select`, `train`, `predict`, `evaluate`,
//! `tune-threshold`, `detect`, `probe`, `blacklist`, `sim`).

pub mod blacklist;
pub mod eval;
pub mod features;
pub mod gbdt;
pub mod ingest;
mod numeric;
pub mod pipeline;
pub mod probe;
pub mod select;
pub mod sim;

pub use blacklist::{BlacklistEntry, BlacklistStore, UpdateMode};
pub use eval::{ScoredSample, ThresholdPolicy, ThresholdPolicyKind};
pub use features::{FeatureMatrix, FeatureSpec, FeatureVector};
pub use gbdt::{BoostedEnsemble, Hyperparams, Task};
pub use ingest::{FlowKey, Label, PacketRecord, Proto, Window};
pub use pipeline::{DetectionReport, PipelineConfig};
pub use probe::{ProbeConfig, ProbeOutcome, ProbeTarget, ProbeVerdict, ProtocolVariant};
pub use sim::{PoolBehavior, PoolServer, SynthProfile};
