//! The two-stage detection pipeline.
//!
//! Stage 1 turns packet records into windows, extracts features, scores each
//! window with a trained binary model and applies the decision threshold.
//! Destinations with enough positive windows become suspicious endpoints.
//! Stage 2 probes the suspicious endpoints (skipping ones already on the
//! blacklist), confirms pool-positive verdicts into the blacklist and emits a
//! report. Stage 1 never waits on the network: probing starts only after
//! every window is scored.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use chrono::Utc;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blacklist::{BlacklistError, BlacklistStore, UpdateMode};
use crate::eval::ThresholdPolicyKind;
use crate::features::{self, FeatureMatrix, FeatureSpec};
use crate::gbdt::{BoostedEnsemble, GbdtError, Task};
use crate::ingest::{self, IngestError, PacketRecord};
use crate::probe::{self, ProbeConfig, ProbeOutcome, ProbeTarget, ProbeVerdict, ProtocolVariant};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stage 1 expects a binary model, got a multiclass one")]
    WrongTask,
    #[error("threshold {0} outside [0, 1]")]
    BadThreshold(f64),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Feature(#[from] features::FeatureError),
    #[error(transparent)]
    Model(#[from] GbdtError),
    #[error(transparent)]
    Blacklist(#[from] BlacklistError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Feature set selection for the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureSpecSet {
    /// `"default"`: the built-in catalog.
    Keyword(String),
    /// Explicit canonical names.
    Names(Vec<String>),
}

impl FeatureSpecSet {
    pub fn resolve(&self) -> Result<Vec<FeatureSpec>, features::FeatureError> {
        match self {
            FeatureSpecSet::Keyword(word) if word == "default" => Ok(features::default_catalog()),
            FeatureSpecSet::Keyword(word) => Err(features::FeatureError::UnknownName(word.clone())),
            FeatureSpecSet::Names(names) => names.iter().map(|n| FeatureSpec::parse(n)).collect(),
        }
    }
}

fn default_feature_specs() -> FeatureSpecSet {
    FeatureSpecSet::Keyword("default".to_string())
}

fn default_variants() -> Vec<ProtocolVariant> {
    ProtocolVariant::ALL.to_vec()
}

fn default_window_size() -> usize {
    10
}

fn default_flow_timeout() -> f64 {
    120.0
}

fn default_min_positive_windows() -> usize {
    1
}

fn default_probing_enabled() -> bool {
    true
}

fn default_f1_floor_ratio() -> f64 {
    0.99
}

/// Everything a `detect` run needs, loadable from one JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default = "default_window_size")]
    pub window_size: usize,
    #[serde(default = "default_flow_timeout")]
    pub flow_timeout_secs: f64,
    #[serde(default = "default_feature_specs")]
    pub feature_specs: FeatureSpecSet,
    pub model_path: PathBuf,
    /// Decision threshold for stage 1 (scores strictly above are positive).
    pub threshold: f64,
    /// Provenance of the threshold, when it came from a tuning run.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threshold_policy: Option<ThresholdPolicyKind>,
    #[serde(default = "default_f1_floor_ratio")]
    pub f1_floor_ratio: f64,
    /// Endpoints need at least this many positive windows to be probed.
    #[serde(default = "default_min_positive_windows")]
    pub min_positive_windows: usize,
    #[serde(default = "default_probing_enabled")]
    pub probing_enabled: bool,
    #[serde(default = "default_variants")]
    pub variants: Vec<ProtocolVariant>,
    #[serde(default)]
    pub probe: ProbeConfig,
    pub journal_path: PathBuf,
    #[serde(default = "default_update_mode")]
    pub update_mode: UpdateMode,
}

fn default_update_mode() -> UpdateMode {
    UpdateMode::Realtime
}

impl PipelineConfig {
    pub fn from_json_file(path: &std::path::Path) -> Result<PipelineConfig, PipelineError> {
        let reader = BufReader::new(File::open(path)?);
        let config: PipelineConfig =
            serde_json::from_reader(reader).map_err(std::io::Error::from)?;
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowDecision {
    pub window_id: String,
    pub dst_host: String,
    pub dst_port: u16,
    pub score: f64,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointSummary {
    pub host: String,
    pub port: u16,
    pub windows: usize,
    pub positive_windows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfirmedEndpoint {
    pub host: String,
    pub port: u16,
    /// Already on the blacklist before this run (no probe was issued).
    pub prior_blacklist: bool,
}

/// Window-level confusion counts, available when the input carried labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSummary {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub threshold: f64,
    pub windows: usize,
    pub positive_windows: usize,
    pub decisions: Vec<WindowDecision>,
    /// Distinct destination endpoints with enough positive windows.
    pub suspicious: Vec<EndpointSummary>,
    /// Probe verdicts for suspicious endpoints not already blacklisted.
    pub verdicts: Vec<ProbeVerdict>,
    pub confirmed: Vec<ConfirmedEndpoint>,
    pub skipped_blacklisted: usize,
    /// Blacklist persistence failures during confirmation (entries stay
    /// staged in memory; the report is still complete).
    pub persist_failures: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub label_summary: Option<LabelSummary>,
}

/// Run the full two-stage pipeline with an already-loaded model and store.
pub fn detect_with_model(
    records: &[PacketRecord],
    model: &BoostedEnsemble,
    store: &mut BlacklistStore,
    config: &PipelineConfig,
) -> Result<DetectionReport, PipelineError> {
    let windows = ingest::segment_flows(records, config.window_size, config.flow_timeout_secs)?;
    detect_windows(&windows, model, store, config)
}

/// Two-stage detection over already-segmented windows (labels on the windows
/// feed the report's confusion counts).
pub fn detect_windows(
    windows: &[ingest::Window],
    model: &BoostedEnsemble,
    store: &mut BlacklistStore,
    config: &PipelineConfig,
) -> Result<DetectionReport, PipelineError> {
    if model.task != Task::Binary {
        return Err(PipelineError::WrongTask);
    }
    if !(0.0..=1.0).contains(&config.threshold) || !config.threshold.is_finite() {
        return Err(PipelineError::BadThreshold(config.threshold));
    }

    // Stage 1: features -> scores -> decisions.
    let specs = config.feature_specs.resolve()?;
    let matrix = FeatureMatrix::from_windows(windows, &specs);
    let probabilities = model.predict_matrix(&matrix)?; // feature mismatch fails here, before any probing

    let mut decisions = Vec::with_capacity(windows.len());
    let mut label_counts = (0usize, 0usize, 0usize, 0usize);
    let mut saw_label = false;
    for (window, probs) in windows.iter().zip(&probabilities) {
        let score = probs[0];
        let positive = score > config.threshold;
        if let Some(label) = window.label {
            saw_label = true;
            match (positive, label.is_mining()) {
                (true, true) => label_counts.0 += 1,
                (true, false) => label_counts.1 += 1,
                (false, true) => label_counts.2 += 1,
                (false, false) => label_counts.3 += 1,
            }
        }
        decisions.push(WindowDecision {
            window_id: window.id(),
            dst_host: window.key.dst_ip.clone(),
            dst_port: window.key.dst_port,
            score,
            positive,
        });
    }

    // Aggregate positives by destination endpoint.
    let mut per_endpoint: BTreeMap<(String, u16), (usize, usize)> = BTreeMap::new();
    for decision in &decisions {
        let entry = per_endpoint
            .entry((decision.dst_host.clone(), decision.dst_port))
            .or_default();
        entry.0 += 1;
        entry.1 += usize::from(decision.positive);
    }
    let suspicious: Vec<EndpointSummary> = per_endpoint
        .iter()
        .filter(|(_, &(_, positives))| positives >= config.min_positive_windows.max(1))
        .map(|((host, port), &(windows, positive_windows))| EndpointSummary {
            host: host.clone(),
            port: *port,
            windows,
            positive_windows,
        })
        .collect();

    // Stage 2: blacklist hits confirm directly, the rest get probed.
    let mut confirmed = Vec::new();
    let mut to_probe = Vec::new();
    for endpoint in &suspicious {
        if store.query(&endpoint.host, endpoint.port).is_some() {
            confirmed.push(ConfirmedEndpoint {
                host: endpoint.host.clone(),
                port: endpoint.port,
                prior_blacklist: true,
            });
        } else if config.probing_enabled {
            to_probe.push(ProbeTarget::new(endpoint.host.clone(), endpoint.port));
        }
    }
    let skipped_blacklisted = confirmed.len();

    let verdicts = if to_probe.is_empty() {
        Vec::new()
    } else {
        probe::probe_batch(&to_probe, &config.variants, &config.probe)
    };

    let now = Utc::now();
    let mut persist_failures = 0usize;
    for verdict in &verdicts {
        if verdict.outcome == ProbeOutcome::PoolPositive {
            if store.confirm(verdict, now).is_err() {
                persist_failures += 1;
            }
            confirmed.push(ConfirmedEndpoint {
                host: verdict.host.clone(),
                port: verdict.port,
                prior_blacklist: false,
            });
        }
    }
    if store.mode() == UpdateMode::Batch && store.flush(now).is_err() {
        persist_failures += 1;
    }

    let positive_windows = decisions.iter().filter(|d| d.positive).count();
    Ok(DetectionReport {
        threshold: config.threshold,
        windows: windows.len(),
        positive_windows,
        decisions,
        suspicious,
        verdicts,
        confirmed,
        skipped_blacklisted,
        persist_failures,
        label_summary: saw_label.then_some(LabelSummary {
            tp: label_counts.0,
            fp: label_counts.1,
            fn_: label_counts.2,
            tn: label_counts.3,
        }),
    })
}

/// Convenience wrapper: load the model and blacklist from the paths in the
/// config, run [`detect_with_model`].
pub fn detect(
    records: &[PacketRecord],
    config: &PipelineConfig,
) -> Result<DetectionReport, PipelineError> {
    let model = BoostedEnsemble::load_json(BufReader::new(File::open(&config.model_path)?))?;
    let mut store = BlacklistStore::open(&config.journal_path, config.update_mode)?;
    detect_with_model(records, &model, &mut store, config)
}
