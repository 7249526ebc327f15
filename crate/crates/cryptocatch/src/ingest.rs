//! Packet-record parsing, five-tuple flow grouping and window segmentation.
//!
//! Input is deliberately minimal: a packet is its five-tuple, a timestamp and
//! a payload length. Records arrive as NDJSON or CSV; flows are directional
//! (`A→B` and `B→A` are distinct keys) and an idle gap longer than the flow
//! timeout starts a fresh flow instance under the same key.

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("missing CSV header `{0}`")]
    MissingHeader(&'static str),
    #[error("window size must be at least 2, got {0}")]
    WindowSize(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Transport protocol of a packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Proto {
    Tcp,
    Udp,
}

impl fmt::Display for Proto {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Proto::Tcp => "TCP",
            Proto::Udp => "UDP",
        })
    }
}

/// One observed packet: five-tuple, timestamp, payload length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    /// Seconds since epoch, fractional part carries sub-second precision.
    pub ts: f64,
    pub src_ip: String,
    pub src_port: u16,
    pub dst_ip: String,
    pub dst_port: u16,
    pub proto: Proto,
    /// Payload length in bytes.
    pub len: u32,
}

impl PacketRecord {
    fn validate(&self) -> Result<(), String> {
        if !self.ts.is_finite() || self.ts < 0.0 {
            return Err(format!("timestamp must be finite and non-negative, got {}", self.ts));
        }
        Ok(())
    }

    pub fn flow_key(&self) -> FlowKey {
        FlowKey {
            src_ip: self.src_ip.clone(),
            src_port: self.src_port,
            dst_ip: self.dst_ip.clone(),
            dst_port: self.dst_port,
            proto: self.proto,
        }
    }
}

/// Directional flow identity. The reverse direction is a different key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlowKey {
    pub src_ip: String,
    pub src_port: u16,
    pub dst_ip: String,
    pub dst_port: u16,
    pub proto: Proto,
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}-{}:{}/{}",
            self.src_ip, self.src_port, self.dst_ip, self.dst_port, self.proto
        )
    }
}

/// Class label attached to a window for training and evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Benign,
    /// Collapsed positive class when the coin is unknown or irrelevant.
    Mining,
    Btc,
    Xmr,
    Etc,
    Ethw,
    Etf,
    Cfx,
    Rvn,
}

impl Label {
    pub fn is_mining(self) -> bool {
        !matches!(self, Label::Benign)
    }

    /// Coins in fixed order; class indices for multiclass training.
    pub const COINS: [Label; 7] = [
        Label::Btc,
        Label::Xmr,
        Label::Etc,
        Label::Ethw,
        Label::Etf,
        Label::Cfx,
        Label::Rvn,
    ];

    pub fn coin_index(self) -> Option<usize> {
        Label::COINS.iter().position(|&c| c == self)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Benign => "benign",
            Label::Mining => "mining",
            Label::Btc => "btc",
            Label::Xmr => "xmr",
            Label::Etc => "etc",
            Label::Ethw => "ethw",
            Label::Etf => "etf",
            Label::Cfx => "cfx",
            Label::Rvn => "rvn",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s.to_ascii_lowercase().as_str() {
            "benign" => Some(Label::Benign),
            "mining" => Some(Label::Mining),
            "btc" => Some(Label::Btc),
            "xmr" => Some(Label::Xmr),
            "etc" => Some(Label::Etc),
            "ethw" => Some(Label::Ethw),
            "etf" => Some(Label::Etf),
            "cfx" => Some(Label::Cfx),
            "rvn" => Some(Label::Rvn),
            _ => None,
        }
    }
}

/// A segment of 2..=window_size consecutive packets of one flow instance;
/// the unit of feature extraction and classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub key: FlowKey,
    /// 0-based window index, running across instances of the same key so
    /// `(key, seq_index)` stays unique.
    pub seq_index: usize,
    /// Ordered `(ts, len)` pairs, timestamps non-decreasing.
    pub packets: Vec<(f64, u32)>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub label: Option<Label>,
}

impl Window {
    /// Stable identifier used in matrix and score files.
    pub fn id(&self) -> String {
        format!("{}#{}", self.key, self.seq_index)
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.packets.iter().map(|&(_, len)| len as f64).collect()
    }

    /// Inter-arrival times, one fewer than the packet count.
    pub fn inter_arrivals(&self) -> Vec<f64> {
        self.packets
            .windows(2)
            .map(|pair| pair[1].0 - pair[0].0)
            .collect()
    }
}

/// Record stream encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Ndjson,
    Csv,
}

impl RecordFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ndjson" => Some(RecordFormat::Ndjson),
            "csv" => Some(RecordFormat::Csv),
            _ => None,
        }
    }
}

/// Result of a lenient parse: records in input order plus a skip tally.
#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub records: Vec<PacketRecord>,
    /// Number of malformed lines skipped (lenient mode only).
    pub skipped: usize,
}

const CSV_HEADER: &str = "ts,src_ip,src_port,dst_ip,dst_port,proto,len";

/// Parse a UTF-8 record stream. In lenient mode malformed lines are counted
/// and skipped; in strict mode the first malformed line aborts.
pub fn parse_records<R: BufRead>(
    reader: R,
    format: RecordFormat,
    strict: bool,
) -> Result<ParseOutcome, IngestError> {
    let mut out = ParseOutcome::default();
    let mut saw_header = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if format == RecordFormat::Csv && !saw_header {
            saw_header = true;
            if trimmed != CSV_HEADER {
                return Err(IngestError::MissingHeader(CSV_HEADER));
            }
            continue;
        }
        match parse_line(trimmed, format) {
            Ok(record) => out.records.push(record),
            Err(reason) => {
                if strict {
                    return Err(IngestError::Malformed { line: idx + 1, reason });
                }
                out.skipped += 1;
            }
        }
    }
    Ok(out)
}

fn parse_line(line: &str, format: RecordFormat) -> Result<PacketRecord, String> {
    let record: PacketRecord = match format {
        RecordFormat::Ndjson => serde_json::from_str(line).map_err(|e| e.to_string())?,
        RecordFormat::Csv => {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(format!("expected 7 fields, got {}", fields.len()));
            }
            PacketRecord {
                ts: fields[0].parse().map_err(|_| "bad ts".to_string())?,
                src_ip: fields[1].to_string(),
                src_port: fields[2].parse().map_err(|_| "bad src_port".to_string())?,
                dst_ip: fields[3].to_string(),
                dst_port: fields[4].parse().map_err(|_| "bad dst_port".to_string())?,
                proto: match fields[5].to_ascii_uppercase().as_str() {
                    "TCP" => Proto::Tcp,
                    "UDP" => Proto::Udp,
                    other => return Err(format!("unknown proto {other}")),
                },
                len: fields[6].parse().map_err(|_| "bad len".to_string())?,
            }
        }
    };
    record.validate()?;
    Ok(record)
}

/// Group records into directional flows and cut each flow instance into
/// windows of up to `window_size` packets.
///
/// Packets of one key are ordered by timestamp (ties keep input order); an
/// idle gap greater than `flow_timeout_secs` starts a new flow instance.
/// A trailing segment of a single packet is discarded, segments of 2 or more
/// packets are kept as short windows.
pub fn segment_flows(
    records: &[PacketRecord],
    window_size: usize,
    flow_timeout_secs: f64,
) -> Result<Vec<Window>, IngestError> {
    if window_size < 2 {
        return Err(IngestError::WindowSize(window_size));
    }

    let mut flows: IndexMap<FlowKey, Vec<(f64, u32)>> = IndexMap::new();
    for record in records {
        flows
            .entry(record.flow_key())
            .or_default()
            .push((record.ts, record.len));
    }

    let mut windows = Vec::new();
    for (key, mut packets) in flows {
        packets.sort_by(|a, b| a.0.total_cmp(&b.0)); // stable: ties keep input order
        let mut seq_index = 0usize;
        let mut instance: Vec<(f64, u32)> = Vec::new();
        let mut last_ts = f64::NEG_INFINITY;
        for packet in packets {
            if !instance.is_empty() && packet.0 - last_ts > flow_timeout_secs {
                emit_instance(&key, &mut instance, window_size, &mut seq_index, &mut windows);
            }
            last_ts = packet.0;
            instance.push(packet);
        }
        emit_instance(&key, &mut instance, window_size, &mut seq_index, &mut windows);
    }
    Ok(windows)
}

fn emit_instance(
    key: &FlowKey,
    instance: &mut Vec<(f64, u32)>,
    window_size: usize,
    seq_index: &mut usize,
    out: &mut Vec<Window>,
) {
    for chunk in instance.chunks(window_size) {
        if chunk.len() < 2 {
            continue; // lone trailing packet carries no time-series signal
        }
        out.push(Window {
            key: key.clone(),
            seq_index: *seq_index,
            packets: chunk.to_vec(),
            label: None,
        });
        *seq_index += 1;
    }
    instance.clear();
}

/// Fraction of all packets whose length falls in each inclusive byte range.
pub fn length_distribution(windows: &[Window], ranges: &[(u32, u32)]) -> Vec<f64> {
    let total: usize = windows.iter().map(|w| w.packets.len()).sum();
    ranges
        .iter()
        .map(|&(lo, hi)| {
            if total == 0 {
                return 0.0;
            }
            let hits = windows
                .iter()
                .flat_map(|w| w.packets.iter())
                .filter(|&&(_, len)| len >= lo && len <= hi)
                .count();
            hits as f64 / total as f64
        })
        .collect()
}

/// Attach class labels to windows from a per-flow-key label map.
pub fn attach_labels(windows: &mut [Window], labels: &HashMap<FlowKey, Label>) {
    for window in windows.iter_mut() {
        if let Some(&label) = labels.get(&window.key) {
            window.label = Some(label);
        }
    }
}

/// Serialize windows as NDJSON, one window per line.
pub fn write_windows<W: std::io::Write>(mut writer: W, windows: &[Window]) -> Result<(), IngestError> {
    for window in windows {
        serde_json::to_writer(&mut writer, window).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Read an NDJSON windows file produced by [`write_windows`].
pub fn read_windows<R: BufRead>(reader: R) -> Result<Vec<Window>, IngestError> {
    let mut windows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let window: Window = serde_json::from_str(&line).map_err(|e| IngestError::Malformed {
            line: idx + 1,
            reason: e.to_string(),
        })?;
        windows.push(window);
    }
    Ok(windows)
}

/// Read a `src_ip,src_port,dst_ip,dst_port,proto,label` CSV into a label map.
pub fn read_labels<R: BufRead>(reader: R) -> Result<HashMap<FlowKey, Label>, IngestError> {
    let mut map = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || idx == 0 && trimmed.starts_with("src_ip") {
            continue;
        }
        let err = |reason: &str| IngestError::Malformed {
            line: idx + 1,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 6 {
            return Err(err("expected 6 fields"));
        }
        let key = FlowKey {
            src_ip: fields[0].to_string(),
            src_port: fields[1].parse().map_err(|_| err("bad src_port"))?,
            dst_ip: fields[2].to_string(),
            dst_port: fields[3].parse().map_err(|_| err("bad dst_port"))?,
            proto: match fields[4].to_ascii_uppercase().as_str() {
                "TCP" => Proto::Tcp,
                "UDP" => Proto::Udp,
                _ => return Err(err("unknown proto")),
            },
        };
        let label = Label::parse(fields[5]).ok_or_else(|| err("unknown label"))?;
        map.insert(key, label);
    }
    Ok(map)
}

pub fn write_labels<W: std::io::Write>(
    mut writer: W,
    labels: &[(FlowKey, Label)],
) -> Result<(), IngestError> {
    writeln!(writer, "src_ip,src_port,dst_ip,dst_port,proto,label")?;
    for (key, label) in labels {
        writeln!(
            writer,
            "{},{},{},{},{},{}",
            key.src_ip,
            key.src_port,
            key.dst_ip,
            key.dst_port,
            key.proto,
            label.as_str()
        )?;
    }
    Ok(())
}
