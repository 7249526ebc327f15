//! Active verification of suspicious endpoints.
//!
//! For each target the prober confirms TCP reachability, then walks an
//! ordered list of (transport, protocol variant) attempts: it sends the
//! variant's subscription message and classifies the first response line or
//! frame. Mining pools answer subscription messages with JSON carrying `id`
//! plus `result`/`error` fields (or `r`/`e` for the browser-miner dialect),
//! whether the subscription succeeds or is rejected — either way the endpoint
//! has identified itself as a pool.
//!
//! The whole probe runs under one deadline of connect + read timeout
//! (255 ms with defaults), so unresponsive targets cost a bounded, small
//! amount of time.

mod transport;

use std::collections::VecDeque;
use std::fmt;
use std::io::BufRead;
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use transport::{attempt_tcp, attempt_tls, attempt_websocket, AttemptResult};

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("bad target line `{0}`: expected host:port")]
    BadTarget(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mining protocol dialects the prober speaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProtocolVariant {
    #[serde(rename = "btc")]
    StratumBtc,
    #[serde(rename = "xmr")]
    StratumXmr,
    #[serde(rename = "eth")]
    StratumEth,
    #[serde(rename = "webmine")]
    StratumWebmineXmr,
}

impl ProtocolVariant {
    pub const ALL: [ProtocolVariant; 4] = [
        ProtocolVariant::StratumBtc,
        ProtocolVariant::StratumXmr,
        ProtocolVariant::StratumEth,
        ProtocolVariant::StratumWebmineXmr,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "btc" => Some(ProtocolVariant::StratumBtc),
            "xmr" => Some(ProtocolVariant::StratumXmr),
            "eth" => Some(ProtocolVariant::StratumEth),
            "webmine" => Some(ProtocolVariant::StratumWebmineXmr),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolVariant::StratumBtc => "btc",
            ProtocolVariant::StratumXmr => "xmr",
            ProtocolVariant::StratumEth => "eth",
            ProtocolVariant::StratumWebmineXmr => "webmine",
        }
    }
}

impl fmt::Display for ProtocolVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Channel type for an attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transport {
    Tcp,
    Tls,
    WebSocket,
}

/// One endpoint to verify and the transports to try, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTarget {
    pub host: String,
    pub port: u16,
    #[serde(default = "default_transports")]
    pub transports: Vec<Transport>,
}

fn default_transports() -> Vec<Transport> {
    vec![Transport::Tcp, Transport::Tls, Transport::WebSocket]
}

impl ProbeTarget {
    pub fn new(host: impl Into<String>, port: u16) -> ProbeTarget {
        ProbeTarget {
            host: host.into(),
            port,
            transports: default_transports(),
        }
    }

    pub fn with_transports(mut self, transports: Vec<Transport>) -> ProbeTarget {
        self.transports = transports;
        self
    }
}

/// Probe timeouts, concurrency bound and dummy credentials. The total
/// per-target budget is connect + read timeout: 255 ms with the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub connect_timeout_ms: u64,
    pub read_timeout_ms: u64,
    pub max_parallel: usize,
    pub dummy_wallet: String,
    pub dummy_token: String,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            connect_timeout_ms: 100,
            read_timeout_ms: 155,
            max_parallel: 32,
            dummy_wallet: "0x0000000000000000000000000000000000000000".to_string(),
            dummy_token: "00000000-0000-0000-0000-000000000000".to_string(),
        }
    }
}

impl ProbeConfig {
    pub fn total_budget(&self) -> Duration {
        Duration::from_millis(self.connect_timeout_ms + self.read_timeout_ms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeOutcome {
    PoolPositive,
    PoolNegative,
    Unreachable,
    Silent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseKind {
    Success,
    Error,
}

/// Per-target probe result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeVerdict {
    pub host: String,
    pub port: u16,
    pub outcome: ProbeOutcome,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub matched_variant: Option<ProtocolVariant>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub response_kind: Option<ResponseKind>,
    /// First response bytes, lossy UTF-8, capped at 1 KiB.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub excerpt: Option<String>,
    pub round_trip_ms: u64,
}

const EXCERPT_CAP: usize = 1024;

fn excerpt_of(bytes: &[u8]) -> String {
    let mut text = String::from_utf8_lossy(bytes).into_owned();
    text.truncate(EXCERPT_CAP);
    text
}

// Subscription messages. Field order matters: these serialize to the exact
// wire bytes.

#[derive(Serialize)]
struct BtcSubscribe {
    id: u32,
    method: &'static str,
    params: [&'static str; 0],
}

#[derive(Serialize)]
struct XmrLoginParams<'a> {
    login: &'a str,
    pass: &'static str,
}

#[derive(Serialize)]
struct XmrLogin<'a> {
    id: u32,
    jsonrpc: &'static str,
    method: &'static str,
    params: XmrLoginParams<'a>,
}

#[derive(Serialize)]
struct EthLogin<'a> {
    id: u32,
    jsonrpc: &'static str,
    method: &'static str,
    params: [&'a str; 1],
}

#[derive(Serialize)]
struct WebmineParams<'a> {
    token: &'a str,
}

#[derive(Serialize)]
struct WebmineStart<'a> {
    id: &'static str,
    m: &'static str,
    p: WebmineParams<'a>,
    subscribe: u32,
}

/// Build the subscription message for a variant: one line of JSON, LF
/// terminated. Output bytes are stable for a fixed config.
pub fn build_message(variant: ProtocolVariant, config: &ProbeConfig) -> Vec<u8> {
    let json = match variant {
        ProtocolVariant::StratumBtc => serde_json::to_string(&BtcSubscribe {
            id: 1,
            method: "mining.subscribe",
            params: [],
        }),
        ProtocolVariant::StratumXmr => serde_json::to_string(&XmrLogin {
            id: 1,
            jsonrpc: "2.0",
            method: "login",
            params: XmrLoginParams {
                login: &config.dummy_wallet,
                pass: "x",
            },
        }),
        ProtocolVariant::StratumEth => serde_json::to_string(&EthLogin {
            id: 1,
            jsonrpc: "2.0",
            method: "eth_submitLogin",
            params: [config.dummy_wallet.as_str()],
        }),
        ProtocolVariant::StratumWebmineXmr => serde_json::to_string(&WebmineStart {
            id: "start",
            m: "start",
            p: WebmineParams {
                token: &config.dummy_token,
            },
            subscribe: 1,
        }),
    };
    let mut bytes = json.expect("static message shapes always serialize").into_bytes();
    bytes.push(b'\n');
    bytes
}

/// Classification of one response body.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    PoolPositive(ResponseKind),
    PoolNegative,
}

/// Total classification of a response body: never fails, everything
/// unparseable or lacking the protocol keys is negative.
///
/// Standard Stratum variants are positive when the JSON object carries `id`
/// and a `result` (even null) or `error` member; the browser-miner dialect
/// uses `r`/`e` instead. The response is an error when the error member is
/// present and non-null.
pub fn classify_response(variant: ProtocolVariant, body: &[u8]) -> Classification {
    let Ok(text) = std::str::from_utf8(body) else {
        return Classification::PoolNegative;
    };
    let Ok(value) = serde_json::from_str::<serde_json::Value>(text.trim()) else {
        return Classification::PoolNegative;
    };
    let Some(object) = value.as_object() else {
        return Classification::PoolNegative;
    };
    if !object.contains_key("id") {
        return Classification::PoolNegative;
    }
    let (result_key, error_key) = match variant {
        ProtocolVariant::StratumWebmineXmr => ("r", "e"),
        _ => ("result", "error"),
    };
    let error = object.get(error_key);
    if !object.contains_key(result_key) && error.is_none() {
        return Classification::PoolNegative;
    }
    match error {
        Some(v) if !v.is_null() => Classification::PoolPositive(ResponseKind::Error),
        _ => Classification::PoolPositive(ResponseKind::Success),
    }
}

fn resolve(host: &str, port: u16) -> Option<SocketAddr> {
    (host, port).to_socket_addrs().ok()?.next()
}

/// The ordered attempt plan: per transport in target order, each applicable
/// variant. The WebSocket dialect only travels over WebSocket; the line
/// protocols only over TCP/TLS.
fn attempt_plan(
    transports: &[Transport],
    variants: &[ProtocolVariant],
) -> Vec<(Transport, ProtocolVariant)> {
    let mut plan = Vec::new();
    for &transport in transports {
        for &variant in variants {
            let is_ws_variant = variant == ProtocolVariant::StratumWebmineXmr;
            match transport {
                Transport::WebSocket if is_ws_variant => plan.push((transport, variant)),
                Transport::Tcp | Transport::Tls if !is_ws_variant => plan.push((transport, variant)),
                _ => {}
            }
        }
    }
    plan
}

/// Probe one endpoint. Outcomes, in precedence order: the first attempt that
/// classifies as a pool wins (PoolPositive); otherwise any response at all is
/// PoolNegative; otherwise a reachable target that never sent a byte is
/// Silent; a failed TCP connect or DNS lookup is Unreachable.
pub fn probe_one(
    target: &ProbeTarget,
    variants: &[ProtocolVariant],
    config: &ProbeConfig,
) -> ProbeVerdict {
    let start = Instant::now();
    let deadline = start + config.total_budget();

    let mut verdict = ProbeVerdict {
        host: target.host.clone(),
        port: target.port,
        outcome: ProbeOutcome::Unreachable,
        matched_variant: None,
        response_kind: None,
        excerpt: None,
        round_trip_ms: 0,
    };

    let Some(addr) = resolve(&target.host, target.port) else {
        verdict.round_trip_ms = start.elapsed().as_millis() as u64;
        return verdict;
    };
    let connect_timeout = Duration::from_millis(config.connect_timeout_ms);
    let read_timeout = Duration::from_millis(config.read_timeout_ms);

    // Availability check before speaking any protocol.
    match TcpStream::connect_timeout(&addr, connect_timeout) {
        Ok(stream) => drop(stream),
        Err(_) => {
            verdict.round_trip_ms = start.elapsed().as_millis() as u64;
            return verdict;
        }
    }

    let mut first_response: Option<Vec<u8>> = None;

    for (transport, variant) in attempt_plan(&target.transports, variants) {
        if deadline.saturating_duration_since(Instant::now()) < Duration::from_millis(2) {
            break;
        }
        let message = build_message(variant, config);
        let result = match transport {
            Transport::Tcp => attempt_tcp(addr, &message, connect_timeout, read_timeout, deadline),
            Transport::Tls => attempt_tls(
                addr,
                &target.host,
                &message,
                connect_timeout,
                read_timeout,
                deadline,
            ),
            Transport::WebSocket => attempt_websocket(
                addr,
                &target.host,
                &message,
                connect_timeout,
                read_timeout,
                deadline,
            ),
        };
        match result {
            AttemptResult::Response(bytes) => {
                if let Classification::PoolPositive(kind) = classify_response(variant, &bytes) {
                    verdict.outcome = ProbeOutcome::PoolPositive;
                    verdict.matched_variant = Some(variant);
                    verdict.response_kind = Some(kind);
                    verdict.excerpt = Some(excerpt_of(&bytes));
                    verdict.round_trip_ms = start.elapsed().as_millis() as u64;
                    return verdict;
                }
                if first_response.is_none() {
                    first_response = Some(bytes);
                }
            }
            AttemptResult::NoBytes | AttemptResult::Failed => {}
        }
    }

    // The target was reachable: responses that never matched a pool schema
    // make it negative, total silence makes it silent.
    verdict.outcome = match &first_response {
        Some(_) => ProbeOutcome::PoolNegative,
        None => ProbeOutcome::Silent,
    };
    verdict.excerpt = first_response.as_deref().map(excerpt_of);
    verdict.round_trip_ms = start.elapsed().as_millis() as u64;
    verdict
}

/// Probe many endpoints with at most `config.max_parallel` in flight.
/// Verdicts come back in input order; failures are verdicts, not errors.
pub fn probe_batch(
    targets: &[ProbeTarget],
    variants: &[ProtocolVariant],
    config: &ProbeConfig,
) -> Vec<ProbeVerdict> {
    if targets.is_empty() {
        return Vec::new();
    }
    let workers = config.max_parallel.max(1).min(targets.len());
    let queue: Mutex<VecDeque<(usize, &ProbeTarget)>> =
        Mutex::new(targets.iter().enumerate().collect());
    let results: Mutex<Vec<Option<ProbeVerdict>>> = Mutex::new(vec![None; targets.len()]);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let job = queue.lock().expect("queue lock").pop_front();
                let Some((index, target)) = job else { break };
                let verdict = probe_one(target, variants, config);
                results.lock().expect("results lock")[index] = Some(verdict);
            });
        }
    });

    results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|v| v.expect("every job ran"))
        .collect()
}

/// Parse a targets file: one `host:port` per line, `#` comments allowed.
pub fn read_targets<R: BufRead>(reader: R) -> Result<Vec<ProbeTarget>, ProbeError> {
    let mut targets = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (host, port) = trimmed
            .rsplit_once(':')
            .ok_or_else(|| ProbeError::BadTarget(trimmed.to_string()))?;
        let port: u16 = port
            .parse()
            .map_err(|_| ProbeError::BadTarget(trimmed.to_string()))?;
        targets.push(ProbeTarget::new(host, port));
    }
    Ok(targets)
}

pub fn write_verdicts<W: std::io::Write>(
    mut writer: W,
    verdicts: &[ProbeVerdict],
) -> Result<(), ProbeError> {
    for verdict in verdicts {
        serde_json::to_writer(&mut writer, verdict).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
