//! Test harness: pool-server emulation and synthetic traffic generation.
//!
//! [`serve_pool`] runs a loopback server speaking one protocol variant with a
//! configurable behavior (answer success, answer error, read-and-never-reply,
//! or cap the number of accepted connections). [`traffic`] synthesizes
//! labeled mining/benign packet-record corpora with the length and timing
//! structure the classifier keys on.

pub mod traffic;

pub use traffic::{synthesize, ProfileKind, SynthProfile};

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use rustls::pki_types::PrivateKeyDer;
use rustls::{ServerConfig, ServerConnection, StreamOwned};
use thiserror::Error;

use crate::probe::ProtocolVariant;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("failed to bind {0}: {1}")]
    Bind(String, std::io::Error),
    #[error("the webmine variant is WebSocket-only and cannot serve TLS")]
    WebmineTls,
    #[error("certificate setup failed: {0}")]
    Certificate(String),
}

/// How an emulated pool treats subscription messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolBehavior {
    /// Reply with the variant's success body.
    RespondSuccess,
    /// Reply with the variant's error body.
    RespondError,
    /// Accept, read, never write a byte (token-gated pools behave this way
    /// toward unregistered clients).
    SilentDrop,
    /// Accept at most `max` connections, drop the rest immediately.
    ConnectionLimit(usize),
}

impl PoolBehavior {
    pub fn parse(s: &str) -> Option<PoolBehavior> {
        match s.to_ascii_lowercase().as_str() {
            "success" => Some(PoolBehavior::RespondSuccess),
            "error" => Some(PoolBehavior::RespondError),
            "silent" => Some(PoolBehavior::SilentDrop),
            other => other
                .strip_prefix("limit:")
                .and_then(|n| n.parse().ok())
                .map(PoolBehavior::ConnectionLimit),
        }
    }
}

/// Canonical response bodies per variant. Byte-stable.
pub fn success_body(variant: ProtocolVariant) -> &'static str {
    match variant {
        ProtocolVariant::StratumBtc => {
            r#"{"id":1,"result":[["mining.set_difficulty","00000001"],["mining.notify","ae6812eb4cd7735a302a8a9dd95cf71f"]],"error":null}"#
        }
        ProtocolVariant::StratumXmr => {
            r#"{"id":1,"jsonrpc":"2.0","result":{"id":"901f4306-e1f1-478b-915c-2d31de631d4b","job":{"algo":"rx/0","blob":"0c0cf9fdd2e605","target":"b88d0600"},"status":"OK"},"error":null}"#
        }
        ProtocolVariant::StratumEth => r#"{"id":1,"jsonrpc":"2.0","result":true,"error":null}"#,
        ProtocolVariant::StratumWebmineXmr => r#"{"r":{"subscribed":0},"id":"start"}"#,
    }
}

pub fn error_body(variant: ProtocolVariant) -> &'static str {
    match variant {
        ProtocolVariant::StratumBtc => r#"{"id":1,"result":false,"error":[20,"Not supported"]}"#,
        ProtocolVariant::StratumXmr => {
            r#"{"id":1,"jsonrpc":"2.0","error":{"code":-1,"message":"Invalid address"}}"#
        }
        ProtocolVariant::StratumEth => {
            r#"{"id":1,"jsonrpc":"2.0","result":null,"error":{"code":-1,"message":"Invalid login"}}"#
        }
        ProtocolVariant::StratumWebmineXmr => r#"{"e":"noRights","id":"start"}"#,
    }
}

/// Does a received line match the variant's subscription schema?
fn matches_subscription(variant: ProtocolVariant, line: &str) -> bool {
    let Ok(value) = serde_json::from_str::<serde_json::Value>(line.trim()) else {
        return false;
    };
    let Some(object) = value.as_object() else {
        return false;
    };
    let method = object.get("method").and_then(|m| m.as_str());
    match variant {
        ProtocolVariant::StratumBtc => method == Some("mining.subscribe"),
        ProtocolVariant::StratumXmr => {
            method == Some("login")
                && object
                    .get("params")
                    .and_then(|p| p.get("login"))
                    .is_some()
        }
        ProtocolVariant::StratumEth => method == Some("eth_submitLogin"),
        ProtocolVariant::StratumWebmineXmr => {
            object.get("m").and_then(|m| m.as_str()) == Some("start")
        }
    }
}

/// Handle to a running emulated pool. Shuts down on drop.
pub struct PoolServer {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    accept_thread: Option<JoinHandle<()>>,
    received: Arc<Mutex<Vec<String>>>,
}

impl PoolServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn port(&self) -> u16 {
        self.addr.port()
    }

    /// Every line/frame the server has received, verbatim.
    pub fn received_lines(&self) -> Vec<String> {
        self.received.lock().expect("received lock").clone()
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Wake the accept loop.
        let _ = TcpStream::connect_timeout(&self.addr, Duration::from_millis(200));
        if let Some(handle) = self.accept_thread.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for PoolServer {
    fn drop(&mut self) {
        if self.accept_thread.is_some() {
            self.stop();
        }
    }
}

/// Start an emulated mining pool.
///
/// `bind` is `host:port` (port 0 picks a free one, see [`PoolServer::addr`]).
/// The standard variants speak newline-delimited JSON over TCP, optionally
/// TLS-wrapped with a fresh self-signed certificate; the webmine variant
/// speaks WebSocket text frames. A line that matches the variant's
/// subscription schema gets the success or error body per behavior; any
/// other line gets the variant's error body.
pub fn serve_pool(
    variant: ProtocolVariant,
    behavior: PoolBehavior,
    bind: &str,
    tls: bool,
) -> Result<PoolServer, SimError> {
    if tls && variant == ProtocolVariant::StratumWebmineXmr {
        return Err(SimError::WebmineTls);
    }
    let listener =
        TcpListener::bind(bind).map_err(|e| SimError::Bind(bind.to_string(), e))?;
    let addr = listener.local_addr().map_err(|e| SimError::Bind(bind.to_string(), e))?;

    let tls_config = if tls { Some(self_signed_config()?) } else { None };
    let shutdown = Arc::new(AtomicBool::new(false));
    let received = Arc::new(Mutex::new(Vec::new()));
    let accepted = Arc::new(AtomicUsize::new(0));

    let accept_thread = {
        let shutdown = Arc::clone(&shutdown);
        let received = Arc::clone(&received);
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                if shutdown.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                if let PoolBehavior::ConnectionLimit(max) = behavior {
                    let n = accepted.fetch_add(1, Ordering::SeqCst);
                    if n >= max {
                        drop(stream); // over the cap: refuse
                        continue;
                    }
                }
                let received = Arc::clone(&received);
                let tls_config = tls_config.clone();
                std::thread::spawn(move || {
                    let _ = stream.set_read_timeout(Some(Duration::from_secs(10)));
                    let _ = stream.set_nodelay(true);
                    match (variant, tls_config) {
                        (ProtocolVariant::StratumWebmineXmr, _) => {
                            handle_websocket(stream, variant, behavior, &received)
                        }
                        (_, Some(config)) => handle_tls(stream, config, variant, behavior, &received),
                        (_, None) => handle_lines(stream, variant, behavior, &received),
                    }
                });
            }
        })
    };

    Ok(PoolServer {
        addr,
        shutdown,
        accept_thread: Some(accept_thread),
        received,
    })
}

fn self_signed_config() -> Result<Arc<ServerConfig>, SimError> {
    let certified = rcgen::generate_simple_self_signed(vec!["localhost".to_string()])
        .map_err(|e| SimError::Certificate(e.to_string()))?;
    let cert_der = certified.cert.der().clone();
    let key_der = PrivateKeyDer::Pkcs8(certified.key_pair.serialize_der().into());
    let config = ServerConfig::builder()
        .with_no_client_auth()
        .with_single_cert(vec![cert_der], key_der)
        .map_err(|e| SimError::Certificate(e.to_string()))?;
    Ok(Arc::new(config))
}

fn reply_for(variant: ProtocolVariant, behavior: PoolBehavior, line: &str) -> Option<String> {
    match behavior {
        PoolBehavior::SilentDrop => None,
        PoolBehavior::RespondSuccess | PoolBehavior::ConnectionLimit(_) => {
            if matches_subscription(variant, line) {
                Some(success_body(variant).to_string())
            } else {
                Some(error_body(variant).to_string())
            }
        }
        PoolBehavior::RespondError => Some(error_body(variant).to_string()),
    }
}

fn serve_line_protocol<S: Read + Write>(
    stream: S,
    variant: ProtocolVariant,
    behavior: PoolBehavior,
    received: &Mutex<Vec<String>>,
) {
    let mut reader = BufReader::new(stream);
    loop {
        let mut line = String::new();
        match reader.read_line(&mut line) {
            Ok(0) | Err(_) => break,
            Ok(_) => {
                let trimmed = line.trim_end().to_string();
                received.lock().expect("received lock").push(trimmed.clone());
                if let Some(reply) = reply_for(variant, behavior, &trimmed) {
                    let stream = reader.get_mut();
                    if stream.write_all(reply.as_bytes()).is_err()
                        || stream.write_all(b"\n").is_err()
                        || stream.flush().is_err()
                    {
                        break;
                    }
                }
            }
        }
    }
}

fn handle_lines(
    stream: TcpStream,
    variant: ProtocolVariant,
    behavior: PoolBehavior,
    received: &Mutex<Vec<String>>,
) {
    serve_line_protocol(stream, variant, behavior, received);
}

fn handle_tls(
    stream: TcpStream,
    config: Arc<ServerConfig>,
    variant: ProtocolVariant,
    behavior: PoolBehavior,
    received: &Mutex<Vec<String>>,
) {
    let Ok(conn) = ServerConnection::new(config) else {
        return;
    };
    let tls = StreamOwned::new(conn, stream);
    serve_line_protocol(tls, variant, behavior, received);
}

fn handle_websocket(
    stream: TcpStream,
    variant: ProtocolVariant,
    behavior: PoolBehavior,
    received: &Mutex<Vec<String>>,
) {
    let Ok(mut socket) = tungstenite::accept(stream) else {
        return;
    };
    loop {
        match socket.read() {
            Ok(tungstenite::Message::Text(text)) => {
                let line = text.to_string();
                received.lock().expect("received lock").push(line.clone());
                if let Some(reply) = reply_for(variant, behavior, &line) {
                    if socket.send(tungstenite::Message::Text(reply.into())).is_err() {
                        break;
                    }
                }
            }
            Ok(tungstenite::Message::Close(_)) | Err(_) => break,
            Ok(_) => continue,
        }
    }
}
