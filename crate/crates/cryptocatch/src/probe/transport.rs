//! Blocking probe transports: newline-delimited JSON over raw TCP, the same
//! framing over TLS (certificate validation intentionally disabled — pools
//! run self-signed certs), and WebSocket text frames.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rustls::client::danger::{HandshakeSignatureValid, ServerCertVerified, ServerCertVerifier};
use rustls::pki_types::{CertificateDer, ServerName, UnixTime};
use rustls::{ClientConfig, ClientConnection, DigitallySignedStruct, SignatureScheme, StreamOwned};

/// Cap on the first response line/frame.
const RESPONSE_CAP: usize = 64 * 1024;
const CHUNK: usize = 2048;

#[derive(Debug)]
pub(crate) enum AttemptResult {
    /// First response line/frame received.
    Response(Vec<u8>),
    /// Channel established, nothing arrived within the budget.
    NoBytes,
    /// Channel could not be established (refused connect, failed TLS or
    /// WebSocket handshake); skipped, not fatal.
    Failed,
}

fn remaining(deadline: Instant) -> Duration {
    deadline.saturating_duration_since(Instant::now())
}

fn connect(addr: SocketAddr, connect_timeout: Duration, deadline: Instant) -> Option<TcpStream> {
    let budget = connect_timeout.min(remaining(deadline));
    if budget.is_zero() {
        return None;
    }
    TcpStream::connect_timeout(&addr, budget).ok()
}

/// Read until the first LF, EOF, byte cap or deadline. Returns the collected
/// bytes (cut at the newline) or `None` when nothing arrived.
fn read_first_line<S: Read>(
    stream: &mut S,
    set_timeout: &dyn Fn(Duration),
    deadline: Instant,
) -> Option<Vec<u8>> {
    let mut buf = Vec::new();
    let mut chunk = [0u8; CHUNK];
    loop {
        let left = remaining(deadline);
        if left.is_zero() {
            break;
        }
        set_timeout(left);
        match stream.read(&mut chunk) {
            Ok(0) => break,
            Ok(n) => {
                buf.extend_from_slice(&chunk[..n]);
                if buf.contains(&b'\n') || buf.len() >= RESPONSE_CAP {
                    break;
                }
            }
            Err(_) => break, // timeout, reset, TLS error: keep what we have
        }
    }
    if buf.is_empty() {
        return None;
    }
    if let Some(pos) = buf.iter().position(|&b| b == b'\n') {
        buf.truncate(pos);
    }
    buf.truncate(RESPONSE_CAP);
    Some(buf)
}

pub(crate) fn attempt_tcp(
    addr: SocketAddr,
    message: &[u8],
    connect_timeout: Duration,
    read_timeout: Duration,
    deadline: Instant,
) -> AttemptResult {
    let Some(mut stream) = connect(addr, connect_timeout, deadline) else {
        return AttemptResult::Failed;
    };
    let _ = stream.set_nodelay(true);
    let _ = stream.set_write_timeout(Some(read_timeout.max(Duration::from_millis(1))));
    if stream.write_all(message).is_err() {
        return AttemptResult::Failed;
    }
    let read_deadline = Instant::now() + read_timeout.min(remaining(deadline));
    let setter = {
        let stream = stream.try_clone();
        move |d: Duration| {
            if let Ok(s) = &stream {
                let _ = s.set_read_timeout(Some(d.max(Duration::from_millis(1))));
            }
        }
    };
    match read_first_line(&mut stream, &setter, read_deadline) {
        Some(bytes) => AttemptResult::Response(bytes),
        None => AttemptResult::NoBytes,
    }
}

/// Accept-anything certificate verifier for probing.
#[derive(Debug)]
struct NoVerification;

impl ServerCertVerifier for NoVerification {
    fn verify_server_cert(
        &self,
        _end_entity: &CertificateDer<'_>,
        _intermediates: &[CertificateDer<'_>],
        _server_name: &ServerName<'_>,
        _ocsp_response: &[u8],
        _now: UnixTime,
    ) -> Result<ServerCertVerified, rustls::Error> {
        Ok(ServerCertVerified::assertion())
    }

    fn verify_tls12_signature(
        &self,
        _message: &[u8],
        _cert: &CertificateDer<'_>,
        _dss: &DigitallySignedStruct,
    ) -> Result<HandshakeSignatureValid, rustls::Error> {
        Ok(HandshakeSignatureValid::assertion())
    }

    fn verify_tls13_signature(
        &self,
        _message: &[u8],
        _cert: &CertificateDer<'_>,
        _dss: &DigitallySignedStruct,
    ) -> Result<HandshakeSignatureValid, rustls::Error> {
        Ok(HandshakeSignatureValid::assertion())
    }

    fn supported_verify_schemes(&self) -> Vec<SignatureScheme> {
        rustls::crypto::aws_lc_rs::default_provider()
            .signature_verification_algorithms
            .supported_schemes()
    }
}

fn tls_client_config() -> Arc<ClientConfig> {
    let config = ClientConfig::builder()
        .dangerous()
        .with_custom_certificate_verifier(Arc::new(NoVerification))
        .with_no_client_auth();
    Arc::new(config)
}

pub(crate) fn attempt_tls(
    addr: SocketAddr,
    host: &str,
    message: &[u8],
    connect_timeout: Duration,
    read_timeout: Duration,
    deadline: Instant,
) -> AttemptResult {
    let Some(stream) = connect(addr, connect_timeout, deadline) else {
        return AttemptResult::Failed;
    };
    let _ = stream.set_nodelay(true);
    let _ = stream.set_read_timeout(Some(read_timeout.max(Duration::from_millis(1))));
    let _ = stream.set_write_timeout(Some(read_timeout.max(Duration::from_millis(1))));
    let Ok(server_name) = ServerName::try_from(host.to_string()) else {
        return AttemptResult::Failed;
    };
    let Ok(conn) = ClientConnection::new(tls_client_config(), server_name) else {
        return AttemptResult::Failed;
    };
    let mut tls = StreamOwned::new(conn, stream);
    if tls.write_all(message).is_err() || tls.flush().is_err() {
        return AttemptResult::Failed; // handshake failure surfaces here
    }
    let read_deadline = Instant::now() + read_timeout.min(remaining(deadline));
    let setter = {
        let stream = tls.sock.try_clone();
        move |d: Duration| {
            if let Ok(s) = &stream {
                let _ = s.set_read_timeout(Some(d.max(Duration::from_millis(1))));
            }
        }
    };
    match read_first_line(&mut tls, &setter, read_deadline) {
        Some(bytes) => AttemptResult::Response(bytes),
        None => AttemptResult::NoBytes,
    }
}

pub(crate) fn attempt_websocket(
    addr: SocketAddr,
    host: &str,
    message: &[u8],
    connect_timeout: Duration,
    read_timeout: Duration,
    deadline: Instant,
) -> AttemptResult {
    let Some(stream) = connect(addr, connect_timeout, deadline) else {
        return AttemptResult::Failed;
    };
    let _ = stream.set_nodelay(true);
    let _ = stream.set_read_timeout(Some(read_timeout.max(Duration::from_millis(1))));
    let _ = stream.set_write_timeout(Some(read_timeout.max(Duration::from_millis(1))));
    let url = format!("ws://{}:{}/", host, addr.port());
    let Ok((mut socket, _response)) = tungstenite::client(&url, stream) else {
        return AttemptResult::Failed;
    };
    // Frames carry the bare JSON; the LF is line framing only.
    let text = String::from_utf8_lossy(message).trim_end().to_string();
    if socket.send(tungstenite::Message::Text(text.into())).is_err() {
        return AttemptResult::Failed;
    }
    let read_deadline = Instant::now() + read_timeout.min(remaining(deadline));
    loop {
        if remaining(read_deadline).is_zero() {
            return AttemptResult::NoBytes;
        }
        match socket.read() {
            Ok(tungstenite::Message::Text(t)) => {
                let mut bytes = t.as_bytes().to_vec();
                bytes.truncate(RESPONSE_CAP);
                return AttemptResult::Response(bytes);
            }
            Ok(tungstenite::Message::Binary(b)) => {
                let mut bytes = b.to_vec();
                bytes.truncate(RESPONSE_CAP);
                return AttemptResult::Response(bytes);
            }
            Ok(tungstenite::Message::Close(_)) => return AttemptResult::NoBytes,
            Ok(_) => continue, // ping/pong
            Err(_) => return AttemptResult::NoBytes,
        }
    }
}
