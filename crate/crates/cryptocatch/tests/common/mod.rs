//! Shared fixtures for the integration and acceptance suites.

#![allow(dead_code)]

pub mod oracles;

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use cryptocatch::features::{self, FeatureMatrix};
use cryptocatch::ingest::{self, Label, PacketRecord, Window};
use cryptocatch::sim::{self, SynthProfile};

/// Mining flows split across the seven coins plus benign flows, segmented
/// into labeled windows. Seeds derive from `seed` so corpora with different
/// seeds are disjoint.
pub fn labeled_corpus(mining_flows: usize, benign_flows: usize, seed: u64) -> Vec<Window> {
    let mut records: Vec<PacketRecord> = Vec::new();
    let mut labels: HashMap<_, _> = HashMap::new();
    let per_coin = mining_flows / Label::COINS.len();
    let remainder = mining_flows - per_coin * Label::COINS.len();
    for (i, &coin) in Label::COINS.iter().enumerate() {
        let flows = per_coin + usize::from(i < remainder);
        let (r, l) = sim::synthesize(&SynthProfile::mining(coin, seed.wrapping_add(i as u64)), flows);
        records.extend(r);
        labels.extend(l);
    }
    let (r, l) = sim::synthesize(&SynthProfile::benign(seed.wrapping_add(100)), benign_flows);
    records.extend(r);
    labels.extend(l);

    let mut windows = ingest::segment_flows(&records, 10, 120.0).expect("segmentation");
    ingest::attach_labels(&mut windows, &labels);
    windows
}

/// Feature matrix plus 0/1 mining labels over the default catalog.
pub fn binary_matrix(windows: &[Window]) -> (FeatureMatrix, Vec<usize>) {
    let matrix = FeatureMatrix::from_windows(windows, &features::default_catalog());
    let labels = matrix
        .labels
        .iter()
        .map(|l| usize::from(l.expect("labeled window").is_mining()))
        .collect();
    (matrix, labels)
}

/// What a benign mock replies with when poked.
pub enum MockReply {
    Html,
    JsonEcho,
}

/// A minimal benign TCP service for probe tests. Shuts down on drop.
pub struct MockServer {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn spawn(reply: MockReply) -> MockServer {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock");
        let addr = listener.local_addr().unwrap();
        let shutdown = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&shutdown);
        let thread = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if flag.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(mut stream) = stream else { continue };
                let reply_bytes: Vec<u8> = match reply {
                    MockReply::Html => b"<html><body>It works</body></html>\n".to_vec(),
                    MockReply::JsonEcho => {
                        let _ = stream.set_read_timeout(Some(Duration::from_millis(500)));
                        let mut buf = [0u8; 4096];
                        let n = stream.read(&mut buf).unwrap_or(0);
                        let text = String::from_utf8_lossy(&buf[..n]).trim_end().to_string();
                        let mut line = serde_json::json!({ "echo": text }).to_string().into_bytes();
                        line.push(b'\n');
                        line
                    }
                };
                let _ = stream.write_all(&reply_bytes);
                let _ = stream.flush();
            }
        });
        MockServer {
            addr,
            shutdown,
            thread: Some(thread),
        }
    }

    pub fn port(&self) -> u16 {
        self.addr.port()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect_timeout(&self.addr, Duration::from_millis(200));
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

/// A freshly freed loopback port (bind, note, drop).
pub fn closed_port() -> u16 {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    listener.local_addr().unwrap().port()
}
