//! Dynamic blacklist of verified mining-pool endpoints.
//!
//! Persistence is an append-only NDJSON journal: every confirm writes the
//! full post-update entry as one line, so reloading is a fold that keeps the
//! last line per `(host, port)` key. Real-time mode persists each confirm
//! immediately; batch mode stages lines in memory until [`BlacklistStore::flush`]
//! (the live view always includes staged entries). Compaction rewrites the
//! journal as the live view.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::probe::{ProbeOutcome, ProbeVerdict, ProtocolVariant};

#[derive(Debug, Error)]
pub enum BlacklistError {
    #[error("journal line {0} is corrupt: {1}")]
    CorruptJournal(usize, String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntrySource {
    ProbeConfirmed,
    Manual,
}

/// One confirmed endpoint. `(host, port)` is the key; re-confirmations bump
/// `last_confirmed` and `confirm_count` but never move `first_seen`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlacklistEntry {
    pub host: String,
    pub port: u16,
    pub variant: ProtocolVariant,
    pub first_seen: DateTime<Utc>,
    pub last_confirmed: DateTime<Utc>,
    pub source: EntrySource,
    pub confirm_count: u64,
}

/// When confirmations reach the journal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    Realtime,
    Batch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlushOutcome {
    /// Entries appended to the journal.
    Flushed(usize),
    /// Flush called on a realtime-mode store; nothing to do.
    RealtimeNoop,
}

/// Single-writer blacklist store backed by an append-only journal.
pub struct BlacklistStore {
    journal_path: PathBuf,
    mode: UpdateMode,
    live: BTreeMap<(String, u16), BlacklistEntry>,
    /// Journal lines staged for the next flush (batch mode only).
    staged: Vec<BlacklistEntry>,
}

impl BlacklistStore {
    /// Open a store, replaying the journal if it exists. A truncated final
    /// line (a crash artifact) is tolerated and dropped; corruption anywhere
    /// else is an error.
    pub fn open(journal_path: impl Into<PathBuf>, mode: UpdateMode) -> Result<Self, BlacklistError> {
        let journal_path = journal_path.into();
        let mut live = BTreeMap::new();
        if journal_path.exists() {
            let reader = BufReader::new(File::open(&journal_path)?);
            let lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
            let last = lines.len().saturating_sub(1);
            for (idx, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<BlacklistEntry>(line) {
                    Ok(entry) => {
                        live.insert((entry.host.clone(), entry.port), entry);
                    }
                    Err(err) if idx == last => {
                        // Partial trailing write; ignore.
                        let _ = err;
                    }
                    Err(err) => {
                        return Err(BlacklistError::CorruptJournal(idx + 1, err.to_string()));
                    }
                }
            }
        }
        Ok(BlacklistStore {
            journal_path,
            mode,
            live,
            staged: Vec::new(),
        })
    }

    pub fn mode(&self) -> UpdateMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    /// Fold a probe verdict into the store. Only pool-positive verdicts
    /// change anything; the updated entry is persisted (realtime) or staged
    /// (batch). On an I/O failure the update stays staged and the error is
    /// surfaced.
    pub fn confirm(&mut self, verdict: &ProbeVerdict, now: DateTime<Utc>) -> Result<bool, BlacklistError> {
        if verdict.outcome != ProbeOutcome::PoolPositive {
            return Ok(false);
        }
        let variant = verdict
            .matched_variant
            .expect("pool-positive verdicts carry a variant");
        self.upsert(
            verdict.host.clone(),
            verdict.port,
            variant,
            EntrySource::ProbeConfirmed,
            now,
        )?;
        Ok(true)
    }

    /// Record a manually vetted endpoint.
    pub fn add_manual(
        &mut self,
        host: String,
        port: u16,
        variant: ProtocolVariant,
        now: DateTime<Utc>,
    ) -> Result<(), BlacklistError> {
        self.upsert(host, port, variant, EntrySource::Manual, now)
    }

    fn upsert(
        &mut self,
        host: String,
        port: u16,
        variant: ProtocolVariant,
        source: EntrySource,
        now: DateTime<Utc>,
    ) -> Result<(), BlacklistError> {
        let entry = self
            .live
            .entry((host.clone(), port))
            .and_modify(|e| {
                e.last_confirmed = now;
                e.confirm_count += 1;
            })
            .or_insert(BlacklistEntry {
                host,
                port,
                variant,
                first_seen: now,
                last_confirmed: now,
                source,
                confirm_count: 1,
            })
            .clone();

        match self.mode {
            UpdateMode::Realtime => {
                self.staged.push(entry);
                self.write_staged()
            }
            UpdateMode::Batch => {
                self.staged.push(entry);
                Ok(())
            }
        }
    }

    /// Append staged entries to the journal (batch mode). Staging survives an
    /// I/O failure.
    pub fn flush(&mut self, _now: DateTime<Utc>) -> Result<FlushOutcome, BlacklistError> {
        match self.mode {
            UpdateMode::Realtime => Ok(FlushOutcome::RealtimeNoop),
            UpdateMode::Batch => {
                let count = self.staged.len();
                self.write_staged()?;
                Ok(FlushOutcome::Flushed(count))
            }
        }
    }

    fn write_staged(&mut self) -> Result<(), BlacklistError> {
        if self.staged.is_empty() {
            return Ok(());
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.journal_path)?;
        let mut payload = Vec::new();
        for entry in &self.staged {
            serde_json::to_writer(&mut payload, entry).map_err(std::io::Error::from)?;
            payload.push(b'\n');
        }
        file.write_all(&payload)?;
        file.flush()?;
        self.staged.clear();
        Ok(())
    }

    /// Live-view lookup; staged (unflushed) entries are visible.
    pub fn query(&self, host: &str, port: u16) -> Option<&BlacklistEntry> {
        self.live.get(&(host.to_string(), port))
    }

    pub fn entries(&self) -> impl Iterator<Item = &BlacklistEntry> {
        self.live.values()
    }

    /// Deny-list text: `host:port` lines, lexicographically sorted, unique.
    /// `max_age` drops entries whose last confirmation is older than now
    /// minus the given duration.
    pub fn export(&self, now: DateTime<Utc>, max_age: Option<Duration>) -> String {
        let mut lines: Vec<String> = self
            .live
            .values()
            .filter(|e| match max_age {
                Some(age) => e.last_confirmed >= now - age,
                None => true,
            })
            .map(|e| format!("{}:{}", e.host, e.port))
            .collect();
        lines.sort();
        lines.dedup();
        let mut out = lines.join("\n");
        if !out.is_empty() {
            out.push('\n');
        }
        out
    }

    /// Rewrite the journal as the live view (one line per key). Uses a
    /// temp-file-and-rename so a crash never leaves a half journal.
    pub fn compact(&mut self) -> Result<(), BlacklistError> {
        self.write_staged()?;
        let tmp = self.journal_path.with_extension("journal.tmp");
        {
            let mut file = File::create(&tmp)?;
            for entry in self.live.values() {
                serde_json::to_writer(&mut file, entry).map_err(std::io::Error::from)?;
                file.write_all(b"\n")?;
            }
            file.flush()?;
        }
        fs::rename(&tmp, &self.journal_path)?;
        Ok(())
    }

    pub fn journal_path(&self) -> &Path {
        &self.journal_path
    }
}

/// Parse a human duration like `30d`, `12h`, `15m` or `90s`.
pub fn parse_max_age(text: &str) -> Option<Duration> {
    let (value, unit) = text.split_at(text.len().checked_sub(1)?);
    let value: i64 = value.parse().ok()?;
    match unit {
        "d" => Some(Duration::days(value)),
        "h" => Some(Duration::hours(value)),
        "m" => Some(Duration::minutes(value)),
        "s" => Some(Duration::seconds(value)),
        _ => None,
    }
}
