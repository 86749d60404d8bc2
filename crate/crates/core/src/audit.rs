//! Hash-chained compliance log.
//!
//! Each entry's hash covers the previous entry's hash followed by a
//! length-prefixed serialization of its own fields, so editing any stored
//! entry breaks the chain at that entry. The genesis entry chains to 32 zero
//! bytes.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

/// Action verbs written by the rest of the system.
pub mod actions {
    pub const CREATE_BUCKET: &str = "create-bucket";
    pub const PUT_OBJECT: &str = "put-object";
    pub const GET_OBJECT: &str = "get-object";
    pub const DELETE_OBJECT: &str = "delete-object";
    pub const SET_LIFECYCLE: &str = "set-lifecycle";
    pub const EXPIRE_OBJECT: &str = "expire-object";
    pub const CREATE_PROJECT: &str = "create-project";
    pub const QUOTA_CHANGE: &str = "quota-change";
    pub const CREATE_VOLUME: &str = "create-volume";
    pub const SNAPSHOT_VOLUME: &str = "snapshot-volume";
    pub const DELETE_VOLUME: &str = "delete-volume";
    pub const LAUNCH_VM: &str = "launch-vm";
    pub const DELETE_VM: &str = "delete-vm";
    pub const DRAIN_NODE: &str = "drain-node";
    pub const UNDRAIN_NODE: &str = "undrain-node";
    pub const POLICY_DENY: &str = "policy-deny";
    pub const RULES_REPLACE: &str = "rules-replace";
    pub const FAIL_OSD: &str = "fail-osd";
    pub const REPAIR_POOL: &str = "repair-pool";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Digest(#[serde(with = "crate::serde_util::hex_bytes_32")] pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0; 32]);
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Ok,
    Denied,
    Error,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Ok => "ok",
            Outcome::Denied => "denied",
            Outcome::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: u64,
    pub ts: u64,
    pub actor: String,
    pub action: String,
    pub resource: String,
    pub outcome: Outcome,
    pub prev_hash: Digest,
    pub entry_hash: Digest,
}

impl AuditEntry {
    pub fn compute_hash(&self) -> Digest {
        let mut h = Sha256::new();
        h.update(self.prev_hash.0);
        h.update(self.seq.to_be_bytes());
        h.update(self.ts.to_be_bytes());
        for field in [
            self.actor.as_str(),
            self.action.as_str(),
            self.resource.as_str(),
            self.outcome.as_str(),
        ] {
            h.update((field.len() as u32).to_be_bytes());
            h.update(field.as_bytes());
        }
        Digest(h.finalize().into())
    }

    /// One canonical line, no trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("entry serializes")
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AuditError {
    #[error("clock regression: {ts} is earlier than last entry at {last}")]
    ClockRegression { ts: u64, last: u64 },
}

impl AuditError {
    pub fn name(&self) -> &'static str {
        match self {
            AuditError::ClockRegression { .. } => "ClockRegression",
        }
    }
}

/// Result of a chain verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainStatus {
    Ok,
    /// First sequence position whose stored content fails to verify.
    BadAt(u64),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditFilter {
    pub actor: Option<String>,
    pub resource: Option<String>,
    /// Inclusive bounds on `ts`.
    pub since: Option<u64>,
    pub until: Option<u64>,
}

impl AuditFilter {
    pub fn matches(&self, e: &AuditEntry) -> bool {
        self.actor.as_ref().is_none_or(|a| *a == e.actor)
            && self.resource.as_ref().is_none_or(|r| *r == e.resource)
            && self.since.is_none_or(|s| e.ts >= s)
            && self.until.is_none_or(|u| e.ts <= u)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AuditLog {
    entries: Vec<AuditEntry>,
}

impl AuditLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[AuditEntry] {
        &self.entries
    }

    /// Mutable access for tamper experiments.
    pub fn entries_mut(&mut self) -> &mut [AuditEntry] {
        &mut self.entries
    }

    pub fn last_ts(&self) -> Option<u64> {
        self.entries.last().map(|e| e.ts)
    }

    pub fn append(
        &mut self,
        ts: u64,
        actor: &str,
        action: &str,
        resource: &str,
        outcome: Outcome,
    ) -> Result<&AuditEntry, AuditError> {
        let (seq, prev_hash) = match self.entries.last() {
            Some(last) if ts < last.ts => {
                return Err(AuditError::ClockRegression { ts, last: last.ts })
            }
            Some(last) => (last.seq + 1, last.entry_hash),
            None => (0, Digest::ZERO),
        };
        let mut entry = AuditEntry {
            seq,
            ts,
            actor: actor.to_string(),
            action: action.to_string(),
            resource: resource.to_string(),
            outcome,
            prev_hash,
            entry_hash: Digest::ZERO,
        };
        entry.entry_hash = entry.compute_hash();
        self.entries.push(entry);
        Ok(self.entries.last().unwrap())
    }

    pub fn verify_chain(&self) -> ChainStatus {
        verify_entries(self.entries.iter().map(Ok))
    }

    pub fn query(&self, filter: &AuditFilter) -> Vec<&AuditEntry> {
        self.entries.iter().filter(|e| filter.matches(e)).collect()
    }

    /// Canonical lines from `from_seq` onward, each newline-terminated.
    pub fn lines_from(&self, from_seq: usize) -> String {
        self.entries
            .iter()
            .skip(from_seq)
            .map(|e| e.to_line() + "\n")
            .collect()
    }

    pub fn to_lines(&self) -> String {
        self.lines_from(0)
    }

    /// Parses a persisted log. Use [`verify_lines`] first when the text is
    /// untrusted; this only fails on syntax.
    pub fn from_lines(text: &str) -> Result<Self, serde_json::Error> {
        let entries = text
            .lines()
            .filter(|l| !l.is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Self { entries })
    }
}

/// Verifies persisted log text, line by line. A line that does not parse,
/// or that is not in canonical form, fails at its position.
pub fn verify_lines(text: &str) -> ChainStatus {
    verify_bytes(text.as_bytes())
}

/// Like [`verify_lines`] for raw file contents; a line that is not UTF-8
/// fails at its position.
pub fn verify_bytes(data: &[u8]) -> ChainStatus {
    let lines = data.split(|&b| b == b'\n').filter(|l| !l.is_empty());
    verify_entries(lines.map(|raw| {
        let line = std::str::from_utf8(raw).map_err(|_| ())?;
        let entry: AuditEntry = serde_json::from_str(line).map_err(|_| ())?;
        if entry.to_line() != line {
            return Err(());
        }
        Ok(entry)
    }))
}

fn verify_entries<E: std::borrow::Borrow<AuditEntry>>(
    entries: impl Iterator<Item = Result<E, ()>>,
) -> ChainStatus {
    let mut prev = Digest::ZERO;
    let mut last_ts = 0;
    for (i, entry) in entries.enumerate() {
        let i = i as u64;
        let Ok(entry) = entry else {
            return ChainStatus::BadAt(i);
        };
        let e = entry.borrow();
        if e.seq != i || e.prev_hash != prev || e.ts < last_ts || e.compute_hash() != e.entry_hash {
            return ChainStatus::BadAt(i);
        }
        prev = e.entry_hash;
        last_ts = e.ts;
    }
    ChainStatus::Ok
}
