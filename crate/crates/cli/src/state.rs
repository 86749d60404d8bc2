//! Versioned state file plus its append-only audit log.
//!
//! `wg-state.json` holds everything but the audit log, which lives beside
//! it in `wg-state.json.audit`, one canonical entry per line. A third file,
//! `wg-state.json.lock`, carries the advisory lock for the process that
//! owns the state.

use std::fs::{self, File, OpenOptions, TryLockError};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use wg_core::audit::AuditLog;
use wg_core::Cloud;

pub const STATE_VERSION: u64 = 1;
pub const DEFAULT_STATE_PATH: &str = "wg-state.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub version: u64,
    pub rng_seed: u64,
    pub cloud: Cloud,
}

impl StateFile {
    pub fn new(rng_seed: u64, cloud: Cloud) -> Self {
        Self {
            version: STATE_VERSION,
            rng_seed,
            cloud,
        }
    }
}

#[derive(Debug, Error)]
pub enum StateError {
    #[error("no state at {0}; run `wg init` first")]
    NoState(PathBuf),
    #[error("state already exists at {0}; pass --force to replace it")]
    StateExists(PathBuf),
    #[error("state file version {found} is not supported (expected {STATE_VERSION})")]
    UnsupportedStateVersion { found: u64 },
    #[error("state file is malformed: {0}")]
    MalformedState(String),
    #[error("audit log is malformed: {0}")]
    MalformedAuditLog(String),
    #[error("state is locked by another process")]
    StateLocked,
    #[error("{0}")]
    Io(#[from] io::Error),
}

impl StateError {
    pub fn name(&self) -> &'static str {
        match self {
            StateError::NoState(_) => "NoState",
            StateError::StateExists(_) => "StateExists",
            StateError::UnsupportedStateVersion { .. } => "UnsupportedStateVersion",
            StateError::MalformedState(_) => "MalformedState",
            StateError::MalformedAuditLog(_) => "MalformedAuditLog",
            StateError::StateLocked => "StateLocked",
            StateError::Io(_) => "IoError",
        }
    }
}

pub type Result<T> = std::result::Result<T, StateError>;

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Parses state text, checking the version before anything else.
pub fn decode_state(text: &str) -> Result<StateFile> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| StateError::MalformedState(e.to_string()))?;
    let version = value
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| StateError::MalformedState("missing version".into()))?;
    if version != STATE_VERSION {
        return Err(StateError::UnsupportedStateVersion { found: version });
    }
    serde_json::from_value(value).map_err(|e| StateError::MalformedState(e.to_string()))
}

pub fn encode_state(state: &StateFile) -> String {
    let mut text = serde_json::to_string_pretty(state).expect("state serializes");
    text.push('\n');
    text
}

/// Exclusive handle on a state path for the life of the process.
#[derive(Debug)]
pub struct Store {
    path: PathBuf,
    _lock: File,
}

impl Store {
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(sibling(path, ".lock"))?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(TryLockError::WouldBlock) => return Err(StateError::StateLocked),
            Err(TryLockError::Error(e)) => return Err(e.into()),
        }
        Ok(Self {
            path: path.to_path_buf(),
            _lock: lock,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn audit_path(&self) -> PathBuf {
        sibling(&self.path, ".audit")
    }

    pub fn exists(&self) -> bool {
        self.path.exists()
    }

    /// Loads the state and its audit log; returns the number of audit lines
    /// already on disk.
    pub fn load(&self) -> Result<(StateFile, usize)> {
        let text = match fs::read_to_string(&self.path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(StateError::NoState(self.path.clone()))
            }
            Err(e) => return Err(e.into()),
        };
        let mut state = decode_state(&text)?;
        let audit = match fs::read_to_string(self.audit_path()) {
            Ok(t) => AuditLog::from_lines(&t).map_err(|e| StateError::MalformedAuditLog(e.to_string()))?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => AuditLog::new(),
            Err(e) => return Err(e.into()),
        };
        let persisted = audit.len();
        state.cloud.audit = audit;
        Ok((state, persisted))
    }

    /// Persists the audit log and then the state.
    ///
    /// With `persisted = Some(n)` only entries from `n` on are appended;
    /// `None` rewrites the log. The state file is replaced by rename, so a
    /// crash leaves either the old or the new state, never a torn one.
    pub fn save(&self, state: &StateFile, persisted: Option<usize>) -> Result<usize> {
        let audit = &state.cloud.audit;
        match persisted {
            Some(n) if n <= audit.len() => {
                if n < audit.len() {
                    let mut f = OpenOptions::new()
                        .create(true)
                        .append(true)
                        .open(self.audit_path())?;
                    f.write_all(audit.lines_from(n).as_bytes())?;
                    f.sync_all()?;
                }
            }
            _ => write_atomic(&self.audit_path(), audit.to_lines().as_bytes())?,
        }
        write_atomic(&self.path, encode_state(state).as_bytes())?;
        Ok(audit.len())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = sibling(path, ".tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}
