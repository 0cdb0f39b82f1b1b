//! Versioned, checksummed snapshots of a [`QueryState`].
//!
//! A snapshot is one JSON object:
//!
//! ```text
//! { "format": "funflow-state", "version": 1,
//!   "sha256": "<hex digest of payload>", "payload": "<QueryState as JSON>" }
//! ```
//!
//! The payload holds the counts, running sums, sorted distances, bandwidth
//! history, plan, ℓ, kernel and the fitted semi-norm, so a session can be
//! resumed without the original training files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimator::QueryState;

pub const STATE_FORMAT: &str = "funflow-state";
pub const STATE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    sha256: String,
    payload: String,
}

fn digest(payload: &str) -> String {
    hex::encode(Sha256::digest(payload.as_bytes()).as_slice())
}

pub fn encode(state: &QueryState) -> Result<String> {
    let payload = serde_json::to_string(state)?;
    Ok(serde_json::to_string_pretty(&Envelope {
        format: STATE_FORMAT.into(),
        version: STATE_VERSION,
        sha256: digest(&payload),
        payload,
    })?)
}

pub fn decode(text: &str) -> Result<QueryState> {
    let env: Envelope =
        serde_json::from_str(text).map_err(|e| Error::Integrity(format!("unreadable snapshot: {e}")))?;
    if env.format != STATE_FORMAT || env.version != STATE_VERSION {
        return Err(Error::SnapshotVersion {
            expected: format!("{STATE_FORMAT} v{STATE_VERSION}"),
            found: format!("{} v{}", env.format, env.version),
        });
    }
    if digest(&env.payload) != env.sha256 {
        return Err(Error::Integrity("checksum mismatch".into()));
    }
    let state: QueryState =
        serde_json::from_str(&env.payload).map_err(|e| Error::Integrity(format!("bad payload: {e}")))?;
    state.check_consistency()?;
    Ok(state)
}

pub fn save(state: &QueryState, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(state)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<QueryState> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode(&text)
}
