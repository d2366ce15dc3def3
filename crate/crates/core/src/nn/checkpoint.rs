//! Versioned JSON checkpoints: a header naming the payload kind and format
//! version, followed by the payload (shapes plus row-major weight arrays).

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "dpa-lab-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    kind: String,
    payload: T,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
    kind: String,
}

pub fn to_string<T: Serialize>(kind: &str, payload: &T) -> Result<String> {
    let env = Envelope {
        format: CHECKPOINT_FORMAT.to_string(),
        version: CHECKPOINT_VERSION,
        kind: kind.to_string(),
        payload,
    };
    serde_json::to_string(&env).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn from_str<T: DeserializeOwned>(kind: &str, text: &str) -> Result<T> {
    let header: Header = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(Error::Checkpoint(format!("unknown format `{}`", header.format)));
    }
    if header.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {} (expected {CHECKPOINT_VERSION})",
            header.version
        )));
    }
    if header.kind != kind {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds `{}`, expected `{kind}`",
            header.kind
        )));
    }
    let env: Envelope<T> = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(env.payload)
}

pub fn save<T: Serialize>(kind: &str, payload: &T, path: &Path) -> Result<()> {
    fs::write(path, to_string(kind, payload)?)?;
    Ok(())
}

pub fn load<T: DeserializeOwned>(kind: &str, path: &Path) -> Result<T> {
    from_str(kind, &fs::read_to_string(path)?)
}
