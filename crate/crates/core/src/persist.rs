//! Versioned JSON documents on disk.

use std::fs;
use std::io;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("corrupt {kind} document: {detail}")]
    Corrupt { kind: &'static str, detail: String },
    #[error("{kind} document has format version {found}, this build reads up to {supported}")]
    Version {
        kind: &'static str,
        found: u32,
        supported: u32,
    },
}

#[derive(Serialize)]
struct EnvelopeOut<'a, T> {
    kind: &'a str,
    version: u32,
    body: &'a T,
}

#[derive(Deserialize)]
struct Header {
    kind: String,
    version: u32,
}

#[derive(Deserialize)]
struct EnvelopeIn<T> {
    body: T,
}

/// Serializes `body` inside a `{kind, version, body}` envelope.
pub fn to_document<T: Serialize>(kind: &str, version: u32, body: &T) -> String {
    serde_json::to_string(&EnvelopeOut {
        kind,
        version,
        body,
    })
    .expect("document bodies always serialize")
}

/// Parses an envelope written by [`to_document`], refusing other kinds and
/// newer versions.
pub fn from_document<T: DeserializeOwned>(
    kind: &'static str,
    supported: u32,
    text: &str,
) -> Result<T, PersistError> {
    let corrupt = |e: serde_json::Error| PersistError::Corrupt {
        kind,
        detail: e.to_string(),
    };
    let header: Header = serde_json::from_str(text).map_err(corrupt)?;
    if header.kind != kind {
        return Err(PersistError::Corrupt {
            kind,
            detail: format!("document kind is {:?}", header.kind),
        });
    }
    if header.version > supported {
        return Err(PersistError::Version {
            kind,
            found: header.version,
            supported,
        });
    }
    let env: EnvelopeIn<T> = serde_json::from_str(text).map_err(corrupt)?;
    Ok(env.body)
}

/// Writes through a sibling temporary file and renames it into place, so a
/// reader never observes a partial document.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), PersistError> {
    let io_err = |source| PersistError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

pub fn read_to_string(path: &Path) -> Result<String, PersistError> {
    fs::read_to_string(path).map_err(|source| PersistError::Io {
        path: path.display().to_string(),
        source,
    })
}
