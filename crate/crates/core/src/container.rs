//! Self-describing binary container shared by anchor, dataset and checkpoint files.
//!
//! Layout: 8-byte magic `SSCFBIN1`, little-endian `u64` header length, a UTF-8
//! JSON header, then every array's values as little-endian `f64` in header order.
//! The header records each array's name and shape plus a SHA-256 of the payload.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Result, SscfError};

pub const MAGIC: &[u8; 8] = b"SSCFBIN1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

impl ArrayInfo {
    fn len(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    kind: String,
    format_version: u32,
    arrays: Vec<ArrayInfo>,
    payload_sha256: String,
    meta: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: String,
    pub format_version: u32,
    pub meta: Value,
    pub arrays: Vec<(ArrayInfo, Vec<f64>)>,
}

impl Container {
    pub fn new(kind: &str, format_version: u32, meta: Value) -> Self {
        Container {
            kind: kind.to_string(),
            format_version,
            meta,
            arrays: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, values: Vec<f64>) {
        let info = ArrayInfo {
            name: name.into(),
            shape,
        };
        debug_assert_eq!(info.len(), values.len());
        self.arrays.push((info, values));
    }

    pub fn array(&self, name: &str) -> Result<&(ArrayInfo, Vec<f64>)> {
        self.arrays
            .iter()
            .find(|(info, _)| info.name == name)
            .ok_or_else(|| SscfError::Format(format!("missing array '{name}'")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut payload = Vec::with_capacity(self.arrays.iter().map(|(_, v)| v.len() * 8).sum());
        for (_, values) in &self.arrays {
            for v in values {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let header = Header {
            kind: self.kind.clone(),
            format_version: self.format_version,
            arrays: self.arrays.iter().map(|(i, _)| i.clone()).collect(),
            payload_sha256: sha256_hex(&payload),
            meta: self.meta.clone(),
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + header.len() + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Container> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(SscfError::Format("bad magic or truncated preamble".into()));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = &bytes[16..];
        if body.len() < header_len {
            return Err(SscfError::Format("truncated header".into()));
        }
        let header: Header = serde_json::from_slice(&body[..header_len])
            .map_err(|e| SscfError::Format(format!("header: {e}")))?;
        let payload = &body[header_len..];
        let expected: usize = header.arrays.iter().map(|a| a.len() * 8).sum();
        if payload.len() != expected {
            return Err(SscfError::Format(format!(
                "payload has {} bytes, header describes {expected}",
                payload.len()
            )));
        }
        if sha256_hex(payload) != header.payload_sha256 {
            return Err(SscfError::Format("payload checksum mismatch".into()));
        }
        let mut arrays = Vec::with_capacity(header.arrays.len());
        let mut chunks = payload.chunks_exact(8);
        for info in header.arrays {
            let values = chunks
                .by_ref()
                .take(info.len())
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            arrays.push((info, values));
        }
        Ok(Container {
            kind: header.kind,
            format_version: header.format_version,
            meta: header.meta,
            arrays,
        })
    }

    /// Checks kind and version after decoding.
    pub fn expect(&self, kind: &str, version: u32) -> Result<()> {
        if self.kind != kind {
            return Err(SscfError::Format(format!(
                "expected a '{kind}' file, found '{}'",
                self.kind
            )));
        }
        if self.format_version != version {
            return Err(SscfError::Format(format!(
                "unsupported {kind} format version {} (expected {version})",
                self.format_version
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Container> {
        let bytes = fs::read(path).map_err(|e| SscfError::io(path, e))?;
        Container::from_bytes(&bytes)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| SscfError::io(path, std::io::Error::other("path has no file name")))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(SscfError::io(path, e));
    }
    Ok(())
}

pub(crate) fn meta_field<'a>(meta: &'a Value, key: &str) -> Result<&'a Value> {
    meta.get(key)
        .ok_or_else(|| SscfError::Format(format!("header missing '{key}'")))
}

pub(crate) fn meta_parse<T: serde::de::DeserializeOwned>(meta: &Value, key: &str) -> Result<T> {
    serde_json::from_value(meta_field(meta, key)?.clone())
        .map_err(|e| SscfError::Format(format!("header field '{key}': {e}")))
}
