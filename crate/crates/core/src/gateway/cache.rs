//! Content-addressed response cache, one file per request.
//!
//! A record lives at `<root>/<hex[0..2]>/<hex[2..4]>/<hex>.txt` and holds the
//! canonical request bytes, the [`SEPARATOR`] line, then the response text.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::canonical::{canonical_encode, CacheKey};
use super::{ChatRequest, GatewayError};

pub const SEPARATOR: &str = "=====RESPONSE=====\n";

#[derive(Debug, Clone)]
pub struct ResponseCache {
    root: PathBuf,
}

impl ResponseCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ResponseCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        let d = key.digest();
        self.root
            .join(&d[0..2])
            .join(&d[2..4])
            .join(format!("{d}.txt"))
    }

    /// Cached response text, if any. A record whose stored request differs
    /// from `request` is reported as corrupt rather than served.
    pub fn get(&self, request: &ChatRequest) -> Result<Option<String>, GatewayError> {
        let canonical = canonical_encode(request);
        let key = CacheKey::from_bytes(&canonical);
        let path = self.path_for(&key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(GatewayError::Cache(format!("{}: {e}", path.display()))),
        };
        let corrupt =
            |why: &str| GatewayError::Cache(format!("{}: corrupt record ({why})", path.display()));
        let rest = bytes
            .strip_prefix(canonical.as_slice())
            .ok_or_else(|| corrupt("request mismatch"))?;
        let text = rest
            .strip_prefix(SEPARATOR.as_bytes())
            .ok_or_else(|| corrupt("missing separator"))?;
        String::from_utf8(text.to_vec())
            .map(Some)
            .map_err(|_| corrupt("invalid utf-8"))
    }

    /// Writes the record atomically (temp file in the target directory, then
    /// rename).
    pub fn put(&self, request: &ChatRequest, text: &str) -> Result<PathBuf, GatewayError> {
        let canonical = canonical_encode(request);
        let path = self.path_for(&CacheKey::from_bytes(&canonical));
        let dir = path.parent().expect("fan-out directory");
        let io = |e: std::io::Error| GatewayError::Cache(format!("{}: {e}", path.display()));
        fs::create_dir_all(dir).map_err(io)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        tmp.write_all(&canonical).map_err(io)?;
        tmp.write_all(SEPARATOR.as_bytes()).map_err(io)?;
        tmp.write_all(text.as_bytes()).map_err(io)?;
        tmp.flush().map_err(io)?;
        tmp.persist(&path).map_err(|e| io(e.error))?;
        Ok(path)
    }
}
