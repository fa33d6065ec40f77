//! Byte-stable request encoding used for cache keys and cache records.
//!
//! Layout, one field per line, strings length-prefixed in bytes:
//!
//! ```text
//! model:<len>:<utf8>
//! temperature:<shortest round-trip decimal>
//! messages:<count>
//! role:<len>:<utf8>
//! content:<len>:<utf8>
//! ...
//! ```

use sha2::{Digest, Sha256};

use super::{ChatRequest, GatewayError, Message};

fn push_str(out: &mut Vec<u8>, field: &str, value: &str) {
    out.extend_from_slice(format!("{field}:{}:", value.len()).as_bytes());
    out.extend_from_slice(value.as_bytes());
    out.push(b'\n');
}

/// Shortest decimal that parses back to the same `f64`; `-0` folds to `0`.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x}")
    }
}

pub fn canonical_encode(request: &ChatRequest) -> Vec<u8> {
    let mut out = Vec::new();
    push_str(&mut out, "model", &request.model);
    out.extend_from_slice(
        format!("temperature:{}\n", format_number(request.temperature)).as_bytes(),
    );
    out.extend_from_slice(format!("messages:{}\n", request.messages.len()).as_bytes());
    for m in &request.messages {
        push_str(&mut out, "role", &m.role);
        push_str(&mut out, "content", &m.content);
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, what: &str) -> GatewayError {
        GatewayError::Protocol(format!("canonical decode: {what} at byte {}", self.pos))
    }

    fn tag(&mut self, field: &str) -> Result<(), GatewayError> {
        let want = format!("{field}:");
        if self.buf[self.pos..].starts_with(want.as_bytes()) {
            self.pos += want.len();
            Ok(())
        } else {
            Err(self.err(&format!("expected `{field}`")))
        }
    }

    fn until(&mut self, stop: u8) -> Result<&'a str, GatewayError> {
        let rest = &self.buf[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == stop)
            .ok_or_else(|| self.err("unterminated field"))?;
        let s = std::str::from_utf8(&rest[..end]).map_err(|_| self.err("invalid utf-8"))?;
        self.pos += end + 1;
        Ok(s)
    }

    fn number<T: std::str::FromStr>(&mut self, stop: u8) -> Result<T, GatewayError> {
        let s = self.until(stop)?;
        s.parse().map_err(|_| self.err("bad number"))
    }

    fn string(&mut self, field: &str) -> Result<String, GatewayError> {
        self.tag(field)?;
        let len: usize = self.number(b':')?;
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e < self.buf.len())
            .ok_or_else(|| self.err("truncated"))?;
        let s =
            std::str::from_utf8(&self.buf[self.pos..end]).map_err(|_| self.err("invalid utf-8"))?;
        if self.buf[end] != b'\n' {
            return Err(self.err("missing newline"));
        }
        self.pos = end + 1;
        Ok(s.to_string())
    }
}

/// Inverse of [`canonical_encode`]; returns the request and the number of
/// bytes consumed.
pub fn canonical_decode(bytes: &[u8]) -> Result<(ChatRequest, usize), GatewayError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let model = r.string("model")?;
    r.tag("temperature")?;
    let temperature: f64 = r.number(b'\n')?;
    r.tag("messages")?;
    let count: usize = r.number(b'\n')?;
    let mut messages = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let role = r.string("role")?;
        let content = r.string("content")?;
        messages.push(Message { role, content });
    }
    let request = ChatRequest::new(model, temperature, messages)?;
    Ok((request, r.pos))
}

/// Hex sha256 over the canonical encoding.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn of(request: &ChatRequest) -> Self {
        Self::from_bytes(&canonical_encode(request))
    }

    pub fn from_bytes(canonical: &[u8]) -> Self {
        CacheKey(hex::encode(Sha256::digest(canonical)))
    }

    pub fn digest(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for CacheKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}
