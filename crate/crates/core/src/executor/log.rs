//! The execution log: a bit-exact, line-oriented record of HTTP exchanges.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Bodies are stored truncated at this size; the digest always covers the
/// full body so exact-match checks stay possible.
pub const BODY_TRUNCATE_BYTES: usize = 64 * 1024;

/// One completed HTTP exchange.
///
/// Serialized as NDJSON, one interaction per line, lowerCamelCase field
/// names, RFC 3339 UTC timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Interaction {
    pub test_id: String,
    pub timestamp: String,
    pub method: String,
    pub url: String,
    pub request_headers: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub request_media_type: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub request_body: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub request_body_digest: Option<String>,
    pub response_status: u16,
    pub response_headers: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub response_media_type: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub response_body: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub response_body_digest: Option<String>,
    pub duration_ms: u64,
}

/// Truncate a body for storage and compute the digest of the full body.
pub fn body_record(body: &[u8]) -> (String, String) {
    let truncated = &body[..body.len().min(BODY_TRUNCATE_BYTES)];
    let text = String::from_utf8_lossy(truncated).into_owned();
    (text, sha256_hex(body))
}

pub fn sha256_hex(data: &[u8]) -> String {
    let digest = Sha256::digest(data);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Write interactions as NDJSON.
pub fn write_ndjson<W: Write>(log: &[Interaction], mut w: W) -> std::io::Result<()> {
    for i in log {
        let line = serde_json::to_string(i).map_err(std::io::Error::other)?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Read an NDJSON execution log; blank lines are skipped.
pub fn read_ndjson<R: BufRead>(r: R) -> std::io::Result<Vec<Interaction>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let i: Interaction = serde_json::from_str(&line).map_err(std::io::Error::other)?;
        out.push(i);
    }
    Ok(out)
}
