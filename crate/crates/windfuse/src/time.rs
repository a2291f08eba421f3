//! ISO-8601 UTC timestamps to and from epoch seconds.

use chrono::{DateTime, NaiveDateTime, Utc};
use windfuse_core::Timestamp;

use crate::error::{Error, Result};

/// Accepts RFC 3339 (`2024-06-01T13:00:00Z`, any offset), minutes-only
/// `2024-06-01T13:00Z`, and offset-free forms read as UTC.
pub fn parse_timestamp(s: &str) -> Result<Timestamp> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.timestamp());
    }
    let bare = s.strip_suffix('Z').unwrap_or(s);
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(bare, fmt) {
            return Ok(t.and_utc().timestamp());
        }
    }
    Err(Error::Timestamp(s.to_string()))
}

pub fn format_timestamp(t: Timestamp) -> String {
    match DateTime::<Utc>::from_timestamp(t, 0) {
        Some(d) => d.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        None => t.to_string(),
    }
}
