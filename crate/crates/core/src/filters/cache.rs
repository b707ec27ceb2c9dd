//! Binary cache for the H table: an 8-byte magic, a JSON parameter header
//! (length-prefixed) and the table as little-endian `f64`s.

use super::time::{FilterH, HKnobs};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

pub const CACHE_MAGIC: &[u8; 8] = b"FIHTAB01";

#[derive(Serialize, Deserialize)]
struct Header {
    k: usize,
    delta1: f64,
    window: f64,
    knobs: HKnobs,
    filter: FilterH,
}

pub fn save_h_table(h: &FilterH, path: &Path) -> Result<()> {
    let table = h.table();
    let header = Header { k: h.k, delta1: h.delta1, window: h.window, knobs: h.knobs, filter: h.clone() };
    let json = serde_json::to_vec(&header)?;
    let mut buf = Vec::with_capacity(16 + json.len() + 8 * table.len());
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    buf.extend_from_slice(&(table.len() as u64).to_le_bytes());
    for v in table {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Load a cached table; `Ok(None)` when the file is missing or was built
/// for different parameters.
pub fn load_h_table(path: &Path, k: usize, delta1: f64, window: f64, knobs: HKnobs) -> Result<Option<FilterH>> {
    let mut bytes = Vec::new();
    match fs::File::open(path) {
        Ok(mut f) => f.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Error::io(path, e)),
    };
    let bad = || Error::invalid(format!("{} is not an H table cache", path.display()));
    if bytes.len() < 16 || &bytes[..8] != CACHE_MAGIC {
        return Err(bad());
    }
    let json_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let json_end = 16 + json_len;
    if bytes.len() < json_end + 8 {
        return Err(bad());
    }
    let header: Header = serde_json::from_slice(&bytes[16..json_end])?;
    if header.k != k || header.delta1 != delta1 || header.window != window || header.knobs != knobs {
        return Ok(None);
    }
    let n = u64::from_le_bytes(bytes[json_end..json_end + 8].try_into().unwrap()) as usize;
    let body = &bytes[json_end + 8..];
    if body.len() != 8 * n {
        return Err(bad());
    }
    let table = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    FilterH::from_parts(header.filter, table).map(Some)
}

impl FilterH {
    /// Build, going through the cache file at `path` when it matches.
    pub fn build_cached(k: usize, delta1: f64, window: f64, knobs: HKnobs, path: &Path) -> Result<FilterH> {
        if let Some(h) = load_h_table(path, k, delta1, window, knobs)? {
            return Ok(h);
        }
        let h = FilterH::build(k, delta1, window, knobs)?;
        save_h_table(&h, path)?;
        Ok(h)
    }
}
