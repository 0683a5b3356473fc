//! Access traces and replay for comparing eviction policies.
//!
//! Trace text is one operation per line: `get <key>` or `put <key> [payload]`.
//! Blank lines and `#` comments are ignored.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use serde::Serialize;
use thiserror::Error;

use super::{EvictionPolicy, Lookup, MemoryError, ProgressiveStore, StoreConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceOp {
    Get(String),
    Put(String, Vec<u8>),
}

#[derive(Debug, Error, PartialEq)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceOp>, TraceError> {
    let mut ops = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, char::is_whitespace);
        let verb = parts.next().unwrap_or("");
        let key = parts.next().map(str::trim).filter(|k| !k.is_empty());
        let err = |message: &str| TraceError::Parse {
            line: i + 1,
            message: message.to_string(),
        };
        match (verb, key) {
            ("get", Some(k)) => ops.push(TraceOp::Get(k.to_string())),
            ("put", Some(k)) => {
                let payload = parts.next().unwrap_or("").trim().as_bytes().to_vec();
                ops.push(TraceOp::Put(k.to_string(), payload));
            }
            ("get" | "put", None) => return Err(err("missing key")),
            _ => return Err(err(&format!("unknown operation {verb:?}"))),
        }
    }
    Ok(ops)
}

pub fn render_trace(ops: &[TraceOp]) -> String {
    let mut out = String::new();
    for op in ops {
        match op {
            TraceOp::Get(k) => out.push_str(&format!("get {k}\n")),
            TraceOp::Put(k, p) if p.is_empty() => out.push_str(&format!("put {k}\n")),
            TraceOp::Put(k, p) => out.push_str(&format!("put {k} {}\n", String::from_utf8_lossy(p))),
        }
    }
    out
}

/// `gets` reads over `keys` keys drawn from a Zipf law with exponent `s`.
pub fn zipf_trace(keys: u64, s: f64, gets: usize, seed: u64) -> Vec<TraceOp> {
    let zipf = Zipf::new(keys as f64, s).expect("keys >= 1 and s >= 0");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..gets)
        .map(|_| TraceOp::Get(format!("k{}", zipf.sample(&mut rng) as u64)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub policy: EvictionPolicy,
    pub operations: usize,
    pub gets: u64,
    pub active_hits: u64,
    pub server_fetches: u64,
    pub misses: u64,
    /// Fraction of gets served from the active tier.
    pub hit_rate: f64,
    pub offloads: u64,
    pub server_deletions: u64,
    pub uplink_failures: u64,
    pub over_pinned: u64,
}

/// Replays `ops` one per tick. A get that misses writes the key, as a
/// read-through cache would.
pub fn replay(ops: &[TraceOp], config: StoreConfig) -> Result<BenchReport, TraceError> {
    let mut store = ProgressiveStore::new(config)?;
    let mut gets = 0u64;
    let mut uplink_failures = 0u64;
    let mut over_pinned = 0u64;
    for (i, op) in ops.iter().enumerate() {
        let now = i as u64 + 1;
        store.tick(now)?;
        let result = match op {
            TraceOp::Get(key) => {
                gets += 1;
                match store.get(key, now) {
                    Ok((Lookup::Miss, _)) => store.put(key, Vec::new(), now).map(drop),
                    other => other.map(drop),
                }
            }
            TraceOp::Put(key, payload) => store.put(key, payload.clone(), now).map(drop),
        };
        match result {
            Ok(()) => {}
            Err(MemoryError::UplinkUnavailable) => uplink_failures += 1,
            Err(MemoryError::OverPinned) => over_pinned += 1,
            Err(e) => return Err(e.into()),
        }
    }
    let stats = store.stats();
    Ok(BenchReport {
        policy: config.policy,
        operations: ops.len(),
        gets,
        active_hits: stats.active_hits,
        server_fetches: stats.fetches,
        misses: stats.misses,
        hit_rate: if gets == 0 {
            0.0
        } else {
            stats.active_hits as f64 / gets as f64
        },
        offloads: stats.offloads,
        server_deletions: stats.server_deletions,
        uplink_failures,
        over_pinned,
    })
}
