//! Progressive memory: a fixed-size active store ordered by usage, with cold
//! records offloaded over a simulated uplink to an expandable server.
//!
//! Records are ranked by `(access_count, last_access_tick)`; the lowest
//! unpinned record is offloaded when the active store overflows. A record
//! fetched back from the server is pinned in the active store for
//! `pin_duration` ticks. The server grows by `growth_step` until
//! `server_hard_limit`, after which its lowest-ranked record is deleted.
//!
//! Ties on both count and tick are broken by a store-wide access sequence
//! number, so the older access always loses.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod workload;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MemoryError {
    #[error("key must be non-empty")]
    EmptyKey,
    #[error("active store full and every record pinned; retry after the clock advances")]
    OverPinned,
    #[error("uplink unavailable; record remains on the server")]
    UplinkUnavailable,
    #[error("tick {now} does not advance past {last}")]
    NonMonotoneTick { last: u64, now: u64 },
    #[error("invalid store configuration: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvictionPolicy {
    /// Lowest `(access_count, last_access)` leaves first.
    #[default]
    Progressive,
    /// Oldest arrival in the tier leaves first. Baseline for comparison.
    Fifo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StoreConfig {
    pub active_capacity: usize,
    pub server_capacity: usize,
    pub growth_step: usize,
    pub server_hard_limit: usize,
    pub pin_duration: u64,
    pub uplink_latency: u64,
    pub uplink_failure_rate: f64,
    pub seed: u64,
    pub policy: EvictionPolicy,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig {
            active_capacity: 64,
            server_capacity: 256,
            growth_step: 256,
            server_hard_limit: 4096,
            pin_duration: 20,
            uplink_latency: 2,
            uplink_failure_rate: 0.0,
            seed: 0,
            policy: EvictionPolicy::Progressive,
        }
    }
}

impl StoreConfig {
    pub fn validate(&self) -> Result<(), MemoryError> {
        if self.active_capacity == 0 {
            return Err(MemoryError::InvalidConfig("active_capacity must be at least 1"));
        }
        if self.server_capacity == 0 || self.server_hard_limit < self.server_capacity {
            return Err(MemoryError::InvalidConfig(
                "server_capacity must be at least 1 and not above server_hard_limit",
            ));
        }
        if self.pin_duration == 0 {
            return Err(MemoryError::InvalidConfig("pin_duration must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.uplink_failure_rate) {
            return Err(MemoryError::InvalidConfig("uplink_failure_rate must be in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tier {
    Active,
    /// Offloaded but not yet landed on the server; still readable.
    InTransit,
    Server,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryRecord {
    pub key: String,
    pub payload: Vec<u8>,
    pub access_count: u64,
    pub last_access_tick: u64,
    pub tier: Tier,
    pub pin_expiry: Option<u64>,
    last_access_seq: u64,
    tier_entry_seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TierStats {
    pub active_count: usize,
    pub in_transit_count: usize,
    pub server_count: usize,
    pub server_capacity: usize,
    pub offloads: u64,
    pub fetches: u64,
    pub server_deletions: u64,
    pub hits: u64,
    /// Hits served without touching the server.
    pub active_hits: u64,
    pub misses: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MemoryEventKind {
    Offloaded,
    Fetched,
    ServerDeleted,
    Hit,
    Miss,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryEvent {
    pub kind: MemoryEventKind,
    pub key: String,
    pub tick: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Active,
    InTransit,
    FetchedFromServer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Lookup {
    Found { payload: Vec<u8>, provenance: Provenance },
    Miss,
}

type RankKey = (u64, u64, u64);

#[derive(Debug, Clone)]
struct Transit {
    due: u64,
    record: MemoryRecord,
}

#[derive(Debug, Clone)]
pub struct ProgressiveStore {
    config: StoreConfig,
    active: HashMap<String, MemoryRecord>,
    /// Unpinned active records, lowest rank first.
    evictable: BTreeSet<(RankKey, String)>,
    in_transit: Vec<Transit>,
    server: HashMap<String, MemoryRecord>,
    server_order: BTreeSet<(RankKey, String)>,
    server_capacity: usize,
    seq: u64,
    clock: Option<u64>,
    last_tick: Option<u64>,
    rng: ChaCha8Rng,
    stats: TierStats,
}

impl ProgressiveStore {
    pub fn new(config: StoreConfig) -> Result<ProgressiveStore, MemoryError> {
        config.validate()?;
        Ok(ProgressiveStore {
            config,
            active: HashMap::new(),
            evictable: BTreeSet::new(),
            in_transit: Vec::new(),
            server: HashMap::new(),
            server_order: BTreeSet::new(),
            server_capacity: config.server_capacity,
            seq: 0,
            clock: None,
            last_tick: None,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            stats: TierStats {
                server_capacity: config.server_capacity,
                ..TierStats::default()
            },
        })
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    fn rank(&self, r: &MemoryRecord) -> RankKey {
        match self.config.policy {
            EvictionPolicy::Progressive => (r.access_count, r.last_access_tick, r.last_access_seq),
            EvictionPolicy::Fifo => (0, 0, r.tier_entry_seq),
        }
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn observe(&mut self, now: u64) -> Result<(), MemoryError> {
        if let Some(last) = self.clock {
            if now < last {
                return Err(MemoryError::NonMonotoneTick { last, now });
            }
        }
        self.clock = Some(now);
        Ok(())
    }

    fn touch(&mut self, record: &mut MemoryRecord, now: u64) {
        record.access_count += 1;
        record.last_access_tick = now;
        record.last_access_seq = self.next_seq();
    }

    fn insert_active(&mut self, record: MemoryRecord) {
        if record.pin_expiry.is_none() {
            self.evictable.insert((self.rank(&record), record.key.clone()));
        }
        self.active.insert(record.key.clone(), record);
    }

    fn remove_active(&mut self, key: &str) -> Option<MemoryRecord> {
        let record = self.active.remove(key)?;
        if record.pin_expiry.is_none() {
            self.evictable.remove(&(self.rank(&record), record.key.clone()));
        }
        Some(record)
    }

    fn has_evictable(&self) -> bool {
        !self.evictable.is_empty()
    }

    /// Offloads lowest-ranked unpinned records until the active store fits.
    fn enforce_capacity(&mut self, now: u64, events: &mut Vec<MemoryEvent>) {
        while self.active.len() > self.config.active_capacity {
            let Some((_, key)) = self.evictable.first().cloned() else {
                break;
            };
            let mut record = self.remove_active(&key).expect("indexed record is active");
            record.tier = Tier::InTransit;
            record.tier_entry_seq = self.next_seq();
            let transit = Transit {
                due: now + self.config.uplink_latency,
                record,
            };
            if self.config.uplink_latency == 0 {
                self.land(transit.record, now, events);
            } else {
                self.in_transit.push(transit);
            }
        }
    }

    fn land(&mut self, mut record: MemoryRecord, now: u64, events: &mut Vec<MemoryEvent>) {
        record.tier = Tier::Server;
        record.tier_entry_seq = self.next_seq();
        events.push(MemoryEvent {
            kind: MemoryEventKind::Offloaded,
            key: record.key.clone(),
            tick: now,
        });
        self.stats.offloads += 1;
        self.server_order.insert((self.rank(&record), record.key.clone()));
        self.server.insert(record.key.clone(), record);

        while self.server.len() > self.server_capacity {
            if self.server_capacity < self.config.server_hard_limit && self.config.growth_step > 0 {
                self.server_capacity =
                    (self.server_capacity + self.config.growth_step).min(self.config.server_hard_limit);
                continue;
            }
            let (_, key) = self.server_order.pop_first().expect("server is non-empty");
            self.server.remove(&key);
            self.stats.server_deletions += 1;
            events.push(MemoryEvent {
                kind: MemoryEventKind::ServerDeleted,
                key,
                tick: now,
            });
        }
    }

    fn transit_position(&self, key: &str) -> Option<usize> {
        self.in_transit.iter().position(|t| t.record.key == key)
    }

    /// Writes `payload` under `key`. A new key enters the active store with
    /// one access; an existing key has its payload replaced and its count
    /// incremented.
    pub fn put(&mut self, key: &str, payload: Vec<u8>, now: u64) -> Result<Vec<MemoryEvent>, MemoryError> {
        if key.is_empty() {
            return Err(MemoryError::EmptyKey);
        }
        self.observe(now)?;
        let mut events = Vec::new();

        if let Some(mut record) = self.remove_active(key) {
            record.payload = payload;
            self.touch(&mut record, now);
            self.insert_active(record);
            return Ok(events);
        }
        if let Some(i) = self.transit_position(key) {
            let mut record = std::mem::replace(&mut self.in_transit[i].record, placeholder());
            record.payload = payload;
            self.touch(&mut record, now);
            self.in_transit[i].record = record;
            return Ok(events);
        }

        if self.active.len() >= self.config.active_capacity && !self.has_evictable() {
            return Err(MemoryError::OverPinned);
        }
        let record = match self.server.remove(key) {
            Some(mut record) => {
                self.server_order.remove(&(self.rank(&record), record.key.clone()));
                record.payload = payload;
                record.tier = Tier::Active;
                record.tier_entry_seq = self.next_seq();
                self.touch(&mut record, now);
                record
            }
            None => {
                let seq = self.next_seq();
                MemoryRecord {
                    key: key.to_string(),
                    payload,
                    access_count: 1,
                    last_access_tick: now,
                    tier: Tier::Active,
                    pin_expiry: None,
                    last_access_seq: seq,
                    tier_entry_seq: seq,
                }
            }
        };
        self.insert_active(record);
        self.enforce_capacity(now, &mut events);
        Ok(events)
    }

    /// Reads `key`, fetching it back from the server when needed.
    pub fn get(&mut self, key: &str, now: u64) -> Result<(Lookup, Vec<MemoryEvent>), MemoryError> {
        self.observe(now)?;
        let mut events = Vec::new();
        let hit = |key: &str| MemoryEvent {
            kind: MemoryEventKind::Hit,
            key: key.to_string(),
            tick: now,
        };

        if let Some(mut record) = self.remove_active(key) {
            self.touch(&mut record, now);
            let payload = record.payload.clone();
            self.insert_active(record);
            self.stats.hits += 1;
            self.stats.active_hits += 1;
            events.push(hit(key));
            return Ok((
                Lookup::Found {
                    payload,
                    provenance: Provenance::Active,
                },
                events,
            ));
        }
        if let Some(i) = self.transit_position(key) {
            let mut record = std::mem::replace(&mut self.in_transit[i].record, placeholder());
            self.touch(&mut record, now);
            let payload = record.payload.clone();
            self.in_transit[i].record = record;
            self.stats.hits += 1;
            self.stats.active_hits += 1;
            events.push(hit(key));
            return Ok((
                Lookup::Found {
                    payload,
                    provenance: Provenance::InTransit,
                },
                events,
            ));
        }
        if self.server.contains_key(key) {
            let draw: f64 = self.rng.random();
            if draw < self.config.uplink_failure_rate {
                return Err(MemoryError::UplinkUnavailable);
            }
            if self.active.len() >= self.config.active_capacity && !self.has_evictable() {
                return Err(MemoryError::OverPinned);
            }
            let mut record = self.server.remove(key).expect("checked above");
            self.server_order.remove(&(self.rank(&record), record.key.clone()));
            self.touch(&mut record, now);
            record.tier = Tier::Active;
            record.tier_entry_seq = self.next_seq();
            record.pin_expiry = Some(now + self.config.pin_duration);
            let payload = record.payload.clone();
            self.stats.fetches += 1;
            events.push(MemoryEvent {
                kind: MemoryEventKind::Fetched,
                key: key.to_string(),
                tick: now,
            });
            self.insert_active(record);
            self.enforce_capacity(now, &mut events);
            self.stats.hits += 1;
            events.push(hit(key));
            return Ok((
                Lookup::Found {
                    payload,
                    provenance: Provenance::FetchedFromServer,
                },
                events,
            ));
        }

        self.stats.misses += 1;
        events.push(MemoryEvent {
            kind: MemoryEventKind::Miss,
            key: key.to_string(),
            tick: now,
        });
        Ok((Lookup::Miss, events))
    }

    /// Advances the store clock: lands offloads whose latency has elapsed
    /// and releases expired pins.
    pub fn tick(&mut self, now: u64) -> Result<Vec<MemoryEvent>, MemoryError> {
        if let Some(last) = self.last_tick {
            if now <= last {
                return Err(MemoryError::NonMonotoneTick { last, now });
            }
        }
        if let Some(last) = self.clock {
            if now < last {
                return Err(MemoryError::NonMonotoneTick { last, now });
            }
        }
        self.last_tick = Some(now);
        self.clock = Some(now);

        let mut events = Vec::new();
        let (due, pending): (Vec<Transit>, Vec<Transit>) = std::mem::take(&mut self.in_transit)
            .into_iter()
            .partition(|t| t.due <= now);
        self.in_transit = pending;
        for transit in due {
            self.land(transit.record, now, &mut events);
        }

        let mut expired: Vec<String> = self
            .active
            .values()
            .filter(|r| r.pin_expiry.is_some_and(|e| e <= now))
            .map(|r| r.key.clone())
            .collect();
        expired.sort();
        for key in expired {
            let mut record = self.active.remove(&key).expect("collected from active");
            record.pin_expiry = None;
            self.insert_active(record);
        }
        Ok(events)
    }

    pub fn stats(&self) -> TierStats {
        TierStats {
            active_count: self.active.len(),
            in_transit_count: self.in_transit.len(),
            server_count: self.server.len(),
            server_capacity: self.server_capacity,
            ..self.stats
        }
    }

    pub fn record(&self, key: &str) -> Option<&MemoryRecord> {
        self.active
            .get(key)
            .or_else(|| self.in_transit.iter().map(|t| &t.record).find(|r| r.key == key))
            .or_else(|| self.server.get(key))
    }

    pub fn tier_of(&self, key: &str) -> Option<Tier> {
        self.record(key).map(|r| r.tier)
    }

    pub fn active_keys(&self) -> impl Iterator<Item = &str> {
        self.active.keys().map(String::as_str)
    }
}

fn placeholder() -> MemoryRecord {
    MemoryRecord {
        key: String::new(),
        payload: Vec::new(),
        access_count: 0,
        last_access_tick: 0,
        tier: Tier::InTransit,
        pin_expiry: None,
        last_access_seq: 0,
        tier_entry_seq: 0,
    }
}
