//! Brute-force model of the progressive store. Every record lives in one
//! flat list; every ranking question is answered by scanning it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    pub active_capacity: usize,
    pub server_capacity: usize,
    pub growth_step: usize,
    pub server_hard_limit: usize,
    pub pin_duration: u64,
    pub uplink_latency: u64,
    pub uplink_failure_rate: f64,
    pub seed: u64,
    pub fifo: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Place {
    Active,
    Transit { due: u64 },
    Server,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rec {
    pub key: String,
    pub payload: Vec<u8>,
    pub count: u64,
    pub tick: u64,
    pub pin: Option<u64>,
    pub place: Place,
    access_order: u64,
    entry_order: u64,
}

/// `(kind, key, tick)` with kinds spelled as in the store's event enum.
pub type Event = (&'static str, String, u64);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Found(Vec<u8>, &'static str),
    Miss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counters {
    pub offloads: u64,
    pub fetches: u64,
    pub deletions: u64,
    pub hits: u64,
    pub active_hits: u64,
    pub misses: u64,
}

#[derive(Debug, Clone)]
pub struct Model {
    cfg: Config,
    pub recs: Vec<Rec>,
    pub server_capacity: usize,
    pub counters: Counters,
    order: u64,
    clock: Option<u64>,
    last_tick: Option<u64>,
    rng: ChaCha8Rng,
}

impl Model {
    pub fn new(cfg: Config) -> Model {
        Model {
            cfg,
            recs: Vec::new(),
            server_capacity: cfg.server_capacity,
            counters: Counters::default(),
            order: 0,
            clock: None,
            last_tick: None,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        }
    }

    fn bump(&mut self) -> u64 {
        self.order += 1;
        self.order
    }

    fn find(&self, key: &str) -> Option<usize> {
        self.recs.iter().position(|r| r.key == key)
    }

    pub fn count_in(&self, pred: impl Fn(Place) -> bool) -> usize {
        self.recs.iter().filter(|r| pred(r.place)).count()
    }

    pub fn active_count(&self) -> usize {
        self.count_in(|p| p == Place::Active)
    }

    pub fn place_of(&self, key: &str) -> Option<Place> {
        self.find(key).map(|i| self.recs[i].place)
    }

    /// Smaller sorts first, i.e. leaves first.
    fn rank(&self, r: &Rec) -> (u64, u64, u64) {
        if self.cfg.fifo {
            (0, 0, r.entry_order)
        } else {
            (r.count, r.tick, r.access_order)
        }
    }

    fn lowest(&self, pred: impl Fn(&Rec) -> bool) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, r) in self.recs.iter().enumerate() {
            if !pred(r) {
                continue;
            }
            match best {
                Some(b) if self.rank(&self.recs[b]) <= self.rank(r) => {}
                _ => best = Some(i),
            }
        }
        best
    }

    fn touch(&mut self, i: usize, now: u64) {
        let o = self.bump();
        let r = &mut self.recs[i];
        r.count += 1;
        r.tick = now;
        r.access_order = o;
    }

    fn check_clock(&mut self, now: u64) -> Result<(), &'static str> {
        if self.clock.is_some_and(|c| now < c) {
            return Err("NonMonotoneTick");
        }
        self.clock = Some(now);
        Ok(())
    }

    fn full_and_all_pinned(&self) -> bool {
        self.active_count() >= self.cfg.active_capacity
            && !self.recs.iter().any(|r| r.place == Place::Active && r.pin.is_none())
    }

    fn land(&mut self, i: usize, now: u64, events: &mut Vec<Event>) {
        let o = self.bump();
        self.recs[i].place = Place::Server;
        self.recs[i].entry_order = o;
        events.push(("Offloaded", self.recs[i].key.clone(), now));
        self.counters.offloads += 1;
        while self.count_in(|p| p == Place::Server) > self.server_capacity {
            if self.server_capacity < self.cfg.server_hard_limit && self.cfg.growth_step > 0 {
                self.server_capacity = (self.server_capacity + self.cfg.growth_step).min(self.cfg.server_hard_limit);
                continue;
            }
            let victim = self.lowest(|r| r.place == Place::Server).unwrap();
            let r = self.recs.remove(victim);
            self.counters.deletions += 1;
            events.push(("ServerDeleted", r.key, now));
        }
    }

    fn shed(&mut self, now: u64, events: &mut Vec<Event>) {
        while self.active_count() > self.cfg.active_capacity {
            let Some(i) = self.lowest(|r| r.place == Place::Active && r.pin.is_none()) else {
                break;
            };
            let o = self.bump();
            self.recs[i].entry_order = o;
            if self.cfg.uplink_latency == 0 {
                self.land(i, now, events);
            } else {
                self.recs[i].place = Place::Transit {
                    due: now + self.cfg.uplink_latency,
                };
            }
        }
    }

    pub fn put(&mut self, key: &str, payload: &[u8], now: u64) -> Result<Vec<Event>, &'static str> {
        if key.is_empty() {
            return Err("EmptyKey");
        }
        self.check_clock(now)?;
        let mut events = Vec::new();
        if let Some(i) = self.find(key) {
            if matches!(self.recs[i].place, Place::Active | Place::Transit { .. }) {
                self.recs[i].payload = payload.to_vec();
                self.touch(i, now);
                return Ok(events);
            }
        }
        if self.full_and_all_pinned() {
            return Err("OverPinned");
        }
        match self.find(key) {
            Some(i) => {
                let o = self.bump();
                self.recs[i].payload = payload.to_vec();
                self.recs[i].place = Place::Active;
                self.recs[i].entry_order = o;
                self.touch(i, now);
            }
            None => {
                let o = self.bump();
                self.recs.push(Rec {
                    key: key.to_string(),
                    payload: payload.to_vec(),
                    count: 1,
                    tick: now,
                    pin: None,
                    place: Place::Active,
                    access_order: o,
                    entry_order: o,
                });
            }
        }
        self.shed(now, &mut events);
        Ok(events)
    }

    pub fn get(&mut self, key: &str, now: u64) -> Result<(Outcome, Vec<Event>), &'static str> {
        self.check_clock(now)?;
        let mut events = Vec::new();
        let Some(i) = self.find(key) else {
            self.counters.misses += 1;
            events.push(("Miss", key.to_string(), now));
            return Ok((Outcome::Miss, events));
        };
        match self.recs[i].place {
            Place::Active | Place::Transit { .. } => {
                let provenance = if self.recs[i].place == Place::Active {
                    "Active"
                } else {
                    "InTransit"
                };
                self.touch(i, now);
                self.counters.hits += 1;
                self.counters.active_hits += 1;
                events.push(("Hit", key.to_string(), now));
                Ok((Outcome::Found(self.recs[i].payload.clone(), provenance), events))
            }
            Place::Server => {
                let draw: f64 = self.rng.random();
                if draw < self.cfg.uplink_failure_rate {
                    return Err("UplinkUnavailable");
                }
                if self.full_and_all_pinned() {
                    return Err("OverPinned");
                }
                self.touch(i, now);
                let o = self.bump();
                let r = &mut self.recs[i];
                r.place = Place::Active;
                r.entry_order = o;
                r.pin = Some(now + self.cfg.pin_duration);
                let payload = r.payload.clone();
                self.counters.fetches += 1;
                events.push(("Fetched", key.to_string(), now));
                self.shed(now, &mut events);
                self.counters.hits += 1;
                events.push(("Hit", key.to_string(), now));
                Ok((Outcome::Found(payload, "FetchedFromServer"), events))
            }
        }
    }

    pub fn tick(&mut self, now: u64) -> Result<Vec<Event>, &'static str> {
        if self.last_tick.is_some_and(|t| now <= t) || self.clock.is_some_and(|c| now < c) {
            return Err("NonMonotoneTick");
        }
        self.last_tick = Some(now);
        self.clock = Some(now);
        let mut events = Vec::new();
        // land due transits in the order they left
        loop {
            let next = self
                .recs
                .iter()
                .enumerate()
                .filter(|(_, r)| matches!(r.place, Place::Transit { due } if due <= now))
                .min_by_key(|(_, r)| r.entry_order)
                .map(|(i, _)| i);
            match next {
                Some(i) => self.land(i, now, &mut events),
                None => break,
            }
        }
        for r in &mut self.recs {
            if r.place == Place::Active && r.pin.is_some_and(|e| e <= now) {
                r.pin = None;
            }
        }
        Ok(events)
    }
}
