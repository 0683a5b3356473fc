//! Scenario files.
//!
//! A `key = value` header followed by a `map:` line and the grid, top row
//! first:
//!
//! ```text
//! seed = 7
//! tick_ms = 50
//! robot.wheel_radius = 0.0325
//! map:
//! ########
//! #S...O.#
//! ########
//! ```
//!
//! Legend: `.` free, `#` obstacle, `O` pit, `=` white line, `B` beacon,
//! `S` start (free floor under the robot). Beacons are numbered from 1 in
//! reading order. Lines starting with `;` are comments.

use std::fmt::Write as _;

use thiserror::Error;

use crate::controller::{ControllerConfig, Mode};
use crate::pid::PidGains;
use crate::progmem::{EvictionPolicy, StoreConfig};
use crate::world::{Cell, Pose, RobotGeometry, TerrainGrid, WorldState};

pub const DEFAULT_TICK_MS: u32 = 50;
pub const MIN_TICK_MS: u32 = 10;
pub const DEFAULT_CELL_SIZE: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {field}: {message}")]
pub struct ScenarioError {
    pub line: usize,
    pub field: String,
    pub message: String,
}

fn err(line: usize, field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub tick_ms: u32,
    pub cell_size: f64,
    pub start_heading_deg: f64,
    pub geometry: RobotGeometry,
    pub gains: PidGains,
    /// `memory.seed` defaults to the scenario seed.
    pub memory: StoreConfig,
    memory_seed_explicit: bool,
    pub controller: ControllerConfig,
    pub grid: TerrainGrid,
    /// Start cell `(ix, iy)`.
    pub start: (i64, i64),
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let mut s = Scenario {
            seed: 0,
            tick_ms: DEFAULT_TICK_MS,
            cell_size: DEFAULT_CELL_SIZE,
            start_heading_deg: 0.0,
            geometry: RobotGeometry::default(),
            gains: PidGains::default(),
            memory: StoreConfig::default(),
            memory_seed_explicit: false,
            controller: ControllerConfig::default(),
            grid: TerrainGrid::new(0, 0, DEFAULT_CELL_SIZE, Vec::new()),
            start: (0, 0),
        };
        let mut seen: Vec<String> = Vec::new();
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut map_line = None;

        for (n, raw) in lines.by_ref() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with(';') {
                continue;
            }
            if line == "map:" {
                map_line = Some(n);
                break;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(n, line, "expected `key = value` or `map:`"))?;
            if seen.iter().any(|k| k == key) {
                return Err(err(n, key, "duplicate key"));
            }
            s.set(n, key, value)?;
            seen.push(key.to_string());
        }
        let map_line = map_line.ok_or_else(|| err(text.lines().count(), "map", "missing `map:` section"))?;

        let rows: Vec<(usize, &str)> = lines
            .map(|(n, l)| (n, l.trim_end()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        if rows.is_empty() {
            return Err(err(map_line, "map", "map has no rows"));
        }
        let width = rows[0].1.chars().count();
        let height = rows.len();
        let mut cells = vec![Cell::Free; width * height];
        let mut start = None;
        let mut beacon = 0u32;
        for (row, &(n, text)) in rows.iter().enumerate() {
            if text.chars().count() != width {
                return Err(err(
                    n,
                    "map",
                    format!("row has {} cells, expected {width}", text.chars().count()),
                ));
            }
            let iy = (height - 1 - row) as i64;
            for (ix, ch) in text.chars().enumerate() {
                let cell = match ch {
                    '.' => Cell::Free,
                    '#' => Cell::Obstacle,
                    'O' => Cell::Pit,
                    '=' => Cell::WhiteLine,
                    'B' => {
                        beacon += 1;
                        Cell::Beacon(beacon)
                    }
                    'S' => {
                        if start.is_some() {
                            return Err(err(n, "map", "duplicate start `S`"));
                        }
                        start = Some((ix as i64, iy));
                        Cell::Free
                    }
                    other => return Err(err(n, "map", format!("unknown map symbol {other:?}"))),
                };
                cells[iy as usize * width + ix] = cell;
            }
        }
        s.start = start.ok_or_else(|| err(map_line, "map", "no start `S`"))?;
        s.grid = TerrainGrid::new(width, height, s.cell_size, cells);
        if !s.memory_seed_explicit {
            s.memory.seed = s.seed;
        }
        s.validate(map_line)?;
        Ok(s)
    }

    fn set(&mut self, n: usize, key: &str, value: &str) -> Result<(), ScenarioError> {
        fn num<T: std::str::FromStr>(n: usize, key: &str, value: &str) -> Result<T, ScenarioError> {
            value
                .parse()
                .map_err(|_| err(n, key, format!("cannot parse {value:?}")))
        }
        match key {
            "seed" => self.seed = num(n, key, value)?,
            "tick_ms" => self.tick_ms = num(n, key, value)?,
            "cell_size" => self.cell_size = num(n, key, value)?,
            "start_heading_deg" => self.start_heading_deg = num(n, key, value)?,
            "robot.wheel_radius" => self.geometry.wheel_radius = num(n, key, value)?,
            "robot.wheel_base" => self.geometry.wheel_base = num(n, key, value)?,
            "robot.flow_resolution" => self.geometry.flow_resolution = num(n, key, value)?,
            "pid.kp" => self.gains.kp = num(n, key, value)?,
            "pid.ki" => self.gains.ki = num(n, key, value)?,
            "pid.kd" => self.gains.kd = num(n, key, value)?,
            "pid.output_min" => self.gains.output_min = num(n, key, value)?,
            "pid.output_max" => self.gains.output_max = num(n, key, value)?,
            "pid.integral_limit" => self.gains.integral_limit = num(n, key, value)?,
            "memory.active_capacity" => self.memory.active_capacity = num(n, key, value)?,
            "memory.server_capacity" => self.memory.server_capacity = num(n, key, value)?,
            "memory.growth_step" => self.memory.growth_step = num(n, key, value)?,
            "memory.server_hard_limit" => self.memory.server_hard_limit = num(n, key, value)?,
            "memory.pin_duration" => self.memory.pin_duration = num(n, key, value)?,
            "memory.uplink_latency" => self.memory.uplink_latency = num(n, key, value)?,
            "memory.uplink_failure_rate" => self.memory.uplink_failure_rate = num(n, key, value)?,
            "memory.seed" => {
                self.memory.seed = num(n, key, value)?;
                self.memory_seed_explicit = true;
            }
            "memory.policy" => {
                self.memory.policy = match value {
                    "progressive" => EvictionPolicy::Progressive,
                    "fifo" => EvictionPolicy::Fifo,
                    _ => return Err(err(n, key, "expected `progressive` or `fifo`")),
                }
            }
            "controller.stop_distance" => self.controller.stop_distance = num(n, key, value)?,
            "controller.reverse_ticks" => self.controller.reverse_ticks = num(n, key, value)?,
            "controller.turn_curvature" => self.controller.turn_curvature = num(n, key, value)?,
            "controller.reference_curvature" => self.controller.reference_curvature = num(n, key, value)?,
            "controller.arm_ticks" => self.controller.arm_ticks = num(n, key, value)?,
            "controller.start_mode" => {
                self.controller.start_mode = match value {
                    "auto" => Mode::Auto,
                    "teleop" => Mode::Teleop,
                    _ => return Err(err(n, key, "expected `auto` or `teleop`")),
                }
            }
            _ => return Err(err(n, key, "unknown key")),
        }
        Ok(())
    }

    fn validate(&self, line: usize) -> Result<(), ScenarioError> {
        if self.tick_ms < MIN_TICK_MS {
            return Err(err(line, "tick_ms", format!("must be at least {MIN_TICK_MS}")));
        }
        let positive = [
            ("cell_size", self.cell_size),
            ("robot.wheel_radius", self.geometry.wheel_radius),
            ("robot.wheel_base", self.geometry.wheel_base),
            ("robot.flow_resolution", self.geometry.flow_resolution),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(err(line, field, "must be positive"));
            }
        }
        if !self.start_heading_deg.is_finite() {
            return Err(err(line, "start_heading_deg", "must be finite"));
        }
        self.gains.validate().map_err(|e| err(line, "pid", e.to_string()))?;
        self.memory.validate().map_err(|e| err(line, "memory", e.to_string()))?;
        self.controller
            .validate()
            .map_err(|e| err(line, "controller", e.to_string()))?;
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.tick_ms as f64 / 1000.0
    }

    /// Replaces the seed, carrying it into the memory store unless that had
    /// its own.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        if !self.memory_seed_explicit {
            self.memory.seed = seed;
        }
    }

    pub fn start_pose(&self) -> Pose {
        let (x, y) = self.grid.center_of(self.start.0, self.start.1);
        Pose {
            x,
            y,
            heading: crate::world::normalize_angle(self.start_heading_deg.to_radians()),
        }
    }

    pub fn world(&self) -> WorldState {
        WorldState::new(
            self.grid.clone(),
            self.start_pose(),
            self.geometry,
            self.dt(),
            self.seed,
        )
    }

    /// Writes the scenario back out in a form `parse` accepts.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let g = &self.gains;
        let m = &self.memory;
        let c = &self.controller;
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "tick_ms = {}", self.tick_ms);
        let _ = writeln!(out, "cell_size = {}", self.cell_size);
        let _ = writeln!(out, "start_heading_deg = {}", self.start_heading_deg);
        let _ = writeln!(out, "robot.wheel_radius = {}", self.geometry.wheel_radius);
        let _ = writeln!(out, "robot.wheel_base = {}", self.geometry.wheel_base);
        let _ = writeln!(out, "robot.flow_resolution = {}", self.geometry.flow_resolution);
        let _ = writeln!(out, "pid.kp = {}", g.kp);
        let _ = writeln!(out, "pid.ki = {}", g.ki);
        let _ = writeln!(out, "pid.kd = {}", g.kd);
        let _ = writeln!(out, "pid.output_min = {}", g.output_min);
        let _ = writeln!(out, "pid.output_max = {}", g.output_max);
        let _ = writeln!(out, "pid.integral_limit = {}", g.integral_limit);
        let _ = writeln!(out, "memory.active_capacity = {}", m.active_capacity);
        let _ = writeln!(out, "memory.server_capacity = {}", m.server_capacity);
        let _ = writeln!(out, "memory.growth_step = {}", m.growth_step);
        let _ = writeln!(out, "memory.server_hard_limit = {}", m.server_hard_limit);
        let _ = writeln!(out, "memory.pin_duration = {}", m.pin_duration);
        let _ = writeln!(out, "memory.uplink_latency = {}", m.uplink_latency);
        let _ = writeln!(out, "memory.uplink_failure_rate = {}", m.uplink_failure_rate);
        if self.memory_seed_explicit {
            let _ = writeln!(out, "memory.seed = {}", m.seed);
        }
        let policy = match m.policy {
            EvictionPolicy::Progressive => "progressive",
            EvictionPolicy::Fifo => "fifo",
        };
        let _ = writeln!(out, "memory.policy = {policy}");
        let _ = writeln!(out, "controller.stop_distance = {}", c.stop_distance);
        let _ = writeln!(out, "controller.reverse_ticks = {}", c.reverse_ticks);
        let _ = writeln!(out, "controller.turn_curvature = {}", c.turn_curvature);
        let _ = writeln!(out, "controller.reference_curvature = {}", c.reference_curvature);
        let _ = writeln!(out, "controller.arm_ticks = {}", c.arm_ticks);
        let mode = match c.start_mode {
            Mode::Auto => "auto",
            Mode::Teleop => "teleop",
        };
        let _ = writeln!(out, "controller.start_mode = {mode}");
        out.push_str("map:\n");
        let map = self.grid.render();
        for (row, line) in map.lines().enumerate() {
            let iy = (self.grid.height() - 1 - row) as i64;
            if iy == self.start.1 {
                let mut chars: Vec<char> = line.chars().collect();
                chars[self.start.0 as usize] = 'S';
                out.extend(chars);
            } else {
                out.push_str(line);
            }
            out.push('\n');
        }
        out
    }
}
