//! Deterministic fixed-tick grid world with a differential-drive robot.
//!
//! The robot is a point on a [`TerrainGrid`]. Each tick it moves by the
//! unicycle model driven by the commanded wheel rpm; motion into an
//! `Obstacle` (or beacon) cell is blocked while the heading still turns.
//! Entering a `Pit` cell is terminal.

mod grid;

pub use grid::{Cell, TerrainGrid};

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// No-load drive motor speed.
pub const DRIVE_MAX_RPM: f64 = 160.0;
/// Arm motor rating.
pub const ARM_MAX_RPM: f64 = 60.0;
pub const PROXIMITY_RANGE: f64 = 1.0;
pub const PING_RANGE: f64 = 2.0;
/// Proximity ray offsets from the heading: left, centre, right. The arc is
/// narrow enough that a wall in the neighbouring cell reads beyond 0.2 m.
pub const PROXIMITY_OFFSETS: [f64; 3] = [PI / 18.0, 0.0, -PI / 18.0];
/// The grabber closes on a beacon when ping reads at most this distance.
pub const GRAB_DISTANCE: f64 = 0.15;
pub const ARM_MIN_ANGLE: f64 = -FRAC_PI_2;
pub const ARM_MAX_ANGLE: f64 = FRAC_PI_2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("drive rpm ({left}, {right}) outside ±{DRIVE_MAX_RPM}")]
    DriveLimit { left: f64, right: f64 },
    #[error("arm rate {0} rpm outside ±{ARM_MAX_RPM}")]
    ArmLimit(f64),
    #[error("step dt {got} s differs from the configured tick {expected} s")]
    TickMismatch { expected: f64, got: f64 },
}

/// Position in metres and heading in radians, normalized to (−π, π].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

pub fn normalize_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grabber {
    Open,
    Closed,
    Holding(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrabberAction {
    #[default]
    None,
    Open,
    Close,
}

/// Fixed chassis parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotGeometry {
    pub wheel_radius: f64,
    pub wheel_base: f64,
    /// Metres of floor travel per optical-flow count.
    pub flow_resolution: f64,
}

impl Default for RobotGeometry {
    fn default() -> Self {
        RobotGeometry {
            wheel_radius: 0.0325,
            wheel_base: 0.15,
            flow_resolution: 0.001,
        }
    }
}

impl RobotGeometry {
    /// Wheel surface speed in m/s for a motor speed in rpm.
    pub fn surface_speed(&self, rpm: f64) -> f64 {
        rpm * 2.0 * PI * self.wheel_radius / 60.0
    }

    pub fn rpm_for_speed(&self, speed: f64) -> f64 {
        speed * 60.0 / (2.0 * PI * self.wheel_radius)
    }

    /// Straight-line speed at full drive rpm.
    pub fn max_speed(&self) -> f64 {
        self.surface_speed(DRIVE_MAX_RPM)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotBody {
    pub pose: Pose,
    pub geometry: RobotGeometry,
    pub left_rpm: f64,
    pub right_rpm: f64,
    pub arm_angle: f64,
    pub grabber: Grabber,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Actuation {
    pub left_rpm: f64,
    pub right_rpm: f64,
    pub arm_rate: f64,
    pub grabber_action: GrabberAction,
}

impl Actuation {
    pub fn stop() -> Actuation {
        Actuation::default()
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let ok = |v: f64, lim: f64| v.is_finite() && v.abs() <= lim;
        if !ok(self.left_rpm, DRIVE_MAX_RPM) || !ok(self.right_rpm, DRIVE_MAX_RPM) {
            return Err(WorldError::DriveLimit {
                left: self.left_rpm,
                right: self.right_rpm,
            });
        }
        if !ok(self.arm_rate, ARM_MAX_RPM) {
            return Err(WorldError::ArmLimit(self.arm_rate));
        }
        Ok(())
    }

    pub fn drives(&self) -> bool {
        self.left_rpm != 0.0 || self.right_rpm != 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SensorReadings {
    /// Left, centre and right front-arc ranges in metres.
    pub proximity: [f64; 3],
    pub ping: f64,
    /// The ping ray ends on a beacon rather than a wall.
    pub ping_beacon: bool,
    pub pit_ahead: bool,
    pub left_is_obstacle: bool,
    pub left_is_white: bool,
    /// Body-frame optical-flow counts accumulated over the last tick.
    pub optical_flow: (i32, i32),
    /// Wheel encoder speeds in rpm over the last tick.
    pub wheel_rpm: (f64, f64),
}

impl SensorReadings {
    pub fn min_proximity(&self) -> f64 {
        self.proximity.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub grid: TerrainGrid,
    pub body: RobotBody,
    pub tick: u64,
    pub seed: u64,
    pub dt: f64,
    pub fallen: bool,
    flow_residual: (f64, f64),
    last_flow: (i32, i32),
}

impl WorldState {
    pub fn new(grid: TerrainGrid, start: Pose, geometry: RobotGeometry, dt: f64, seed: u64) -> WorldState {
        WorldState {
            grid,
            body: RobotBody {
                pose: Pose {
                    heading: normalize_angle(start.heading),
                    ..start
                },
                geometry,
                left_rpm: 0.0,
                right_rpm: 0.0,
                arm_angle: 0.0,
                grabber: Grabber::Open,
            },
            tick: 0,
            seed,
            dt,
            fallen: false,
            flow_residual: (0.0, 0.0),
            last_flow: (0, 0),
        }
    }

    pub fn pose(&self) -> Pose {
        self.body.pose
    }

    pub fn grabber_at(&self) -> Grabber {
        self.body.grabber
    }

    fn ahead(&self, distance: f64, offset: f64) -> (f64, f64) {
        let p = self.body.pose;
        let a = p.heading + offset;
        (p.x + distance * a.cos(), p.y + distance * a.sin())
    }

    fn ping_cast(&self) -> (f64, Option<Cell>) {
        let p = self.body.pose;
        self.grid.cast((p.x, p.y), p.heading, PING_RANGE, |c| {
            matches!(c, Cell::Obstacle | Cell::Beacon(_))
        })
    }

    pub fn sense(&self) -> SensorReadings {
        let p = self.body.pose;
        let proximity = PROXIMITY_OFFSETS.map(|off| {
            self.grid
                .cast((p.x, p.y), p.heading + off, PROXIMITY_RANGE, |c| c == Cell::Obstacle)
                .0
        });
        let (ping, target) = self.ping_cast();
        let s = self.grid.cell_size();
        let (ax, ay) = self.ahead(s, 0.0);
        let (lx, ly) = self.ahead(s, FRAC_PI_2);
        let left = self.grid.cell_at(lx, ly);
        SensorReadings {
            proximity,
            ping,
            ping_beacon: matches!(target, Some(Cell::Beacon(_))),
            pit_ahead: self.grid.cell_at(ax, ay) == Cell::Pit,
            left_is_obstacle: left == Cell::Obstacle,
            left_is_white: left == Cell::WhiteLine,
            optical_flow: self.last_flow,
            wheel_rpm: (self.body.left_rpm, self.body.right_rpm),
        }
    }

    /// Advances one tick. A fallen robot no longer changes.
    pub fn step(&mut self, actuation: &Actuation, dt: f64) -> Result<SensorReadings, WorldError> {
        if (dt - self.dt).abs() > 1e-9 {
            return Err(WorldError::TickMismatch {
                expected: self.dt,
                got: dt,
            });
        }
        actuation.validate()?;
        if self.fallen {
            return Ok(SensorReadings {
                optical_flow: (0, 0),
                ..self.sense()
            });
        }

        let geometry = self.body.geometry;
        self.body.left_rpm = actuation.left_rpm;
        self.body.right_rpm = actuation.right_rpm;
        let v_left = geometry.surface_speed(actuation.left_rpm);
        let v_right = geometry.surface_speed(actuation.right_rpm);
        let v = (v_left + v_right) / 2.0;
        let omega = (v_right - v_left) / geometry.wheel_base;

        let pose = self.body.pose;
        let turn = omega * dt;
        let travel = v * dt;
        let mid = pose.heading + turn / 2.0;
        let (nx, ny) = (pose.x + travel * mid.cos(), pose.y + travel * mid.sin());
        let blocked = self.grid.cell_at(nx, ny).blocks_motion();
        let body_disp = if blocked || travel == 0.0 {
            (0.0, 0.0)
        } else {
            self.body.pose.x = nx;
            self.body.pose.y = ny;
            ((turn / 2.0).cos() * travel, (turn / 2.0).sin() * travel)
        };
        self.body.pose.heading = normalize_angle(pose.heading + turn);

        if self.grid.cell_at(self.body.pose.x, self.body.pose.y) == Cell::Pit {
            self.fallen = true;
        }

        let arm_step = actuation.arm_rate * 2.0 * PI / 60.0 * dt;
        self.body.arm_angle = (self.body.arm_angle + arm_step).clamp(ARM_MIN_ANGLE, ARM_MAX_ANGLE);
        self.apply_grabber(actuation.grabber_action);

        let res = geometry.flow_resolution;
        let (rx, ry) = (
            self.flow_residual.0 + body_disp.0 / res,
            self.flow_residual.1 + body_disp.1 / res,
        );
        let counts = (rx.trunc(), ry.trunc());
        self.flow_residual = (rx - counts.0, ry - counts.1);
        self.last_flow = (counts.0 as i32, counts.1 as i32);

        self.tick += 1;
        Ok(self.sense())
    }

    fn apply_grabber(&mut self, action: GrabberAction) {
        match (action, self.body.grabber) {
            (GrabberAction::None, _) => {}
            (GrabberAction::Close, Grabber::Holding(_)) => {}
            (GrabberAction::Close, _) => {
                let (ping, target) = self.ping_cast();
                self.body.grabber = match target {
                    Some(Cell::Beacon(id)) if ping <= GRAB_DISTANCE => {
                        let (bx, by) = self.ahead(ping + 1e-6, 0.0);
                        let (ix, iy) = self.grid.index_of(bx, by);
                        self.grid.set(ix, iy, Cell::Free);
                        Grabber::Holding(id)
                    }
                    _ => Grabber::Closed,
                };
            }
            (GrabberAction::Open, Grabber::Holding(id)) => {
                let (ax, ay) = self.ahead(self.grid.cell_size(), 0.0);
                let (ix, iy) = self.grid.index_of(ax, ay);
                let (hx, hy) = self.grid.index_of(self.body.pose.x, self.body.pose.y);
                if (ix, iy) != (hx, hy) && self.grid.cell(ix, iy) == Cell::Free {
                    self.grid.set(ix, iy, Cell::Beacon(id));
                    self.body.grabber = Grabber::Open;
                }
            }
            (GrabberAction::Open, _) => self.body.grabber = Grabber::Open,
        }
    }
}
