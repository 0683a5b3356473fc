//! Perception, processing and action.
//!
//! Each tick the controller reads sensors, updates its safety state, turns
//! inbound keypad digits and SIRC frames into commands, arbitrates between
//! safety, the operator and the track follower, converts the winning command
//! into wheel-speed setpoints, closes the PID loops and logs a sensor summary
//! into progressive memory.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtmf::KeypadSymbol;
use crate::pid::{curvature_speed_limit, PidError, PidGains, PidState};
use crate::progmem::{MemoryError, ProgressiveStore, StoreConfig, TierStats};
use crate::sirc::SircFrame;
use crate::world::{
    normalize_angle, Actuation, GrabberAction, Pose, RobotGeometry, SensorReadings, ARM_MAX_RPM, DRIVE_MAX_RPM,
};

/// SIRC address reserved for the grabber board.
pub const GRABBER_ADDRESS: u8 = 0x01;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error(transparent)]
    Pid(#[from] PidError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error("invalid controller configuration: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Forward,
    Backward,
    TurnLeft,
    TurnRight,
    Stop,
    ArmUp,
    ArmDown,
    GrabOpen,
    GrabClose,
    ModeAuto,
    ModeTeleop,
}

impl CommandKind {
    pub const ALL: [CommandKind; 11] = [
        CommandKind::Forward,
        CommandKind::Backward,
        CommandKind::TurnLeft,
        CommandKind::TurnRight,
        CommandKind::Stop,
        CommandKind::ArmUp,
        CommandKind::ArmDown,
        CommandKind::GrabOpen,
        CommandKind::GrabClose,
        CommandKind::ModeAuto,
        CommandKind::ModeTeleop,
    ];

    /// Commands that set wheel motion.
    pub fn is_drive(self) -> bool {
        matches!(
            self,
            CommandKind::Forward
                | CommandKind::Backward
                | CommandKind::TurnLeft
                | CommandKind::TurnRight
                | CommandKind::Stop
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandSource {
    Teleop,
    Follower,
    Safety,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DriveCommand {
    pub kind: CommandKind,
    pub source: CommandSource,
}

impl DriveCommand {
    pub fn new(kind: CommandKind, source: CommandSource) -> DriveCommand {
        DriveCommand { kind, source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetyState {
    #[default]
    Nominal,
    HaltedAwaitingInstruction,
    Reversing(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Auto,
    #[default]
    Teleop,
}

/// Operator intent offered to arbitration. `fresh` marks a command that
/// arrived this tick, as opposed to one still held from earlier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TeleopIntent {
    pub kind: CommandKind,
    pub fresh: bool,
}

/// Keypad table: 2/8/4/6 drive, 5 stops, 1/7 move the arm, * and # open and
/// close the grabber, A and B switch mode.
pub fn map_digit_to_command(symbol: KeypadSymbol) -> Option<DriveCommand> {
    let kind = match symbol.as_char() {
        '2' => CommandKind::Forward,
        '8' => CommandKind::Backward,
        '4' => CommandKind::TurnLeft,
        '6' => CommandKind::TurnRight,
        '5' => CommandKind::Stop,
        '*' => CommandKind::GrabOpen,
        '#' => CommandKind::GrabClose,
        'A' => CommandKind::ModeAuto,
        'B' => CommandKind::ModeTeleop,
        '1' => CommandKind::ArmUp,
        '7' => CommandKind::ArmDown,
        _ => return None,
    };
    Some(DriveCommand::new(kind, CommandSource::Teleop))
}

pub fn map_sirc_to_command(frame: SircFrame) -> Option<DriveCommand> {
    if frame.address() != GRABBER_ADDRESS {
        return None;
    }
    let kind = match frame.command() {
        0x00 => CommandKind::GrabOpen,
        0x01 => CommandKind::GrabClose,
        0x02 => CommandKind::ArmUp,
        0x03 => CommandKind::ArmDown,
        _ => return None,
    };
    Some(DriveCommand::new(kind, CommandSource::Teleop))
}

/// Line-tracking rule: with free white floor on the left, turn right and
/// back up one step; otherwise go forward. The back-up is delivered on the
/// call after the turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrackFollower {
    pending_backward: bool,
}

impl TrackFollower {
    pub fn follow_track(&mut self, readings: &SensorReadings) -> DriveCommand {
        let kind = if std::mem::take(&mut self.pending_backward) {
            CommandKind::Backward
        } else if !readings.left_is_obstacle && readings.left_is_white {
            self.pending_backward = true;
            CommandKind::TurnRight
        } else {
            CommandKind::Forward
        };
        DriveCommand::new(kind, CommandSource::Follower)
    }

    pub fn reset(&mut self) {
        self.pending_backward = false;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arbitration {
    pub command: DriveCommand,
    pub safety: SafetyState,
}

/// Strict priority Safety > Teleop > Follower.
///
/// `Reversing` forces `Backward` and counts down. `HaltedAwaitingInstruction`
/// forces `Stop` until a fresh operator command arrives, which clears it.
pub fn arbitrate(
    safety: SafetyState,
    teleop: Option<TeleopIntent>,
    follower: Option<DriveCommand>,
    mode: Mode,
) -> Arbitration {
    match safety {
        SafetyState::Reversing(n) if n > 0 => Arbitration {
            command: DriveCommand::new(CommandKind::Backward, CommandSource::Safety),
            safety: if n > 1 {
                SafetyState::Reversing(n - 1)
            } else {
                SafetyState::Nominal
            },
        },
        SafetyState::HaltedAwaitingInstruction => match teleop {
            Some(intent) if intent.fresh => Arbitration {
                command: DriveCommand::new(intent.kind, CommandSource::Teleop),
                safety: SafetyState::Nominal,
            },
            _ => Arbitration {
                command: DriveCommand::new(CommandKind::Stop, CommandSource::Safety),
                safety,
            },
        },
        _ => {
            let command = match (teleop, follower) {
                (Some(intent), _) => DriveCommand::new(intent.kind, CommandSource::Teleop),
                (None, Some(f)) if mode == Mode::Auto => f,
                _ => DriveCommand::new(CommandKind::Stop, CommandSource::Teleop),
            };
            Arbitration {
                command,
                safety: SafetyState::Nominal,
            }
        }
    }
}

/// Dead reckoning: rotates the body-frame flow displacement by the current
/// heading, adds it to the position, then applies `heading_delta`.
pub fn integrate_odometry(pose: Pose, flow: (i32, i32), heading_delta: f64, scale: f64) -> Pose {
    let (bx, by) = (flow.0 as f64 * scale, flow.1 as f64 * scale);
    let (s, c) = pose.heading.sin_cos();
    Pose {
        x: pose.x + c * bx - s * by,
        y: pose.y + s * bx + c * by,
        heading: normalize_angle(pose.heading + heading_delta),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    /// Minimum front clearance in metres before reversing.
    pub stop_distance: f64,
    pub reverse_ticks: u32,
    /// Path curvature used for turn commands, 1/m.
    pub turn_curvature: f64,
    /// Curvature at which the speed cap halves, 1/m.
    pub reference_curvature: f64,
    /// Ticks an arm command keeps the arm motor running.
    pub arm_ticks: u32,
    pub start_mode: Mode,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            stop_distance: 0.2,
            reverse_ticks: 10,
            turn_curvature: 2.0,
            reference_curvature: 1.0,
            arm_ticks: 5,
            start_mode: Mode::Teleop,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        if !(self.stop_distance >= 0.0) {
            return Err(ControllerError::InvalidConfig("stop_distance must be non-negative"));
        }
        if self.reverse_ticks == 0 {
            return Err(ControllerError::InvalidConfig("reverse_ticks must be at least 1"));
        }
        if !(self.turn_curvature > 0.0) || !(self.reference_curvature > 0.0) {
            return Err(ControllerError::InvalidConfig("curvatures must be positive"));
        }
        Ok(())
    }
}

/// A decoded operator signal waiting for the next tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inbound {
    Digit(KeypadSymbol),
    Sirc(SircFrame),
}

impl Inbound {
    pub fn command(self) -> Option<DriveCommand> {
        match self {
            Inbound::Digit(d) => map_digit_to_command(d),
            Inbound::Sirc(f) => map_sirc_to_command(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerTelemetry {
    pub tick: u64,
    pub estimated_pose: Pose,
    pub safety: SafetyState,
    pub mode: Mode,
    pub command: DriveCommand,
    pub follower_command: Option<CommandKind>,
    /// Left and right wheel setpoints in rpm.
    pub setpoints: (f64, f64),
    pub actuation: Actuation,
    pub readings: SensorReadings,
    pub memory: TierStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub actuation: Actuation,
    pub telemetry: ControllerTelemetry,
}

#[derive(Debug, Serialize)]
struct SensorSummary<'a> {
    tick: u64,
    pose: &'a Pose,
    min_proximity: f64,
    ping: f64,
    pit_ahead: bool,
    left_is_obstacle: bool,
    left_is_white: bool,
}

#[derive(Debug, Clone)]
pub struct Controller {
    config: ControllerConfig,
    geometry: RobotGeometry,
    gains: PidGains,
    dt: f64,
    safety: SafetyState,
    mode: Mode,
    pose_estimate: Pose,
    pid_left: PidState,
    pid_right: PidState,
    follower: TrackFollower,
    held: Option<CommandKind>,
    /// Setpoints issued last tick: the wheel speed the encoders should now read.
    reference: (f64, f64),
    arm: Option<(f64, u32)>,
    memory: ProgressiveStore,
    memory_puts: u64,
}

impl Controller {
    pub fn new(
        config: ControllerConfig,
        geometry: RobotGeometry,
        gains: PidGains,
        memory: StoreConfig,
        dt: f64,
        start: Pose,
    ) -> Result<Controller, ControllerError> {
        config.validate()?;
        gains.validate()?;
        if !(dt > 0.0) {
            return Err(PidError::NonPositiveDt(dt).into());
        }
        Ok(Controller {
            config,
            geometry,
            gains,
            dt,
            safety: SafetyState::Nominal,
            mode: config.start_mode,
            pose_estimate: start,
            pid_left: PidState::default(),
            pid_right: PidState::default(),
            follower: TrackFollower::default(),
            held: None,
            reference: (0.0, 0.0),
            arm: None,
            memory: ProgressiveStore::new(memory)?,
            memory_puts: 0,
        })
    }

    pub fn safety(&self) -> SafetyState {
        self.safety
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn pose_estimate(&self) -> Pose {
        self.pose_estimate
    }

    pub fn memory(&self) -> &ProgressiveStore {
        &self.memory
    }

    pub fn memory_puts(&self) -> u64 {
        self.memory_puts
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    /// Left and right wheel setpoints in rpm for a drive command. Turns
    /// follow an arc of `turn_curvature` at the curvature-capped speed.
    pub fn setpoints(&self, kind: CommandKind) -> Result<(f64, f64), PidError> {
        let v_max = self.geometry.max_speed();
        let half_base = self.geometry.wheel_base / 2.0;
        let (v, curvature) = match kind {
            CommandKind::Forward => (curvature_speed_limit(0.0, v_max, self.config.reference_curvature)?, 0.0),
            CommandKind::Backward => (
                -curvature_speed_limit(0.0, v_max, self.config.reference_curvature)?,
                0.0,
            ),
            CommandKind::TurnLeft | CommandKind::TurnRight => {
                let k = self.config.turn_curvature;
                let v = curvature_speed_limit(k, v_max, self.config.reference_curvature)?;
                (v, if kind == CommandKind::TurnLeft { k } else { -k })
            }
            _ => (0.0, 0.0),
        };
        let omega = v * curvature;
        let to_rpm = |s: f64| self.geometry.rpm_for_speed(s).clamp(-DRIVE_MAX_RPM, DRIVE_MAX_RPM);
        Ok((to_rpm(v - omega * half_base), to_rpm(v + omega * half_base)))
    }

    /// One perception/processing/action cycle.
    pub fn control_tick(
        &mut self,
        readings: &SensorReadings,
        inbound: &[Inbound],
        now: u64,
    ) -> Result<TickOutput, ControllerError> {
        // perception: dead reckoning and safety
        let (rpm_l, rpm_r) = readings.wheel_rpm;
        let heading_delta = (self.geometry.surface_speed(rpm_r) - self.geometry.surface_speed(rpm_l))
            / self.geometry.wheel_base
            * self.dt;
        self.pose_estimate = integrate_odometry(
            self.pose_estimate,
            readings.optical_flow,
            heading_delta,
            self.geometry.flow_resolution,
        );

        if readings.pit_ahead {
            if self.safety != SafetyState::HaltedAwaitingInstruction {
                self.held = None;
            }
            self.safety = SafetyState::HaltedAwaitingInstruction;
        } else if self.safety == SafetyState::Nominal && readings.min_proximity() < self.config.stop_distance {
            self.held = None;
            self.safety = SafetyState::Reversing(self.config.reverse_ticks);
        }

        // processing: operator commands in arrival order
        let mut fresh = None;
        let mut grabber_action = GrabberAction::None;
        for command in inbound.iter().filter_map(|i| i.command()) {
            match command.kind {
                CommandKind::ModeAuto => {
                    self.mode = Mode::Auto;
                    self.held = None;
                }
                CommandKind::ModeTeleop => {
                    self.mode = Mode::Teleop;
                    self.held = None;
                }
                CommandKind::ArmUp => self.arm = Some((ARM_MAX_RPM, self.config.arm_ticks)),
                CommandKind::ArmDown => self.arm = Some((-ARM_MAX_RPM, self.config.arm_ticks)),
                CommandKind::GrabOpen => grabber_action = GrabberAction::Open,
                CommandKind::GrabClose => grabber_action = GrabberAction::Close,
                kind => {
                    fresh = Some(kind);
                    self.held = Some(kind);
                }
            }
        }
        let teleop = match fresh {
            Some(kind) => Some(TeleopIntent { kind, fresh: true }),
            None => self.held.map(|kind| TeleopIntent { kind, fresh: false }),
        };

        let follower = if self.mode == Mode::Auto {
            Some(self.follower.follow_track(readings))
        } else {
            self.follower.reset();
            None
        };

        let decision = arbitrate(self.safety, teleop, follower, self.mode);
        self.safety = decision.safety;
        if decision.command.source == CommandSource::Safety {
            self.held = None;
        }

        // action: the setpoint drives the wheels directly and each PID trims
        // the gap between what the encoder reads and what was asked for last
        // tick, so a motor that lags gets pushed while an ideal one is left
        // alone
        let setpoints = self.setpoints(decision.command.kind)?;
        let (left_rpm, right_rpm) = if decision.command.kind == CommandKind::Stop {
            self.pid_left.reset();
            self.pid_right.reset();
            (0.0, 0.0)
        } else {
            let l = self.pid_left.step(&self.gains, self.reference.0, rpm_l, self.dt)?;
            let r = self.pid_right.step(&self.gains, self.reference.1, rpm_r, self.dt)?;
            (
                (setpoints.0 + l).clamp(-DRIVE_MAX_RPM, DRIVE_MAX_RPM),
                (setpoints.1 + r).clamp(-DRIVE_MAX_RPM, DRIVE_MAX_RPM),
            )
        };
        self.reference = (left_rpm, right_rpm);
        let arm_rate = match self.arm.as_mut() {
            Some((rate, ticks)) if *ticks > 0 => {
                *ticks -= 1;
                *rate
            }
            _ => 0.0,
        };
        if matches!(self.arm, Some((_, 0))) {
            self.arm = None;
        }
        let actuation = Actuation {
            left_rpm,
            right_rpm,
            arm_rate,
            grabber_action,
        };

        // learning: per-tick summary into progressive memory
        self.memory.tick(now)?;
        let summary = SensorSummary {
            tick: now,
            pose: &self.pose_estimate,
            min_proximity: readings.min_proximity(),
            ping: readings.ping,
            pit_ahead: readings.pit_ahead,
            left_is_obstacle: readings.left_is_obstacle,
            left_is_white: readings.left_is_white,
        };
        let payload = serde_json::to_vec(&summary).expect("summary serializes");
        self.memory.put(&format!("tick:{now}"), payload, now)?;
        self.memory_puts += 1;

        Ok(TickOutput {
            actuation,
            telemetry: ControllerTelemetry {
                tick: now,
                estimated_pose: self.pose_estimate,
                safety: self.safety,
                mode: self.mode,
                command: decision.command,
                follower_command: follower.map(|f| f.kind),
                setpoints,
                actuation,
                readings: *readings,
                memory: self.memory.stats(),
            },
        })
    }
}
