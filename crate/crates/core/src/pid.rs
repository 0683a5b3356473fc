//! Discrete PID with conditional anti-windup, plus the curvature-dependent
//! speed cap used when turning.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PidError {
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("curvature must be non-negative, got {0}")]
    NegativeCurvature(f64),
    #[error("reference curvature must be positive, got {0}")]
    NonPositiveReference(f64),
    #[error("invalid gains: {0}")]
    InvalidGains(&'static str),
}

/// Controller gains and actuator limits.
///
/// The defaults are tuned for wheel-speed tracking in rpm: on a first-order
/// plant with a 0.5 s time constant a unit step stays within 2% from about
/// 2.5 s on, and on the simulator's ideal motors (output applied on the next
/// tick) the closed-loop poles sit at 0.84 and -0.59.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub output_min: f64,
    pub output_max: f64,
    pub integral_limit: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        PidGains {
            kp: 0.5,
            ki: 5.0,
            kd: 0.0,
            output_min: -160.0,
            output_max: 160.0,
            integral_limit: 160.0,
        }
    }
}

impl PidGains {
    pub fn validate(&self) -> Result<(), PidError> {
        if !(self.output_min < self.output_max) {
            return Err(PidError::InvalidGains("output_min must be below output_max"));
        }
        if !(self.integral_limit >= 0.0) {
            return Err(PidError::InvalidGains("integral_limit must be non-negative"));
        }
        if ![self.kp, self.ki, self.kd].iter().all(|g| g.is_finite()) {
            return Err(PidError::InvalidGains("gains must be finite"));
        }
        Ok(())
    }

    /// Largest integral magnitude allowed so that `ki·integral` stays within
    /// `integral_limit`.
    pub fn integral_bound(&self) -> f64 {
        if self.ki > 0.0 {
            self.integral_limit / self.ki
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PidState {
    /// Accumulated error·s.
    pub integral: f64,
    pub prev_error: f64,
    pub initialized: bool,
}

impl PidState {
    /// Advances the controller one step and returns the clamped output.
    ///
    /// The integral is frozen while the unclamped output is saturated in the
    /// direction the error pushes it. The first step after a reset has no
    /// derivative contribution.
    pub fn step(&mut self, gains: &PidGains, setpoint: f64, measurement: f64, dt: f64) -> Result<f64, PidError> {
        if !(dt > 0.0) {
            return Err(PidError::NonPositiveDt(dt));
        }
        let error = setpoint - measurement;
        let derivative = if self.initialized {
            (error - self.prev_error) / dt
        } else {
            0.0
        };

        let mut integral = self.integral;
        if gains.ki > 0.0 {
            let candidate = integral + error * dt;
            let raw = gains.kp * error + gains.ki * candidate + gains.kd * derivative;
            let saturated_with_error =
                (raw > gains.output_max && error > 0.0) || (raw < gains.output_min && error < 0.0);
            if !saturated_with_error {
                integral = candidate;
            }
            let bound = gains.integral_bound();
            integral = integral.clamp(-bound, bound);
        }

        let output = gains.kp * error + gains.ki * integral + gains.kd * derivative;
        self.integral = integral;
        self.prev_error = error;
        self.initialized = true;
        Ok(output.clamp(gains.output_min, gains.output_max))
    }

    pub fn reset(&mut self) {
        *self = PidState::default();
    }
}

/// Value-semantics form of [`PidState::step`].
pub fn step(
    gains: &PidGains,
    state: PidState,
    setpoint: f64,
    measurement: f64,
    dt: f64,
) -> Result<(f64, PidState), PidError> {
    let mut next = state;
    let output = next.step(gains, setpoint, measurement, dt)?;
    Ok((output, next))
}

pub fn reset(_state: PidState) -> PidState {
    PidState::default()
}

pub const DEFAULT_REFERENCE_CURVATURE: f64 = 1.0;

/// Speed cap `v_max / (1 + κ/k_ref)`: full speed on straights, halved at
/// the reference curvature.
pub fn curvature_speed_limit(curvature: f64, v_max: f64, k_ref: f64) -> Result<f64, PidError> {
    if !(curvature >= 0.0) {
        return Err(PidError::NegativeCurvature(curvature));
    }
    if !(k_ref > 0.0) {
        return Err(PidError::NonPositiveReference(k_ref));
    }
    Ok(v_max / (1.0 + curvature / k_ref))
}
