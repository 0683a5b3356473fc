//! Core of the teleoperation stack.
//!
//! * [`dtmf`] - dual-tone keypad encoding and Goertzel detection
//! * [`sirc`] - 12-bit SIRC infrared pulse-train codec
//! * [`pid`] - discrete PID with conditional anti-windup and curvature speed limiting
//! * [`progmem`] - usage-ordered active store with offload to an expandable server
//! * [`world`] - deterministic grid-terrain differential-drive simulator
//! * [`controller`] - perception/processing/action loop tying the above together
//! * [`scenario`] - text scenario files: header keys plus an ASCII map
//! * [`sim`] - the closed loop of controller and world, tick by tick

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod dtmf;
pub mod pid;
pub mod progmem;
pub mod scenario;
pub mod sim;
pub mod sirc;
pub mod world;
