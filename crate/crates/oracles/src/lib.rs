//! Reference implementations written separately from `teleop-core`, used only
//! as test oracles. They favour directness over speed: naive transforms,
//! linear scans, fine-step numerical integration.

pub mod memory;

use std::f64::consts::PI;

/// Normalized power at `freq` by direct evaluation of the discrete-time
/// Fourier sum: `|Σ x[n]·e^{-j2πfn/fs}|² / N²`.
pub fn dft_power(samples: &[f64], sample_rate: f64, freq: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (n, &x) in samples.iter().enumerate() {
        let phase = 2.0 * PI * freq * n as f64 / sample_rate;
        re += x * phase.cos();
        im -= x * phase.sin();
    }
    let len = samples.len() as f64;
    (re * re + im * im) / (len * len)
}

/// Keypad layout as printed on a telephone pad, rows low to high.
pub const KEYPAD: [[char; 4]; 4] = [
    ['1', '2', '3', 'A'],
    ['4', '5', '6', 'B'],
    ['7', '8', '9', 'C'],
    ['*', '0', '#', 'D'],
];

pub fn keypad_freqs(c: char) -> Option<(f64, f64)> {
    let rows = [697.0, 770.0, 852.0, 941.0];
    let cols = [1209.0, 1336.0, 1477.0, 1633.0];
    for (r, row) in KEYPAD.iter().enumerate() {
        if let Some(col) = row.iter().position(|&k| k == c) {
            return Some((rows[r], cols[col]));
        }
    }
    None
}

/// Mark widths in microseconds for a 12-bit SIRC frame: start burst, then
/// seven command bits and five address bits, least significant first.
pub fn sirc_marks(command: u8, address: u8) -> Vec<u32> {
    let mut marks = vec![2400];
    for i in 0..7 {
        marks.push(if command & (1 << i) != 0 { 1200 } else { 600 });
    }
    for i in 0..5 {
        marks.push(if address & (1 << i) != 0 { 1200 } else { 600 });
    }
    marks
}

/// Wheel surface speed for an angular speed in rpm.
pub fn wheel_speed(rpm: f64, wheel_radius: f64) -> f64 {
    rpm / 60.0 * 2.0 * PI * wheel_radius
}

/// Continuous-time unit-step response of a PID (derivative on error)
/// closing the loop around `τ·y' = u - y`, integrated with RK4 at `h`.
/// Returns `(t, 1 - y)` samples every `sample_every` seconds, no saturation.
pub fn pid_first_order_error(
    kp: f64,
    ki: f64,
    kd: f64,
    tau: f64,
    horizon: f64,
    h: f64,
    sample_every: f64,
) -> Vec<(f64, f64)> {
    // states: y and z = ∫e. With e = 1 - y, e' = -y', so
    // (τ + kd)·y' = kp·e + ki·z - y.
    let deriv = |y: f64, z: f64| -> (f64, f64) {
        let e = 1.0 - y;
        ((kp * e + ki * z - y) / (tau + kd), e)
    };
    let steps = (horizon / h).round() as usize;
    let every = (sample_every / h).round().max(1.0) as usize;
    let (mut y, mut z) = (0.0, 0.0);
    let mut out = vec![(0.0, 1.0)];
    for k in 1..=steps {
        let (a1, b1) = deriv(y, z);
        let (a2, b2) = deriv(y + h / 2.0 * a1, z + h / 2.0 * b1);
        let (a3, b3) = deriv(y + h / 2.0 * a2, z + h / 2.0 * b2);
        let (a4, b4) = deriv(y + h * a3, z + h * b3);
        y += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        z += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        if k % every == 0 {
            out.push((k as f64 * h, 1.0 - y));
        }
    }
    out
}

/// Exact zero-order-hold step of `τ·y' = u - y` over `dt`.
pub fn first_order_zoh(y: f64, u: f64, tau: f64, dt: f64) -> f64 {
    let a = (-dt / tau).exp();
    a * y + (1.0 - a) * u
}
