//! Browser demo for the teleoperation core.
//!
//! Three operations are exposed to the page: analysing a keypad tone buried
//! in noise, plotting a PID step response on a first-order plant, and
//! driving a robot around a grid map with keypad digits. The plain Rust API
//! below is what the tests exercise; the `wasm` module wraps it for
//! JavaScript and passes structured results as JSON strings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use teleop_core::controller::Inbound;
use teleop_core::dtmf::{
    decode_stream, encode_digit, tone_powers, DetectorConfig, KeypadSymbol, ToneFrame, COL_FREQS, ROW_FREQS,
};
use teleop_core::pid::{PidGains, PidState};
use teleop_core::scenario::Scenario;
use teleop_core::sim::{Simulation, TickRecord};

const SAMPLE_RATE: u32 = 8000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToneAnalysis {
    /// The eight keypad frequencies, rows first.
    pub freqs: Vec<f64>,
    /// Goertzel power at each frequency over the first frame.
    pub powers: Vec<f64>,
    pub threshold: f64,
    /// Symbols recovered from the whole noisy burst.
    pub decoded: String,
}

/// A 100 ms tone for `key` plus uniform noise of peak `noise`.
pub fn analyse_tone(key: char, noise: f64, seed: u64) -> Result<ToneAnalysis, String> {
    let symbol = KeypadSymbol::from_char(key).map_err(|e| e.to_string())?;
    if !(0.0..=0.2).contains(&noise) {
        return Err(format!("noise peak {noise} outside 0..0.2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = encode_digit(symbol, 100, SAMPLE_RATE, 0.4)
        .map_err(|e| e.to_string())?
        .into_samples();
    samples.extend(std::iter::repeat_n(0.0, 480));
    for s in &mut samples {
        if noise > 0.0 {
            *s = (*s + rng.random_range(-noise..noise)).clamp(-1.0, 1.0);
        }
    }
    let config = DetectorConfig::default();
    let frame = ToneFrame::new(samples[..config.frame_len].to_vec(), SAMPLE_RATE).map_err(|e| e.to_string())?;
    let p = tone_powers(&frame);
    let decoded = decode_stream(&samples, SAMPLE_RATE, &config)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|e| e.symbol.as_char())
        .collect();
    Ok(ToneAnalysis {
        freqs: ROW_FREQS.iter().chain(&COL_FREQS).copied().collect(),
        powers: p.rows.iter().chain(&p.cols).copied().collect(),
        threshold: config.power_threshold,
        decoded,
    })
}

/// Unit step through the PID into `y' = (u - y) / tau`, sampled every `dt`.
/// Returns the plant output after each step.
pub fn pid_step_response(kp: f64, ki: f64, kd: f64, tau: f64, seconds: f64, dt: f64) -> Result<Vec<f64>, String> {
    if !(tau > 0.0 && dt > 0.0 && seconds > 0.0) || seconds / dt > 100_000.0 {
        return Err("tau, dt and duration must be positive with at most 100000 steps".into());
    }
    let gains = PidGains {
        kp,
        ki,
        kd,
        ..PidGains::default()
    };
    gains.validate().map_err(|e| e.to_string())?;
    let decay = (-dt / tau).exp();
    let mut state = PidState::default();
    let mut y = 0.0;
    (0..(seconds / dt).round() as usize)
        .map(|_| {
            let u = state.step(&gains, 1.0, y, dt).map_err(|e| e.to_string())?;
            y = u + (y - u) * decay;
            Ok(y)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapView {
    pub rows: Vec<String>,
    pub cell_size: f64,
}

/// A robot on a map, stepped one tick at a time.
pub struct Sandbox {
    sim: Simulation,
    map: MapView,
    pending: Vec<Inbound>,
}

impl Sandbox {
    pub fn new(scenario: &str) -> Result<Sandbox, String> {
        let s = Scenario::parse(scenario).map_err(|e| e.to_string())?;
        let sim = Simulation::from_scenario(&s).map_err(|e| e.to_string())?;
        let map = MapView {
            rows: s.grid.render().lines().map(str::to_string).collect(),
            cell_size: s.grid.cell_size(),
        };
        Ok(Sandbox {
            sim,
            map,
            pending: Vec::new(),
        })
    }

    pub fn map(&self) -> &MapView {
        &self.map
    }

    /// Queues a key press for the next tick.
    pub fn press(&mut self, key: char) -> Result<(), String> {
        let symbol = KeypadSymbol::from_char(key).map_err(|e| e.to_string())?;
        self.pending.push(Inbound::Digit(symbol));
        Ok(())
    }

    pub fn step(&mut self) -> Result<TickRecord, String> {
        let inbound = std::mem::take(&mut self.pending);
        self.sim.step(&inbound).map_err(|e| e.to_string())
    }

    pub fn fallen(&self) -> bool {
        self.sim.world().fallen
    }
}

#[cfg(target_arch = "wasm32")]
mod wasm {
    use wasm_bindgen::prelude::*;

    fn json<T: serde::Serialize>(v: &T) -> String {
        serde_json::to_string(v).expect("demo results always serialize")
    }

    #[wasm_bindgen]
    pub fn analyse_tone(key: char, noise: f64, seed: u32) -> Result<String, JsError> {
        super::analyse_tone(key, noise, seed as u64)
            .map(|a| json(&a))
            .map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen]
    pub fn pid_step_response(kp: f64, ki: f64, kd: f64, tau: f64, seconds: f64, dt: f64) -> Result<Vec<f64>, JsError> {
        super::pid_step_response(kp, ki, kd, tau, seconds, dt).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen]
    pub struct Sandbox(super::Sandbox);

    #[wasm_bindgen]
    impl Sandbox {
        #[wasm_bindgen(constructor)]
        pub fn new(scenario: &str) -> Result<Sandbox, JsError> {
            super::Sandbox::new(scenario).map(Sandbox).map_err(|e| JsError::new(&e))
        }

        pub fn map(&self) -> String {
            json(self.0.map())
        }

        pub fn press(&mut self, key: char) -> Result<(), JsError> {
            self.0.press(key).map_err(|e| JsError::new(&e))
        }

        /// One tick; returns the telemetry record as JSON.
        pub fn step(&mut self) -> Result<String, JsError> {
            self.0.step().map(|r| json(&r)).map_err(|e| JsError::new(&e))
        }

        pub fn fallen(&self) -> bool {
            self.0.fallen()
        }
    }
}
