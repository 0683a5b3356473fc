//! Scripted runs without a socket.
//!
//! Key presses are synthesized as tone PCM and streamed into the same
//! session decoder a live client feeds, one tick's worth of samples per tick.
//! Input produced during a tick is applied at the next one.

use std::collections::VecDeque;

use serde_json::Value;
use teleop_core::controller::ControllerError;
use teleop_core::dtmf::{self, DigitEvent, DtmfError};
use teleop_core::scenario::Scenario;
use teleop_core::sim::{SimError, TickRecord};
use thiserror::Error;

use crate::script::{evaluate, Expectation, Script, ScriptError, Step};
use crate::session::{Engine, IngestError, Session};
use crate::wire::{self, Body, Sequencer};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// The run is padded with idle ticks up to this count.
    pub min_ticks: u64,
    /// Peak amplitude of each tone component of a synthesized key press.
    pub press_amplitude: f64,
    /// Silence streamed after each key release.
    pub release_ms: u32,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            min_ticks: 0,
            press_amplitude: 0.4,
            release_ms: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectFailure {
    pub line: usize,
    pub expectation: Expectation,
    pub actual: Option<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// Newline-delimited telemetry messages, one per tick.
    pub transcript: String,
    pub records: Vec<TickRecord>,
    pub digits: Vec<DigitEvent>,
    pub fallen: bool,
    pub expectations: usize,
    pub failures: Vec<ExpectFailure>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

struct Runner {
    engine: Engine,
    session: Session,
    audio: VecDeque<f64>,
    samples_per_tick: usize,
    seq: Sequencer,
    out: RunOutcome,
}

impl Runner {
    fn tick(&mut self) -> Result<(), RunError> {
        if self.engine.fallen() {
            return Ok(());
        }
        let record = self.engine.step()?;
        let line = wire::encode(&self.seq.stamp(Body::Telemetry(Box::new(record.clone()))));
        self.out.transcript.push_str(&line);
        self.out.transcript.push('\n');
        self.out.records.push(record);

        let n = self.samples_per_tick.min(self.audio.len());
        if n > 0 {
            let chunk: Vec<f64> = self.audio.drain(..n).collect();
            let events = self
                .session
                .ingest_pcm(&dtmf::samples_to_pcm16le(&chunk), dtmf::DEFAULT_SAMPLE_RATE)?;
            for e in &events {
                log::debug!("digit {} decoded after tick {}", e.symbol, self.engine.sim().tick());
                self.engine.queue_digit(e);
            }
            self.out.digits.extend(events);
        }
        Ok(())
    }
}

pub fn run_script(scenario: &Scenario, script: &Script, options: &RunOptions) -> Result<RunOutcome, RunError> {
    let engine = Engine::from_scenario(scenario)?;
    let fs = dtmf::DEFAULT_SAMPLE_RATE as u64;
    let mut r = Runner {
        samples_per_tick: (fs * scenario.tick_ms as u64 / 1000) as usize,
        engine,
        session: Session::default(),
        audio: VecDeque::new(),
        seq: Sequencer::default(),
        out: RunOutcome {
            transcript: String::new(),
            records: Vec::new(),
            digits: Vec::new(),
            fallen: false,
            expectations: 0,
            failures: Vec::new(),
        },
    };
    for line in &script.steps {
        let script_err = |e: DtmfError| ScriptError {
            line: line.line,
            message: e.to_string(),
        };
        match &line.step {
            Step::Press { symbol, ms } => {
                let tone = dtmf::encode_digit(*symbol, *ms, fs as u32, options.press_amplitude).map_err(script_err)?;
                r.audio.extend(tone.samples());
                r.audio.extend(std::iter::repeat_n(
                    0.0,
                    (fs * options.release_ms as u64 / 1000) as usize,
                ));
            }
            Step::Sirc(frame) => r.engine.queue_sirc(*frame),
            Step::Wait(n) => {
                for _ in 0..*n {
                    r.tick()?;
                }
            }
            Step::Expect(e) => {
                r.out.expectations += 1;
                let failure = |actual| ExpectFailure {
                    line: line.line,
                    expectation: e.clone(),
                    actual,
                };
                let Some(last) = r.out.records.last() else {
                    r.out.failures.push(failure(None));
                    continue;
                };
                let value = serde_json::to_value(last).expect("telemetry serializes");
                let (pass, actual) = evaluate(e, &value).map_err(|message| ScriptError {
                    line: line.line,
                    message,
                })?;
                if !pass {
                    r.out.failures.push(failure(Some(actual)));
                }
            }
        }
    }
    while (r.out.records.len() as u64) < options.min_ticks && !r.engine.fallen() {
        r.tick()?;
    }
    r.out.fallen = r.engine.fallen();
    Ok(r.out)
}
