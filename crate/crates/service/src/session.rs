//! Operator input ingestion and the tick engine.
//!
//! The navigation board and the grabber board are modelled as two command
//! queues inside one process: keypad digits feed the first, SIRC frames the
//! second. Both are drained at the start of a tick, navigation first, each in
//! arrival order.

use std::collections::VecDeque;

use teleop_core::controller::{ControllerError, Inbound};
use teleop_core::dtmf::{self, DetectorConfig, DigitEvent, DtmfError, KeypadSymbol, StreamDecoder};
use teleop_core::scenario::Scenario;
use teleop_core::sim::{SimError, Simulation, TickRecord};
use teleop_core::sirc::{self, PulseTrain, SircError, SircFrame};
use thiserror::Error;

use crate::wire::{AudioChunk, Hello, WireError, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Dtmf(#[from] DtmfError),
    #[error(transparent)]
    Sirc(#[from] SircError),
}

/// Per-connection audio decode state.
#[derive(Debug, Clone)]
pub struct Session {
    config: DetectorConfig,
    sample_rate: u32,
    decoder: StreamDecoder,
}

impl Default for Session {
    fn default() -> Self {
        Session::new(DetectorConfig::default(), dtmf::DEFAULT_SAMPLE_RATE).expect("default detector is valid")
    }
}

impl Session {
    pub fn new(config: DetectorConfig, sample_rate: u32) -> Result<Session, DtmfError> {
        Ok(Session {
            config,
            sample_rate,
            decoder: StreamDecoder::new(config, sample_rate)?,
        })
    }

    /// Appends a PCM chunk to the decode stream and returns the digits
    /// completed by it. A change of sample rate restarts the stream.
    pub fn ingest_pcm(&mut self, pcm: &[u8], sample_rate: u32) -> Result<Vec<DigitEvent>, IngestError> {
        let samples = dtmf::pcm16le_to_samples(pcm)?;
        let mut events = Vec::new();
        if sample_rate != self.sample_rate {
            let decoder = StreamDecoder::new(self.config, sample_rate)?;
            events.extend(self.decoder.finish());
            self.decoder = decoder;
            self.sample_rate = sample_rate;
        }
        events.extend(self.decoder.push(&samples));
        Ok(events)
    }

    pub fn ingest_audio(&mut self, chunk: &AudioChunk) -> Result<Vec<DigitEvent>, IngestError> {
        self.ingest_pcm(&chunk.pcm_bytes()?, chunk.sample_rate)
    }
}

pub fn ingest_sirc(pulses: &str) -> Result<SircFrame, IngestError> {
    let train: PulseTrain = pulses.parse()?;
    Ok(sirc::decode_pulses(&train, sirc::DEFAULT_TOLERANCE)?)
}

/// The simulation plus its two inbound queues.
#[derive(Debug, Clone)]
pub struct Engine {
    sim: Simulation,
    tick_ms: u32,
    hello: Hello,
    navigation: VecDeque<KeypadSymbol>,
    grabber: VecDeque<SircFrame>,
}

impl Engine {
    pub fn from_scenario(scenario: &Scenario) -> Result<Engine, ControllerError> {
        let sim = Simulation::from_scenario(scenario)?;
        let hello = Hello {
            schema_version: SCHEMA_VERSION,
            tick_ms: scenario.tick_ms,
            cell_size_mm: (scenario.cell_size * 1000.0).round() as u32,
            map: scenario.grid.render().lines().map(str::to_string).collect(),
        };
        Ok(Engine {
            sim,
            tick_ms: scenario.tick_ms,
            hello,
            navigation: VecDeque::new(),
            grabber: VecDeque::new(),
        })
    }

    pub fn sim(&self) -> &Simulation {
        &self.sim
    }

    pub fn tick_ms(&self) -> u32 {
        self.tick_ms
    }

    pub fn hello(&self) -> &Hello {
        &self.hello
    }

    pub fn fallen(&self) -> bool {
        self.sim.world().fallen
    }

    pub fn queue_digit(&mut self, event: &DigitEvent) {
        self.navigation.push_back(event.symbol);
    }

    pub fn queue_sirc(&mut self, frame: SircFrame) {
        self.grabber.push_back(frame);
    }

    /// Drains both queues into one control tick.
    pub fn step(&mut self) -> Result<TickRecord, SimError> {
        let inbound: Vec<Inbound> = self
            .navigation
            .drain(..)
            .map(Inbound::Digit)
            .chain(self.grabber.drain(..).map(Inbound::Sirc))
            .collect();
        self.sim.step(&inbound)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use teleop_core::controller::CommandKind;

    fn tone(c: char, ms: u32) -> Vec<u8> {
        let sym = KeypadSymbol::from_char(c).unwrap();
        let mut samples = dtmf::encode_digit(sym, ms, 8000, 0.4).unwrap().into_samples();
        samples.extend(std::iter::repeat_n(0.0, 480));
        dtmf::samples_to_pcm16le(&samples)
    }

    #[test]
    fn odd_chunk_is_an_error_and_leaves_the_stream_intact() {
        let mut s = Session::default();
        assert!(matches!(
            s.ingest_pcm(&[0, 0, 0], 8000),
            Err(IngestError::Dtmf(DtmfError::OddPcmLength(3)))
        ));
        let events = s.ingest_pcm(&tone('7', 100), 8000).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].symbol.as_char(), '7');
    }

    #[test]
    fn chunk_boundaries_do_not_matter() {
        let pcm = tone('B', 120);
        let mut whole = Session::default();
        let a = whole.ingest_pcm(&pcm, 8000).unwrap();
        let mut split = Session::default();
        let mut b = Vec::new();
        for chunk in pcm.chunks(138) {
            b.extend(split.ingest_pcm(chunk, 8000).unwrap());
        }
        assert_eq!(a, b);
    }

    #[test]
    fn sirc_text_decodes() {
        let text = sirc::encode_frame(SircFrame::new(0x02, 0x01).unwrap()).to_string();
        assert_eq!(ingest_sirc(&text).unwrap(), SircFrame::new(2, 1).unwrap());
        assert!(ingest_sirc("2400,-600").is_err());
    }

    #[test]
    fn navigation_queue_drains_before_grabber_queue() {
        let s = Scenario::parse("map:\n#####\n#S..#\n#####\n").unwrap();
        let mut e = Engine::from_scenario(&s).unwrap();
        e.queue_sirc(SircFrame::new(0x01, 0x01).unwrap());
        let ev = DigitEvent {
            symbol: KeypadSymbol::from_char('5').unwrap(),
            start_tick: 0,
            duration: 2,
            confidence: 1.0,
        };
        e.queue_digit(&ev);
        let rec = e.step().unwrap();
        assert_eq!(rec.controller.command.kind, CommandKind::Stop);
        assert_eq!(
            rec.controller.actuation.grabber_action,
            teleop_core::world::GrabberAction::Close
        );
        // queues are empty afterwards
        let rec = e.step().unwrap();
        assert_eq!(
            rec.controller.actuation.grabber_action,
            teleop_core::world::GrabberAction::None
        );
    }
}
