//! Wire messages exchanged with operator clients.
//!
//! Each WebSocket text frame carries one JSON object
//! `{"seq": n, "type": "...", "payload": {...}}`. Field names are frozen in
//! `schema/wire.schema.json`; bump [`SCHEMA_VERSION`] when they change.

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use teleop_core::dtmf::DigitEvent;
use teleop_core::sim::TickRecord;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("malformed message: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("seq {got} does not follow {last}")]
    SeqNotIncreasing { last: u64, got: u64 },
    #[error("{0} messages are not accepted from clients")]
    NotInbound(&'static str),
    #[error("pcm is not valid base64: {0}")]
    Base64(#[from] base64::DecodeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    pub seq: u64,
    #[serde(flatten)]
    pub body: Body,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum Body {
    AudioChunk(AudioChunk),
    SircTrain(SircTrain),
    Telemetry(Box<TickRecord>),
    DigitEvent(DigitEvent),
    Control(Control),
    Error(ErrorReport),
}

impl Body {
    pub fn type_name(&self) -> &'static str {
        match self {
            Body::AudioChunk(_) => "audio_chunk",
            Body::SircTrain(_) => "sirc_train",
            Body::Telemetry(_) => "telemetry",
            Body::DigitEvent(_) => "digit_event",
            Body::Control(_) => "control",
            Body::Error(_) => "error",
        }
    }

    pub fn error(message: impl Into<String>) -> Body {
        Body::Error(ErrorReport {
            message: message.into(),
        })
    }
}

/// 16-bit signed little-endian mono PCM, base64 encoded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AudioChunk {
    pub sample_rate: u32,
    pub pcm: String,
}

impl AudioChunk {
    pub fn from_pcm(pcm: &[u8], sample_rate: u32) -> AudioChunk {
        AudioChunk {
            sample_rate,
            pcm: BASE64.encode(pcm),
        }
    }

    pub fn pcm_bytes(&self) -> Result<Vec<u8>, WireError> {
        Ok(BASE64.decode(&self.pcm)?)
    }
}

/// Pulse train in text form: signed microseconds, marks positive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SircTrain {
    pub pulses: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case", deny_unknown_fields)]
pub enum Control {
    /// First message on every connection, server to client.
    Hello(Hello),
    /// Ends the session loop (client to server) or announces its end.
    Shutdown,
    /// `dropped` outbound messages were discarded because the client fell
    /// behind; telemetry tick numbers skip accordingly.
    Gap { dropped: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hello {
    pub schema_version: u32,
    pub tick_ms: u32,
    pub cell_size_mm: u32,
    /// Terrain rows, top row first, in the scenario legend.
    pub map: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorReport {
    pub message: String,
}

pub fn encode(msg: &WireMessage) -> String {
    serde_json::to_string(msg).expect("wire messages always serialize")
}

pub fn decode(text: &str) -> Result<WireMessage, WireError> {
    Ok(serde_json::from_str(text)?)
}

/// Checks the per-direction sequence rule and the inbound type whitelist.
#[derive(Debug, Clone, Default)]
pub struct InboundGate {
    last: Option<u64>,
}

impl InboundGate {
    pub fn admit(&mut self, text: &str) -> Result<WireMessage, WireError> {
        let msg = decode(text)?;
        if let Some(last) = self.last {
            if msg.seq <= last {
                return Err(WireError::SeqNotIncreasing { last, got: msg.seq });
            }
        }
        match &msg.body {
            Body::AudioChunk(_) | Body::SircTrain(_) | Body::Control(Control::Shutdown) => {}
            Body::Control(_) => return Err(WireError::NotInbound("hello and gap control")),
            other => return Err(WireError::NotInbound(other.type_name())),
        }
        self.last = Some(msg.seq);
        Ok(msg)
    }
}

/// Stamps outbound messages with consecutive sequence numbers.
#[derive(Debug, Clone, Default)]
pub struct Sequencer {
    next: u64,
}

impl Sequencer {
    pub fn stamp(&mut self, body: Body) -> WireMessage {
        let seq = self.next;
        self.next += 1;
        WireMessage { seq, body }
    }
}
