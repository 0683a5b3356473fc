//! 12-bit SIRC infrared frames as demodulated pulse timings.
//!
//! A frame is a 2400 µs start burst followed by twelve pulse-width coded
//! bits, least significant first: seven command bits then five address
//! bits. A `0` is a 600 µs mark, a `1` a 1200 µs mark, each followed by a
//! 600 µs space.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const START_MARK_US: u32 = 2400;
pub const SPACE_US: u32 = 600;
pub const ZERO_MARK_US: u32 = 600;
pub const ONE_MARK_US: u32 = 1200;
pub const COMMAND_BITS: u32 = 7;
pub const ADDRESS_BITS: u32 = 5;
pub const DATA_BITS: usize = (COMMAND_BITS + ADDRESS_BITS) as usize;
pub const DEFAULT_TOLERANCE: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SircError {
    #[error("command {0} does not fit in 7 bits")]
    CommandRange(u8),
    #[error("address {0} does not fit in 5 bits")]
    AddressRange(u8),
    #[error("no valid start burst")]
    MissingStartBurst,
    #[error("expected 12 data bits, found {0}")]
    BitCountMismatch(usize),
    #[error("mark of {mark_us} µs at bit {index} matches no bit width")]
    AmbiguousMark { index: usize, mark_us: u32 },
    #[error("tolerance {0} outside (0, 0.5)")]
    InvalidTolerance(f64),
    #[error("malformed pulse train: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SircFrame {
    command: u8,
    address: u8,
}

impl SircFrame {
    pub fn new(command: u8, address: u8) -> Result<SircFrame, SircError> {
        if command >= 1 << COMMAND_BITS {
            return Err(SircError::CommandRange(command));
        }
        if address >= 1 << ADDRESS_BITS {
            return Err(SircError::AddressRange(address));
        }
        Ok(SircFrame { command, address })
    }

    pub fn command(self) -> u8 {
        self.command
    }

    pub fn address(self) -> u8 {
        self.address
    }

    fn bits(self) -> u16 {
        self.command as u16 | (self.address as u16) << COMMAND_BITS
    }

    fn from_bits(bits: u16) -> SircFrame {
        SircFrame {
            command: (bits & 0x7f) as u8,
            address: ((bits >> COMMAND_BITS) & 0x1f) as u8,
        }
    }
}

/// One mark followed by one space, in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pulse {
    pub mark_us: u32,
    pub space_us: u32,
}

/// Ordered (mark, space) pairs. The first mark is the start burst.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PulseTrain(pub Vec<Pulse>);

impl PulseTrain {
    pub fn pulses(&self) -> &[Pulse] {
        &self.0
    }
}

/// Text form: comma-separated signed integers, positive marks and negative
/// spaces, strictly alternating and starting with a mark.
impl fmt::Display for PulseTrain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{},-{}", p.mark_us, p.space_us)?;
        }
        Ok(())
    }
}

impl FromStr for PulseTrain {
    type Err = SircError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let values = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<i64>().map_err(|e| SircError::Parse(format!("{t:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if values.len() % 2 != 0 {
            return Err(SircError::Parse("every mark needs a following space".into()));
        }
        let to_us = |v: i64| u32::try_from(v.unsigned_abs()).map_err(|_| SircError::Parse(format!("{v} out of range")));
        let mut pulses = Vec::with_capacity(values.len() / 2);
        for pair in values.chunks_exact(2) {
            let (mark, space) = (pair[0], pair[1]);
            if mark <= 0 || space >= 0 {
                return Err(SircError::Parse(format!(
                    "expected mark,-space pair, got {mark},{space}"
                )));
            }
            pulses.push(Pulse {
                mark_us: to_us(mark)?,
                space_us: to_us(space)?,
            });
        }
        Ok(PulseTrain(pulses))
    }
}

pub fn encode_frame(frame: SircFrame) -> PulseTrain {
    let bits = frame.bits();
    let mut pulses = Vec::with_capacity(DATA_BITS + 1);
    pulses.push(Pulse {
        mark_us: START_MARK_US,
        space_us: SPACE_US,
    });
    pulses.extend((0..DATA_BITS).map(|i| Pulse {
        mark_us: if bits >> i & 1 == 1 { ONE_MARK_US } else { ZERO_MARK_US },
        space_us: SPACE_US,
    }));
    PulseTrain(pulses)
}

fn within(mark: u32, nominal: u32, tolerance: f64) -> Option<f64> {
    let deviation = (mark as f64 / nominal as f64 - 1.0).abs();
    (deviation <= tolerance).then_some(deviation)
}

/// Decodes a demodulated pulse train. Marks are classified by the nominal
/// width they are relatively closest to, within `±tolerance`.
pub fn decode_pulses(train: &PulseTrain, tolerance: f64) -> Result<SircFrame, SircError> {
    if !(tolerance > 0.0 && tolerance < 0.5) {
        return Err(SircError::InvalidTolerance(tolerance));
    }
    let (start, data) = train.pulses().split_first().ok_or(SircError::MissingStartBurst)?;
    if within(start.mark_us, START_MARK_US, tolerance).is_none() {
        return Err(SircError::MissingStartBurst);
    }
    if data.len() != DATA_BITS {
        return Err(SircError::BitCountMismatch(data.len()));
    }
    let mut bits = 0u16;
    for (index, pulse) in data.iter().enumerate() {
        let zero = within(pulse.mark_us, ZERO_MARK_US, tolerance);
        let one = within(pulse.mark_us, ONE_MARK_US, tolerance);
        let bit = match (zero, one) {
            (Some(z), Some(o)) => o < z,
            (Some(_), None) => false,
            (None, Some(_)) => true,
            (None, None) => {
                return Err(SircError::AmbiguousMark {
                    index,
                    mark_us: pulse.mark_us,
                })
            }
        };
        bits |= (bit as u16) << index;
    }
    Ok(SircFrame::from_bits(bits))
}
