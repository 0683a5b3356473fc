//! Dual-tone keypad signaling.
//!
//! Symbols sit on the standard 4x4 telephone grid: the row selects a low
//! tone, the column a high tone. Detection runs a Goertzel power estimate
//! at each of the eight tones over fixed-length frames and debounces the
//! per-frame decisions into [`DigitEvent`]s.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Low-group (row) tone frequencies in Hz.
pub const ROW_FREQS: [f64; 4] = [697.0, 770.0, 852.0, 941.0];
/// High-group (column) tone frequencies in Hz.
pub const COL_FREQS: [f64; 4] = [1209.0, 1336.0, 1477.0, 1633.0];

pub const DEFAULT_SAMPLE_RATE: u32 = 8000;
pub const MIN_TONE_MS: u32 = 40;
/// Peak amplitude allowed for each of the two components.
pub const MAX_COMPONENT_AMPLITUDE: f64 = 0.5;
/// Required ratio between a group's strongest tone and its runner-up.
pub const GROUP_DOMINANCE: f64 = 4.0;

const GRID: [[char; 4]; 4] = [
    ['1', '2', '3', 'A'],
    ['4', '5', '6', 'B'],
    ['7', '8', '9', 'C'],
    ['*', '0', '#', 'D'],
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DtmfError {
    #[error("'{0}' is not a keypad symbol")]
    InvalidSymbol(char),
    #[error("component amplitude {0} outside (0, {MAX_COMPONENT_AMPLITUDE}]: the summed tone would clip")]
    Clipping(f64),
    #[error("tone duration {0} ms is shorter than {MIN_TONE_MS} ms")]
    DurationTooShort(u32),
    #[error("frame must hold at least one sample, all within [-1, 1]")]
    InvalidFrame,
    #[error("frame holds {actual} samples, detector expects {expected}")]
    FrameLength { expected: usize, actual: usize },
    #[error("target {target} Hz outside (0, {nyquist}) Hz")]
    TargetOutOfRange { target: f64, nyquist: f64 },
    #[error("invalid detector configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("PCM byte count {0} is odd; expected 16-bit samples")]
    OddPcmLength(usize),
    #[error("sample rate must be positive")]
    InvalidSampleRate,
}

/// One of the sixteen keypad symbols, stored as its grid position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KeypadSymbol {
    row: u8,
    col: u8,
}

impl KeypadSymbol {
    /// All symbols in row-major grid order.
    pub fn all() -> impl Iterator<Item = KeypadSymbol> {
        (0..4u8).flat_map(|row| (0..4u8).map(move |col| KeypadSymbol { row, col }))
    }

    pub fn from_grid(row: usize, col: usize) -> Option<KeypadSymbol> {
        (row < 4 && col < 4).then_some(KeypadSymbol {
            row: row as u8,
            col: col as u8,
        })
    }

    pub fn from_char(c: char) -> Result<KeypadSymbol, DtmfError> {
        let upper = c.to_ascii_uppercase();
        for (row, line) in GRID.iter().enumerate() {
            if let Some(col) = line.iter().position(|&g| g == upper) {
                return Ok(KeypadSymbol {
                    row: row as u8,
                    col: col as u8,
                });
            }
        }
        Err(DtmfError::InvalidSymbol(c))
    }

    pub fn as_char(self) -> char {
        GRID[self.row as usize][self.col as usize]
    }

    pub fn row_index(self) -> usize {
        self.row as usize
    }

    pub fn col_index(self) -> usize {
        self.col as usize
    }

    pub fn low_freq(self) -> f64 {
        ROW_FREQS[self.row as usize]
    }

    pub fn high_freq(self) -> f64 {
        COL_FREQS[self.col as usize]
    }
}

impl fmt::Display for KeypadSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl Serialize for KeypadSymbol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut buf = [0u8; 4];
        s.serialize_str(self.as_char().encode_utf8(&mut buf))
    }
}

impl<'de> Deserialize<'de> for KeypadSymbol {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => KeypadSymbol::from_char(c).map_err(serde::de::Error::custom),
            _ => Err(serde::de::Error::custom(format!(
                "expected one keypad symbol, got {s:?}"
            ))),
        }
    }
}

/// Block of normalized PCM samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneFrame {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl ToneFrame {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<ToneFrame, DtmfError> {
        if sample_rate == 0 {
            return Err(DtmfError::InvalidSampleRate);
        }
        if samples.is_empty() || samples.iter().any(|s| !(-1.0..=1.0).contains(s)) {
            return Err(DtmfError::InvalidFrame);
        }
        Ok(ToneFrame { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub frame_len: usize,
    pub power_threshold: f64,
    pub twist_limit: f64,
    pub min_digit_frames: u32,
    pub min_gap_frames: u32,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            frame_len: 205,
            power_threshold: 1e-4,
            twist_limit: 8.0,
            min_digit_frames: 2,
            min_gap_frames: 1,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), DtmfError> {
        if self.frame_len < 64 {
            return Err(DtmfError::InvalidConfig("frame_len must be at least 64"));
        }
        if !(self.power_threshold > 0.0) || !(self.twist_limit > 0.0) {
            return Err(DtmfError::InvalidConfig("thresholds must be positive"));
        }
        if self.min_digit_frames == 0 || self.min_gap_frames == 0 {
            return Err(DtmfError::InvalidConfig("frame counts must be positive"));
        }
        Ok(())
    }
}

/// A debounced keypad detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DigitEvent {
    pub symbol: KeypadSymbol,
    /// Index of the first frame of the run.
    pub start_tick: u64,
    /// Run length in frames.
    pub duration: u32,
    /// Mean fraction of frame energy carried by the two tones.
    pub confidence: f64,
}

/// Synthesizes the dual tone for `symbol`: the sum of the row and column
/// sinusoids, each at peak `amplitude`.
pub fn encode_digit(
    symbol: KeypadSymbol,
    duration_ms: u32,
    sample_rate: u32,
    amplitude: f64,
) -> Result<ToneFrame, DtmfError> {
    if !(amplitude > 0.0 && amplitude <= MAX_COMPONENT_AMPLITUDE) {
        return Err(DtmfError::Clipping(amplitude));
    }
    if duration_ms < MIN_TONE_MS {
        return Err(DtmfError::DurationTooShort(duration_ms));
    }
    if sample_rate == 0 {
        return Err(DtmfError::InvalidSampleRate);
    }
    let n = (duration_ms as u64 * sample_rate as u64 / 1000) as usize;
    let fs = sample_rate as f64;
    let (lo, hi) = (symbol.low_freq(), symbol.high_freq());
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            amplitude * ((2.0 * PI * lo * t).sin() + (2.0 * PI * hi * t).sin())
        })
        .collect();
    ToneFrame::new(samples, sample_rate)
}

/// Encodes `digits` as consecutive tones separated by silence, preceded by
/// nothing and followed by one trailing gap.
pub fn encode_sequence(
    digits: &str,
    tone_ms: u32,
    gap_ms: u32,
    sample_rate: u32,
    amplitude: f64,
) -> Result<Vec<f64>, DtmfError> {
    let gap = vec![0.0; (gap_ms as u64 * sample_rate as u64 / 1000) as usize];
    let mut out = Vec::new();
    for c in digits.chars().filter(|c| !c.is_whitespace()) {
        let symbol = KeypadSymbol::from_char(c)?;
        out.extend(encode_digit(symbol, tone_ms, sample_rate, amplitude)?.into_samples());
        out.extend_from_slice(&gap);
    }
    Ok(out)
}

/// Squared magnitude of the frame's content at `target`, normalized by the
/// squared frame length. A sinusoid of peak amplitude `a` reads about `a²/4`.
pub fn goertzel_power(frame: &ToneFrame, target: f64) -> Result<f64, DtmfError> {
    let nyquist = frame.sample_rate as f64 / 2.0;
    if !(target > 0.0 && target < nyquist) {
        return Err(DtmfError::TargetOutOfRange { target, nyquist });
    }
    Ok(goertzel_raw(&frame.samples, frame.sample_rate as f64, target))
}

fn goertzel_raw(samples: &[f64], sample_rate: f64, target: f64) -> f64 {
    let coeff = 2.0 * (2.0 * PI * target / sample_rate).cos();
    let (mut s1, mut s2) = (0.0f64, 0.0f64);
    for &x in samples {
        let s0 = x + coeff * s1 - s2;
        s2 = s1;
        s1 = s0;
    }
    let n = samples.len() as f64;
    ((s1 * s1 + s2 * s2 - coeff * s1 * s2) / (n * n)).max(0.0)
}

/// Per-tone powers for one frame, rows then columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TonePowers {
    pub rows: [f64; 4],
    pub cols: [f64; 4],
    pub mean_square: f64,
}

pub fn tone_powers(frame: &ToneFrame) -> TonePowers {
    let fs = frame.sample_rate as f64;
    let rows = ROW_FREQS.map(|f| goertzel_raw(&frame.samples, fs, f));
    let cols = COL_FREQS.map(|f| goertzel_raw(&frame.samples, fs, f));
    let mean_square = frame.samples.iter().map(|x| x * x).sum::<f64>() / frame.samples.len() as f64;
    TonePowers {
        rows,
        cols,
        mean_square,
    }
}

/// Index of the strongest entry and the ratio to the runner-up.
fn winner(powers: &[f64; 4]) -> (usize, f64, f64) {
    let mut best = 0;
    for i in 1..4 {
        if powers[i] > powers[best] {
            best = i;
        }
    }
    let runner_up = powers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best)
        .map(|(_, &p)| p)
        .fold(0.0f64, f64::max);
    (best, powers[best], runner_up)
}

/// Classifies one frame. Returns the symbol and the fraction of frame energy
/// carried by its two tones, or `None` when the frame is not a clean digit.
pub fn detect_digit(frame: &ToneFrame, config: &DetectorConfig) -> Result<Option<(KeypadSymbol, f64)>, DtmfError> {
    if frame.len() != config.frame_len {
        return Err(DtmfError::FrameLength {
            expected: config.frame_len,
            actual: frame.len(),
        });
    }
    let powers = tone_powers(frame);
    let (row, row_p, row_next) = winner(&powers.rows);
    let (col, col_p, col_next) = winner(&powers.cols);

    if row_p <= config.power_threshold || col_p <= config.power_threshold {
        return Ok(None);
    }
    if row_p > config.twist_limit * col_p || col_p > config.twist_limit * row_p {
        return Ok(None);
    }
    if row_p < GROUP_DOMINANCE * row_next || col_p < GROUP_DOMINANCE * col_next {
        return Ok(None);
    }
    // Each tone holds its power in two mirrored DFT bins.
    let confidence = if powers.mean_square > 0.0 {
        (2.0 * (row_p + col_p) / powers.mean_square).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let symbol = KeypadSymbol::from_grid(row, col).expect("winner indices are in 0..4");
    Ok(Some((symbol, confidence)))
}

#[derive(Debug, Clone, Copy)]
struct Run {
    symbol: KeypadSymbol,
    start: u64,
    frames: u32,
    confidence_sum: f64,
    eligible: bool,
}

/// Incremental frame-by-frame decoder with debounce state.
///
/// An event is emitted when a run of identical detections ends, provided the
/// run lasted at least `min_digit_frames`. A repeat of the previously emitted
/// symbol needs `min_gap_frames` of non-detection in between. [`finish`]
/// zero-pads a trailing partial frame, so end of stream acts as silence.
///
/// [`finish`]: StreamDecoder::finish
#[derive(Debug, Clone)]
pub struct StreamDecoder {
    config: DetectorConfig,
    sample_rate: u32,
    pending: Vec<f64>,
    frame_index: u64,
    run: Option<Run>,
    last_emitted: Option<KeypadSymbol>,
    quiet_frames: u32,
}

impl StreamDecoder {
    pub fn new(config: DetectorConfig, sample_rate: u32) -> Result<StreamDecoder, DtmfError> {
        config.validate()?;
        if sample_rate == 0 {
            return Err(DtmfError::InvalidSampleRate);
        }
        Ok(StreamDecoder {
            config,
            sample_rate,
            pending: Vec::with_capacity(config.frame_len),
            frame_index: 0,
            run: None,
            last_emitted: None,
            quiet_frames: u32::MAX,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn frames_consumed(&self) -> u64 {
        self.frame_index
    }

    /// Feeds samples; returns events whose runs closed inside this chunk.
    pub fn push(&mut self, samples: &[f64]) -> Vec<DigitEvent> {
        let mut events = Vec::new();
        for &s in samples {
            self.pending.push(s.clamp(-1.0, 1.0));
            if self.pending.len() == self.config.frame_len {
                self.process_pending(&mut events);
            }
        }
        events
    }

    /// Flushes a trailing partial frame (zero-padded) and closes any open run.
    pub fn finish(&mut self) -> Vec<DigitEvent> {
        let mut events = Vec::new();
        if !self.pending.is_empty() {
            self.pending.resize(self.config.frame_len, 0.0);
            self.process_pending(&mut events);
        }
        self.close_run(&mut events);
        events
    }

    fn process_pending(&mut self, events: &mut Vec<DigitEvent>) {
        let samples = std::mem::take(&mut self.pending);
        let frame = ToneFrame::new(samples, self.sample_rate).expect("samples clamped, non-empty");
        let detection = detect_digit(&frame, &self.config).expect("frame built at frame_len");
        self.pending = frame.into_samples();
        self.pending.clear();
        self.on_frame(detection, events);
        self.frame_index += 1;
    }

    fn on_frame(&mut self, detection: Option<(KeypadSymbol, f64)>, events: &mut Vec<DigitEvent>) {
        match (detection, self.run.as_mut()) {
            (Some((symbol, confidence)), Some(run)) if run.symbol == symbol => {
                run.frames += 1;
                run.confidence_sum += confidence;
            }
            (Some((symbol, confidence)), _) => {
                self.close_run(events);
                let eligible = self.last_emitted != Some(symbol) || self.quiet_frames >= self.config.min_gap_frames;
                self.run = Some(Run {
                    symbol,
                    start: self.frame_index,
                    frames: 1,
                    confidence_sum: confidence,
                    eligible,
                });
            }
            (None, _) => {
                self.close_run(events);
                self.quiet_frames = self.quiet_frames.saturating_add(1);
            }
        }
    }

    fn close_run(&mut self, events: &mut Vec<DigitEvent>) {
        let Some(run) = self.run.take() else { return };
        if run.eligible && run.frames >= self.config.min_digit_frames {
            events.push(DigitEvent {
                symbol: run.symbol,
                start_tick: run.start,
                duration: run.frames,
                confidence: run.confidence_sum / run.frames as f64,
            });
            self.last_emitted = Some(run.symbol);
            self.quiet_frames = 0;
        }
    }
}

/// Decodes a complete sample stream.
pub fn decode_stream(samples: &[f64], sample_rate: u32, config: &DetectorConfig) -> Result<Vec<DigitEvent>, DtmfError> {
    let mut decoder = StreamDecoder::new(*config, sample_rate)?;
    let mut events = decoder.push(samples);
    events.extend(decoder.finish());
    Ok(events)
}

/// Decodes 16-bit signed little-endian mono PCM into normalized samples.
pub fn pcm16le_to_samples(bytes: &[u8]) -> Result<Vec<f64>, DtmfError> {
    if !bytes.len().is_multiple_of(2) {
        return Err(DtmfError::OddPcmLength(bytes.len()));
    }
    Ok(bytes
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32767.0)
        .collect())
}

pub fn samples_to_pcm16le(samples: &[f64]) -> Vec<u8> {
    samples.iter().flat_map(|&s| sample_to_i16(s).to_le_bytes()).collect()
}

pub fn sample_to_i16(s: f64) -> i16 {
    (s.clamp(-1.0, 1.0) * 32767.0).round() as i16
}
