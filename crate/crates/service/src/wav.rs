//! Canonical WAV files: PCM format 1, 16-bit, mono.

use std::path::Path;

use teleop_core::dtmf::sample_to_i16;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WavError {
    #[error(transparent)]
    Hound(#[from] hound::Error),
    #[error("expected 16-bit integer mono PCM, got {bits}-bit {format:?} with {channels} channels")]
    Unsupported {
        bits: u16,
        channels: u16,
        format: hound::SampleFormat,
    },
}

/// Reads normalized samples and the sample rate.
pub fn read(path: &Path) -> Result<(Vec<f64>, u32), WavError> {
    let reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(WavError::Unsupported {
            bits: spec.bits_per_sample,
            channels: spec.channels,
            format: spec.sample_format,
        });
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32767.0))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((samples, spec.sample_rate))
}

pub fn write(path: &Path, samples: &[f64], sample_rate: u32) -> Result<(), WavError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in samples {
        writer.write_sample(sample_to_i16(s))?;
    }
    writer.finalize()?;
    Ok(())
}
