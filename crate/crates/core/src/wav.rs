//! Minimal RIFF/WAVE reader and writer.
//!
//! Only one layout is accepted: PCM, 16-bit little-endian, mono, 16 kHz.
//! Anything else is rejected with an error that names the offending header
//! field. Samples map to `[-1, 1)` by division by 32768.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::error::{Error, Result};
use crate::waveform::{Waveform, SAMPLE_RATE};

const PCM_FORMAT_TAG: u16 = 1;
const BITS_PER_SAMPLE: u16 = 16;
const CHANNELS: u16 = 1;
const PCM_SCALE: f64 = 32768.0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WavError {
    #[error("not a RIFF/WAVE file: bad {0} tag")]
    BadTag(&'static str),
    #[error("truncated file: {0}")]
    Truncated(&'static str),
    #[error("missing {0} chunk")]
    MissingChunk(&'static str),
    #[error("unsupported {field}: {found} (expected {expected})")]
    Unsupported {
        field: &'static str,
        found: u32,
        expected: u32,
    },
}

fn unsupported(field: &'static str, found: u32, expected: u32) -> WavError {
    WavError::Unsupported {
        field,
        found,
        expected,
    }
}

fn u16_at(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

/// Parses an in-memory WAV image.
pub fn decode(bytes: &[u8]) -> Result<Waveform, WavError> {
    if bytes.len() < 12 {
        return Err(WavError::Truncated("RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(WavError::BadTag("RIFF"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(WavError::BadTag("WAVE"));
    }

    let mut pos = 12;
    let mut format_seen = false;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or(WavError::Truncated("chunk body"))?;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(WavError::Truncated("fmt chunk"));
                }
                let format_tag = u16_at(bytes, body);
                let channels = u16_at(bytes, body + 2);
                let sample_rate = u32_at(bytes, body + 4);
                let block_align = u16_at(bytes, body + 12);
                let bits = u16_at(bytes, body + 14);
                if format_tag != PCM_FORMAT_TAG {
                    return Err(unsupported("audio_format", format_tag.into(), PCM_FORMAT_TAG.into()));
                }
                if channels != CHANNELS {
                    return Err(unsupported("num_channels", channels.into(), CHANNELS.into()));
                }
                if sample_rate != SAMPLE_RATE {
                    return Err(unsupported("sample_rate", sample_rate, SAMPLE_RATE));
                }
                if bits != BITS_PER_SAMPLE {
                    return Err(unsupported("bits_per_sample", bits.into(), BITS_PER_SAMPLE.into()));
                }
                if block_align != 2 {
                    return Err(unsupported("block_align", block_align.into(), 2));
                }
                format_seen = true;
            }
            b"data" => {
                if !format_seen {
                    return Err(WavError::MissingChunk("fmt"));
                }
                let samples = bytes[body..end]
                    .chunks_exact(2)
                    .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / PCM_SCALE)
                    .collect();
                return Ok(Waveform::new(samples, SAMPLE_RATE).expect("PCM samples are finite"));
            }
            _ => {}
        }
        // chunks are word aligned
        pos = end + (size & 1);
    }
    Err(WavError::MissingChunk(if format_seen { "data" } else { "fmt" }))
}

/// Serializes a waveform as 16-bit PCM, rounding and saturating each sample.
pub fn encode(wave: &Waveform) -> Result<Vec<u8>, WavError> {
    if wave.sample_rate() != SAMPLE_RATE {
        return Err(unsupported("sample_rate", wave.sample_rate(), SAMPLE_RATE));
    }
    let data_len = wave.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&PCM_FORMAT_TAG.to_le_bytes());
    out.extend_from_slice(&CHANNELS.to_le_bytes());
    out.extend_from_slice(&SAMPLE_RATE.to_le_bytes());
    out.extend_from_slice(&(SAMPLE_RATE * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&BITS_PER_SAMPLE.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in wave.samples() {
        let q = (s * PCM_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    Ok(out)
}

pub fn read(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode(&bytes)?)
}

pub fn write(path: impl AsRef<Path>, wave: &Waveform) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(wave)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
