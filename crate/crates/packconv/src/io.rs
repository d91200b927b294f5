//! Signal file I/O.
//!
//! Two formats are supported, selected by file extension:
//!
//! * `.f64` (and anything unrecognized) — raw little-endian f64 samples,
//!   the canonical interchange format;
//! * `.wav` — 16-bit PCM mono WAV; samples map to `[-1, 1)` by dividing
//!   by 32768 on read and are clamped and rescaled on write.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// On-disk sample encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalFormat {
    RawF64,
    Wav,
}

impl SignalFormat {
    /// Chooses the format for a path from its extension.
    pub fn from_path(path: &Path) -> SignalFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("wav") => SignalFormat::Wav,
            _ => SignalFormat::RawF64,
        }
    }
}

/// Reads raw little-endian f64 samples.
pub fn read_raw_f64(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Format(format!(
            "{}: length {} is not a multiple of 8 bytes",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Writes raw little-endian f64 samples.
pub fn write_raw_f64(path: &Path, samples: &[f64]) -> Result<()> {
    let mut file = fs::File::create(path)?;
    for &s in samples {
        file.write_all(&s.to_le_bytes())?;
    }
    Ok(())
}

const WAV_HEADER_LEN: usize = 44;

/// Reads a 16-bit PCM mono WAV file; returns the samples (scaled to
/// `[-1, 1)`) and the sample rate.
pub fn read_wav_pcm16(path: &Path) -> Result<(Vec<f64>, u32)> {
    let bytes = fs::read(path)?;
    let fail = |msg: &str| Error::Format(format!("{}: {msg}", path.display()));
    if bytes.len() < WAV_HEADER_LEN || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(fail("not a RIFF/WAVE file"));
    }
    let mut pos = 12;
    let mut sample_rate = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_end = (pos + 8 + size).min(bytes.len());
        let body = &bytes[pos + 8..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(fail("truncated fmt chunk"));
                }
                let format = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                if format != 1 || bits != 16 {
                    return Err(fail("only 16-bit PCM is supported"));
                }
                if channels != 1 {
                    return Err(fail("only mono files are supported"));
                }
                sample_rate = Some(u32::from_le_bytes(body[4..8].try_into().unwrap()));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word-aligned.
        pos = pos + 8 + size + (size & 1);
    }
    let rate = sample_rate.ok_or_else(|| fail("missing fmt chunk"))?;
    let data = data.ok_or_else(|| fail("missing data chunk"))?;
    let samples = data
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes(c.try_into().unwrap()) as f64 / 32768.0)
        .collect();
    Ok((samples, rate))
}

/// Writes a 16-bit PCM mono WAV file. Samples are clamped to `[-1, 1)`
/// and scaled by 32768.
pub fn write_wav_pcm16(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let data_len = samples.len() * 2;
    let mut out = Vec::with_capacity(WAV_HEADER_LEN + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits per sample
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a signal in the format implied by the path. WAV sample rates are
/// returned so writers can preserve them (`None` for raw files).
pub fn read_signal(path: &Path) -> Result<(Vec<f64>, Option<u32>)> {
    match SignalFormat::from_path(path) {
        SignalFormat::RawF64 => Ok((read_raw_f64(path)?, None)),
        SignalFormat::Wav => {
            let (samples, rate) = read_wav_pcm16(path)?;
            Ok((samples, Some(rate)))
        }
    }
}

/// Writes a signal in the format implied by the path. `sample_rate` is
/// used for WAV output (default 48 kHz).
pub fn write_signal(path: &Path, samples: &[f64], sample_rate: Option<u32>) -> Result<()> {
    match SignalFormat::from_path(path) {
        SignalFormat::RawF64 => write_raw_f64(path, samples),
        SignalFormat::Wav => write_wav_pcm16(path, samples, sample_rate.unwrap_or(48_000)),
    }
}
