//! Mono RIFF WAV input/output.
//!
//! Reads 16/24/32-bit integer PCM and 32-bit float; integer samples are
//! scaled into [-1, 1]. Writes either 16-bit PCM or 32-bit float.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

/// Loads a mono WAV file, returning `(fs, samples)`.
pub fn load_wav(path: impl AsRef<Path>) -> Result<(u32, Vec<f64>)> {
    let path = path.as_ref();
    let file = File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let reader = WavReader::new(std::io::BufReader::new(file))
        .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Unsupported(format!(
            "{}: {} channels, only mono WAV is supported",
            path.display(),
            spec.channels
        )));
    }
    if spec.sample_rate == 0 {
        return Err(Error::format(format!("{}: zero sample rate", path.display())));
    }
    let bad = |e: hound::Error| Error::format(format!("{}: {e}", path.display()));
    let samples = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<Vec<_>, _>>()
            .map_err(bad)?,
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = f64::from(1u32 << (bits - 1));
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / scale))
                .collect::<Result<Vec<_>, _>>()
                .map_err(bad)?
        }
        (format, bits) => {
            return Err(Error::Unsupported(format!(
                "{}: {bits}-bit {format:?} samples",
                path.display()
            )))
        }
    };
    Ok((spec.sample_rate, samples))
}

/// Writes a mono WAV file. Samples outside [-1, 1] are clipped for PCM.
pub fn write_wav(
    path: impl AsRef<Path>,
    fs: u32,
    samples: &[f64],
    encoding: WavEncoding,
) -> Result<()> {
    let path = path.as_ref();
    let spec = match encoding {
        WavEncoding::Pcm16 => WavSpec {
            channels: 1,
            sample_rate: fs,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        },
        WavEncoding::Float32 => WavSpec {
            channels: 1,
            sample_rate: fs,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        },
    };
    let to_err = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::format(format!("{}: {other}", path.display())),
    };
    let mut writer = WavWriter::new(BufWriter::new(File::create(path)?), spec).map_err(to_err)?;
    match encoding {
        WavEncoding::Pcm16 => {
            for &s in samples {
                let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
                writer.write_sample(v).map_err(to_err)?;
            }
        }
        WavEncoding::Float32 => {
            for &s in samples {
                writer.write_sample(s as f32).map_err(to_err)?;
            }
        }
    }
    writer.finalize().map_err(to_err)
}
