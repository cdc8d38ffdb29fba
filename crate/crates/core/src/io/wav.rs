use std::io::Cursor;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use serde::{Deserialize, Serialize};

use super::atomic_write;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WavEncoding {
    /// IEEE float, 32 bits.
    #[default]
    Float32,
    /// Signed 16-bit PCM, full scale 32768, saturating.
    Pcm16,
}

impl std::str::FromStr for WavEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "float32" | "f32" => Ok(Self::Float32),
            "pcm16" | "i16" => Ok(Self::Pcm16),
            _ => Err(Error::Validation(format!("unknown wav encoding `{s}` (float32 or pcm16)"))),
        }
    }
}

fn wav_err(e: hound::Error) -> Error {
    Error::Wav(e.to_string())
}

/// Encode a mono signal. Samples are cast to `f32` (or quantized to 16 bit)
/// only here; values are not clipped for float output.
pub fn encode_wav(signal: &[f64], sample_rate: u32, encoding: WavEncoding) -> Result<Vec<u8>> {
    if signal.is_empty() {
        return Err(Error::Validation("cannot write an empty signal".into()));
    }
    if let Some(i) = signal.iter().position(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("sample {i} is not finite")));
    }
    let (bits_per_sample, sample_format) = match encoding {
        WavEncoding::Float32 => (32, SampleFormat::Float),
        WavEncoding::Pcm16 => (16, SampleFormat::Int),
    };
    let spec = WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample,
        sample_format,
    };
    let mut buf = Cursor::new(Vec::new());
    {
        let mut w = WavWriter::new(&mut buf, spec).map_err(wav_err)?;
        for &v in signal {
            match encoding {
                WavEncoding::Float32 => w.write_sample(v as f32),
                WavEncoding::Pcm16 => w.write_sample((v * 32768.0).round().clamp(-32768.0, 32767.0) as i16),
            }
            .map_err(wav_err)?;
        }
        w.finalize().map_err(wav_err)?;
    }
    Ok(buf.into_inner())
}

pub fn write_wav(path: &Path, signal: &[f64], sample_rate: u32, encoding: WavEncoding) -> Result<()> {
    atomic_write(path, &encode_wav(signal, sample_rate, encoding)?)
}

/// Read a WAV file as `(samples, sample_rate)`. Multichannel files are
/// averaged to mono; integer PCM is scaled to [−1, 1).
pub fn read_wav(path: &Path) -> Result<(Vec<f64>, u32)> {
    let reader = WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        SampleFormat::Int => {
            let full = (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / full))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_err)?
        }
    };
    let mono = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks(channels)
            .map(|f| f.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    Ok((mono, spec.sample_rate))
}
