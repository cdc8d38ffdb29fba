use std::f64::consts::PI;

use super::{frame_count, Track, HOP_SECONDS};
use crate::error::{Error, Result};

/// Reported level for frames with no energy, in dB.
pub const DB_FLOOR: f64 = -120.0;

/// Intensity in dB relative to a full-scale amplitude of 1.0, so a
/// full-scale sine sits near −3 dB and typical values are negative.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityTrack {
    pub times: Vec<f64>,
    pub db: Vec<f64>,
    pub min_pitch: f64,
}

impl IntensityTrack {
    pub fn track(&self) -> Track {
        Track {
            times: self.times.clone(),
            values: self.db.iter().map(|v| Some(*v)).collect(),
        }
    }
}

/// Hann-weighted mean square per frame, window `3.2 / min_pitch` seconds,
/// hop 10 ms.
pub fn track_intensity(signal: &[f64], rate: f64, min_pitch: f64) -> Result<IntensityTrack> {
    if !(min_pitch > 0.0) {
        return Err(Error::Validation("minimum pitch must be positive".into()));
    }
    let frame = ((3.2 / min_pitch) * rate).round() as usize;
    if frame < 2 || frame > signal.len() {
        return Err(Error::Validation(format!(
            "intensity window of {frame} samples does not fit a {}-sample signal",
            signal.len()
        )));
    }
    let hop = ((HOP_SECONDS * rate).round() as usize).max(1);
    let window: Vec<f64> = (0..frame)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / (frame - 1) as f64).cos())
        .collect();
    let wsum: f64 = window.iter().sum();

    let n_frames = frame_count(signal.len(), frame, hop);
    let mut times = Vec::with_capacity(n_frames);
    let mut db = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let start = i * hop;
        let ms = signal[start..start + frame]
            .iter()
            .zip(&window)
            .map(|(x, w)| w * x * x)
            .sum::<f64>()
            / wsum;
        times.push((start as f64 + frame as f64 / 2.0) / rate);
        db.push(if ms > 0.0 { (10.0 * ms.log10()).max(DB_FLOOR) } else { DB_FLOOR });
    }
    Ok(IntensityTrack { times, db, min_pitch })
}
