//! Frame-wise F0 estimation by normalized autocorrelation.
//!
//! Each frame is mean-removed, then for every lag `τ` in the search band
//!
//! ```text
//! r(τ) = Σ x[n]·x[n+τ] / sqrt(Σ x[n]² · Σ x[n+τ]²)
//! ```
//!
//! with both sums over the overlapping part of the frame. Local maxima are
//! refined with a parabola through their neighbours; the shortest-lag peak
//! within 10% of the best one is taken as the period. Frames whose chosen
//! peak falls below [`VOICING_THRESHOLD`] are unvoiced. There is no path
//! search across frames.

use rustfft::{num_complex::Complex, FftPlanner};

use super::{frame_count, Track, HOP_SECONDS};
use crate::error::{Error, Result};

pub const VOICING_THRESHOLD: f64 = 0.45;
const FRAME_SECONDS: f64 = 0.040;
/// Peaks within this fraction of the strongest one compete on lag alone.
const PEAK_TOLERANCE: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct PitchTrack {
    pub times: Vec<f64>,
    /// F0 in Hz, `None` for unvoiced frames.
    pub f0: Vec<Option<f64>>,
    pub floor: f64,
    pub ceiling: f64,
}

impl PitchTrack {
    pub fn track(&self) -> Track {
        Track {
            times: self.times.clone(),
            values: self.f0.clone(),
        }
    }

    pub fn voiced_fraction(&self) -> f64 {
        if self.f0.is_empty() {
            return 0.0;
        }
        self.f0.iter().filter(|v| v.is_some()).count() as f64 / self.f0.len() as f64
    }
}

pub fn track_f0(signal: &[f64], rate: f64, floor: f64, ceiling: f64) -> Result<PitchTrack> {
    if !(floor > 0.0 && ceiling > floor) {
        return Err(Error::Validation(format!(
            "F0 band [{floor}, {ceiling}] must satisfy 0 < floor < ceiling"
        )));
    }
    if rate < 2.0 * ceiling {
        return Err(Error::Validation(format!(
            "sample rate {rate} Hz is below twice the F0 ceiling {ceiling} Hz"
        )));
    }
    // the frame must hold at least two periods of the lowest F0
    let frame = ((FRAME_SECONDS * rate).round() as usize).max((2.0 * rate / floor).ceil() as usize + 2);
    let hop = ((HOP_SECONDS * rate).round() as usize).max(1);
    let n_frames = frame_count(signal.len(), frame, hop);
    if n_frames < 2 {
        return Err(Error::Validation(format!(
            "signal of {} samples is shorter than two {frame}-sample frames",
            signal.len()
        )));
    }

    let lag_lo = ((rate / ceiling).floor() as usize).max(2);
    let lag_hi = ((rate / floor).ceil() as usize).min(frame - 2);
    let fft_len = (2 * frame).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(fft_len);
    let inv = planner.plan_fft_inverse(fft_len);

    let mut times = Vec::with_capacity(n_frames);
    let mut f0 = Vec::with_capacity(n_frames);
    let mut buf = vec![Complex::new(0.0, 0.0); fft_len];
    for i in 0..n_frames {
        let start = i * hop;
        let x = &signal[start..start + frame];
        times.push((start as f64 + frame as f64 / 2.0) / rate);

        let mean = x.iter().sum::<f64>() / frame as f64;
        let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let r = normalized_acf(&centered, lag_hi + 1, &mut buf, fwd.as_ref(), inv.as_ref());
        let period = pick_period(&r, lag_lo, lag_hi);
        f0.push(period.map(|lag| (rate / lag).clamp(floor, ceiling)));
    }
    Ok(PitchTrack {
        times,
        f0,
        floor,
        ceiling,
    })
}

/// Normalized autocorrelation for lags `0..=max_lag`.
fn normalized_acf(
    x: &[f64],
    max_lag: usize,
    buf: &mut [Complex<f64>],
    fwd: &dyn rustfft::Fft<f64>,
    inv: &dyn rustfft::Fft<f64>,
) -> Vec<f64> {
    let n = x.len();
    for (b, v) in buf.iter_mut().zip(x.iter().chain(std::iter::repeat(&0.0))) {
        *b = Complex::new(*v, 0.0);
    }
    fwd.process(buf);
    for b in buf.iter_mut() {
        *b = Complex::new(b.norm_sqr(), 0.0);
    }
    inv.process(buf);
    let scale = 1.0 / buf.len() as f64;

    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v * v);
    }
    (0..=max_lag)
        .map(|lag| {
            let head = prefix[n - lag];
            let tail = prefix[n] - prefix[lag];
            let denom = (head * tail).sqrt();
            if denom <= f64::MIN_POSITIVE {
                0.0
            } else {
                (buf[lag].re * scale / denom).clamp(-1.0, 1.0)
            }
        })
        .collect()
}

/// Refined lag of the chosen peak, or `None` when the frame is unvoiced.
fn pick_period(r: &[f64], lag_lo: usize, lag_hi: usize) -> Option<f64> {
    let mut peaks = Vec::new();
    for lag in lag_lo..=lag_hi {
        let (a, b, c) = (r[lag - 1], r[lag], r[lag + 1]);
        if b > 0.0 && b >= a && b > c {
            let curve = a - 2.0 * b + c;
            let (shift, height) = if curve < 0.0 {
                let d = 0.5 * (a - c) / curve;
                (d, b - 0.25 * (a - c) * d)
            } else {
                (0.0, b)
            };
            peaks.push((lag as f64 + shift, height.min(1.0)));
        }
    }
    let best = peaks.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let (lag, height) = peaks.into_iter().find(|p| p.1 >= PEAK_TOLERANCE * best)?;
    (height >= VOICING_THRESHOLD).then_some(lag)
}
