//! Acoustic measurements applied uniformly to generator outputs and to
//! upsampled layer probes: F0, intensity, formants, interval durations and
//! normalized-time resampling of tracks.

mod annotation;
mod formant;
mod intensity;
mod pitch;

pub use annotation::{measure_durations, AnnotationTier, Interval};
pub use formant::{levinson_durbin, lpc_autocorrelation, resample_sinc, track_formants, FormantFrame, FormantTrack};
pub use intensity::{track_intensity, IntensityTrack, DB_FLOOR};
pub use pitch::{track_f0, PitchTrack, VOICING_THRESHOLD};

use crate::error::{Error, Result};

/// Frame advance shared by all trackers, in seconds.
pub const HOP_SECONDS: f64 = 0.010;

/// F0 search bands, in Hz.
pub mod f0_band {
    /// Bare WaveGAN outputs.
    pub const SPEECH: (f64, f64) = (60.0, 300.0);
    /// ciwGAN reduplication outputs.
    pub const WIDE: (f64, f64) = (75.0, 450.0);
    /// Lowered window used on early layers.
    pub const LOW: (f64, f64) = (5.0, 150.0);
}

/// A time-aligned series with possibly missing frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub times: Vec<f64>,
    pub values: Vec<Option<f64>>,
}

impl Track {
    pub fn new(times: Vec<f64>, values: Vec<Option<f64>>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Dimension("track times and values differ in length".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("track times must be strictly increasing".into()));
        }
        Ok(Self { times, values })
    }

    pub fn voiced(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times
            .iter()
            .zip(&self.values)
            .filter_map(|(t, v)| v.map(|v| (*t, v)))
    }

    fn interpolate(&self, t: f64) -> Option<f64> {
        let mut before = None;
        let mut after = None;
        for (ti, vi) in self.voiced() {
            if ti <= t {
                before = Some((ti, vi));
            } else {
                after = Some((ti, vi));
                break;
            }
        }
        match (before, after) {
            (Some((t0, v0)), Some((t1, v1))) => Some(v0 + (v1 - v0) * (t - t0) / (t1 - t0)),
            (Some((_, v)), None) | (None, Some((_, v))) => Some(v),
            (None, None) => None,
        }
    }
}

/// Sample `track` at the centers of `n_bins` equal bins spanning
/// `[start, end]`.
///
/// Values are linearly interpolated between the nearest voiced frames on
/// either side of each bin center (held constant past the first or last
/// voiced frame). A bin is missing when neither the frames inside it nor
/// the frames immediately bracketing it are voiced.
pub fn normalized_time_sample(track: &Track, start: f64, end: f64, n_bins: usize) -> Result<Vec<Option<f64>>> {
    if n_bins == 0 {
        return Err(Error::Validation("need at least one bin".into()));
    }
    if !(end > start) {
        return Err(Error::Validation(format!("interval [{start}, {end}] is empty")));
    }
    let (Some(&first), Some(&last)) = (track.times.first(), track.times.last()) else {
        return Err(Error::Validation("track has no frames".into()));
    };
    if start > last || end < first {
        return Err(Error::Validation(format!(
            "interval [{start}, {end}] does not overlap track span [{first}, {last}]"
        )));
    }
    let width = (end - start) / n_bins as f64;
    Ok((0..n_bins)
        .map(|b| {
            let lo = start + b as f64 * width;
            let hi = lo + width;
            let inside = track.times.partition_point(|t| *t < lo);
            let past = track.times.partition_point(|t| *t <= hi);
            let support_lo = inside.saturating_sub(1);
            let support_hi = (past + 1).min(track.times.len());
            let any_voiced = track.values[support_lo..support_hi].iter().any(Option::is_some);
            if !any_voiced {
                return None;
            }
            track.interpolate(lo + width / 2.0)
        })
        .collect())
}

pub(crate) fn frame_count(len: usize, frame: usize, hop: usize) -> usize {
    if len < frame {
        0
    } else {
        1 + (len - frame) / hop
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| 0.005 + i as f64 * 0.01).collect()
    }

    #[test]
    fn constant_track_is_constant() {
        let t = Track::new(grid(50), vec![Some(110.0); 50]).unwrap();
        for bins in [1, 10, 40] {
            let v = normalized_time_sample(&t, 0.1, 0.4, bins).unwrap();
            assert_eq!(v.len(), bins);
            assert!(v.iter().all(|x| *x == Some(110.0)));
        }
    }

    #[test]
    fn ramp_bin_centers() {
        // F0 rises linearly from 100 Hz at 0.1 s to 200 Hz at 0.5 s.
        let times = grid(60);
        let values = times.iter().map(|t| Some(100.0 + (t - 0.1) * 250.0)).collect();
        let t = Track::new(times, values).unwrap();
        let v = normalized_time_sample(&t, 0.1, 0.5, 4).unwrap();
        for (got, want) in v.iter().zip([112.5, 137.5, 162.5, 187.5]) {
            assert!((got.unwrap() - want).abs() < 1e-9);
        }
    }

    #[test]
    fn unvoiced_gaps() {
        let mut values = vec![Some(100.0); 40];
        for v in &mut values[10..30] {
            *v = None;
        }
        let t = Track::new(grid(40), values).unwrap();
        let v = normalized_time_sample(&t, 0.0, 0.4, 40).unwrap();
        assert_eq!(v[0], Some(100.0));
        assert!(v[20].is_none());
        assert!(normalized_time_sample(&t, 2.0, 3.0, 4).is_err());
        assert!(normalized_time_sample(&t, 0.1, 0.2, 0).is_err());
    }
}
