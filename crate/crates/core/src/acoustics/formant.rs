//! LPC formant tracking.
//!
//! The signal is resampled to twice the formant ceiling, pre-emphasized,
//! and cut into 25 ms Hamming-windowed frames. Each frame gets an
//! autocorrelation LPC fit (Levinson-Durbin); the roots of the prediction
//! polynomial with positive angle and bandwidth under 400 Hz are formant
//! candidates, and the two lowest become F1 and F2.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{frame_count, Track, HOP_SECONDS};
use crate::error::{Error, Result};

const FRAME_SECONDS: f64 = 0.025;
const MAX_BANDWIDTH: f64 = 400.0;
/// Candidates closer than this to 0 Hz or to Nyquist are discarded.
const EDGE_GUARD: f64 = 50.0;
const PRE_EMPHASIS_FROM: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormantFrame {
    pub time: f64,
    pub f1: Option<f64>,
    pub f2: Option<f64>,
    pub b1: Option<f64>,
    pub b2: Option<f64>,
    /// LPC fit failed (non-positive-definite autocorrelation); frame skipped.
    pub unstable: bool,
}

impl FormantFrame {
    pub fn is_valid(&self) -> bool {
        self.f1.is_some() && self.f2.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormantTrack {
    pub frames: Vec<FormantFrame>,
    /// Sample rate the analysis ran at.
    pub analysis_rate: f64,
}

impl FormantTrack {
    pub fn valid_frames(&self) -> impl Iterator<Item = &FormantFrame> {
        self.frames.iter().filter(|f| f.is_valid())
    }

    pub fn f1_track(&self) -> Track {
        self.pick(|f| f.f1)
    }

    pub fn f2_track(&self) -> Track {
        self.pick(|f| f.f2)
    }

    fn pick(&self, get: impl Fn(&FormantFrame) -> Option<f64>) -> Track {
        Track {
            times: self.frames.iter().map(|f| f.time).collect(),
            values: self.frames.iter().map(get).collect(),
        }
    }
}

pub fn track_formants(signal: &[f64], rate: f64, max_formant: f64, lpc_order: usize) -> Result<FormantTrack> {
    if !(max_formant > 0.0) || lpc_order < 2 {
        return Err(Error::Validation(
            "formant ceiling must be positive and LPC order at least 2".into(),
        ));
    }
    let target = 2.0 * max_formant;
    if rate < target {
        return Err(Error::Validation(format!(
            "sample rate {rate} Hz is below twice the formant ceiling {max_formant} Hz"
        )));
    }
    let x = if rate > target {
        resample_sinc(signal, rate, target)
    } else {
        signal.to_vec()
    };
    let fs = target;

    let alpha = (-2.0 * PI * PRE_EMPHASIS_FROM / fs).exp();
    let emphasized: Vec<f64> = std::iter::once(x.first().copied().unwrap_or(0.0))
        .chain(x.windows(2).map(|w| w[1] - alpha * w[0]))
        .collect();

    let frame = (FRAME_SECONDS * fs).round() as usize;
    let hop = ((HOP_SECONDS * fs).round() as usize).max(1);
    let window: Vec<f64> = (0..frame)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (frame - 1) as f64).cos())
        .collect();

    let n_frames = frame_count(emphasized.len(), frame, hop);
    let mut frames = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let start = i * hop;
        let time = (start as f64 + frame as f64 / 2.0) / fs;
        let windowed: Vec<f64> = emphasized[start..start + frame]
            .iter()
            .zip(&window)
            .map(|(v, w)| v * w)
            .collect();
        let mut out = FormantFrame {
            time,
            f1: None,
            f2: None,
            b1: None,
            b2: None,
            unstable: false,
        };
        let r = lpc_autocorrelation(&windowed, lpc_order);
        if r[0] <= f64::MIN_POSITIVE {
            frames.push(out);
            continue;
        }
        let Some((a, _err)) = levinson_durbin(&r, lpc_order) else {
            out.unstable = true;
            frames.push(out);
            continue;
        };
        let mut cands = formant_candidates(&a, fs);
        cands.sort_by(|x, y| x.0.total_cmp(&y.0));
        if let Some(&(f, b)) = cands.first() {
            out.f1 = Some(f);
            out.b1 = Some(b);
        }
        if let Some(&(f, b)) = cands.get(1) {
            out.f2 = Some(f);
            out.b2 = Some(b);
        }
        frames.push(out);
    }
    Ok(FormantTrack {
        frames,
        analysis_rate: fs,
    })
}

/// Biased autocorrelation `r[0..=order]`.
pub fn lpc_autocorrelation(x: &[f64], order: usize) -> Vec<f64> {
    (0..=order)
        .map(|lag| {
            if lag >= x.len() {
                0.0
            } else {
                x[..x.len() - lag].iter().zip(&x[lag..]).map(|(a, b)| a * b).sum()
            }
        })
        .collect()
}

/// Levinson-Durbin recursion. Returns `a` with `a[0] = 1` such that
/// `A(z) = Σ a[k] z^{-k}` is the prediction-error filter, plus the final
/// prediction error. `None` when the autocorrelation is not positive
/// definite (a reflection coefficient reaches magnitude 1 or the error
/// collapses).
pub fn levinson_durbin(r: &[f64], order: usize) -> Option<(Vec<f64>, f64)> {
    if r.len() <= order || r[0] <= 0.0 {
        return None;
    }
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    let mut err = r[0];
    for m in 1..=order {
        let acc: f64 = (0..m).map(|j| a[j] * r[m - j]).sum();
        let k = -acc / err;
        if !k.is_finite() || k.abs() >= 1.0 {
            return None;
        }
        let prev = a.clone();
        for j in 1..m {
            a[j] = prev[j] + k * prev[m - j];
        }
        a[m] = k;
        err *= 1.0 - k * k;
        if err <= r[0] * 1e-12 {
            return None;
        }
    }
    Some((a, err))
}

/// `(frequency, bandwidth)` of each admissible root of the LPC polynomial.
fn formant_candidates(a: &[f64], fs: f64) -> Vec<(f64, f64)> {
    let p = a.len() - 1;
    // companion matrix of z^p + a1 z^{p-1} + ... + ap
    let mut c = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        c[(0, j)] = -a[j + 1];
    }
    for i in 1..p {
        c[(i, i - 1)] = 1.0;
    }
    let nyquist = fs / 2.0;
    c.complex_eigenvalues()
        .iter()
        .filter(|z| z.im > 0.0)
        .filter_map(|z| {
            let mag = z.norm();
            if mag >= 1.0 || mag <= 0.0 {
                return None;
            }
            let freq = z.im.atan2(z.re) * fs / (2.0 * PI);
            let bw = -mag.ln() * fs / PI;
            (freq > EDGE_GUARD && freq < nyquist - EDGE_GUARD && bw < MAX_BANDWIDTH).then_some((freq, bw))
        })
        .collect()
}

/// Band-limited resampling with a Hann-windowed sinc kernel whose cutoff is
/// the lower of the two Nyquist rates.
pub fn resample_sinc(x: &[f64], from: f64, to: f64) -> Vec<f64> {
    let ratio = to / from;
    let n_out = (x.len() as f64 * ratio).floor() as usize;
    let cutoff = ratio.min(1.0);
    const ZEROS: f64 = 16.0;
    let half = ZEROS / cutoff;
    (0..n_out)
        .map(|m| {
            let centre = m as f64 / ratio;
            let lo = (centre - half).ceil().max(0.0) as usize;
            let hi = ((centre + half).floor() as usize).min(x.len().saturating_sub(1));
            (lo..=hi)
                .map(|n| {
                    let d = centre - n as f64;
                    let arg = PI * cutoff * d;
                    let sinc = if d.abs() < 1e-12 { 1.0 } else { arg.sin() / arg };
                    let w = 0.5 + 0.5 * (PI * d / half).cos();
                    x[n] * cutoff * sinc * w
                })
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Impulse train through two cascaded second-order resonators.
    pub(crate) fn two_resonator_vowel(f1: f64, f2: f64, bw: f64, rate: f64, secs: f64) -> Vec<f64> {
        let n = (rate * secs) as usize;
        let period = (rate / 100.0) as usize;
        let mut x: Vec<f64> = (0..n).map(|i| if i % period == 0 { 1.0 } else { 0.0 }).collect();
        for f in [f1, f2] {
            let r = (-PI * bw / rate).exp();
            let c1 = 2.0 * r * (2.0 * PI * f / rate).cos();
            let c2 = -r * r;
            let mut y = vec![0.0; n];
            for i in 0..n {
                y[i] = x[i]
                    + c1 * if i >= 1 { y[i - 1] } else { 0.0 }
                    + c2 * if i >= 2 { y[i - 2] } else { 0.0 };
            }
            x = y;
        }
        x
    }

    #[test]
    fn levinson_recovers_ar2() {
        // AR(2) process autocorrelation, closed form from Yule-Walker
        let (a1, a2) = (-0.9, 0.5);
        let rho1 = -a1 / (1.0 + a2);
        let rho2 = -a1 * rho1 - a2;
        let (a, _) = levinson_durbin(&[1.0, rho1, rho2], 2).unwrap();
        assert!((a[1] - a1).abs() < 1e-12);
        assert!((a[2] - a2).abs() < 1e-12);
    }

    #[test]
    fn levinson_rejects_singular() {
        assert!(levinson_durbin(&[1.0, 1.0, 1.0], 2).is_none());
        assert!(levinson_durbin(&[0.0, 0.0], 1).is_none());
    }

    #[test]
    fn resonator_vowel() {
        let s = two_resonator_vowel(700.0, 1200.0, 80.0, 16000.0, 0.5);
        let tr = track_formants(&s, 16000.0, 5000.0, 10).unwrap();
        let valid: Vec<_> = tr.valid_frames().collect();
        assert!(valid.len() * 10 >= tr.frames.len() * 9);
        let ok = valid
            .iter()
            .filter(|f| (f.f1.unwrap() - 700.0).abs() <= 70.0 && (f.f2.unwrap() - 1200.0).abs() <= 120.0)
            .count();
        assert!(ok * 10 >= tr.frames.len() * 9, "{ok} of {}", tr.frames.len());
        for f in &valid {
            assert!(0.0 < f.f1.unwrap() && f.f1 < f.f2 && f.f2.unwrap() < 5000.0);
        }
    }

    #[test]
    fn gain_invariance() {
        let s = two_resonator_vowel(700.0, 1200.0, 80.0, 16000.0, 0.3);
        let a = track_formants(&s, 16000.0, 5000.0, 10).unwrap();
        let scaled: Vec<f64> = s.iter().map(|v| v * 0.01).collect();
        let b = track_formants(&scaled, 16000.0, 5000.0, 10).unwrap();
        for (x, y) in a.frames.iter().zip(&b.frames) {
            assert_eq!(x.is_valid(), y.is_valid());
            if let (Some(p), Some(q)) = (x.f1, y.f1) {
                assert!((p - q).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn pure_tone_is_first_formant() {
        let s: Vec<f64> = (0..8000)
            .map(|i| (2.0 * PI * 440.0 * i as f64 / 16000.0).sin())
            .collect();
        let tr = track_formants(&s, 16000.0, 5000.0, 10).unwrap();
        let f1: Vec<f64> = tr.frames.iter().filter_map(|f| f.f1).collect();
        assert!(f1.len() * 10 >= tr.frames.len() * 9);
        assert!(f1.iter().all(|f| (f - 440.0).abs() < 440.0 * 0.02), "{f1:?}");
    }

    #[test]
    fn silence_has_no_formants() {
        let tr = track_formants(&vec![0.0; 8000], 16000.0, 5000.0, 10).unwrap();
        assert_eq!(tr.valid_frames().count(), 0);
        assert!(tr.frames.iter().all(|f| f.f1.is_none()));
    }

    #[test]
    fn resample_preserves_low_tone() {
        let x: Vec<f64> = (0..16000)
            .map(|i| (2.0 * PI * 300.0 * i as f64 / 16000.0).sin())
            .collect();
        let y = resample_sinc(&x, 16000.0, 10000.0);
        assert_eq!(y.len(), 10000);
        for (m, v) in y.iter().enumerate().skip(100).take(9800) {
            let want = (2.0 * PI * 300.0 * m as f64 / 10000.0).sin();
            assert!((v - want).abs() < 1e-2, "{m}: {v} vs {want}");
        }
    }
}
