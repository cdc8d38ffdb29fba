//! Averaged-ReLU layer probes.
//!
//! A probe collapses a layer's feature maps into a single time series by
//! taking the mean across channels at every sample. For post-ReLU layers
//! the result is nonnegative and can be treated like an audio signal once
//! it is upsampled to the output rate and clipped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{ForwardTrace, GeneratorSpec, OUTPUT_SAMPLES};
use crate::tensor::{linear_resample, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerProbe {
    /// 1-based conv layer index; 0 denotes the reshaped dense stage.
    pub layer_index: usize,
    pub series: Vec<f64>,
    pub upsampled: Option<Vec<f64>>,
    /// Display-only multiplier for overlay plots.
    pub scale_hint: f64,
}

impl LayerProbe {
    /// Set `scale_hint` so the probe's peak lines up with the peak absolute
    /// value of `waveform`. Leaves 1.0 when either peak is zero.
    pub fn with_scale_hint(mut self, waveform: &[f64]) -> Self {
        let probe_peak = self.series.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let wave_peak = waveform.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.scale_hint = if probe_peak > 0.0 && wave_peak > 0.0 {
            wave_peak / probe_peak
        } else {
            1.0
        };
        self
    }

    pub fn with_upsampled(mut self) -> Self {
        self.upsampled = Some(probe_to_waveform(&self));
        self
    }
}

/// Mean over feature maps at every sample.
pub fn average_feature_maps(layer_index: usize, layer: &Tensor) -> LayerProbe {
    let n = layer.channels() as f64;
    let mut series = vec![0.0; layer.samples()];
    for row in layer.rows() {
        for (s, v) in series.iter_mut().zip(row) {
            *s += v;
        }
    }
    for s in &mut series {
        *s /= n;
    }
    LayerProbe {
        layer_index,
        series,
        upsampled: None,
        scale_hint: 1.0,
    }
}

/// Render a probe as audio: linearly resample to [`OUTPUT_SAMPLES`]
/// (1.024 s at 16 kHz), then clip values above 1.
///
/// Clipping after resampling keeps a clipped peak at exactly 1.0 even when
/// the resampling grid does not land on the peak sample.
pub fn probe_to_waveform(probe: &LayerProbe) -> Vec<f64> {
    series_to_waveform(&probe.series)
}

pub fn series_to_waveform(series: &[f64]) -> Vec<f64> {
    let resampled = match series.len() {
        0 => vec![0.0; OUTPUT_SAMPLES],
        1 => vec![series[0]; OUTPUT_SAMPLES],
        _ => linear_resample(series, OUTPUT_SAMPLES).expect("at least two points"),
    };
    resampled.into_iter().map(|v| v.min(1.0)).collect()
}

/// Probes for every conv layer of a trace, post-activation unless
/// `pre_activation` is set. Scale hints are matched to the trace waveform.
pub fn probe_trace(trace: &ForwardTrace, pre_activation: bool) -> Vec<LayerProbe> {
    trace
        .layers
        .iter()
        .enumerate()
        .map(|(k, lt)| {
            let t = if pre_activation { &lt.pre } else { &lt.post };
            average_feature_maps(k + 1, t).with_scale_hint(&trace.waveform)
        })
        .collect()
}

/// Highest frequency a layer can carry directly, taken as half its sample
/// count in Hz (the layer treated as spanning one second).
pub fn layer_nyquist(spec: &GeneratorSpec, layer_index: usize) -> Result<f64> {
    let (_, samples) = spec.layer_shape(layer_index).map_err(|_| Error::IndexOutOfRange {
        index: layer_index,
        limit: spec.n_layers(),
    })?;
    Ok(samples as f64 / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Rng;

    #[test]
    fn single_map_is_identity() {
        let t = Tensor::new(1, 3, vec![0.5, 0.0, 2.0]).unwrap();
        assert_eq!(average_feature_maps(1, &t).series, vec![0.5, 0.0, 2.0]);
        assert!(average_feature_maps(1, &Tensor::zeros(4, 5))
            .series
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn matches_column_means() {
        let mut rng = Rng::new(2);
        let data: Vec<f64> = (0..12).map(|_| rng.uniform(0.0, 3.0)).collect();
        let t = Tensor::new(3, 4, data.clone()).unwrap();
        let p = average_feature_maps(2, &t);
        for j in 0..4 {
            let mut s = 0.0;
            for i in 0..3 {
                s += data[i * 4 + j];
            }
            assert!((p.series[j] - s / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn waveform_rendering() {
        let p = average_feature_maps(4, &Tensor::new(1, 4096, vec![0.5; 4096]).unwrap());
        let w = probe_to_waveform(&p);
        assert_eq!(w.len(), 16384);
        assert!(w.iter().all(|v| *v == 0.5));

        let mut s = vec![0.2; 64];
        s[10] = 1.7;
        let w = series_to_waveform(&s);
        assert_eq!(w.iter().cloned().fold(f64::MIN, f64::max), 1.0);

        let ramp: Vec<f64> = (0..1024).map(|i| i as f64 / 1023.0).collect();
        let w = series_to_waveform(&ramp);
        for (j, v) in w.iter().enumerate() {
            assert!((v - j as f64 / 16383.0).abs() < 1e-9);
        }
    }

    #[test]
    fn nyquist_follows_sample_count() {
        let spec = GeneratorSpec::wavegan();
        assert_eq!(layer_nyquist(&spec, 2).unwrap(), 128.0);
        assert_eq!(layer_nyquist(&spec, 3).unwrap(), 512.0);
        assert_eq!(layer_nyquist(&spec, 4).unwrap(), 2048.0);
        assert_eq!(layer_nyquist(&spec, 5).unwrap(), 8192.0);
        assert!(layer_nyquist(&spec, 0).is_err());
        assert!(layer_nyquist(&spec, 6).is_err());
    }

    #[test]
    fn scale_hint_matches_peaks() {
        let p = LayerProbe {
            layer_index: 4,
            series: vec![0.0, 0.05, 0.1],
            upsampled: None,
            scale_hint: 1.0,
        }
        .with_scale_hint(&[0.2, -0.7]);
        assert!((p.scale_hint - 7.0).abs() < 1e-12);
    }
}
