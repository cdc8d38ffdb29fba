//! Generator architecture, learned parameters, latent inputs and the forward
//! pass that records every intermediate layer.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::{dense, relu, tanh_act, transpose_conv1d, Kernel, Rng, Tensor};

/// Audio sample rate of generator outputs, in Hz.
pub const SAMPLE_RATE: u32 = 16_000;
/// Samples in one generated output (1.024 s at 16 kHz).
pub const OUTPUT_SAMPLES: usize = 16_384;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, t: &Tensor) -> Tensor {
        match self {
            Activation::Relu => relu(t),
            Activation::Tanh => tanh_act(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseOut {
    pub channels: usize,
    pub samples: usize,
}

impl DenseOut {
    pub fn len(&self) -> usize {
        self.channels * self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Architecture of a transpose-convolution generator.
///
/// The input vector is `code_dim` code entries followed by `latent_dim`
/// noise entries. A dense projection produces `dense_out.len()` values that
/// are reshaped time-major into `dense_out.channels × dense_out.samples`
/// and passed through ReLU before the first transpose convolution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub latent_dim: usize,
    pub code_dim: usize,
    pub dense_out: DenseOut,
    pub layers: Vec<LayerSpec>,
}

impl GeneratorSpec {
    /// Five-layer WaveGAN generator: 100 noise inputs,
    /// 1024×16 → 512×64 → 256×256 → 128×1024 → 64×4096 → 1×16384.
    pub fn wavegan() -> Self {
        Self::halving(100, 0, 1024, 16, 5, 4)
    }

    /// ciwGAN variant: two code entries plus 98 noise entries (100 inputs total).
    pub fn ciwgan() -> Self {
        Self::halving(98, 2, 1024, 16, 5, 4)
    }

    /// Ten-layer stand-in for the deeper model: stride 2 per layer with
    /// channel counts halving from 1024, ending at 1×16384.
    pub fn deep10() -> Self {
        Self::halving(100, 0, 1024, 16, 10, 2)
    }

    /// Chain where each layer halves the channel count and multiplies the
    /// length by `stride`; the last layer is forced to a single tanh channel.
    pub fn halving(
        latent_dim: usize,
        code_dim: usize,
        first_channels: usize,
        first_samples: usize,
        n_layers: usize,
        stride: usize,
    ) -> Self {
        let mut layers = Vec::with_capacity(n_layers);
        let mut ch = first_channels;
        for k in 0..n_layers {
            let last = k + 1 == n_layers;
            let out = if last { 1 } else { (ch / 2).max(1) };
            layers.push(LayerSpec {
                in_channels: ch,
                out_channels: out,
                kernel: 25,
                stride,
                activation: if last { Activation::Tanh } else { Activation::Relu },
            });
            ch = out;
        }
        Self {
            latent_dim,
            code_dim,
            dense_out: DenseOut {
                channels: first_channels,
                samples: first_samples,
            },
            layers,
        }
    }

    pub fn input_width(&self) -> usize {
        self.code_dim + self.latent_dim
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// `(channels, samples)` of every transpose-convolution layer, in order.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut samples = self.dense_out.samples;
        self.layers
            .iter()
            .map(|l| {
                samples *= l.stride;
                (l.out_channels, samples)
            })
            .collect()
    }

    /// Shape of conv layer `layer` (1-based; `n_layers()` is the output layer).
    pub fn layer_shape(&self, layer: usize) -> Result<(usize, usize)> {
        if layer == 0 || layer > self.layers.len() {
            return Err(Error::IndexOutOfRange {
                index: layer,
                limit: self.layers.len(),
            });
        }
        Ok(self.layer_shapes()[layer - 1])
    }

    pub fn output_len(&self) -> usize {
        self.layer_shapes().last().map_or(0, |s| s.1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_width() == 0 {
            return Err(Error::Validation("generator input width is zero".into()));
        }
        if self.dense_out.channels == 0 || self.dense_out.samples == 0 {
            return Err(Error::Validation("dense output shape must be positive".into()));
        }
        let Some(last) = self.layers.last() else {
            return Err(Error::Validation("generator has no layers".into()));
        };
        if last.activation != Activation::Tanh || last.out_channels != 1 {
            return Err(Error::Validation(
                "last layer must be a single tanh channel".into(),
            ));
        }
        let mut ch = self.dense_out.channels;
        for (k, l) in self.layers.iter().enumerate() {
            if l.in_channels != ch {
                return Err(Error::Validation(format!(
                    "layer {} expects {} input channels, previous stage yields {ch}",
                    k + 1,
                    l.in_channels
                )));
            }
            if l.out_channels == 0 || l.kernel == 0 || l.stride == 0 {
                return Err(Error::Validation(format!(
                    "layer {} has a zero dimension",
                    k + 1
                )));
            }
            if k + 1 < self.layers.len() && l.activation != Activation::Relu {
                return Err(Error::Validation(format!(
                    "intermediate layer {} must use relu",
                    k + 1
                )));
            }
            ch = l.out_channels;
        }
        Ok(())
    }

    /// SHA-256 of the compact JSON encoding of the spec.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("spec serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    pub kernel: Kernel,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightMeta {
    pub model_name: String,
    pub trained_steps: u64,
    pub spec_hash: String,
}

/// Generator parameters. `dense_weight` is `input_width × dense_out.len()`
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightBundle {
    pub dense_weight: Vec<f64>,
    pub dense_bias: Vec<f64>,
    pub layers: Vec<ConvWeights>,
    pub meta: WeightMeta,
}

impl WeightBundle {
    pub fn zeros(spec: &GeneratorSpec) -> Self {
        let n = spec.dense_out.len();
        Self {
            dense_weight: vec![0.0; spec.input_width() * n],
            dense_bias: vec![0.0; n],
            layers: spec
                .layers
                .iter()
                .map(|l| ConvWeights {
                    kernel: Kernel::zeros(l.in_channels, l.out_channels, l.kernel),
                    bias: vec![0.0; l.out_channels],
                })
                .collect(),
            meta: WeightMeta {
                model_name: "zeros".into(),
                trained_steps: 0,
                spec_hash: spec.hash(),
            },
        }
    }

    /// Uniform weights in `(-scale, scale)`, quantized to `f32` so the bundle
    /// survives a save/load round trip unchanged.
    pub fn random(spec: &GeneratorSpec, seed: u64, scale: f64) -> Self {
        let mut rng = Rng::new(seed);
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| rng.uniform(-scale, scale) as f32 as f64)
                .collect()
        };
        let mut w = Self::zeros(spec);
        w.dense_weight = draw(w.dense_weight.len());
        w.dense_bias = draw(w.dense_bias.len());
        for (cw, l) in w.layers.iter_mut().zip(&spec.layers) {
            cw.kernel = Kernel::new(
                l.in_channels,
                l.out_channels,
                l.kernel,
                draw(l.in_channels * l.out_channels * l.kernel),
            )
            .expect("shape matches spec");
            cw.bias = draw(l.out_channels);
        }
        w.meta.model_name = format!("random-{seed}");
        w
    }

    /// A single activation path driven by one latent entry.
    ///
    /// Input `input_index` feeds dense unit (channel 0, sample `anchor`) with
    /// weight `gain` and bias `offset`; every conv layer passes channel 0 to
    /// channel 0 through a unit tap at the SAME crop offset. All other
    /// parameters are zero, so channel 0 of each layer holds a zero-stuffed
    /// copy of `relu(offset + gain·x)` and every other channel is zero.
    pub fn single_path(
        spec: &GeneratorSpec,
        input_index: usize,
        anchor: usize,
        gain: f64,
        offset: f64,
    ) -> Result<Self> {
        if input_index >= spec.input_width() {
            return Err(Error::IndexOutOfRange {
                index: input_index,
                limit: spec.input_width(),
            });
        }
        if anchor >= spec.dense_out.samples {
            return Err(Error::IndexOutOfRange {
                index: anchor,
                limit: spec.dense_out.samples,
            });
        }
        let mut w = Self::zeros(spec);
        let n = spec.dense_out.len();
        // time-major reshape: (channel 0, sample anchor) is flat index anchor·channels
        let unit = anchor * spec.dense_out.channels;
        w.dense_weight[input_index * n + unit] = gain;
        w.dense_bias[unit] = offset;
        for (cw, l) in w.layers.iter_mut().zip(&spec.layers) {
            cw.kernel
                .set(0, 0, crate::tensor::same_pad_left(l.kernel, l.stride), 1.0);
        }
        w.meta.model_name = "single-path".into();
        Ok(w)
    }

    /// Check every tensor against the spec.
    pub fn check(&self, spec: &GeneratorSpec) -> Result<()> {
        let mismatch = |what: String| Err(Error::Dimension(what));
        if self.dense_weight.len() != spec.input_width() * spec.dense_out.len() {
            return mismatch(format!(
                "dense weight has {} values, spec needs {}",
                self.dense_weight.len(),
                spec.input_width() * spec.dense_out.len()
            ));
        }
        if self.dense_bias.len() != spec.dense_out.len() {
            return mismatch("dense bias length".into());
        }
        if self.layers.len() != spec.layers.len() {
            return mismatch(format!(
                "{} conv layers in weights, {} in spec",
                self.layers.len(),
                spec.layers.len()
            ));
        }
        for (k, (cw, l)) in self.layers.iter().zip(&spec.layers).enumerate() {
            let k_shape = (cw.kernel.in_channels(), cw.kernel.out_channels(), cw.kernel.width());
            if k_shape != (l.in_channels, l.out_channels, l.kernel) || cw.bias.len() != l.out_channels {
                return mismatch(format!("conv{} weights do not match spec", k + 1));
            }
        }
        let finite = self.dense_weight.iter().chain(&self.dense_bias).all(|v| v.is_finite())
            && self
                .layers
                .iter()
                .all(|cw| cw.kernel.data().iter().chain(&cw.bias).all(|v| v.is_finite()));
        if !finite {
            return Err(Error::Validation("weights contain non-finite values".into()));
        }
        Ok(())
    }
}

/// Generator input: categorical code (possibly empty) followed by noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentVector {
    pub code: Vec<f64>,
    pub z: Vec<f64>,
}

impl LatentVector {
    pub fn width(&self) -> usize {
        self.code.len() + self.z.len()
    }

    /// Concatenated network input, code first.
    pub fn to_input(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.width());
        v.extend_from_slice(&self.code);
        v.extend_from_slice(&self.z);
        v
    }

    pub fn zeros(spec: &GeneratorSpec) -> Self {
        Self {
            code: vec![0.0; spec.code_dim],
            z: vec![0.0; spec.latent_dim],
        }
    }
}

/// Draw a latent vector: noise entries uniform in `(-1, 1)`, then overrides
/// applied verbatim (they may lie far outside the training interval).
///
/// All `latent_dim` draws happen before overrides, so an override never
/// shifts the values of the other entries. A missing `code` defaults to
/// all zeros.
pub fn sample_latent(
    rng: &mut Rng,
    spec: &GeneratorSpec,
    overrides: &BTreeMap<usize, f64>,
    code: Option<&[f64]>,
) -> Result<LatentVector> {
    if let Some((&idx, _)) = overrides.range(spec.latent_dim..).next() {
        return Err(Error::IndexOutOfRange {
            index: idx,
            limit: spec.latent_dim,
        });
    }
    if let Some((_, v)) = overrides.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Validation(format!("override value {v} is not finite")));
    }
    let code = match code {
        Some(c) if c.len() != spec.code_dim => {
            return Err(Error::Dimension(format!(
                "code has {} entries, spec expects {}",
                c.len(),
                spec.code_dim
            )))
        }
        Some(c) => c.to_vec(),
        None => vec![0.0; spec.code_dim],
    };
    let mut z: Vec<f64> = (0..spec.latent_dim)
        .map(|_| rng.uniform_open(-1.0, 1.0))
        .collect();
    for (&i, &v) in overrides {
        z[i] = v;
    }
    Ok(LatentVector { code, z })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    pub pre: Tensor,
    pub post: Tensor,
}

/// Every stage of one forward pass: the reshaped dense projection, each
/// transpose-convolution layer, and the final waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub dense: LayerTrace,
    pub layers: Vec<LayerTrace>,
    pub waveform: Vec<f64>,
}

impl ForwardTrace {
    /// Trace of conv layer `layer` (1-based).
    pub fn layer(&self, layer: usize) -> Result<&LayerTrace> {
        layer
            .checked_sub(1)
            .and_then(|i| self.layers.get(i))
            .ok_or(Error::IndexOutOfRange {
                index: layer,
                limit: self.layers.len(),
            })
    }
}

pub fn forward(spec: &GeneratorSpec, weights: &WeightBundle, latent: &LatentVector) -> Result<ForwardTrace> {
    forward_until(spec, weights, latent, spec.n_layers())
}

/// Forward pass stopped after conv layer `last_layer` (1-based). The
/// waveform is empty unless the pass reaches the output layer.
pub fn forward_until(
    spec: &GeneratorSpec,
    weights: &WeightBundle,
    latent: &LatentVector,
    last_layer: usize,
) -> Result<ForwardTrace> {
    spec.validate()?;
    if latent.code.len() != spec.code_dim || latent.z.len() != spec.latent_dim {
        return Err(Error::Validation(format!(
            "latent has {}+{} entries, spec expects {}+{}",
            latent.code.len(),
            latent.z.len(),
            spec.code_dim,
            spec.latent_dim
        )));
    }
    if last_layer > spec.n_layers() {
        return Err(Error::IndexOutOfRange {
            index: last_layer,
            limit: spec.n_layers(),
        });
    }
    weights.check(spec)?;

    let projected = dense(&latent.to_input(), &weights.dense_weight, &weights.dense_bias)?;
    let DenseOut { channels, samples } = spec.dense_out;
    // time-major flat layout: value (c, t) sits at t·channels + c
    let mut reshaped = vec![0.0; projected.len()];
    for t in 0..samples {
        for c in 0..channels {
            reshaped[c * samples + t] = projected[t * channels + c];
        }
    }
    let pre = Tensor::new(channels, samples, reshaped)?;
    let post = relu(&pre);

    let mut x = post.clone();
    let mut layers = Vec::with_capacity(last_layer);
    for (l, cw) in spec.layers.iter().zip(&weights.layers).take(last_layer) {
        let pre = transpose_conv1d(&x, &cw.kernel, &cw.bias, l.stride)?;
        let post = l.activation.apply(&pre);
        x = post.clone();
        layers.push(LayerTrace { pre, post });
    }
    let waveform = if last_layer == spec.n_layers() {
        x.into_data()
    } else {
        Vec::new()
    };
    Ok(ForwardTrace {
        dense: LayerTrace { pre, post },
        layers,
        waveform,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GeneratorSpec {
        GeneratorSpec::halving(6, 2, 8, 4, 3, 4)
    }

    #[test]
    fn wavegan_chain() {
        let spec = GeneratorSpec::wavegan();
        spec.validate().unwrap();
        assert_eq!(
            spec.layer_shapes(),
            vec![(512, 64), (256, 256), (128, 1024), (64, 4096), (1, 16384)]
        );
        assert_eq!(spec.output_len(), OUTPUT_SAMPLES);
        for (k, (_, s)) in spec.layer_shapes().iter().enumerate() {
            assert_eq!(*s, 16 * 4usize.pow(k as u32 + 1));
        }
    }

    #[test]
    fn other_presets_end_at_one_by_16384() {
        for spec in [GeneratorSpec::ciwgan(), GeneratorSpec::deep10()] {
            spec.validate().unwrap();
            assert_eq!(*spec.layer_shapes().last().unwrap(), (1, 16384));
            assert_eq!(spec.input_width(), 100);
        }
        assert_eq!(GeneratorSpec::deep10().n_layers(), 10);
    }

    #[test]
    fn broken_chain_rejected() {
        let mut spec = small();
        spec.layers[1].in_channels += 1;
        assert!(spec.validate().is_err());
        let mut spec = small();
        spec.layers.last_mut().unwrap().activation = Activation::Relu;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn zero_weights_give_tanh_bias() {
        let spec = small();
        let mut w = WeightBundle::zeros(&spec);
        w.layers.last_mut().unwrap().bias = vec![0.3];
        let mut rng = Rng::new(1);
        let z = sample_latent(&mut rng, &spec, &BTreeMap::new(), None).unwrap();
        let tr = forward(&spec, &w, &z).unwrap();
        for lt in &tr.layers[..2] {
            assert!(lt.post.data().iter().all(|v| *v == 0.0));
        }
        assert!(tr.waveform.iter().all(|v| *v == 0.3f64.tanh()));
        assert_eq!(tr.waveform.len(), 4 * 64);
    }

    #[test]
    fn overrides_and_width_checks() {
        let spec = GeneratorSpec::wavegan();
        let mut rng = Rng::new(7);
        let ov = BTreeMap::from([(11, -15.0)]);
        let z = sample_latent(&mut rng, &spec, &ov, None).unwrap();
        assert_eq!(z.z[11], -15.0);
        assert!(z
            .z
            .iter()
            .enumerate()
            .all(|(i, v)| i == 11 || (*v > -1.0 && *v < 1.0)));

        let bad = BTreeMap::from([(100, 1.0)]);
        assert!(matches!(
            sample_latent(&mut rng, &spec, &bad, None),
            Err(Error::IndexOutOfRange { index: 100, .. })
        ));

        let a = sample_latent(&mut Rng::new(42), &spec, &BTreeMap::new(), None).unwrap();
        let b = sample_latent(&mut Rng::new(42), &spec, &BTreeMap::new(), None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn override_leaves_other_entries_untouched() {
        let spec = small();
        let a = sample_latent(&mut Rng::new(3), &spec, &BTreeMap::new(), None).unwrap();
        let b = sample_latent(&mut Rng::new(3), &spec, &BTreeMap::from([(2, 9.0)]), None).unwrap();
        for i in 0..spec.latent_dim {
            if i != 2 {
                assert_eq!(a.z[i].to_bits(), b.z[i].to_bits());
            }
        }
    }

    #[test]
    fn latent_width_mismatch() {
        let spec = small();
        let w = WeightBundle::zeros(&spec);
        let z = LatentVector {
            code: vec![0.0; 2],
            z: vec![0.0; 5],
        };
        assert!(matches!(forward(&spec, &w, &z), Err(Error::Validation(_))));
    }

    #[test]
    fn code_is_prefix_of_input() {
        let spec = small();
        let mut rng = Rng::new(8);
        let z = sample_latent(&mut rng, &spec, &BTreeMap::new(), Some(&[1.0, 0.0])).unwrap();
        let input = z.to_input();
        assert_eq!(&input[..2], &[1.0, 0.0]);
        assert_eq!(&input[2..], z.z.as_slice());
    }

    #[test]
    fn single_path_propagates_one_channel() {
        let spec = small();
        let w = WeightBundle::single_path(&spec, 3, 1, -1.0, 6.0).unwrap();
        let mut z = LatentVector::zeros(&spec);
        z.z[1] = -2.0; // input index 3 = code_dim 2 + z index 1
        let tr = forward(&spec, &w, &z).unwrap();
        assert_eq!(tr.dense.post.get(0, 1), 8.0);
        let conv2 = &tr.layers[1].post;
        let nonzero: Vec<_> = conv2.data().iter().enumerate().filter(|(_, v)| **v != 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(*nonzero[0].1, 8.0);
        assert_eq!(nonzero[0].0, 16);
    }
}
