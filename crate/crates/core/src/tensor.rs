//! Dense numerical substrate for the generator: channel-major activation
//! blocks, 1-D transpose convolution, activations, linear resampling and a
//! seedable PRNG.
//!
//! Everything here computes in `f64`. Weight files store `f32`; values are
//! widened on load and only narrowed again when audio is written to disk.

use rand::{Rng as _, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// A `channels × samples` block of activations stored row-major, one row per
/// feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    channels: usize,
    samples: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(channels: usize, samples: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || samples == 0 {
            return Err(Error::Dimension(format!(
                "tensor needs at least one channel and one sample, got {channels}x{samples}"
            )));
        }
        if data.len() != channels * samples {
            return Err(Error::Dimension(format!(
                "{channels}x{samples} tensor needs {} values, got {}",
                channels * samples,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "tensor value at flat index {i} is not finite"
            )));
        }
        Ok(Self {
            channels,
            samples,
            data,
        })
    }

    pub fn zeros(channels: usize, samples: usize) -> Self {
        assert!(channels > 0 && samples > 0, "empty tensor");
        Self {
            channels,
            samples,
            data: vec![0.0; channels * samples],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let samples = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != samples) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(rows.len(), samples, rows.concat())
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.channels, self.samples)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, channel: usize, t: usize) -> f64 {
        self.data[channel * self.samples + t]
    }

    /// One feature map.
    pub fn row(&self, channel: usize) -> &[f64] {
        let start = channel * self.samples;
        &self.data[start..start + self.samples]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.samples)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            channels: self.channels,
            samples: self.samples,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, alpha: f64) -> Self {
        self.map(|v| v * alpha)
    }
}

/// Transpose-convolution kernel laid out `in_channels × out_channels × width`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    in_channels: usize,
    out_channels: usize,
    width: usize,
    data: Vec<f64>,
}

impl Kernel {
    pub fn new(in_channels: usize, out_channels: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 || width == 0 {
            return Err(Error::Dimension(format!(
                "kernel dims must be positive, got {in_channels}x{out_channels}x{width}"
            )));
        }
        if data.len() != in_channels * out_channels * width {
            return Err(Error::Dimension(format!(
                "{in_channels}x{out_channels}x{width} kernel needs {} values, got {}",
                in_channels * out_channels * width,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "kernel weight at flat index {i} is not finite"
            )));
        }
        Ok(Self {
            in_channels,
            out_channels,
            width,
            data,
        })
    }

    pub fn zeros(in_channels: usize, out_channels: usize, width: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            width,
            data: vec![0.0; in_channels * out_channels * width],
        }
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Taps connecting input channel `i` to output channel `o`.
    pub fn taps(&self, i: usize, o: usize) -> &[f64] {
        let start = (i * self.out_channels + o) * self.width;
        &self.data[start..start + self.width]
    }

    pub fn set(&mut self, i: usize, o: usize, k: usize, value: f64) {
        self.data[(i * self.out_channels + o) * self.width + k] = value;
    }
}

/// Left crop applied by SAME-style transpose convolution.
///
/// The implicit crop totals `max(width - stride, 0)` samples, with the
/// extra sample (for odd totals) taken on the right.
pub fn same_pad_left(width: usize, stride: usize) -> usize {
    width.saturating_sub(stride) / 2
}

/// SAME-style 1-D transpose convolution producing `stride × input.samples()`
/// output samples.
///
/// `output[o, t] = bias[o] + Σ_i Σ_k input[i, u] · w[i, o, k]` over every
/// `(u, k)` with `u·stride + k − pad_left = t`.
pub fn transpose_conv1d(input: &Tensor, kernel: &Kernel, bias: &[f64], stride: usize) -> Result<Tensor> {
    if stride == 0 {
        return Err(Error::Validation("stride must be positive".into()));
    }
    if kernel.in_channels != input.channels {
        return Err(Error::Dimension(format!(
            "kernel expects {} input channels, tensor has {}",
            kernel.in_channels, input.channels
        )));
    }
    if bias.len() != kernel.out_channels {
        return Err(Error::Dimension(format!(
            "bias has {} entries for {} output channels",
            bias.len(),
            kernel.out_channels
        )));
    }
    if bias.iter().any(|b| !b.is_finite()) {
        return Err(Error::Validation("bias contains a non-finite value".into()));
    }

    let out_len = input.samples * stride;
    let pad = same_pad_left(kernel.width, stride) as isize;
    let width = kernel.width as isize;
    let mut out = vec![0.0; kernel.out_channels * out_len];

    // Each output row is accumulated in a fixed (i, u, k) order, so the
    // result does not depend on how rows are scheduled across threads.
    out.par_chunks_mut(out_len)
        .enumerate()
        .for_each(|(o, row)| {
            row.fill(bias[o]);
            for (i, x_row) in input.rows().enumerate() {
                let taps = kernel.taps(i, o);
                if taps.iter().all(|&w| w == 0.0) {
                    continue;
                }
                for (u, &x) in x_row.iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    let base = (u * stride) as isize - pad;
                    let k_lo = (-base).max(0);
                    let k_hi = (out_len as isize - base).min(width);
                    for k in k_lo..k_hi {
                        row[(base + k) as usize] += x * taps[k as usize];
                    }
                }
            }
        });

    Ok(Tensor {
        channels: kernel.out_channels,
        samples: out_len,
        data: out,
    })
}

/// Affine map `y[j] = bias[j] + Σ_i input[i] · weights[i][j]`, with
/// `weights` stored row-major as `input.len() × bias.len()`.
pub fn dense(input: &[f64], weights: &[f64], bias: &[f64]) -> Result<Vec<f64>> {
    let n_out = bias.len();
    if weights.len() != input.len() * n_out {
        return Err(Error::Dimension(format!(
            "dense weights hold {} values, expected {}x{}",
            weights.len(),
            input.len(),
            n_out
        )));
    }
    let mut out = bias.to_vec();
    for (x, w_row) in input.iter().zip(weights.chunks_exact(n_out.max(1))) {
        if *x == 0.0 {
            continue;
        }
        for (y, w) in out.iter_mut().zip(w_row) {
            *y += x * w;
        }
    }
    Ok(out)
}

pub fn relu(t: &Tensor) -> Tensor {
    t.map(|v| v.max(0.0))
}

pub fn tanh_act(t: &Tensor) -> Tensor {
    t.map(f64::tanh)
}

/// Resample `series` to `target_len` points by linear interpolation at
/// positions `j·(n−1)/(target_len−1)`. Both endpoints are reproduced exactly.
pub fn linear_resample(series: &[f64], target_len: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 2 {
        return Err(Error::Validation(format!(
            "linear resampling needs at least 2 points, got {n}"
        )));
    }
    if target_len == 0 {
        return Err(Error::Validation("target length must be positive".into()));
    }
    if target_len == 1 {
        return Ok(vec![series[0]]);
    }
    let span = (n - 1) as f64;
    let denom = (target_len - 1) as f64;
    Ok((0..target_len)
        .map(|j| {
            let pos = (j as f64 * span) / denom;
            let i = pos.floor() as usize;
            if i >= n - 1 {
                return series[n - 1];
            }
            let frac = pos - i as f64;
            if frac == 0.0 {
                series[i]
            } else {
                series[i] + frac * (series[i + 1] - series[i])
            }
        })
        .collect())
}

/// Seedable xoshiro256** stream.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: Xoshiro256StarStar,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: Xoshiro256StarStar::seed_from_u64(seed),
        }
    }

    /// Stream for item `index` of a run rooted at `root`; independent of the
    /// order in which items are generated.
    pub fn derived(root: u64, index: u64) -> Self {
        Self::new(derive_seed(root, index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.gen()
    }

    /// Draw from `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.inner.gen_range(lo..hi)
    }

    /// Draw from the open interval `(lo, hi)`.
    pub fn uniform_open(&mut self, lo: f64, hi: f64) -> f64 {
        loop {
            let v = self.uniform(lo, hi);
            if v != lo {
                return v;
            }
        }
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn derive_seed(root: u64, index: u64) -> u64 {
    splitmix64(root ^ splitmix64(index))
}
