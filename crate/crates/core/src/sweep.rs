//! Linear interpolation of a single latent or code entry with everything
//! else frozen, recording outputs and layer probes at each step.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{forward, forward_until, GeneratorSpec, LatentVector, WeightBundle};
use crate::probe::{probe_trace, LayerProbe};
use crate::tensor::Tensor;

/// Which input entry a sweep drives.
///
/// Textual forms: `z11` is noise entry 11 (0-based, as in `z[11]`); `c2` is
/// the second code entry (1-based, matching `c1`/`c2` naming), stored
/// internally as `Code(1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepTarget {
    Z(usize),
    Code(usize),
}

impl FromStr for SweepTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Validation(format!("bad sweep target `{s}` (expected z<N> or c<N>)"));
        let (kind, num) = s.split_at(s.char_indices().nth(1).map_or(s.len(), |(i, _)| i));
        let n: usize = num.parse().map_err(|_| bad())?;
        match kind {
            "z" | "Z" => Ok(SweepTarget::Z(n)),
            "c" | "C" if n >= 1 => Ok(SweepTarget::Code(n - 1)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for SweepTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepTarget::Z(i) => write!(f, "z{i}"),
            SweepTarget::Code(i) => write!(f, "c{}", i + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub target: SweepTarget,
    pub start: f64,
    pub end: f64,
    pub step: f64,
    pub base: LatentVector,
}

impl SweepSpec {
    /// Number of steps: `floor(|end − start| / step) + 1`, where a quotient
    /// within 1e-9 (relative) of an integer counts as that integer.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.start.is_finite() && self.end.is_finite() && self.step.is_finite()) {
            return Err(Error::Validation("sweep range must be finite".into()));
        }
        if self.step <= 0.0 {
            return Err(Error::Validation("sweep step must be positive".into()));
        }
        let q = (self.end - self.start).abs() / self.step;
        let r = q.round();
        let whole = if (q - r).abs() <= 1e-9 * r.max(1.0) { r } else { q.floor() };
        if whole > 1e7 {
            return Err(Error::Validation(format!("sweep has {whole} steps")));
        }
        Ok(whole as usize + 1)
    }

    /// Target value at step `k`, `start ± k·step` (never accumulated).
    pub fn value_at(&self, k: usize) -> f64 {
        let dir = if self.end < self.start { -1.0 } else { 1.0 };
        self.start + dir * (k as f64 * self.step)
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        Ok((0..self.n_steps()?).map(|k| self.value_at(k)).collect())
    }

    /// Base latent with the target set to `value`.
    pub fn latent_at(&self, value: f64) -> LatentVector {
        let mut l = self.base.clone();
        match self.target {
            SweepTarget::Z(i) => l.z[i] = value,
            SweepTarget::Code(i) => l.code[i] = value,
        }
        l
    }

    fn check(&self, spec: &GeneratorSpec) -> Result<()> {
        if self.base.z.len() != spec.latent_dim || self.base.code.len() != spec.code_dim {
            return Err(Error::Validation("base latent does not match generator".into()));
        }
        let (index, limit) = match self.target {
            SweepTarget::Z(i) => (i, spec.latent_dim),
            SweepTarget::Code(i) => (i, spec.code_dim),
        };
        if index >= limit {
            return Err(Error::IndexOutOfRange { index, limit });
        }
        self.n_steps().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepStep {
    pub value: f64,
    pub latent: LatentVector,
    pub waveform: Vec<f64>,
    /// One probe per conv layer, index `k` holding layer `k + 1`.
    pub probes: Vec<LayerProbe>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub steps: Vec<SweepStep>,
}

pub fn run_sweep(spec: &SweepSpec, gen: &GeneratorSpec, weights: &WeightBundle) -> Result<SweepResult> {
    spec.check(gen)?;
    let steps = spec
        .values()?
        .into_par_iter()
        .map(|value| {
            let latent = spec.latent_at(value);
            let trace = forward(gen, weights, &latent)?;
            let probes = probe_trace(&trace, false);
            Ok(SweepStep {
                value,
                latent,
                waveform: trace.waveform,
                probes,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        spec: spec.clone(),
        steps,
    })
}

/// Post-ReLU feature maps of conv layer `layer` at every sweep step.
pub fn sweep_feature_maps(
    spec: &SweepSpec,
    gen: &GeneratorSpec,
    weights: &WeightBundle,
    layer: usize,
) -> Result<Vec<Tensor>> {
    spec.check(gen)?;
    gen.layer_shape(layer)?;
    spec.values()?
        .into_par_iter()
        .map(|v| {
            let trace = forward_until(gen, weights, &spec.latent_at(v), layer)?;
            Ok(trace.layers.into_iter().last().expect("layer >= 1").post)
        })
        .collect()
}

/// Mean probe value inside `window` (whole layer when `None`) for each step.
pub fn sweep_energy_profile(
    result: &SweepResult,
    layer_index: usize,
    window: Option<Range<usize>>,
) -> Result<Vec<f64>> {
    result
        .steps
        .iter()
        .map(|step| {
            let probe = layer_index
                .checked_sub(1)
                .and_then(|i| step.probes.get(i))
                .ok_or(Error::IndexOutOfRange {
                    index: layer_index,
                    limit: step.probes.len(),
                })?;
            let w = window.clone().unwrap_or(0..probe.series.len());
            if w.start >= w.end || w.end > probe.series.len() {
                return Err(Error::Validation(format!(
                    "window {w:?} outside layer of {} samples",
                    probe.series.len()
                )));
            }
            let slice = &probe.series[w];
            Ok(slice.iter().sum::<f64>() / slice.len() as f64)
        })
        .collect()
}
