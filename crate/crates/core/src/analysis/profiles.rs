use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{forward_until, sample_latent, GeneratorSpec, WeightBundle};
use crate::tensor::{derive_seed, Rng, Tensor};

/// Outputs per chunk when summing in parallel. Chunk sums are combined in
/// chunk order so the total does not depend on the thread count.
const CHUNK: usize = 8;

/// Latent settings shared by every output of one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub label: String,
    pub overrides: BTreeMap<usize, f64>,
    pub code: Option<Vec<f64>>,
}

impl Condition {
    /// Parse `z11=-15` style settings, comma separated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut overrides = BTreeMap::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let bad = || Error::Validation(format!("bad condition `{part}` (expected z<N>=<value>)"));
            let (lhs, rhs) = part.split_once('=').ok_or_else(bad)?;
            let idx: usize = lhs.trim().strip_prefix('z').ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let value: f64 = rhs.trim().parse().map_err(|_| bad())?;
            overrides.insert(idx, value);
        }
        Ok(Self {
            label: text.trim().to_string(),
            overrides,
            code: None,
        })
    }
}

/// Per-feature-map mean activation over many outputs of one condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationProfile {
    pub layer_index: usize,
    pub label: String,
    pub n_outputs: usize,
    /// `n_maps × layer samples`.
    pub maps: Tensor,
}

fn add_into(acc: &mut [f64], t: &Tensor) {
    for (a, v) in acc.iter_mut().zip(t.data()) {
        *a += v;
    }
}

/// Elementwise mean of a set of same-shaped layer tensors.
pub fn mean_maps(maps: &[Tensor]) -> Result<Tensor> {
    let first = maps
        .first()
        .ok_or_else(|| Error::Validation("no outputs to average".into()))?;
    let (c, l) = first.shape();
    if maps.iter().any(|m| m.shape() != (c, l)) {
        return Err(Error::Dimension("layer tensors differ in shape".into()));
    }
    let sums: Vec<Vec<f64>> = maps
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; c * l];
            for m in chunk {
                add_into(&mut acc, m);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; c * l];
    for s in sums {
        for (t, v) in total.iter_mut().zip(s) {
            *t += v;
        }
    }
    let n = maps.len() as f64;
    total.iter_mut().for_each(|v| *v /= n);
    Tensor::new(c, l, total)
}

/// Generate `n_per_condition` outputs per condition and average the
/// post-ReLU feature maps of conv layer `layer_index`.
///
/// Output `i` of condition `c` draws its latent from
/// `Rng::derived(derive_seed(seed, c), i)`, so increasing `n_per_condition`
/// only appends outputs.
pub fn build_profiles(
    spec: &GeneratorSpec,
    weights: &WeightBundle,
    n_per_condition: usize,
    conditions: &[Condition],
    layer_index: usize,
    seed: u64,
) -> Result<Vec<ActivationProfile>> {
    if n_per_condition == 0 {
        return Err(Error::Validation("need at least one output per condition".into()));
    }
    let (c, l) = spec.layer_shape(layer_index)?;
    conditions
        .iter()
        .enumerate()
        .map(|(ci, cond)| {
            let cond_seed = derive_seed(seed, ci as u64);
            let chunks: Vec<Vec<f64>> = (0..n_per_condition)
                .collect::<Vec<_>>()
                .par_chunks(CHUNK)
                .map(|idx| {
                    let mut acc = vec![0.0; c * l];
                    for &i in idx {
                        let mut rng = Rng::derived(cond_seed, i as u64);
                        let latent = sample_latent(&mut rng, spec, &cond.overrides, cond.code.as_deref())?;
                        let trace = forward_until(spec, weights, &latent, layer_index)?;
                        add_into(&mut acc, &trace.layers[layer_index - 1].post);
                    }
                    Ok(acc)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut total = vec![0.0; c * l];
            for chunk in &chunks {
                for (t, v) in total.iter_mut().zip(chunk) {
                    *t += v;
                }
            }
            let n = n_per_condition as f64;
            total.iter_mut().for_each(|v| *v /= n);
            Ok(ActivationProfile {
                layer_index,
                label: cond.label.clone(),
                n_outputs: n_per_condition,
                maps: Tensor::new(c, l, total)?,
            })
        })
        .collect()
}
