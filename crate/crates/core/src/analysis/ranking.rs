//! Ranking latent variables by how strongly they predict a binary property
//! of the generated output.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::pearson;
use crate::error::{Error, Result};
use crate::tensor::Rng;

pub const RIDGE: f64 = 1e-3;
pub const MAX_ITERATIONS: usize = 50;
pub const TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankMethod {
    /// Ridge logistic regression fit by IRLS.
    Logistic,
    /// IRLS failed to converge; ranked by point-biserial correlation.
    PointBiserial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedLatent {
    pub index: usize,
    pub coefficient: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentRanking {
    pub method: RankMethod,
    pub iterations: usize,
    pub entries: Vec<RankedLatent>,
}

impl LatentRanking {
    pub fn top(&self) -> Option<usize> {
        self.entries.first().map(|e| e.index)
    }
}

/// Fitted ridge-logistic coefficients (intercept first) or `None` when IRLS
/// diverges or runs out of iterations.
pub fn fit_logistic(latents: &[Vec<f64>], presence: &[bool]) -> Result<(Option<Vec<f64>>, usize)> {
    let (n, p) = check_inputs(latents, presence)?;
    let x = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { latents[i][j - 1] });
    let y = DVector::from_iterator(n, presence.iter().map(|&b| if b { 1.0 } else { 0.0 }));
    let mut penalty = DMatrix::identity(p + 1, p + 1) * RIDGE;
    penalty[(0, 0)] = 0.0;

    let mut beta = DVector::<f64>::zeros(p + 1);
    for iter in 1..=MAX_ITERATIONS {
        let eta = &x * &beta;
        let mu = eta.map(|e| 1.0 / (1.0 + (-e).exp()));
        let w = mu.map(|m| (m * (1.0 - m)).max(1e-12));
        let grad = x.tr_mul(&(&y - &mu)) - &penalty * &beta;
        let mut xw = x.clone();
        for (i, mut row) in xw.row_iter_mut().enumerate() {
            row *= w[i];
        }
        let hess = x.tr_mul(&xw) + &penalty;
        let Some(chol) = hess.cholesky() else {
            return Ok((None, iter));
        };
        let delta = chol.solve(&grad);
        beta += &delta;
        if beta.iter().any(|b| !b.is_finite()) {
            return Ok((None, iter));
        }
        let scale = beta.amax().max(1.0);
        if delta.amax() <= TOLERANCE * scale {
            return Ok((Some(beta.iter().copied().collect()), iter));
        }
    }
    Ok((None, MAX_ITERATIONS))
}

/// Rank latent dimensions by |coefficient| of a ridge-logistic fit of
/// `presence` on `latents` (rows are outputs). Ties go to the lower index.
/// Falls back to point-biserial correlation when IRLS does not converge.
pub fn rank_latents(latents: &[Vec<f64>], presence: &[bool]) -> Result<LatentRanking> {
    let (_, p) = check_inputs(latents, presence)?;
    let (fit, iterations) = fit_logistic(latents, presence)?;
    let (method, coefs) = match fit {
        Some(beta) => (RankMethod::Logistic, beta[1..].to_vec()),
        None => {
            let y: Vec<f64> = presence.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            let coefs = (0..p)
                .map(|j| {
                    let col: Vec<f64> = latents.iter().map(|r| r[j]).collect();
                    pearson(&col, &y).unwrap_or(0.0)
                })
                .collect();
            (RankMethod::PointBiserial, coefs)
        }
    };
    Ok(LatentRanking {
        method,
        iterations,
        entries: rank_by_magnitude(&coefs),
    })
}

/// Order coefficients by decreasing magnitude, lower index first on ties.
pub fn rank_by_magnitude(coefs: &[f64]) -> Vec<RankedLatent> {
    let mut entries: Vec<RankedLatent> = coefs
        .iter()
        .enumerate()
        .map(|(index, &coefficient)| RankedLatent {
            index,
            coefficient,
            score: coefficient.abs(),
        })
        .collect();
    entries.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
    entries
}

/// Largest top score seen across `n_perm` label permutations: a chance
/// level for the scores of [`rank_latents`].
pub fn permutation_threshold(latents: &[Vec<f64>], presence: &[bool], n_perm: usize, seed: u64) -> Result<f64> {
    check_inputs(latents, presence)?;
    let scores = (0..n_perm as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = Rng::derived(seed, k);
            let mut perm = presence.to_vec();
            for i in (1..perm.len()).rev() {
                perm.swap(i, rng.index(i + 1));
            }
            let r = rank_latents(latents, &perm)?;
            Ok(r.entries.first().map_or(0.0, |e| e.score))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(scores.into_iter().fold(0.0, f64::max))
}

fn check_inputs(latents: &[Vec<f64>], presence: &[bool]) -> Result<(usize, usize)> {
    let n = latents.len();
    if n != presence.len() {
        return Err(Error::Dimension(format!(
            "{n} latent rows but {} presence labels",
            presence.len()
        )));
    }
    if n < 50 {
        return Err(Error::Validation(format!("need at least 50 outputs, got {n}")));
    }
    let p = latents[0].len();
    if p == 0 || latents.iter().any(|r| r.len() != p) {
        return Err(Error::Dimension("latent rows must share a positive width".into()));
    }
    if latents.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Validation("latents contain non-finite values".into()));
    }
    let ones = presence.iter().filter(|b| **b).count();
    if ones == 0 || ones == n {
        return Err(Error::Validation("presence labels contain a single class".into()));
    }
    Ok((n, p))
}
