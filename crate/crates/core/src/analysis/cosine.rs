use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapDistance {
    pub index: usize,
    pub distance: f64,
}

/// `1 − cos(a, b)`; defined as 1 when either vector has zero norm.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        1.0
    } else {
        1.0 - dot / (na * nb)
    }
}

/// Feature maps that change least across a sweep: for every map, the mean
/// cosine distance between its series at the `extreme` step and at each of
/// `steps`; the `top_n` smallest are returned, lower index first on ties.
pub fn nearest_maps_by_cosine(extreme: &Tensor, steps: &[Tensor], top_n: usize) -> Result<Vec<MapDistance>> {
    if steps.is_empty() {
        return Err(Error::Validation("no sweep steps to compare against".into()));
    }
    if let Some(s) = steps.iter().find(|s| s.shape() != extreme.shape()) {
        return Err(Error::Dimension(format!(
            "step shape {:?} differs from extreme {:?}",
            s.shape(),
            extreme.shape()
        )));
    }
    let mut dists: Vec<MapDistance> = (0..extreme.channels())
        .map(|c| {
            let base = extreme.row(c);
            let total: f64 = steps.iter().map(|s| cosine_distance(base, s.row(c))).sum();
            MapDistance {
                index: c,
                distance: total / steps.len() as f64,
            }
        })
        .collect();
    dists.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.index.cmp(&b.index)));
    dists.truncate(top_n);
    Ok(dists)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Rng;

    #[test]
    fn unchanged_map_ranks_first() {
        let extreme = Tensor::from_rows(&[vec![1.0, 0.0, 2.0], vec![0.0, 3.0, 1.0]]).unwrap();
        let step = Tensor::from_rows(&[vec![0.0, 5.0, 0.0], vec![0.0, 3.0, 1.0]]).unwrap();
        let r = nearest_maps_by_cosine(&extreme, &[step.clone(), step], 2).unwrap();
        assert_eq!(r[0].index, 1);
        assert!(r[0].distance.abs() < 1e-12);
        assert!((r[1].distance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_norm_is_maximal() {
        assert_eq!(cosine_distance(&[0.0, 0.0], &[1.0, 2.0]), 1.0);
    }

    #[test]
    fn matches_double_loop() {
        let mut rng = Rng::new(12);
        let mut rand_t = || Tensor::new(4, 6, (0..24).map(|_| rng.uniform(0.0, 1.0)).collect()).unwrap();
        let extreme = rand_t();
        let steps: Vec<Tensor> = (0..5).map(|_| rand_t()).collect();
        let got = nearest_maps_by_cosine(&extreme, &steps, 4).unwrap();
        for m in &got {
            let mut acc = 0.0;
            for s in &steps {
                let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
                for t in 0..6 {
                    dot += extreme.get(m.index, t) * s.get(m.index, t);
                    na += extreme.get(m.index, t).powi(2);
                    nb += s.get(m.index, t).powi(2);
                }
                acc += 1.0 - dot / (na.sqrt() * nb.sqrt());
            }
            assert!((m.distance - acc / 5.0).abs() < 1e-12);
        }
        assert!(got.windows(2).all(|w| w[0].distance <= w[1].distance));
    }

    #[test]
    fn shape_mismatch() {
        assert!(nearest_maps_by_cosine(&Tensor::zeros(2, 3), &[Tensor::zeros(2, 4)], 1).is_err());
    }
}
