//! Spectral clustering of feature-map activation profiles.
//!
//! Affinity `A_ij = exp(−γ‖p_i − p_j‖²)`, symmetric normalized Laplacian
//! `L = I − D^{-1/2} A D^{-1/2}`, eigenvectors of the `k` smallest
//! eigenvalues (cyclic Jacobi), row-normalized embedding, then k-means++
//! with restarts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Rng;

pub const DEFAULT_GAMMA: f64 = 1e-10;
pub const DEFAULT_K: usize = 2;
pub const KMEANS_RESTARTS: usize = 10;
const JACOBI_MAX_SWEEPS: usize = 100;
const LLOYD_MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub assignments: Vec<usize>,
    pub k: usize,
    pub gamma: f64,
    /// Row-normalized spectral embedding, `n_rows × k`.
    pub embedding: Vec<Vec<f64>>,
    /// The `k` smallest Laplacian eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
}

impl ClusterResult {
    /// Clusters as sorted member lists, ordered by first member. Two results
    /// describe the same partition exactly when these are equal.
    pub fn partition(&self) -> Vec<Vec<usize>> {
        partition_of(&self.assignments)
    }
}

pub fn partition_of(assignments: &[usize]) -> Vec<Vec<usize>> {
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, &c) in assignments.iter().enumerate() {
        groups.entry(c).or_default().push(i);
    }
    let mut parts: Vec<Vec<usize>> = groups.into_values().collect();
    parts.sort();
    parts
}

pub fn spectral_cluster(rows: &[Vec<f64>], gamma: f64, k: usize, seed: u64) -> Result<ClusterResult> {
    let n = rows.len();
    if k == 0 || n < k {
        return Err(Error::Validation(format!("need at least k = {k} > 0 rows, got {n}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Validation("gamma must be positive".into()));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension("profile rows differ in length".into()));
    }

    let mut affinity = vec![0.0; n * n];
    for i in 0..n {
        affinity[i * n + i] = 1.0;
        for j in i + 1..n {
            let d2: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            let a = (-gamma * d2).exp();
            affinity[i * n + j] = a;
            affinity[j * n + i] = a;
        }
    }
    let inv_sqrt_deg: Vec<f64> = (0..n)
        .map(|i| {
            let deg: f64 = affinity[i * n..(i + 1) * n].iter().sum();
            if deg > 0.0 { 1.0 / deg.sqrt() } else { 0.0 }
        })
        .collect();
    let mut lap = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let norm = inv_sqrt_deg[i] * affinity[i * n + j] * inv_sqrt_deg[j];
            lap[i * n + j] = if i == j { 1.0 - norm } else { -norm };
        }
    }

    let (values, vectors) = jacobi_eigen(&lap, n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let chosen = &order[..k];

    let embedding: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let row: Vec<f64> = chosen.iter().map(|&c| vectors[i * n + c]).collect();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter().map(|v| v / norm).collect()
            } else {
                row
            }
        })
        .collect();

    let assignments = kmeans(&embedding, k, KMEANS_RESTARTS, seed).assignments;
    Ok(ClusterResult {
        assignments,
        k,
        gamma,
        embedding,
        eigenvalues: chosen.iter().map(|&c| values[c]).collect(),
    })
}

/// Eigen-decomposition of a symmetric `n × n` row-major matrix by cyclic
/// Jacobi rotations. Returns eigenvalues and the eigenvector matrix with
/// eigenvector `j` in column `j`.
pub fn jacobi_eigen(matrix: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    assert_eq!(matrix.len(), n * n);
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let mut d: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let mut b = d.clone();
    let mut z = vec![0.0; n];

    for sweep in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| a[p * n + q].abs())
            .sum();
        if off == 0.0 {
            return Ok((d, v));
        }
        let thresh = if sweep < 3 { 0.2 * off / (n * n) as f64 } else { 0.0 };
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                let g = 100.0 * apq.abs();
                // once an element is negligible next to both diagonals, zero it
                if sweep > 3 && d[p].abs() + g == d[p].abs() && d[q].abs() + g == d[q].abs() {
                    a[p * n + q] = 0.0;
                    continue;
                }
                if apq.abs() <= thresh {
                    continue;
                }
                let h = d[q] - d[p];
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = 0.5 * h / apq;
                    let t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 { -t } else { t }
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                let h = t * apq;
                z[p] -= h;
                z[q] += h;
                d[p] -= h;
                d[q] += h;
                a[p * n + q] = 0.0;
                let rotate = |m: &mut [f64], i: usize, j: usize, k: usize, l: usize| {
                    let g = m[i * n + j];
                    let h = m[k * n + l];
                    m[i * n + j] = g - s * (h + g * tau);
                    m[k * n + l] = h + s * (g - h * tau);
                };
                for j in 0..p {
                    rotate(&mut a, j, p, j, q);
                }
                for j in p + 1..q {
                    rotate(&mut a, p, j, j, q);
                }
                for j in q + 1..n {
                    rotate(&mut a, p, j, q, j);
                }
                for j in 0..n {
                    rotate(&mut v, j, p, j, q);
                }
            }
        }
        for i in 0..n {
            b[i] += z[i];
            d[i] = b[i];
            z[i] = 0.0;
        }
    }
    Err(Error::NonConvergence {
        solver: "jacobi eigen-solver",
        iterations: JACOBI_MAX_SWEEPS,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's k-means with k-means++ seeding; the lowest-inertia run of
/// `restarts` wins (earliest on ties). An emptied cluster is re-seeded with
/// the point farthest from its current centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, restarts: usize, seed: u64) -> KMeans {
    let mut best: Option<KMeans> = None;
    for r in 0..restarts.max(1) {
        let mut rng = Rng::derived(seed, r as u64);
        let run = lloyd(points, plus_plus(points, k, &mut rng));
        if best.as_ref().map_or(true, |b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    best.expect("at least one restart")
}

fn plus_plus(points: &[Vec<f64>], k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.index(points.len())].clone()];
    while centroids.len() < k {
        let d: Vec<f64> = points
            .iter()
            .map(|p| centroids.iter().map(|c| dist2(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.uniform(0.0, total);
            d.iter()
                .position(|&w| {
                    target -= w;
                    target < 0.0
                })
                .unwrap_or(points.len() - 1)
        } else {
            rng.index(points.len())
        };
        centroids.push(points[pick].clone());
    }
    centroids
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> KMeans {
    let k = centroids.len();
    let dim = points[0].len();
    let nearest = |p: &[f64], cs: &[Vec<f64>]| -> (usize, f64) {
        cs.iter()
            .enumerate()
            .map(|(i, c)| (i, dist2(p, c)))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    };
    let mut assignments = vec![usize::MAX; points.len()];
    for _ in 0..LLOYD_MAX_ITERATIONS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (c, _) = nearest(p, &centroids);
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
        }
        for c in 0..k {
            if !assignments.contains(&c) {
                let far = points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i, dist2(p, &centroids[assignments[i]])))
                    .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best })
                    .0;
                assignments[far] = c;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignments) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = points
        .iter()
        .zip(&assignments)
        .map(|(p, &c)| dist2(p, &centroids[c]))
        .sum();
    KMeans {
        assignments,
        centroids,
        inertia,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Maps that spike early versus maps that spike at three points.
    fn planted(seed: u64, per_family: usize, len: usize) -> Vec<Vec<f64>> {
        let mut rng = Rng::new(seed);
        let mut rows = Vec::new();
        for fam in 0..2 {
            for _ in 0..per_family {
                let mut r: Vec<f64> = (0..len).map(|_| rng.uniform(0.0, 0.05)).collect();
                let spikes: &[f64] = if fam == 0 { &[0.05] } else { &[0.05, 0.4, 0.7] };
                for &s in spikes {
                    let c = (s * len as f64) as usize;
                    for t in c.saturating_sub(3)..(c + 4).min(len) {
                        r[t] += rng.uniform(0.8, 1.2);
                    }
                }
                rows.push(r);
            }
        }
        rows
    }

    #[test]
    fn jacobi_diagonalizes() {
        let m = [4.0, 1.0, 2.0, 1.0, 3.0, 0.5, 2.0, 0.5, 1.0];
        let (vals, vecs) = jacobi_eigen(&m, 3).unwrap();
        for j in 0..3 {
            for i in 0..3 {
                let av: f64 = (0..3).map(|k| m[i * 3 + k] * vecs[k * 3 + j]).sum();
                assert!((av - vals[j] * vecs[i * 3 + j]).abs() < 1e-12);
            }
        }
        let trace: f64 = vals.iter().sum();
        assert!((trace - 8.0).abs() < 1e-12);
    }

    #[test]
    fn separates_planted_families() {
        let rows = planted(1, 16, 256);
        let r = spectral_cluster(&rows, DEFAULT_GAMMA, 2, 0).unwrap();
        let expect: Vec<Vec<usize>> = vec![(0..16).collect(), (16..32).collect()];
        assert_eq!(r.partition(), expect);
        assert!(r.eigenvalues[0].abs() < 1e-9);
    }

    #[test]
    fn identical_rows_are_stable() {
        let rows = vec![vec![0.5; 10]; 6];
        let a = spectral_cluster(&rows, 1e-3, 2, 9).unwrap();
        let b = spectral_cluster(&rows, 1e-3, 2, 9).unwrap();
        assert_eq!(a.assignments, b.assignments);
        assert!(a.assignments.iter().all(|&c| c < 2));
    }

    #[test]
    fn too_few_rows() {
        assert!(spectral_cluster(&[vec![1.0]], 1.0, 2, 0).is_err());
    }

    #[test]
    fn kmeans_simple() {
        let pts = vec![vec![0.0], vec![0.1], vec![10.0], vec![10.2]];
        let r = kmeans(&pts, 2, 3, 4);
        assert_eq!(partition_of(&r.assignments), vec![vec![0, 1], vec![2, 3]]);
    }
}
