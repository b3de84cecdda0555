//! Lloyd k-means with seeded k-means++ initialization.
//!
//! Internal arithmetic runs in f64 regardless of the stored scalar so the
//! per-iteration distortion is monotone to rounding noise; final centroids
//! are rounded to the scalar type once. The assignment step parallelizes
//! across points while centroid accumulation always reduces in point order,
//! so results are bit-identical to a single-threaded run at any pool size.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::scalar::Scalar;

/// A trained coarse or sub-space quantizer.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel<F> {
    pub k: usize,
    pub dim: usize,
    /// `k x dim`, row-major.
    pub centroids: Vec<F>,
    /// Final mean squared assignment distance.
    pub distortion: f64,
    /// Mean squared assignment distance observed at each Lloyd iteration.
    pub history: Vec<f64>,
}

impl<F: Scalar> KMeansModel<F> {
    pub fn centroid(&self, c: usize) -> &[F] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }

    /// Nearest centroid by squared L2 distance; ties break to the lowest index.
    pub fn assign(&self, x: &[F]) -> usize {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for c in 0..self.k {
            let d = crate::scalar::l2_sq_wide(x, self.centroid(c));
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        best
    }
}

fn dist_sq_to(point: &[impl Scalar], centroid: &[f64]) -> f64 {
    let mut acc = 0.0f64;
    for (x, c) in point.iter().zip(centroid) {
        let d = x.as_f64() - c;
        acc += d * d;
    }
    acc
}

/// k-means++ seeding: the first centroid is a uniform pick, each further one
/// is drawn with probability proportional to the squared distance from the
/// nearest already-chosen centroid.
fn seed_centroids<F: Scalar>(
    data: &[F],
    dim: usize,
    k: usize,
    rng: &mut SplitMix64,
) -> Vec<Vec<f64>> {
    let points = data.len() / dim;
    let row = |i: usize| &data[i * dim..(i + 1) * dim];
    let as_f64 = |i: usize| row(i).iter().map(|v| v.as_f64()).collect::<Vec<f64>>();

    let first = rng.below(points as u64) as usize;
    let mut centroids = vec![as_f64(first)];
    let mut dist2: Vec<f64> = (0..points)
        .map(|i| dist_sq_to(row(i), &centroids[0]))
        .collect();

    while centroids.len() < k {
        let total: f64 = dist2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.next_f64() * total;
            let mut acc = 0.0f64;
            let mut chosen = None;
            for (i, &w) in dist2.iter().enumerate() {
                acc += w;
                if acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // Rounding can leave the walk short of the final accumulator;
            // fall back to the last point carrying any weight.
            chosen.unwrap_or_else(|| {
                dist2
                    .iter()
                    .rposition(|&w| w > 0.0)
                    .expect("total > 0 implies a positive weight")
            })
        } else {
            // Every point coincides with a centroid already.
            rng.below(points as u64) as usize
        };
        let c = as_f64(pick);
        for (i, slot) in dist2.iter_mut().enumerate() {
            let d = dist_sq_to(row(i), &c);
            if d < *slot {
                *slot = d;
            }
        }
        centroids.push(c);
    }
    centroids
}

/// Assign every point to its nearest centroid; returns (assignment, squared
/// distance) per point. Ties break to the lowest centroid index.
fn assign_all<F: Scalar>(data: &[F], dim: usize, centroids: &[Vec<f64>]) -> Vec<(u32, f64)> {
    data.par_chunks(dim)
        .map(|point| {
            let mut best = 0u32;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = dist_sq_to(point, centroid);
                if d < best_d {
                    best_d = d;
                    best = c as u32;
                }
            }
            (best, best_d)
        })
        .collect()
}

/// Train k-means on `points x dim` row-major data.
pub fn kmeans_train<F: Scalar>(
    data: &[F],
    dim: usize,
    k: usize,
    max_iters: usize,
    seed: u64,
) -> Result<KMeansModel<F>> {
    assert!(dim > 0 && data.len().is_multiple_of(dim));
    assert!(k >= 1 && max_iters >= 1);
    let points = data.len() / dim;
    if points < k {
        return Err(Error::TooFewPoints {
            needed: k,
            have: points,
        });
    }

    let mut rng = SplitMix64::new(seed);
    let mut centroids = seed_centroids(data, dim, k, &mut rng);
    let mut assignments: Vec<u32> = vec![u32::MAX; points];
    let mut history = Vec::new();
    let mut converged = false;

    for _ in 0..max_iters {
        let assigned = assign_all(data, dim, &centroids);
        let mut dists: Vec<f64> = Vec::with_capacity(points);
        let mut new_assignments: Vec<u32> = Vec::with_capacity(points);
        for (a, d) in &assigned {
            new_assignments.push(*a);
            dists.push(*d);
        }
        history.push(dists.iter().sum::<f64>() / points as f64);
        if new_assignments == assignments {
            converged = true;
            break;
        }
        assignments = new_assignments;

        // Update step: accumulate sums strictly in point order.
        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0u64; k];
        for (i, point) in data.chunks(dim).enumerate() {
            let c = assignments[i] as usize;
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(point) {
                *s += x.as_f64();
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for (dst, s) in centroids[c].iter_mut().zip(&sums[c]) {
                    *dst = s / counts[c] as f64;
                }
            }
        }
        // Empty-cluster repair: steal the point farthest from its centroid.
        for c in 0..k {
            if counts[c] == 0 {
                let mut far = 0usize;
                let mut far_d = -1.0f64;
                for (i, &d) in dists.iter().enumerate() {
                    if d > far_d {
                        far_d = d;
                        far = i;
                    }
                }
                if far_d > 0.0 {
                    let point = &data[far * dim..(far + 1) * dim];
                    for (dst, x) in centroids[c].iter_mut().zip(point) {
                        *dst = x.as_f64();
                    }
                    dists[far] = 0.0; // not available to further repairs
                }
            }
        }
    }

    // When the iteration budget ran out the centroids moved after the last
    // recorded distortion; report the distortion of the final state.
    let distortion = if converged {
        *history.last().unwrap()
    } else {
        let assigned = assign_all(data, dim, &centroids);
        assigned.iter().map(|(_, d)| d).sum::<f64>() / points as f64
    };

    let centroids_flat: Vec<F> = centroids
        .iter()
        .flat_map(|c| c.iter().map(|&v| F::from_f64_lossy(v)))
        .collect();
    Ok(KMeansModel {
        k,
        dim,
        centroids: centroids_flat,
        distortion,
        history,
    })
}
