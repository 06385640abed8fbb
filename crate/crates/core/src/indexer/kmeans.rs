//! Seeded Lloyd k-means with k-means++ initialization.
//!
//! All arithmetic is `f64`. Nearest-centroid ties go to the lowest centroid
//! index. A cluster left empty is repaired by moving in the point farthest from
//! its own centroid (taken from a cluster with more than one member, lowest
//! point index on ties), so every returned cluster is non-empty.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KmeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Cluster label of each point, in `0..k`.
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
}

impl Clustering {
    /// Within-cluster sum of squared distances to the centroids.
    pub fn sse(&self, points: &[f64], dim: usize) -> f64 {
        points
            .chunks_exact(dim)
            .zip(&self.assignment)
            .map(|(p, &c)| sq_dist(p, &self.centroids[c]))
            .sum()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Clusters the row-major `points` (rows of length `dim`) into `params.k` groups.
pub fn kmeans(points: &[f64], dim: usize, params: KmeansParams) -> Result<Clustering> {
    let k = params.k;
    if k < 1 {
        return Err(Error::Config("k-means needs k >= 1".into()));
    }
    if dim == 0 || !points.len().is_multiple_of(dim) {
        return Err(Error::Config(format!(
            "point buffer of length {} is not a multiple of dim {dim}",
            points.len()
        )));
    }
    let n = points.len() / dim;
    if n == 0 {
        return Err(Error::EmptyMatrix);
    }
    if k > n {
        return Err(Error::Config(format!("k = {k} exceeds the {n} points to cluster")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut centroids = init_plus_plus(points, dim, k, &mut rng);
    let mut assignment = vec![0usize; n];

    for _ in 0..params.max_iters {
        assign(points, dim, &centroids, &mut assignment);
        repair_empty(points, dim, &mut centroids, &mut assignment);
        let updated = means(points, dim, k, &assignment);
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| sq_dist(a, b))
            .fold(0.0, f64::max)
            .sqrt();
        centroids = updated;
        if shift <= params.tol {
            break;
        }
    }

    assign(points, dim, &centroids, &mut assignment);
    repair_empty(points, dim, &mut centroids, &mut assignment);
    let centroids = means(points, dim, k, &assignment);
    Ok(Clustering { assignment, centroids })
}

fn init_plus_plus(points: &[f64], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len() / dim;
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let first = rng.random_range(0..n);
    let mut centroids = vec![row(first).to_vec()];
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(row(i), &centroids[0])).collect();

    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &d) in nearest.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` just above the final partial sum.
            chosen.unwrap_or_else(|| nearest.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            rng.random_range(0..n)
        };
        let c = row(pick).to_vec();
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(row(i), &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign(points: &[f64], dim: usize, centroids: &[Vec<f64>], assignment: &mut [usize]) {
    for (p, a) in points.chunks_exact(dim).zip(assignment.iter_mut()) {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, centroid) in centroids.iter().enumerate() {
            let d = sq_dist(p, centroid);
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        *a = best;
    }
}

fn repair_empty(points: &[f64], dim: usize, centroids: &mut [Vec<f64>], assignment: &mut [usize]) {
    let k = centroids.len();
    let mut counts = vec![0usize; k];
    for &a in assignment.iter() {
        counts[a] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let mut donor = None;
        let mut far = f64::NEG_INFINITY;
        for (i, p) in points.chunks_exact(dim).enumerate() {
            let c = assignment[i];
            if counts[c] < 2 {
                continue;
            }
            let d = sq_dist(p, &centroids[c]);
            if d > far {
                far = d;
                donor = Some(i);
            }
        }
        let i = donor.expect("k <= n leaves a cluster with spare points");
        counts[assignment[i]] -= 1;
        counts[empty] += 1;
        assignment[i] = empty;
        centroids[empty] = points[i * dim..(i + 1) * dim].to_vec();
    }
}

fn means(points: &[f64], dim: usize, k: usize, assignment: &[usize]) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.chunks_exact(dim).zip(assignment) {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(p) {
            *s += x;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|x| *x /= c as f64);
        }
    }
    sums
}
