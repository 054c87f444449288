//! Seeded k-means (k-means++ seeding, Lloyd iterations) with restarts.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::parallel::{map_indices, Execution};
use crate::rng;
use crate::Mat;

pub const MAX_LLOYD_ITERATIONS: usize = 300;

/// Cluster labels in `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelAssignment {
    labels: Vec<usize>,
    k: usize,
}

impl LabelAssignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Parameter(format!("label {bad} outside 0..{k}")));
        }
        Ok(Self { labels, k })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn into_labels(self) -> Vec<usize> {
        self.labels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub assignment: LabelAssignment,
    /// Within-cluster sum of squares.
    pub wcss: f64,
    pub iterations: usize,
}

fn sq_dist(x: &Mat, i: usize, c: &Mat, j: usize) -> f64 {
    let mut acc = 0.0;
    for k in 0..x.ncols() {
        let d = x[(i, k)] - c[(j, k)];
        acc += d * d;
    }
    acc
}

fn plus_plus_seed(x: &Mat, k: usize, g: &mut ChaCha8Rng) -> Mat {
    let n = x.nrows();
    let mut centers = Mat::zeros(k, x.ncols());
    let first = g.random_range(0..n);
    centers.set_row(0, &x.row(first));
    let mut dmin: Vec<f64> = (0..n).map(|i| sq_dist(x, i, &centers, 0)).collect();
    for c in 1..k {
        let total: f64 = dmin.iter().sum();
        let pick = if total > 0.0 {
            let mut target = g.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, d) in dmin.iter().enumerate() {
                if target < *d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            idx
        } else {
            g.random_range(0..n)
        };
        centers.set_row(c, &x.row(pick));
        for (i, d) in dmin.iter_mut().enumerate() {
            *d = d.min(sq_dist(x, i, &centers, c));
        }
    }
    centers
}

/// One k-means++/Lloyd run on the rows of `x`.
pub fn kmeans_single(x: &Mat, k: usize, g: &mut ChaCha8Rng) -> KMeansFit {
    let n = x.nrows();
    let p = x.ncols();
    let mut centers = plus_plus_seed(x, k, g);
    let mut labels = vec![usize::MAX; n];
    let mut iterations = 0;
    loop {
        let mut changed = false;
        for i in 0..n {
            let mut best = (f64::INFINITY, 0);
            for c in 0..k {
                let d = sq_dist(x, i, &centers, c);
                if d < best.0 {
                    best = (d, c);
                }
            }
            if labels[i] != best.1 {
                labels[i] = best.1;
                changed = true;
            }
        }
        if !changed || iterations >= MAX_LLOYD_ITERATIONS {
            break;
        }
        iterations += 1;
        let mut sums = Mat::zeros(k, p);
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for j in 0..p {
                sums[(l, j)] += x[(i, j)];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..p {
                    centers[(c, j)] = sums[(c, j)] / counts[c] as f64;
                }
            } else {
                // Re-seed an empty cluster at the point farthest from its center.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(x, a, &centers, labels[a]).total_cmp(&sq_dist(x, b, &centers, labels[b]))
                    })
                    .unwrap_or(0);
                centers.set_row(c, &x.row(far));
            }
        }
    }
    let wcss = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(x, i, &centers, l))
        .sum();
    KMeansFit {
        assignment: LabelAssignment { labels, k },
        wcss,
        iterations,
    }
}

/// Every restart of a seeded k-means run, in restart order. Restart `i`
/// draws from its own stream, so the first `m` fits do not depend on how many
/// restarts are requested.
pub fn kmeans_restarts(x: &Mat, k: usize, restarts: usize, seed: u64, exec: Execution) -> Result<Vec<KMeansFit>> {
    if k == 0 || k > x.nrows() {
        return Err(Error::Parameter(format!(
            "cluster count {k} must lie in 1..={}",
            x.nrows()
        )));
    }
    if restarts == 0 {
        return Err(Error::Parameter("at least one k-means restart is required".into()));
    }
    Ok(map_indices(exec, restarts, |i| {
        let mut g = rng::stream(seed.wrapping_add((i as u64) << 32), rng::purpose::KMEANS);
        kmeans_single(x, k, &mut g)
    }))
}

/// Best of `restarts` runs by within-cluster sum of squares; ties go to the
/// earliest restart.
pub fn kmeans(x: &Mat, k: usize, restarts: usize, seed: u64, exec: Execution) -> Result<KMeansFit> {
    let fits = kmeans_restarts(x, k, restarts, seed, exec)?;
    let mut best = 0;
    for (i, f) in fits.iter().enumerate() {
        if f.wcss < fits[best].wcss {
            best = i;
        }
    }
    Ok(fits.into_iter().nth(best).expect("nonempty restarts"))
}
