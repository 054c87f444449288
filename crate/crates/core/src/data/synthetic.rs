//! Synthetic benchmark data.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Dataset, Metadata};
use crate::rng;
use crate::Mat;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleParams {
    pub clusters: usize,
    pub per_cluster: usize,
    pub radius: f64,
    /// Latent noise is `noise_factor · radius`.
    pub noise_factor: f64,
    pub ambient_dim: usize,
    /// Ambient noise is `ambient_noise_factor · radius`.
    pub ambient_noise_factor: f64,
}

impl Default for CircleParams {
    fn default() -> Self {
        Self {
            clusters: 5,
            per_cluster: 100,
            radius: 1.0,
            noise_factor: 0.3,
            ambient_dim: 10,
            ambient_noise_factor: 0.3,
        }
    }
}

/// Cluster centers `(R cos(2πℓ/C), R sin(2πℓ/C))`, `ℓ = 1..=C`.
pub fn circle_centers(p: &CircleParams) -> Vec<[f64; 2]> {
    (1..=p.clusters)
        .map(|l| {
            let a = 2.0 * PI * l as f64 / p.clusters as f64;
            [p.radius * a.cos(), p.radius * a.sin()]
        })
        .collect()
}

/// Latent 2-D points and their labels, cluster by cluster.
pub fn circle_latent(p: &CircleParams, seed: u64) -> (Mat, Vec<usize>) {
    let mut g = rng::stream(seed, rng::purpose::CIRCLE_DATA);
    let sigma = p.noise_factor * p.radius;
    let n = p.clusters * p.per_cluster;
    let centers = circle_centers(p);
    let mut latent = Mat::zeros(n, 2);
    let mut labels = Vec::with_capacity(n);
    for (l, c) in centers.iter().enumerate() {
        for i in 0..p.per_cluster {
            let row = l * p.per_cluster + i;
            for (k, ck) in c.iter().enumerate() {
                let e: f64 = StandardNormal.sample(&mut g);
                latent[(row, k)] = ck + sigma * e;
            }
            labels.push(l);
        }
    }
    (latent, labels)
}

/// Circle with Gaussian noise, embedded by a Gaussian projection.
pub fn gen_circle_with(p: &CircleParams, seed: u64) -> Dataset {
    let (latent, labels) = circle_latent(p, seed);
    let mut g = rng::stream(seed, rng::purpose::CIRCLE_DATA + 100);
    let proj = Mat::from_fn(p.ambient_dim, 2, |_, _| StandardNormal.sample(&mut g));
    let noise_scale = p.ambient_noise_factor * p.radius;
    let mut x = &latent * proj.transpose();
    for v in x.iter_mut() {
        let e: f64 = StandardNormal.sample(&mut g);
        *v += noise_scale * e;
    }
    Dataset {
        x,
        labels: Some(labels),
        meta: Metadata {
            generator: "synthetic-circle".into(),
            seed: Some(seed),
            params: vec![
                ("clusters".into(), p.clusters as f64),
                ("per_cluster".into(), p.per_cluster as f64),
                ("radius".into(), p.radius),
                ("noise_factor".into(), p.noise_factor),
                ("ambient_dim".into(), p.ambient_dim as f64),
            ],
        },
    }
}

/// 500 × 10 circle dataset with five clusters.
pub fn gen_circle(seed: u64) -> Dataset {
    gen_circle_with(&CircleParams::default(), seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    pub clusters: usize,
    pub latent_dim: usize,
    pub ambient_dim: usize,
    pub samples: usize,
    /// Per-cluster standard deviations of the rows of `B'`.
    pub row_scales: Vec<f64>,
    /// Noise standard deviation is `noise_factor · max_ℓ ‖B'_ℓ‖`.
    pub noise_factor: f64,
}

impl Default for MixtureParams {
    fn default() -> Self {
        Self {
            clusters: 5,
            latent_dim: 5,
            ambient_dim: 10,
            samples: 500,
            row_scales: vec![0.6, 0.8, 1.0, 1.2, 1.4],
            noise_factor: 0.2,
        }
    }
}

/// Low-dimensional linear mixture `X = ZB + W` with `B = [B', 0]`.
/// Also returns `B'`.
pub fn gen_mixture_with(p: &MixtureParams, seed: u64) -> (Dataset, Mat) {
    assert_eq!(p.row_scales.len(), p.clusters, "one row scale per cluster");
    assert!(p.latent_dim <= p.ambient_dim);
    let mut g = rng::stream(seed, rng::purpose::MIXTURE_DATA);
    let basis = Mat::from_fn(p.clusters, p.latent_dim, |l, _| {
        let e: f64 = StandardNormal.sample(&mut g);
        p.row_scales[l] * e
    });
    let labels: Vec<usize> = (0..p.samples).map(|_| g.random_range(0..p.clusters)).collect();
    let max_norm = (0..p.clusters)
        .map(|l| basis.row(l).norm())
        .fold(0.0f64, f64::max);
    let sigma = p.noise_factor * max_norm;
    let mut x = Mat::zeros(p.samples, p.ambient_dim);
    for (i, &l) in labels.iter().enumerate() {
        for k in 0..p.ambient_dim {
            let signal = if k < p.latent_dim { basis[(l, k)] } else { 0.0 };
            let e: f64 = StandardNormal.sample(&mut g);
            x[(i, k)] = signal + sigma * e;
        }
    }
    let ds = Dataset {
        x,
        labels: Some(labels),
        meta: Metadata {
            generator: "synthetic-mixture".into(),
            seed: Some(seed),
            params: vec![
                ("clusters".into(), p.clusters as f64),
                ("latent_dim".into(), p.latent_dim as f64),
                ("ambient_dim".into(), p.ambient_dim as f64),
                ("noise_sigma".into(), sigma),
            ],
        },
    };
    (ds, basis)
}

/// 500 × 10 mixture dataset with five clusters.
pub fn gen_mixture(seed: u64) -> Dataset {
    gen_mixture_with(&MixtureParams::default(), seed).0
}

/// Gaussian `N₁ × N` matrix with centered, unit-norm columns.
pub fn gen_spca_matrix(n1: usize, n: usize, seed: u64) -> Mat {
    let mut g = rng::stream(seed, rng::purpose::SPCA_DATA);
    let mut a = Mat::from_fn(n1, n, |_, _| StandardNormal.sample(&mut g));
    for mut col in a.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    a
}
