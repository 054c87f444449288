//! Data generation, graph construction, clustering and scoring.

pub mod io;
pub mod kmeans;
pub mod laplacian;
pub mod nmi;
pub mod synthetic;

use crate::Mat;

/// Samples in rows, optional ground-truth labels in `0..C`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Mat,
    pub labels: Option<Vec<usize>>,
    pub meta: Metadata,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metadata {
    pub generator: String,
    pub seed: Option<u64>,
    pub params: Vec<(String, f64)>,
}

impl Dataset {
    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    /// Number of distinct ground-truth classes, if labels are attached.
    pub fn n_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().max().map_or(0, |m| m + 1))
    }
}
