//! Similarity graphs and the normalized Laplacian `S = I − D^{-1/2} Ŝ D^{-1/2}`.

use crate::error::{Error, Result};
use crate::parallel::{map_indices, Execution};
use crate::Mat;

/// Bandwidths, as multiples of the median pairwise distance, averaged by
/// [`gaussian_similarity`].
pub const DEFAULT_BANDWIDTH_FACTORS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

/// Squared Euclidean distances between the rows of `x`.
pub fn pairwise_sq_distances(x: &Mat, exec: Execution) -> Mat {
    let n = x.nrows();
    let rows = map_indices(exec, n, |i| {
        (0..n)
            .map(|j| {
                let mut acc = 0.0;
                for k in 0..x.ncols() {
                    let d = x[(i, k)] - x[(j, k)];
                    acc += d * d;
                }
                acc
            })
            .collect::<Vec<f64>>()
    });
    Mat::from_fn(n, n, |i, j| rows[i][j])
}

/// Median of the off-diagonal pairwise distances (not squared).
pub fn median_distance(sq: &Mat) -> f64 {
    let n = sq.nrows();
    let mut d: Vec<f64> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for j in 0..n {
        for i in 0..j {
            d.push(sq[(i, j)].sqrt());
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    }
}

/// Mean of Gaussian kernels `exp(−‖xᵢ − xⱼ‖² / 2σ²)` over
/// `σ = m_d · factor`, with a zero diagonal.
pub fn gaussian_similarity(x: &Mat, factors: &[f64], exec: Execution) -> Result<Mat> {
    if factors.is_empty() || factors.iter().any(|f| !(*f > 0.0)) {
        return Err(Error::Parameter("bandwidth factors must be nonempty and positive".into()));
    }
    let sq = pairwise_sq_distances(x, exec);
    let md = median_distance(&sq);
    if !(md > 0.0) {
        return Err(Error::Parameter("all samples coincide; median distance is zero".into()));
    }
    let inv: Vec<f64> = factors
        .iter()
        .map(|f| 1.0 / (2.0 * (md * f).powi(2)))
        .collect();
    let k = factors.len() as f64;
    let n = x.nrows();
    let mut w = sq.map(|d2| inv.iter().map(|c| (-d2 * c).exp()).sum::<f64>() / k);
    for i in 0..n {
        w[(i, i)] = 0.0;
    }
    Ok(w)
}

/// `S = I − D^{-1/2} Ŝ D^{-1/2}` with `D` the row sums of `Ŝ`.
pub fn normalized_laplacian(w: &Mat) -> Result<Mat> {
    let n = w.nrows();
    if w.ncols() != n {
        return Err(Error::Dimension(format!("similarity must be square, got {}x{}", n, w.ncols())));
    }
    if w.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Parameter("similarity entries must be nonnegative".into()));
    }
    let scale = w.norm().max(1.0);
    if (w - w.transpose()).norm() > 1e-12 * scale {
        return Err(Error::Parameter("similarity must be symmetric".into()));
    }
    let mut inv_sqrt = Vec::with_capacity(n);
    for (i, row) in w.row_iter().enumerate() {
        let d = row.sum();
        if !(d > 0.0) {
            return Err(Error::DegenerateNode(i));
        }
        inv_sqrt.push(1.0 / d.sqrt());
    }
    let mut s = Mat::from_fn(n, n, |i, j| {
        let a = 0.5 * (w[(i, j)] + w[(j, i)]);
        -inv_sqrt[i] * a * inv_sqrt[j]
    });
    for i in 0..n {
        s[(i, i)] += 1.0;
    }
    Ok(s)
}

/// Gaussian similarity followed by the normalized Laplacian.
pub fn similarity_laplacian(x: &Mat, factors: &[f64], exec: Execution) -> Result<Mat> {
    normalized_laplacian(&gaussian_similarity(x, factors, exec)?)
}
