#![allow(dead_code)]

use imanpl::apg::{apg_solve, ApgOptions, ApgOutput, ApgStop};
use imanpl::apps::spca::SpcaProblem;
use imanpl::apps::ssc::SscProblem;
use imanpl::data::laplacian::{similarity_laplacian, DEFAULT_BANDWIDTH_FACTORS};
use imanpl::data::synthetic::gen_spca_matrix;
use imanpl::manifold::gaussian_matrix;
use imanpl::parallel::Execution;
use imanpl::problem::{CompositeProblem, SubproblemInstance};
use imanpl::Mat;

/// `n` points in `r` loose groups, turned into a normalized Laplacian.
pub fn clustered_ssc(n: usize, r: usize, u: f64, seed: u64) -> SscProblem {
    let noise = gaussian_matrix(n, 3, seed, 77);
    let x = Mat::from_fn(n, 3, |i, j| {
        let group = (i % r) as f64;
        let center = if j == 0 { 3.0 * group } else { 0.0 };
        center + 0.5 * noise[(i, j)]
    });
    let s = similarity_laplacian(&x, &DEFAULT_BANDWIDTH_FACTORS, Execution::Sequential).unwrap();
    SscProblem::new(s, u, r).unwrap()
}

pub fn small_spca(n1: usize, n: usize, r: usize, u: f64, seed: u64) -> SpcaProblem {
    SpcaProblem::new(gen_spca_matrix(n1, n, seed), u, r).unwrap()
}

/// APG run until the gap is below `tol`.
pub fn reference<P: CompositeProblem + ?Sized>(sub: &SubproblemInstance<'_, P>, tol: f64) -> ApgOutput {
    apg_solve(
        sub,
        ApgStop::AbsoluteGap(tol),
        None,
        &ApgOptions {
            max_iter: 2_000_000,
            ..Default::default()
        },
    )
    .unwrap()
}

/// Random tangent vector at `z` with Frobenius norm `scale`.
pub fn random_tangent<P: CompositeProblem + ?Sized>(sub: &SubproblemInstance<'_, P>, seed: u64, scale: f64) -> Mat {
    let (n, r) = sub.base().matrix().shape();
    let v = sub.project(&gaussian_matrix(n, r, seed, 91));
    let norm = v.norm();
    v * (scale / norm)
}
