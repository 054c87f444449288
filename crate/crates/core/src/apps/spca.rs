//! Sparse PCA: `min_{U ∈ St(N, r)} −‖AU‖²_F + u‖vec(U)‖₁` with `c` the identity.

use crate::error::{Error, Result};
use crate::manifold::{random_point_with, StiefelPoint};
use crate::problem::{CompositeProblem, Constants};
use crate::rng;
use crate::Mat;

#[derive(Debug, Clone)]
pub struct SpcaProblem {
    a: Mat,
    weight: f64,
    r: usize,
    norm_sq: f64,
}

impl SpcaProblem {
    /// `a` is the `N₁ × N` data matrix; the variable is `N × r`.
    pub fn new(a: Mat, weight: f64, r: usize) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::Parameter(format!("weight u must be nonnegative, got {weight}")));
        }
        if a.nrows() == 0 || r == 0 || r > a.ncols() {
            return Err(Error::Dimension(format!(
                "need a nonempty data matrix and 0 < r <= N (got {}x{}, r = {r})",
                a.nrows(),
                a.ncols()
            )));
        }
        let smax = a
            .singular_values()
            .iter()
            .fold(0.0f64, |acc, s| acc.max(*s));
        if !(smax > 0.0) {
            return Err(Error::Parameter("data matrix is zero".into()));
        }
        Ok(Self {
            a,
            weight,
            r,
            norm_sq: smax * smax,
        })
    }

    pub fn data(&self) -> &Mat {
        &self.a
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// `‖A‖₂²`.
    pub fn spectral_norm_sq(&self) -> f64 {
        self.norm_sq
    }

    /// Default initial step `1 / (2‖A‖₂²)`.
    pub fn initial_step(&self) -> f64 {
        1.0 / (2.0 * self.norm_sq)
    }

    /// `(−‖AU‖², −2AᵀAU)`.
    pub fn objective_and_grad(&self, u: &Mat) -> (f64, Mat) {
        let au = &self.a * u;
        (-au.norm_squared(), self.a.tr_mul(&au) * -2.0)
    }

    /// Orthonormal factor of a seeded standard Gaussian `N × r` matrix.
    pub fn initialize(&self, seed: u64) -> Result<StiefelPoint> {
        random_point_with(self.a.ncols(), self.r, seed, rng::purpose::SPCA_INIT)
    }
}

impl CompositeProblem for SpcaProblem {
    fn point_shape(&self) -> (usize, usize) {
        (self.a.ncols(), self.r)
    }

    fn f(&self, z: &Mat) -> f64 {
        -(&self.a * z).norm_squared()
    }

    fn grad_f(&self, z: &Mat) -> Mat {
        self.objective_and_grad(z).1
    }

    fn c(&self, z: &Mat) -> Mat {
        z.clone()
    }

    fn jac_c_apply(&self, _z: &Mat, v: &Mat) -> Mat {
        v.clone()
    }

    fn jac_c_adjoint_apply(&self, _z: &Mat, w: &Mat) -> Mat {
        w.clone()
    }

    fn weight(&self) -> f64 {
        self.weight
    }

    fn constants(&self) -> Constants {
        Constants {
            lip_f: 2.0 * self.norm_sq,
            lip_h: self.weight * ((self.a.ncols() * self.r) as f64).sqrt(),
            lip_c: 1.0,
        }
    }

    fn is_identity_map(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::gen_spca_matrix;
    use crate::manifold::random_point;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_data_gives_minus_one() {
        let p = SpcaProblem::new(Mat::identity(4, 4), 0.1, 1).unwrap();
        for seed in 0..5 {
            let u = random_point(4, 1, seed).unwrap();
            assert_abs_diff_eq!(p.objective_and_grad(u.matrix()).0, -1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn initial_step_uses_top_singular_value() {
        let a = gen_spca_matrix(30, 12, 3);
        let p = SpcaProblem::new(a.clone(), 0.1, 2).unwrap();
        // Independent route: top eigenvalue of AᵀA by symmetric eigensolver.
        let top = a
            .tr_mul(&a)
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::MIN, |acc, v| acc.max(*v));
        let expected = 1.0 / (2.0 * top);
        assert!((p.initial_step() - expected).abs() <= 1e-10 * expected);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let a = gen_spca_matrix(15, 8, 4);
        let p = SpcaProblem::new(a, 0.2, 3).unwrap();
        let u = random_point(8, 3, 5).unwrap().into_matrix();
        let g = p.grad_f(&u);
        let h = 1e-5;
        for k in 0..24 {
            let mut e = Mat::zeros(8, 3);
            e[k] = h;
            let fd = (p.f(&(&u + &e)) - p.f(&(&u - &e))) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-6 * (1.0 + g[k].abs()));
        }
    }

    #[test]
    fn initialization_is_seeded() {
        let p = SpcaProblem::new(gen_spca_matrix(10, 6, 1), 0.1, 2).unwrap();
        assert_eq!(p.initialize(9).unwrap(), p.initialize(9).unwrap());
        assert_ne!(p.initialize(9).unwrap(), p.initialize(10).unwrap());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(SpcaProblem::new(Mat::identity(3, 3), -1.0, 1).is_err());
        assert!(SpcaProblem::new(Mat::identity(3, 3), 0.1, 4).is_err());
        assert!(SpcaProblem::new(Mat::zeros(3, 3), 0.1, 1).is_err());
    }
}
