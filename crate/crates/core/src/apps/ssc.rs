//! Sparse spectral clustering:
//!
//! ```text
//! min_{U ∈ St(N, r)}  ⟨U, SU⟩ + u‖vec(UUᵀ)‖₁
//! ```
//!
//! with `S` a normalized graph Laplacian. Here `f(U) = ⟨U, SU⟩`,
//! `c(U) = UUᵀ` and `h = u‖·‖₁` on `N × N` matrices. The Jacobian of `c` is
//! applied as `V ↦ UVᵀ + VUᵀ`; nothing of size `N² × Nr` is ever formed.

use std::sync::Arc;

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::kernels;
use crate::manifold::StiefelPoint;
use crate::problem::{CompositeProblem, Constants};
use crate::Mat;

/// A validated normalized Laplacian with its eigen-decomposition (ascending).
#[derive(Debug, Clone)]
pub struct Laplacian {
    s: Mat,
    eigenvalues: Vec<f64>,
    eigenvectors: Mat,
}

impl Laplacian {
    /// Checks symmetry (`‖S − Sᵀ‖_F ≤ 1e-10`) and that the spectrum lies in
    /// `[−1e-8, 2 + 1e-8]`.
    pub fn new(s: Mat) -> Result<Self> {
        if s.nrows() != s.ncols() || s.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "Laplacian must be square, got {}x{}",
                s.nrows(),
                s.ncols()
            )));
        }
        let asym = (&s - s.transpose()).norm();
        if !(asym <= 1e-10) {
            return Err(Error::Parameter(format!("Laplacian is not symmetric (||S - S^T|| = {asym:e})")));
        }
        let eig = SymmetricEigen::try_new(s.clone(), f64::EPSILON, 0)
            .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;
        let mut order: Vec<usize> = (0..s.nrows()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let eigenvectors = Mat::from_fn(s.nrows(), s.nrows(), |i, j| eig.eigenvectors[(i, order[j])]);
        let (lo, hi) = (eigenvalues[0], eigenvalues[eigenvalues.len() - 1]);
        if lo < -1e-8 || hi > 2.0 + 1e-8 {
            return Err(Error::Parameter(format!(
                "Laplacian spectrum [{lo}, {hi}] is outside [0, 2]"
            )));
        }
        Ok(Self {
            s,
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn matrix(&self) -> &Mat {
        &self.s
    }

    pub fn size(&self) -> usize {
        self.s.nrows()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvectors, column `j` paired with `eigenvalues()[j]`.
    pub fn eigenvectors(&self) -> &Mat {
        &self.eigenvectors
    }

    /// `‖S‖₂`.
    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }
}

#[derive(Debug, Clone)]
pub struct SscProblem {
    laplacian: Arc<Laplacian>,
    weight: f64,
    r: usize,
}

impl SscProblem {
    pub fn new(s: Mat, weight: f64, r: usize) -> Result<Self> {
        Self::with_laplacian(Arc::new(Laplacian::new(s)?), weight, r)
    }

    /// Shares an already decomposed Laplacian, e.g. across a grid of weights.
    pub fn with_laplacian(laplacian: Arc<Laplacian>, weight: f64, r: usize) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::Parameter(format!("weight u must be nonnegative, got {weight}")));
        }
        if r == 0 || r > laplacian.size() {
            return Err(Error::Dimension(format!(
                "cluster count r = {r} must lie in 1..={}",
                laplacian.size()
            )));
        }
        Ok(Self { laplacian, weight, r })
    }

    pub fn laplacian(&self) -> &Arc<Laplacian> {
        &self.laplacian
    }

    pub fn s(&self) -> &Mat {
        &self.laplacian.s
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// `(⟨U, SU⟩, 2SU)`.
    pub fn objective_and_grad(&self, u: &Mat) -> (f64, Mat) {
        let su = self.s() * u;
        (u.dot(&su), su * 2.0)
    }

    /// Eigenvectors of the `r` smallest eigenvalues of `S`: the minimizer
    /// for `u = 0`.
    pub fn spectral_initialize(&self) -> Result<StiefelPoint> {
        let v = self.laplacian.eigenvectors.columns(0, self.r).into_owned();
        StiefelPoint::orthonormalize(&v)
    }

    /// Closed-form dual quantities of the subproblem at `(U_k, t_k)`.
    pub fn dual_at<'a>(&'a self, base: &'a StiefelPoint, step: f64) -> SscDual<'a> {
        let su = self.s() * base.matrix();
        SscDual {
            problem: self,
            base,
            step,
            trace_term: base.matrix().dot(&su),
        }
    }
}

impl CompositeProblem for SscProblem {
    fn point_shape(&self) -> (usize, usize) {
        (self.laplacian.size(), self.r)
    }

    fn f(&self, z: &Mat) -> f64 {
        z.dot(&(self.s() * z))
    }

    fn grad_f(&self, z: &Mat) -> Mat {
        (self.s() * z) * 2.0
    }

    fn c(&self, z: &Mat) -> Mat {
        z * z.transpose()
    }

    fn jac_c_apply(&self, z: &Mat, v: &Mat) -> Mat {
        let mut out = Mat::zeros(z.nrows(), z.nrows());
        self.jac_c_apply_into(z, v, &mut out);
        out
    }

    fn jac_c_adjoint_apply(&self, z: &Mat, w: &Mat) -> Mat {
        kernels::sym_mul(w, z)
    }

    fn jac_c_apply_into(&self, z: &Mat, v: &Mat, out: &mut Mat) {
        kernels::sym_outer_into(z, v, out);
    }

    fn affine_jac_into(&self, z: &Mat, v: &Mat, scale: f64, _d: &Mat, out: &mut Mat) {
        // s(UVᵀ + VUᵀ) − UUᵀ = UWᵀ + WUᵀ with W = sV − U/2
        let w = v * scale - z * 0.5;
        kernels::sym_outer_into(z, &w, out);
    }

    fn linearized_h(&self, z: &Mat, _d: &Mat, v: &Mat) -> f64 {
        // UUᵀ + UVᵀ + VUᵀ = UWᵀ + WUᵀ with W = V + U/2
        let w = v + z * 0.5;
        self.weight * kernels::l1_of_sym_outer(z, &w)
    }

    fn objective(&self, z: &Mat) -> f64 {
        self.f(z) + self.weight * kernels::l1_of_sym_outer(z, &(z * 0.5))
    }

    fn weight(&self) -> f64 {
        self.weight
    }

    fn constants(&self) -> Constants {
        Constants {
            lip_f: 2.0 * self.laplacian.spectral_norm(),
            lip_h: self.laplacian.size() as f64 * self.weight,
            lip_c: 2.0,
        }
    }
}

/// Specialized dual of the SSC subproblem:
///
/// ```text
/// D_k(Λ) = tr(U_kᵀSU_k) − 2t_k‖(I − U_kU_kᵀ)(S + Λ̂)U_k‖²_F + ⟨U_kU_kᵀ, Λ⟩,   ‖vec(Λ)‖_∞ ≤ u
/// V_k(Λ) = −2t_k (I − U_kU_kᵀ)(S + Λ̂)U_k,     Λ̂ = (Λ + Λᵀ)/2
/// ```
///
/// All evaluations cost `O(N²r)`.
pub struct SscDual<'a> {
    problem: &'a SscProblem,
    base: &'a StiefelPoint,
    step: f64,
    trace_term: f64,
}

impl SscDual<'_> {
    fn check(&self, lambda: &Mat) -> Result<()> {
        let n = self.problem.laplacian.size();
        if lambda.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "dual variable must be {n}x{n}, got {}x{}",
                lambda.nrows(),
                lambda.ncols()
            )));
        }
        let u = self.problem.weight;
        if lambda.iter().any(|x| !(x.abs() <= u)) {
            return Err(Error::Parameter(format!("dual variable leaves the l-inf ball of radius {u}")));
        }
        Ok(())
    }

    /// `(I − UUᵀ)(S + Λ̂)U`.
    fn residual(&self, lambda: &Mat) -> Mat {
        let u = self.base.matrix();
        let sym = (lambda + lambda.transpose()) * 0.5;
        let w = self.problem.s() * u + sym * u;
        let coef = u.tr_mul(&w);
        w - u * coef
    }

    pub fn value(&self, lambda: &Mat) -> Result<f64> {
        self.check(lambda)?;
        let u = self.base.matrix();
        let y = self.residual(lambda);
        let cross = u.dot(&(lambda * u));
        Ok(self.trace_term - 2.0 * self.step * y.norm_squared() + cross)
    }

    /// `∇D_k(Λ) = UUᵀ − 2t_k(YUᵀ + UYᵀ)` with `Y = (I − UUᵀ)(S + Λ̂)U`.
    pub fn gradient(&self, lambda: &Mat) -> Result<Mat> {
        self.check(lambda)?;
        let u = self.base.matrix();
        let y = self.residual(lambda);
        let yu = &y * u.transpose();
        let sym = &yu + yu.transpose();
        Ok(u * u.transpose() - sym * (2.0 * self.step))
    }

    pub fn link(&self, lambda: &Mat) -> Result<Mat> {
        self.check(lambda)?;
        Ok(self.residual(lambda) * (-2.0 * self.step))
    }
}
