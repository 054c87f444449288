//! Composite problem contract `F = f + h∘c` with `h = u‖·‖₁`, the
//! proximal-linear model functions, and the frozen linearization handed to the
//! dual subsolvers.

use crate::error::{Error, Result};
use crate::manifold::{project_tangent_raw, StiefelPoint};
use crate::Mat;

/// Lipschitz data declared by a problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    /// Lipschitz constant of ∇f.
    pub lip_f: f64,
    /// Lipschitz constant of h.
    pub lip_h: f64,
    /// Lipschitz constant of ∇c.
    pub lip_c: f64,
}

impl Constants {
    /// `L = L_f + L_h L_c`, the weak-convexity modulus of the model error.
    pub fn total(&self) -> f64 {
        self.lip_f + self.lip_h * self.lip_c
    }
}

/// Diameter of the domain of `h⋆` for `h = u‖·‖₁` on ℝᵐ: `2u√m`.
/// Only appears in complexity bounds.
pub fn conjugate_domain_diameter(weight: f64, m: usize) -> f64 {
    2.0 * weight * (m as f64).sqrt()
}

/// Smooth part `f`, smooth map `c` and `h = u‖·‖₁`, all on matrix-shaped
/// variables with the Frobenius inner product. Jacobians of `c` are exposed as
/// forward and adjoint actions only.
pub trait CompositeProblem: Send + Sync {
    /// Shape `(n, r)` of the manifold variable.
    fn point_shape(&self) -> (usize, usize);

    fn f(&self, z: &Mat) -> f64;

    fn grad_f(&self, z: &Mat) -> Mat;

    fn c(&self, z: &Mat) -> Mat;

    /// `∇c(z)ᵀ`-style forward action: directional derivative of `c` at `z`.
    fn jac_c_apply(&self, z: &Mat, v: &Mat) -> Mat;

    /// Adjoint of [`Self::jac_c_apply`].
    fn jac_c_adjoint_apply(&self, z: &Mat, w: &Mat) -> Mat;

    /// Regularization weight `u` of `h = u‖·‖₁`.
    fn weight(&self) -> f64;

    fn constants(&self) -> Constants;

    /// True when `c` is the identity map (enables the semismooth Newton solver).
    fn is_identity_map(&self) -> bool {
        false
    }

    fn h(&self, y: &Mat) -> f64 {
        self.weight() * l1_norm(y)
    }

    /// `prox_{τh}(y)`.
    fn prox_h(&self, y: &Mat, tau: f64) -> Mat {
        soft_threshold(y, tau * self.weight())
    }

    /// Prox of the conjugate `h⋆`, which is the indicator of the `u`-ball in
    /// ℓ∞; the step length is irrelevant.
    fn prox_h_conj(&self, lambda: &Mat, _step: f64) -> Mat {
        project_linf_ball(lambda, self.weight())
    }

    /// `h⋆(λ)`: zero on the ℓ∞ ball of radius `u`, +∞ outside.
    fn h_conj(&self, lambda: &Mat) -> f64 {
        let u = self.weight();
        if lambda.iter().all(|x| x.abs() <= u) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn objective(&self, z: &Mat) -> f64 {
        self.f(z) + self.h(&self.c(z))
    }

    /// [`Self::jac_c_apply`] written into `out`, which has the shape of `c(z)`.
    fn jac_c_apply_into(&self, z: &Mat, v: &Mat, out: &mut Mat) {
        out.copy_from(&self.jac_c_apply(z, v));
    }

    /// `out = scale·∇c(z)v − d` where `d = c(z)`.
    fn affine_jac_into(&self, z: &Mat, v: &Mat, scale: f64, d: &Mat, out: &mut Mat) {
        self.jac_c_apply_into(z, v, out);
        out.zip_apply(d, |o, dv| *o = scale * *o - dv);
    }

    /// `h(d + ∇c(z)v)` where `d = c(z)` has already been evaluated.
    fn linearized_h(&self, z: &Mat, d: &Mat, v: &Mat) -> f64 {
        self.h(&(d + self.jac_c_apply(z, v)))
    }
}

/// `‖a bᵀ‖₁` without forming the full product.
pub fn l1_norm_of_product(a: &Mat, b: &Mat) -> f64 {
    crate::kernels::l1_of_product(a, b)
}

pub fn l1_norm(y: &Mat) -> f64 {
    crate::kernels::abs_sum(y.as_slice())
}

/// Componentwise `sign(x)·max(|x| − τ, 0)`.
pub fn soft_threshold(x: &Mat, tau: f64) -> Mat {
    x.map(|v| {
        let a = v.abs() - tau;
        if a > 0.0 {
            a.copysign(v)
        } else {
            0.0
        }
    })
}

/// Componentwise clamp to `[−u, u]`.
pub fn project_linf_ball(lambda: &Mat, u: f64) -> Mat {
    lambda.map(|v| v.clamp(-u, u))
}

/// `primal − dual`, with weak duality enforced.
///
/// Negative values down to `−1e-6·(1+|primal|)` are treated as rounding and
/// clamped to zero; anything lower is reported as a violation.
pub fn duality_gap(primal: f64, dual: f64) -> Result<f64> {
    if !primal.is_finite() || !dual.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite primal/dual pair ({primal}, {dual})"
        )));
    }
    let gap = primal - dual;
    if gap < -1e-6 * (1.0 + primal.abs()) {
        return Err(Error::DualityViolation { primal, dual, gap });
    }
    Ok(gap.max(0.0))
}

/// `F(z; y) = f(y) + ⟨∇f(y), z−y⟩ + h(c(y) + ∇c(y)(z−y))`.
pub fn model_value<P: CompositeProblem + ?Sized>(prob: &P, z: &Mat, y: &Mat) -> f64 {
    let d = z - y;
    let lin = prob.c(y) + prob.jac_c_apply(y, &d);
    prob.f(y) + prob.grad_f(y).dot(&d) + prob.h(&lin)
}

/// `F_t(z; y) = F(z; y) + ‖z − y‖² / (2t)`.
pub fn prox_model_value<P: CompositeProblem + ?Sized>(prob: &P, z: &Mat, y: &Mat, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Parameter(format!("prox step must be positive, got {t}")));
    }
    Ok(model_value(prob, z, y) + (z - y).norm_squared() / (2.0 * t))
}

/// The subproblem at `(z_k, t_k)`: every quantity that stays fixed while a
/// dual solver runs. Steps `x` live in the tangent space at `z_k`.
pub struct SubproblemInstance<'a, P: CompositeProblem + ?Sized> {
    problem: &'a P,
    base: &'a StiefelPoint,
    step: f64,
    grad: Mat,
    map_value: Mat,
    f_base: f64,
    objective: f64,
}

impl<'a, P: CompositeProblem + ?Sized> SubproblemInstance<'a, P> {
    pub fn new(problem: &'a P, base: &'a StiefelPoint, step: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::Parameter(format!("step t_k must be positive, got {step}")));
        }
        let (n, r) = problem.point_shape();
        if base.matrix().shape() != (n, r) {
            return Err(Error::Dimension(format!(
                "problem expects {n}x{r} points, got {}x{}",
                base.n(),
                base.r()
            )));
        }
        let z = base.matrix();
        let grad = problem.grad_f(z);
        let map_value = problem.c(z);
        let f_base = problem.f(z);
        let objective = f_base + problem.h(&map_value);
        Ok(Self {
            problem,
            base,
            step,
            grad,
            map_value,
            f_base,
            objective,
        })
    }

    pub fn problem(&self) -> &'a P {
        self.problem
    }

    pub fn base(&self) -> &'a StiefelPoint {
        self.base
    }

    /// `t_k`.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// `c_k = ∇f(z_k)`.
    pub fn grad(&self) -> &Mat {
        &self.grad
    }

    /// `d_k = c(z_k)`.
    pub fn map_value(&self) -> &Mat {
        &self.map_value
    }

    pub fn f_base(&self) -> f64 {
        self.f_base
    }

    /// `F(z_k)`.
    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn weight(&self) -> f64 {
        self.problem.weight()
    }

    /// Tangent projection at `z_k`.
    pub fn project(&self, x: &Mat) -> Mat {
        project_tangent_raw(self.base.matrix(), x)
    }

    /// `B_k x`.
    pub fn jac(&self, x: &Mat) -> Mat {
        self.problem.jac_c_apply(self.base.matrix(), x)
    }

    /// `B_kᵀ λ`.
    pub fn jac_adjoint(&self, lambda: &Mat) -> Mat {
        self.problem.jac_c_adjoint_apply(self.base.matrix(), lambda)
    }

    /// `P(B_kᵀλ + c_k)`.
    pub fn dual_direction(&self, lambda: &Mat) -> Mat {
        let mut w = self.jac_adjoint(lambda);
        w += &self.grad;
        self.project(&w)
    }

    /// Link function `x_k(λ) = −t_k P(B_kᵀλ + c_k)`, always tangent.
    pub fn link(&self, lambda: &Mat) -> Mat {
        self.dual_direction(lambda) * (-self.step)
    }

    /// `D_k(λ) = f(z_k) − (t_k/2)‖P(B_kᵀλ + c_k)‖² − h⋆(λ) + ⟨λ, d_k⟩`.
    /// Returns −∞ for `λ` outside the domain of `h⋆`.
    pub fn dual_value(&self, lambda: &Mat) -> f64 {
        let hc = self.problem.h_conj(lambda);
        if hc.is_infinite() {
            return f64::NEG_INFINITY;
        }
        let w = self.dual_direction(lambda);
        self.dual_value_from_direction(lambda, &w)
    }

    /// [`Self::dual_value`] with `P(B_kᵀλ + c_k)` already computed; assumes
    /// `λ` is feasible.
    pub fn dual_value_from_direction(&self, lambda: &Mat, direction: &Mat) -> f64 {
        self.f_base - 0.5 * self.step * direction.norm_squared() + lambda.dot(&self.map_value)
    }

    /// `B_k x` written into `out`.
    pub fn jac_into(&self, x: &Mat, out: &mut Mat) {
        self.problem.jac_c_apply_into(self.base.matrix(), x, out)
    }

    /// `scale·B_k x − d_k` written into `out`.
    pub fn affine_jac_into(&self, x: &Mat, scale: f64, out: &mut Mat) {
        self.problem
            .affine_jac_into(self.base.matrix(), x, scale, &self.map_value, out)
    }

    /// `F(z_k + x; z_k)`.
    pub fn model_at(&self, x: &Mat) -> f64 {
        self.f_base + self.grad.dot(x) + self.problem.linearized_h(self.base.matrix(), &self.map_value, x)
    }

    /// `F_{t_k}(z_k + x; z_k)`.
    pub fn primal_value(&self, x: &Mat) -> f64 {
        self.model_at(x) + x.norm_squared() / (2.0 * self.step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apps::spca::SpcaProblem;
    use crate::apps::ssc::SscProblem;
    use crate::data::laplacian::normalized_laplacian;
    use crate::manifold::{gaussian_matrix, project_tangent, random_point};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn spca_identity_2x2() -> SpcaProblem {
        SpcaProblem::new(Mat::identity(2, 2), 0.0, 1).unwrap()
    }

    fn small_ssc(n: usize, r: usize, u: f64, seed: u64) -> SscProblem {
        let g = gaussian_matrix(n, n, seed, 5);
        let w = Mat::from_fn(n, n, |i, j| (-(g[(i, j)] - g[(j, i)]).powi(2)).exp());
        let s = normalized_laplacian(&w).unwrap();
        SscProblem::new(s, u, r).unwrap()
    }

    #[test]
    fn model_is_exact_at_base_point() {
        let p = small_ssc(8, 2, 0.1, 1);
        let y = random_point(8, 2, 2).unwrap();
        let y = y.matrix();
        assert_abs_diff_eq!(model_value(&p, y, y), p.objective(y), epsilon = 1e-12);
        assert_abs_diff_eq!(prox_model_value(&p, y, y, 0.3).unwrap(), p.objective(y), epsilon = 1e-12);
    }

    #[test]
    fn spca_model_by_hand() {
        // f(U) = −‖U‖² for A = I; at y = e1, ∇f = −2e1, so
        // F(e2; e1) = −1 + ⟨−2e1, e2 − e1⟩ = −1 + 2 = 1.
        let p = spca_identity_2x2();
        let y = Mat::from_column_slice(2, 1, &[1.0, 0.0]);
        let z = Mat::from_column_slice(2, 1, &[0.0, 1.0]);
        assert_abs_diff_eq!(model_value(&p, &z, &y), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn prox_model_adds_quadratic() {
        let p = small_ssc(6, 2, 0.05, 3);
        let y = random_point(6, 2, 4).unwrap().into_matrix();
        let z = gaussian_matrix(6, 2, 5, 1);
        let t = 0.7;
        let diff = prox_model_value(&p, &z, &y, t).unwrap() - model_value(&p, &z, &y);
        assert_abs_diff_eq!(diff, (&z - &y).norm_squared() / (2.0 * t), epsilon = 1e-12);
        assert!(matches!(prox_model_value(&p, &z, &y, 0.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn model_error_within_weak_convexity_bound() {
        let p = small_ssc(10, 3, 0.02, 7);
        let l = p.constants().total();
        for seed in 0..200 {
            let y = random_point(10, 3, seed).unwrap().into_matrix();
            let z = random_point(10, 3, seed + 10_000).unwrap().into_matrix();
            let err = (model_value(&p, &z, &y) - p.objective(&z)).abs();
            assert!(err <= 0.5 * l * (&z - &y).norm_squared() + 1e-12);
        }
    }

    #[test]
    fn prox_model_upper_bounds_objective_for_small_steps() {
        let p = small_ssc(10, 3, 0.05, 8);
        let t = 1.0 / p.constants().total();
        for seed in 0..200 {
            let y = random_point(10, 3, seed).unwrap();
            let v = project_tangent(&y, &gaussian_matrix(10, 3, seed, 3)).unwrap();
            let z = y.matrix() + v.matrix() * 0.3;
            let lhs = prox_model_value(&p, &z, y.matrix(), t).unwrap();
            assert!(lhs >= p.objective(&z) - 1e-12);
        }
    }

    #[test]
    fn soft_threshold_example() {
        let x = Mat::from_column_slice(2, 1, &[3.0, -0.5]);
        let out = soft_threshold(&x, 1.0);
        assert_eq!(out.as_slice(), &[2.0, 0.0]);
        assert_eq!(soft_threshold(&Mat::zeros(3, 2), 0.4), Mat::zeros(3, 2));
    }

    fn grid_argmin(x: f64, tau: f64, h: f64) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        let mut v: f64 = -10.0;
        while v <= 10.0 {
            let obj = tau * v.abs() + 0.5 * (v - x).powi(2);
            if obj < best.0 {
                best = (obj, v);
            }
            v += h;
        }
        best.1
    }

    #[test]
    fn soft_threshold_matches_grid_minimizer() {
        let h = 1e-4;
        assert_abs_diff_eq!(grid_argmin(3.0, 1.0, h), 2.0, epsilon = 2.0 * h);
        let x = gaussian_matrix(10, 1, 3, 9) * 2.0;
        let out = soft_threshold(&x, 0.7);
        for i in 0..10 {
            assert_abs_diff_eq!(out[i], grid_argmin(x[i], 0.7, h), epsilon = 2.0 * h);
        }
    }

    #[test]
    fn linf_projection_clamps() {
        let l = Mat::from_column_slice(2, 1, &[5.0, -0.3]);
        assert_eq!(project_linf_ball(&l, 1.0).as_slice(), &[1.0, -0.3]);
        let inside = Mat::from_column_slice(3, 1, &[0.2, -0.9, 0.0]);
        assert_eq!(project_linf_ball(&inside, 1.0), inside);
    }

    #[test]
    fn moreau_decomposition() {
        // x = prox_{τh}(x) + τ prox_{h⋆/τ}(x/τ) for h = u‖·‖₁.
        for seed in 0..50 {
            let x = gaussian_matrix(7, 3, seed, 4) * 3.0;
            let tau = 0.1 + (seed as f64) * 0.05;
            let u = 0.4;
            let rebuilt = soft_threshold(&x, tau * u) + project_linf_ball(&(&x / tau), u) * tau;
            assert!((rebuilt - &x).norm() <= 1e-12);
        }
    }

    #[test]
    fn duality_gap_cases() {
        assert_eq!(duality_gap(5.0, 5.0).unwrap(), 0.0);
        assert_abs_diff_eq!(duality_gap(5.0, 4.5).unwrap(), 0.5);
        assert_eq!(duality_gap(5.0, 5.0 + 1e-9).unwrap(), 0.0);
        assert!(matches!(duality_gap(5.0, 5.1), Err(Error::DualityViolation { .. })));
        assert!(duality_gap(f64::NAN, 1.0).is_err());
    }

    // min_x q·x + u|x + d| + x²/(2t) on a 1-D grid versus the closed-form dual
    // max_{|λ|≤u} −(t/2)(λ + q)² + λd.
    #[test]
    fn gap_closes_on_grid_solved_scalar_problem() {
        let (q, d, u, t): (f64, f64, f64, f64) = (0.8, -0.3, 0.5, 0.9);
        let h = 1e-5;
        let mut primal = f64::INFINITY;
        let mut x = -5.0;
        while x <= 5.0 {
            primal = primal.min(q * x + u * (x + d).abs() + x * x / (2.0 * t));
            x += h;
        }
        let mut dual = f64::NEG_INFINITY;
        let mut l = -u;
        while l <= u {
            dual = dual.max(-0.5 * t * (l + q).powi(2) + l * d);
            l += h;
        }
        let gap = duality_gap(primal, dual).unwrap();
        assert!(gap <= 1e-6, "gap {gap}");
    }

    #[test]
    fn weak_convexity_pieces_hold_on_both_problems() {
        let ssc = small_ssc(9, 2, 0.03, 11);
        let a = gaussian_matrix(12, 9, 2, 8);
        let spca = SpcaProblem::new(a, 0.2, 2).unwrap();
        let problems: [&dyn CompositeProblem; 2] = [&ssc, &spca];
        for p in problems {
            let k = p.constants();
            for seed in 0..1000u64 {
                let y = random_point(9, 2, seed).unwrap().into_matrix();
                let z = random_point(9, 2, seed + 50_000).unwrap().into_matrix();
                let d = &z - &y;
                let dist2 = d.norm_squared();
                let smooth = (p.f(&y) + p.grad_f(&y).dot(&d) - p.f(&z)).abs();
                assert!(smooth <= 0.5 * k.lip_f * dist2 + 1e-10);
                let lin = p.c(&y) + p.jac_c_apply(&y, &d);
                let nonsmooth = (p.h(&lin) - p.h(&p.c(&z))).abs();
                assert!(nonsmooth <= 0.5 * k.lip_h * k.lip_c * dist2 + 1e-10);
            }
        }
    }

    #[test]
    fn h_is_lipschitz_with_declared_constant() {
        let p = small_ssc(7, 2, 0.3, 4);
        let lh = p.constants().lip_h;
        for seed in 0..100 {
            let y = gaussian_matrix(7, 7, seed, 1);
            let y2 = gaussian_matrix(7, 7, seed, 2);
            assert!((p.h(&y) - p.h(&y2)).abs() <= lh * (&y - &y2).norm() + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn soft_threshold_nonexpansive(seed in 0u64..5000, tau in 0.0f64..3.0) {
            let x = gaussian_matrix(6, 2, seed, 1) * 2.0;
            let y = gaussian_matrix(6, 2, seed, 2) * 2.0;
            let d = (soft_threshold(&x, tau) - soft_threshold(&y, tau)).norm();
            prop_assert!(d <= (&x - &y).norm() + 1e-14);
        }
    }
}
