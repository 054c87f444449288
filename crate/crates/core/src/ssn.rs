//! Regularized semismooth Newton on the dual of the tangent constraint, for
//! problems whose inner map `c` is the identity.
//!
//! With `A(X) = UᵀX + XᵀU` and a symmetric multiplier `Λ`, the Lagrangian
//! `f + ⟨c_k, x⟩ + h(x + d_k) + ‖x‖²/(2t) − ⟨Λ, A(x)⟩` is minimized by
//!
//! ```text
//! x̃(Λ) = prox_{t h}(t(A*Λ − c_k) + d_k) − d_k,   A*Λ = 2UΛ,
//! ```
//!
//! and the dual `D̃(Λ)` is smooth and concave with `∇D̃(Λ) = −A(x̃(Λ))`.
//! Iterates are certified by projecting `x̃` onto the tangent space.

use crate::error::{Error, Result};
use crate::manifold::sym;
use crate::problem::{duality_gap, CompositeProblem, SubproblemInstance};
use crate::solver::{stop_holds, InexactRule, SubproblemSolution, Subsolver};
use crate::Mat;

fn require_identity<P: CompositeProblem + ?Sized>(sub: &SubproblemInstance<'_, P>) -> Result<()> {
    if sub.problem().is_identity_map() {
        Ok(())
    } else {
        Err(Error::Unsupported(
            "semismooth Newton subsolver needs an identity inner map".into(),
        ))
    }
}

/// `A(X) = UᵀX + XᵀU`.
pub fn constraint_apply(u: &Mat, x: &Mat) -> Mat {
    let ux = u.tr_mul(x);
    &ux + ux.transpose()
}

/// `A*(Λ) = U(Λ + Λᵀ)`.
pub fn constraint_adjoint(u: &Mat, lambda: &Mat) -> Mat {
    u * (lambda + lambda.transpose())
}

/// Argument of the prox, `t(A*Λ − c_k) + d_k`.
fn prox_argument<P: CompositeProblem + ?Sized>(sub: &SubproblemInstance<'_, P>, lambda: &Mat) -> Mat {
    let mut v = constraint_adjoint(sub.base().matrix(), lambda);
    v -= sub.grad();
    v *= sub.step();
    v += sub.map_value();
    v
}

/// `x̃(Λ)`, the Lagrangian minimizer.
pub fn primal_from_dual<P: CompositeProblem + ?Sized>(sub: &SubproblemInstance<'_, P>, lambda: &Mat) -> Mat {
    let v = prox_argument(sub, lambda);
    sub.problem().prox_h(&v, sub.step()) - sub.map_value()
}

/// Lagrangian `f + ⟨c_k, x⟩ + h(x + d_k) + ‖x‖²/(2t) − ⟨Λ, A(x)⟩`.
pub fn lagrangian<P: CompositeProblem + ?Sized>(sub: &SubproblemInstance<'_, P>, x: &Mat, lambda: &Mat) -> f64 {
    sub.primal_value(x) - lambda.dot(&constraint_apply(sub.base().matrix(), x))
}

/// `D̃(Λ)`.
pub fn dual_value<P: CompositeProblem + ?Sized>(sub: &SubproblemInstance<'_, P>, lambda: &Mat) -> f64 {
    lagrangian(sub, &primal_from_dual(sub, lambda), lambda)
}

/// `∇D̃(Λ) = −A(x̃(Λ))`, symmetric.
pub fn dual_grad<P: CompositeProblem + ?Sized>(sub: &SubproblemInstance<'_, P>, lambda: &Mat) -> Mat {
    -constraint_apply(sub.base().matrix(), &primal_from_dual(sub, lambda))
}

/// 0/1 mask of the soft-threshold Clarke Jacobian at `v`: one where
/// `|v| > τ`, zero on the kink and inside.
pub fn clarke_mask(v: &Mat, tau: f64) -> Mat {
    v.map(|x| if x.abs() > tau { 1.0 } else { 0.0 })
}

/// `J(E) = t A(M ⊙ A*(E))`, the generalized Hessian of `−D̃`.
fn jacobian_apply(u: &Mat, mask: &Mat, t: f64, e: &Mat) -> Mat {
    constraint_apply(u, &constraint_adjoint(u, e).component_mul(mask)) * t
}

/// Conjugate gradients for `(J + ηI)p = rhs` on symmetric `r × r` matrices.
/// Returns the solution and the iteration count.
fn conjugate_gradient(u: &Mat, mask: &Mat, t: f64, eta: f64, rhs: &Mat, tol: f64, max_iter: usize) -> (Mat, usize) {
    let mut p = Mat::zeros(rhs.nrows(), rhs.ncols());
    let mut res = rhs.clone();
    let mut dir = res.clone();
    let mut rr = res.norm_squared();
    for it in 0..max_iter {
        if rr.sqrt() <= tol {
            return (p, it);
        }
        let mut q = jacobian_apply(u, mask, t, &dir);
        q += &dir * eta;
        let curv = dir.dot(&q);
        if !(curv > 0.0) {
            return (p, it);
        }
        let a = rr / curv;
        p += &dir * a;
        res -= &q * a;
        let rr_new = res.norm_squared();
        dir = &res + &dir * (rr_new / rr);
        rr = rr_new;
    }
    (p, max_iter)
}

/// Newton direction `(J + ηI)p = ∇D̃(Λ)` solved by CG to absolute residual
/// `tol`.
pub fn newton_direction<P: CompositeProblem + ?Sized>(
    sub: &SubproblemInstance<'_, P>,
    lambda: &Mat,
    eta: f64,
    tol: f64,
) -> Mat {
    let u = sub.base().matrix();
    let t = sub.step();
    let v = prox_argument(sub, lambda);
    let mask = clarke_mask(&v, t * sub.weight());
    let grad = dual_grad(sub, lambda);
    let r = lambda.nrows();
    let (p, _) = conjugate_gradient(u, &mask, t, eta, &grad, tol, 4 * r * r + 10);
    sym(&p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsnOptions {
    pub max_iter: usize,
    /// `η = eta_factor ‖∇D̃‖`.
    pub eta_factor: f64,
    /// Armijo parameter of the ascent test.
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Keep a per-iteration [`SsnRecord`].
    pub record_history: bool,
}

impl Default for SsnOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            eta_factor: 0.1,
            armijo: 1e-4,
            max_backtracks: 30,
            record_history: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SsnStop {
    Inexact(InexactRule),
    AbsoluteGap(f64),
}

/// Primal and dual values at the start of SSN iteration `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsnRecord {
    pub j: usize,
    pub primal: f64,
    pub dual: f64,
}

#[derive(Debug, Clone)]
pub struct SsnOutput {
    pub lambda: Mat,
    /// Projected primal step `x̂ = P(x̃)`.
    pub step: Mat,
    /// `F_t(z_k + x̂; z_k)`.
    pub primal: f64,
    /// `D̃(Λ)`.
    pub dual: f64,
    pub gap: f64,
    pub iterations: usize,
    pub newton_steps: usize,
    pub gradient_steps: usize,
    pub history: Vec<SsnRecord>,
}

struct Eval {
    x: Mat,
    dual: f64,
    grad: Mat,
}

fn evaluate<P: CompositeProblem + ?Sized>(sub: &SubproblemInstance<'_, P>, lambda: &Mat) -> Eval {
    let x = primal_from_dual(sub, lambda);
    let ax = constraint_apply(sub.base().matrix(), &x);
    let dual = sub.primal_value(&x) - lambda.dot(&ax);
    Eval { x, dual, grad: -ax }
}

/// Runs SSN from `lambda0` (zero when `None`).
pub fn ssn_solve<P: CompositeProblem + ?Sized>(
    sub: &SubproblemInstance<'_, P>,
    stop: SsnStop,
    lambda0: Option<&Mat>,
    options: &SsnOptions,
) -> Result<SsnOutput> {
    require_identity(sub)?;
    let u = sub.base().matrix();
    let r = u.ncols();
    let t = sub.step();
    let f_base = sub.objective();
    let mut lambda = match lambda0 {
        Some(l) if l.shape() == (r, r) => sym(l),
        Some(l) => {
            return Err(Error::Dimension(format!(
                "multiplier is {}x{}, expected {r}x{r}",
                l.nrows(),
                l.ncols()
            )))
        }
        None => Mat::zeros(r, r),
    };
    let mut newton_steps = 0;
    let mut gradient_steps = 0;
    let mut ev = evaluate(sub, &lambda);
    let mut gap = f64::INFINITY;
    let mut history = Vec::new();

    for j in 0..options.max_iter {
        let step = sub.project(&ev.x);
        let primal = sub.primal_value(&step);
        if options.record_history {
            history.push(SsnRecord { j, primal, dual: ev.dual });
        }
        gap = duality_gap(primal, ev.dual)?;
        let step_norm_sq = step.norm_squared();
        let met = match stop {
            SsnStop::Inexact(rule) => stop_holds(rule, f_base, primal, gap, t, step_norm_sq),
            SsnStop::AbsoluteGap(tol) => gap <= tol,
        };
        if met {
            return Ok(SsnOutput {
                lambda,
                step,
                primal,
                dual: ev.dual,
                gap,
                iterations: j,
                newton_steps,
                gradient_steps,
                history,
            });
        }

        let gnorm = ev.grad.norm();
        if gnorm == 0.0 {
            break;
        }
        let eta = options.eta_factor * gnorm;
        let tol = 0.1f64.min(gnorm.sqrt()) * gnorm;
        let dir = newton_direction(sub, &lambda, eta, tol);
        let slope = ev.grad.dot(&dir);

        let mut accepted = None;
        if slope > 0.0 {
            let mut s = 1.0;
            for _ in 0..=options.max_backtracks {
                let cand = &lambda + &dir * s;
                if cand == lambda {
                    break;
                }
                let ce = evaluate(sub, &cand);
                let required = options.armijo * s * slope;
                // Below the resolution of D̃ the ascent test says nothing; ask
                // for a smaller dual gradient instead.
                let ok = if required <= 4.0 * f64::EPSILON * (1.0 + ev.dual.abs()) {
                    ce.grad.norm() < gnorm
                } else {
                    ce.dual >= ev.dual + required
                };
                if ok {
                    accepted = Some((cand, ce));
                    break;
                }
                s *= 0.5;
            }
        }
        match accepted {
            Some((cand, ce)) => {
                newton_steps += 1;
                lambda = cand;
                ev = ce;
            }
            None => {
                // ∇D̃ is 4t-Lipschitz since AA* = 4I on symmetric matrices.
                gradient_steps += 1;
                lambda = sym(&(&lambda + &ev.grad * (1.0 / (4.0 * t))));
                ev = evaluate(sub, &lambda);
            }
        }
    }
    Err(Error::Subsolver {
        iterations: options.max_iter,
        gap,
    })
}

/// [`ssn_solve`] as an outer-loop subsolver.
#[derive(Debug, Clone, Default)]
pub struct Ssn {
    pub options: SsnOptions,
}

impl Subsolver for Ssn {
    fn solve<P: CompositeProblem + ?Sized>(
        &self,
        sub: &SubproblemInstance<'_, P>,
        rule: InexactRule,
        warm: Option<&Mat>,
    ) -> Result<SubproblemSolution> {
        let r = sub.base().r();
        let warm = warm.filter(|w| w.shape() == (r, r));
        let out = ssn_solve(sub, SsnStop::Inexact(rule), warm, &self.options)?;
        Ok(SubproblemSolution {
            step: out.step,
            dual_var: out.lambda,
            primal: out.primal,
            dual: out.dual,
            gap: out.gap,
            iterations: out.iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apg::{apg_solve, ApgOptions, ApgStop};
    use crate::apps::spca::SpcaProblem;
    use crate::apps::ssc::tests::toy;
    use crate::data::synthetic::gen_spca_matrix;
    use crate::manifold::{gaussian_matrix, random_point, tangent_residual};
    use crate::problem::soft_threshold;
    use approx::assert_abs_diff_eq;

    fn spca_sub_parts(n1: usize, n: usize, r: usize, u: f64, seed: u64) -> (SpcaProblem, crate::manifold::StiefelPoint) {
        let p = SpcaProblem::new(gen_spca_matrix(n1, n, seed), u, r).unwrap();
        let z = random_point(n, r, seed + 50).unwrap();
        (p, z)
    }

    fn random_sym(r: usize, seed: u64, scale: f64) -> Mat {
        sym(&gaussian_matrix(r, r, seed, 77)) * scale
    }

    #[test]
    fn zero_data_gives_zero_primal() {
        // With c_k = 0 and d_k = 0 the prox argument is zero.
        let p = SpcaProblem::new(Mat::identity(3, 3), 0.1, 1).unwrap();
        let z = random_point(3, 1, 1).unwrap();
        let sub = SubproblemInstance::new(&p, &z, 0.5).unwrap();
        let lam = Mat::zeros(1, 1);
        let v = prox_argument(&sub, &lam);
        let expected = (sub.map_value() - sub.grad() * 0.5).clone();
        assert!((v - expected).amax() <= 1e-15);
        assert!(soft_threshold(&Mat::zeros(2, 2), 0.3).amax() == 0.0);
    }

    #[test]
    fn primal_is_lagrangian_minimizer() {
        let (p, z) = spca_sub_parts(10, 6, 2, 0.15, 3);
        let sub = SubproblemInstance::new(&p, &z, 0.05).unwrap();
        let lam = random_sym(2, 4, 2.0);
        let x = primal_from_dual(&sub, &lam);
        let base = lagrangian(&sub, &x, &lam);
        for k in 0..100 {
            let d = gaussian_matrix(6, 2, k, 91) * 1e-3;
            assert!(lagrangian(&sub, &(&x + d), &lam) >= base - 1e-12);
        }
    }

    #[test]
    fn scalar_prox_matches_grid() {
        // n = r = 1: the multiplier term vanishes in the tangent direction but
        // the closed form is still the 1-D prox.
        let p = SpcaProblem::new(Mat::from_element(1, 1, 2.0), 0.3, 1).unwrap();
        let z = crate::manifold::StiefelPoint::new(Mat::from_element(1, 1, 1.0)).unwrap();
        let t = 0.2;
        let sub = SubproblemInstance::new(&p, &z, t).unwrap();
        let lam = Mat::zeros(1, 1);
        let x = primal_from_dual(&sub, &lam)[0];
        let c = sub.grad()[0];
        let d = 1.0;
        let obj = |x: f64| c * x + 0.3 * (x + d).abs() + x * x / (2.0 * t);
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=400_000 {
            let g = -4.0 + i as f64 * 2e-5;
            let v = obj(g);
            if v < best.0 {
                best = (v, g);
            }
        }
        assert!((x - best.1).abs() <= 2e-5, "{x} vs {}", best.1);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (p, z) = spca_sub_parts(12, 7, 3, 0.1, 5);
        let sub = SubproblemInstance::new(&p, &z, p.initial_step()).unwrap();
        for seed in 0..5 {
            let lam = random_sym(3, seed, 5.0);
            let g = dual_grad(&sub, &lam);
            assert!((&g - g.transpose()).amax() <= 1e-12);
            let e = random_sym(3, seed + 20, 1.0);
            let h = 1e-5;
            let fd = (dual_value(&sub, &(&lam + &e * h)) - dual_value(&sub, &(&lam - &e * h))) / (2.0 * h);
            let an = g.dot(&e);
            assert!((fd - an).abs() <= 1e-6 * (1.0 + an.abs()), "{fd} vs {an}");
        }
    }

    #[test]
    fn tangent_primal_has_zero_gradient() {
        let (p, z) = spca_sub_parts(8, 5, 2, 0.0, 6);
        let sub = SubproblemInstance::new(&p, &z, 0.1).unwrap();
        let out = ssn_solve(&sub, SsnStop::AbsoluteGap(1e-13), None, &SsnOptions::default()).unwrap();
        let x = primal_from_dual(&sub, &out.lambda);
        assert!(tangent_residual(&z, &x) <= 1e-10);
        assert!(dual_grad(&sub, &out.lambda).amax() <= 1e-10);
        assert!((sub.project(&x) - &x).amax() <= 1e-10);
    }

    #[test]
    fn history_covers_every_iterate() {
        let (p, z) = spca_sub_parts(10, 6, 2, 0.2, 8);
        let sub = SubproblemInstance::new(&p, &z, 0.3).unwrap();
        let opts = SsnOptions {
            record_history: true,
            ..Default::default()
        };
        let out = ssn_solve(&sub, SsnStop::AbsoluteGap(1e-12), None, &opts).unwrap();
        assert_eq!(out.history.len(), out.iterations + 1);
        assert_eq!(out.history.last().unwrap().dual, out.dual);
        assert!(out.history.iter().all(|h| h.primal >= h.dual - 1e-9 * (1.0 + h.primal.abs())));
    }

    #[test]
    fn reaches_roundoff_level_gaps() {
        // With a large step the ascent test becomes unresolvable before the
        // gap is small; this instance used to stall at a gap of 4e-9.
        let p = SpcaProblem::new(gen_spca_matrix(25, 20, 53), 0.5, 3).unwrap();
        let z = random_point(20, 3, 2053).unwrap();
        let sub = SubproblemInstance::new(&p, &z, p.initial_step() * 5.8).unwrap();
        let out = ssn_solve(&sub, SsnStop::AbsoluteGap(1e-12), None, &SsnOptions::default()).unwrap();
        assert!(out.iterations <= 20);
    }

    #[test]
    fn clarke_mask_matches_directional_derivative() {
        let v = gaussian_matrix(6, 3, 2, 5);
        let tau = 0.4;
        let mask = clarke_mask(&v, tau);
        let d = gaussian_matrix(6, 3, 3, 5);
        let h = 1e-7;
        let fd = (soft_threshold(&(&v + &d * h), tau) - soft_threshold(&v, tau)) / h;
        assert!((fd - d.component_mul(&mask)).amax() <= 1e-6);
        assert_eq!(clarke_mask(&Mat::from_element(1, 1, 0.4), 0.4)[0], 0.0);
    }

    #[test]
    fn smooth_case_single_exact_newton_step() {
        let (p, z) = spca_sub_parts(9, 6, 2, 0.0, 8);
        let sub = SubproblemInstance::new(&p, &z, 0.3).unwrap();
        let lam = Mat::zeros(2, 2);
        let dir = newton_direction(&sub, &lam, 0.0, 0.0);
        let next = &lam + dir;
        assert!(dual_grad(&sub, &next).norm() <= 1e-10);
    }

    #[test]
    fn agrees_with_apg_reference() {
        let (p, z) = spca_sub_parts(10, 6, 2, 0.1, 9);
        let t = p.initial_step();
        let sub = SubproblemInstance::new(&p, &z, t).unwrap();
        let ssn = ssn_solve(&sub, SsnStop::Inexact(InexactRule::Hacc(0.01)), None, &SsnOptions::default()).unwrap();
        let tight = ssn_solve(&sub, SsnStop::AbsoluteGap(1e-13), None, &SsnOptions::default()).unwrap();
        let apg = apg_solve(
            &sub,
            ApgStop::AbsoluteGap(1e-12),
            None,
            &ApgOptions {
                max_iter: 2_000_000,
                ..Default::default()
            },
        )
        .unwrap();
        // Strong convexity: ‖x − x*‖²/(2t) ≤ gap.
        assert!((&tight.step - &apg.step).norm() <= 1e-6);
        assert!((&ssn.step - &apg.step).norm_squared() / (2.0 * t) <= ssn.gap + apg.gap + 1e-12);
        assert!(ssn.primal >= apg.dual - 1e-9 * (1.0 + apg.dual.abs()));
    }

    #[test]
    fn success_is_certified_and_tangent() {
        for seed in 0..6 {
            let (p, z) = spca_sub_parts(15, 8, 3, 0.2, seed);
            let t = p.initial_step() * 4.0;
            let sub = SubproblemInstance::new(&p, &z, t).unwrap();
            for rule in [InexactRule::Lacc(0.2), InexactRule::Hacc(0.2)] {
                let out = ssn_solve(&sub, SsnStop::Inexact(rule), None, &SsnOptions::default()).unwrap();
                assert!(tangent_residual(&z, &out.step) <= 1e-8);
                assert!(out.primal - out.dual >= -1e-9 * (1.0 + out.primal.abs()));
                assert!(crate::solver::check_subproblem_stop(
                    rule,
                    sub.objective(),
                    out.primal,
                    out.dual,
                    t,
                    out.step.norm_squared()
                )
                .unwrap());
                assert_abs_diff_eq!((&out.lambda - out.lambda.transpose()).amax(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rejects_non_identity_map() {
        let p = toy(6, 2, 0.1, 1);
        let z = random_point(6, 2, 2).unwrap();
        let sub = SubproblemInstance::new(&p, &z, 1.0).unwrap();
        assert!(matches!(
            ssn_solve(&sub, SsnStop::AbsoluteGap(1e-8), None, &SsnOptions::default()),
            Err(Error::Unsupported(_))
        ));
    }
}
