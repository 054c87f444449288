//! Accelerated proximal gradient on the subproblem dual with ergodic primal
//! recovery.
//!
//! The dual is maximized over `‖λ‖_∞ ≤ u`. Adjoint images `B_kᵀλ` and the
//! products `⟨λ, d_k⟩` are carried along, so an iteration costs one forward
//! and one adjoint application plus one `h` evaluation for the primal value.

use crate::error::{Error, Result};
use crate::problem::{duality_gap, project_linf_ball, CompositeProblem, SubproblemInstance};
use crate::solver::{stop_holds, InexactRule, SubproblemSolution, Subsolver};
use crate::Mat;

/// `γ_{j+1} = 2 / (1 + √(1 + 4/γ_j²))`.
pub fn gamma_next(gamma: f64) -> f64 {
    2.0 / (1.0 + (1.0 + 4.0 / (gamma * gamma)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubstepRule {
    /// Armijo halving from `initial`, never increased within a subsolve.
    Backtracking { initial: f64, max_halvings: usize },
    /// `1 / (t_k ‖B_k P B_kᵀ‖₂)` with the norm from power iteration.
    Fixed { power_iterations: usize },
}

impl Default for SubstepRule {
    fn default() -> Self {
        SubstepRule::Backtracking {
            initial: 1.0,
            max_halvings: 60,
        }
    }
}

/// When to stop the dual iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ApgStop {
    /// Gap-based LACC/HACC test.
    Inexact(InexactRule),
    /// `gap ≤ tol`.
    AbsoluteGap(f64),
    /// Run exactly `max_iter` iterations.
    Never,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApgOptions {
    pub max_iter: usize,
    pub substep: SubstepRule,
    /// Keep a per-iteration [`ApgRecord`].
    pub record_history: bool,
    /// Also keep every `λ_c` and their ergodic mean (memory heavy).
    pub record_dual_iterates: bool,
}

impl Default for ApgOptions {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            substep: SubstepRule::default(),
            record_history: false,
            record_dual_iterates: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApgRecord {
    pub j: usize,
    pub gamma: f64,
    pub substep: f64,
    /// `F_t(z_k + x(λ_erg); z_k)`.
    pub primal: f64,
    /// `D_k(λ_a)`.
    pub dual: f64,
    pub gap: f64,
    pub step_norm_sq: f64,
}

#[derive(Debug, Clone)]
pub struct ApgOutput {
    /// Final `λ_a`.
    pub lambda: Mat,
    /// Final ergodic average of `λ_c`, kept only with `record_dual_iterates`.
    pub lambda_erg: Option<Mat>,
    /// Recovered tangent step `−t P(B_kᵀλ_erg + c_k)`.
    pub step: Mat,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub iterations: usize,
    /// Whether the stopping test was met (always false for [`ApgStop::Never`]).
    pub converged: bool,
    pub history: Vec<ApgRecord>,
    pub dual_iterates: Vec<Mat>,
    /// Ergodic weights `1/γ_j` matching `dual_iterates`.
    pub weights: Vec<f64>,
}

/// Estimate of `‖B P Bᵀ‖₂` by power iteration from a deterministic start.
pub fn dual_operator_norm<P: CompositeProblem + ?Sized>(sub: &SubproblemInstance<'_, P>, iterations: usize) -> f64 {
    let (m1, m2) = sub.map_value().shape();
    let mut v = Mat::from_fn(m1, m2, |i, j| 1.0 + ((i * 7 + j * 13) % 11) as f64 / 11.0);
    let nv = v.norm();
    v /= nv;
    let mut est = 0.0;
    for _ in 0..iterations.max(1) {
        let w = sub.jac(&sub.project(&sub.jac_adjoint(&v)));
        est = w.norm();
        if est == 0.0 {
            return 0.0;
        }
        v = w / est;
    }
    est
}

/// Curvature test for a candidate substep: `‖Δ‖²/(2t_s) ≥ (t_k/2)‖P BᵀΔ‖²`.
pub fn substep_condition(delta_sq: f64, projected_adjoint_sq: f64, substep: f64, t: f64) -> bool {
    delta_sq / (2.0 * substep) >= 0.5 * t * projected_adjoint_sq
}

/// `out ← clamp(λ_b − (s/γ) g)` onto the `u`-ball in one pass; returns
/// `‖out − λ_b‖²` and `⟨out, d⟩`.
fn prox_step(out: &mut Mat, lambda_b: &Mat, g: &Mat, d: &Mat, scale: f64, u: f64) -> (f64, f64) {
    let mut diff = [0.0; 4];
    let mut dot = [0.0; 4];
    let it = out
        .as_mut_slice()
        .iter_mut()
        .zip(lambda_b.as_slice())
        .zip(g.as_slice())
        .zip(d.as_slice());
    for (i, (((o, &b), &gv), &dv)) in it.enumerate() {
        let v = (b - scale * gv).clamp(-u, u);
        *o = v;
        diff[i & 3] += (v - b) * (v - b);
        dot[i & 3] += v * dv;
    }
    (diff.iter().sum(), dot.iter().sum())
}

/// Result of one accepted substep.
pub struct Substep {
    pub substep: f64,
    /// `B_kᵀ` applied to the new `λ_b`.
    pub adjoint: Mat,
    /// `⟨λ_b, d_k⟩` for the new `λ_b`.
    pub map_dot: f64,
}

/// Largest `2^{-s} t_prev` passing [`substep_condition`] for the step taken
/// from `λ_b` along `g` with momentum `γ`. The new `λ_b` is written into
/// `out`.
#[allow(clippy::too_many_arguments)]
pub fn substep_backtrack<P: CompositeProblem + ?Sized>(
    sub: &SubproblemInstance<'_, P>,
    gamma: f64,
    lambda_b: &Mat,
    adj_b: &Mat,
    g: &Mat,
    t_prev: f64,
    max_halvings: usize,
    out: &mut Mat,
) -> Result<Substep> {
    let u = sub.weight();
    let t = sub.step();
    let mut ts = t_prev;
    for _ in 0..=max_halvings {
        let (diff_sq, map_dot) = prox_step(out, lambda_b, g, sub.map_value(), ts / gamma, u);
        let adjoint = sub.jac_adjoint(out);
        let delta_sq = gamma * gamma * diff_sq;
        let pad = sub.project(&((&adjoint - adj_b) * gamma)).norm_squared();
        if substep_condition(delta_sq, pad, ts, t) {
            return Ok(Substep {
                substep: ts,
                adjoint,
                map_dot,
            });
        }
        ts *= 0.5;
    }
    Err(Error::Numeric(format!(
        "APG substep backtracking exceeded {max_halvings} halvings from {t_prev}"
    )))
}

/// Adjoint images are rebuilt from scratch this often.
const REFRESH_EVERY: usize = 64;

fn stop_met(stop: ApgStop, f_base: f64, primal: f64, gap: f64, t: f64, step_norm_sq: f64) -> bool {
    match stop {
        ApgStop::Inexact(rule) => stop_holds(rule, f_base, primal, gap, t, step_norm_sq),
        ApgStop::AbsoluteGap(tol) => gap <= tol,
        ApgStop::Never => false,
    }
}

/// Runs APG on the dual of `sub` from `lambda0` (zero when `None`).
///
/// The primal candidate is `−t P(ē + c_k)` where `ē` is the ergodic mean of
/// the adjoint images `B_kᵀλ_c`, so its value is exact; the dual value at
/// `λ_a` is recomputed from scratch before success is reported.
pub fn apg_solve<P: CompositeProblem + ?Sized>(
    sub: &SubproblemInstance<'_, P>,
    stop: ApgStop,
    lambda0: Option<&Mat>,
    options: &ApgOptions,
) -> Result<ApgOutput> {
    let u = sub.weight();
    let t = sub.step();
    let shape = sub.map_value().shape();
    let f_base = sub.objective();
    let d = sub.map_value();

    let lambda0 = match lambda0 {
        Some(l) if l.shape() == shape => project_linf_ball(l, u),
        Some(l) => {
            return Err(Error::Dimension(format!(
                "dual start is {}x{}, expected {:?}",
                l.nrows(),
                l.ncols(),
                shape
            )))
        }
        None => Mat::zeros(shape.0, shape.1),
    };

    let (fixed_substep, max_halvings, mut ts) = match options.substep {
        SubstepRule::Fixed { power_iterations } => {
            let norm = dual_operator_norm(sub, power_iterations);
            // Small margin over the power-iteration estimate, which is a lower bound.
            let s = if norm > 0.0 { 1.0 / (1.05 * t * norm) } else { 1.0 };
            (Some(s), 0, s)
        }
        SubstepRule::Backtracking { initial, max_halvings } => {
            if !(initial > 0.0) {
                return Err(Error::Parameter(format!("initial substep must be positive, got {initial}")));
            }
            (None, max_halvings, initial)
        }
    };

    let track = options.record_dual_iterates;
    let mut lam_a = lambda0.clone();
    let mut lam_b = lambda0;
    let mut g = Mat::zeros(shape.0, shape.1);
    let mut next_b = Mat::zeros(shape.0, shape.1);
    let mut erg_num = if track { Mat::zeros(shape.0, shape.1) } else { Mat::zeros(0, 0) };
    let mut adj_a = sub.jac_adjoint(&lam_a);
    let mut adj_b = adj_a.clone();
    let mut dot_a = lam_a.dot(d);
    let mut erg_adj = Mat::zeros(adj_a.nrows(), adj_a.ncols());
    let mut erg_den = 0.0;
    let mut gamma = 1.0;

    let mut history = Vec::new();
    let mut dual_iterates = Vec::new();
    let mut weights = Vec::new();
    let mut last_gap = f64::INFINITY;

    let dual_at = |adj: &Mat, dot: f64| {
        let mut dir = adj.clone();
        dir += sub.grad();
        f_base_dual(sub, &sub.project(&dir), dot)
    };

    for j in 0..options.max_iter {
        if j > 0 && j % REFRESH_EVERY == 0 {
            adj_a = sub.jac_adjoint(&lam_a);
            adj_b = sub.jac_adjoint(&lam_b);
            dot_a = lam_a.dot(d);
        }
        let (ga, gb) = (1.0 - gamma, gamma);
        let w = 1.0 / gamma;
        if track {
            let lam_c = &lam_a * ga + &lam_b * gb;
            erg_num += &lam_c * w;
            dual_iterates.push(lam_c);
            weights.push(w);
        }
        let adj_c = &adj_a * ga + &adj_b * gb;
        let mut dir_c = adj_c.clone();
        dir_c += sub.grad();
        sub.affine_jac_into(&sub.project(&dir_c), t, &mut g);

        let accepted = match fixed_substep {
            Some(s) => {
                let (_, map_dot) = prox_step(&mut next_b, &lam_b, &g, d, s / gamma, u);
                Substep {
                    substep: s,
                    adjoint: sub.jac_adjoint(&next_b),
                    map_dot,
                }
            }
            None => substep_backtrack(sub, gamma, &lam_b, &adj_b, &g, ts, max_halvings, &mut next_b)?,
        };
        ts = accepted.substep;
        std::mem::swap(&mut lam_b, &mut next_b);
        adj_b = accepted.adjoint;
        lam_a.zip_apply(&lam_b, |a, b| *a = ga * *a + gb * b);
        adj_a = &adj_a * ga + &adj_b * gb;
        dot_a = ga * dot_a + gb * accepted.map_dot;

        erg_adj += &adj_c * w;
        erg_den += w;

        let mut dir_erg = &erg_adj / erg_den;
        dir_erg += sub.grad();
        let x = sub.project(&dir_erg) * (-t);
        let primal = sub.primal_value(&x);
        let dual = dual_at(&adj_a, dot_a);
        let gap = duality_gap(primal, dual)?;
        let step_norm_sq = x.norm_squared();
        if options.record_history {
            history.push(ApgRecord {
                j,
                gamma,
                substep: ts,
                primal,
                dual,
                gap,
                step_norm_sq,
            });
        }
        gamma = gamma_next(gamma);
        last_gap = gap;

        if stop_met(stop, f_base, primal, gap, t, step_norm_sq) {
            adj_a = sub.jac_adjoint(&lam_a);
            dot_a = lam_a.dot(d);
            let dual = dual_at(&adj_a, dot_a);
            let gap = duality_gap(primal, dual)?;
            if stop_met(stop, f_base, primal, gap, t, step_norm_sq) {
                return Ok(ApgOutput {
                    lambda: lam_a,
                    lambda_erg: track.then(|| &erg_num / erg_den),
                    step: x,
                    primal,
                    dual,
                    gap,
                    iterations: j + 1,
                    converged: true,
                    history,
                    dual_iterates,
                    weights,
                });
            }
            adj_b = sub.jac_adjoint(&lam_b);
        }
    }

    if !matches!(stop, ApgStop::Never) {
        return Err(Error::Subsolver {
            iterations: options.max_iter,
            gap: last_gap,
        });
    }
    let step = if erg_den > 0.0 {
        let mut dir = &erg_adj / erg_den;
        dir += sub.grad();
        sub.project(&dir) * (-t)
    } else {
        sub.link(&lam_a)
    };
    let primal = sub.primal_value(&step);
    let dual = sub.dual_value_from_direction(&lam_a, &sub.dual_direction(&lam_a));
    let gap = duality_gap(primal, dual)?;
    Ok(ApgOutput {
        lambda: lam_a,
        lambda_erg: track.then(|| if erg_den > 0.0 { &erg_num / erg_den } else { erg_num.clone() }),
        step,
        primal,
        dual,
        gap,
        iterations: options.max_iter,
        converged: false,
        history,
        dual_iterates,
        weights,
    })
}

/// `D_k` from a projected direction and a precomputed `⟨λ, d_k⟩`.
fn f_base_dual<P: CompositeProblem + ?Sized>(sub: &SubproblemInstance<'_, P>, direction: &Mat, map_dot: f64) -> f64 {
    sub.f_base() - 0.5 * sub.step() * direction.norm_squared() + map_dot
}

/// [`apg_solve`] as an outer-loop subsolver.
#[derive(Debug, Clone, Default)]
pub struct Apg {
    pub options: ApgOptions,
}

impl Subsolver for Apg {
    fn solve<P: CompositeProblem + ?Sized>(
        &self,
        sub: &SubproblemInstance<'_, P>,
        rule: InexactRule,
        warm: Option<&Mat>,
    ) -> Result<SubproblemSolution> {
        let warm = warm.filter(|w| w.shape() == sub.map_value().shape());
        let out = apg_solve(sub, ApgStop::Inexact(rule), warm, &self.options)?;
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
