//! The outer IManPL loop.
//!
//! Each iteration solves the tangent-space subproblem at `(z_k, t_k)` to the
//! accuracy demanded by the inexactness rule, then backtracks on the shrink
//! factor `α_k ∈ {1, 1/2, 1/4, …}` until both
//!
//! ```text
//! F(z_k) − F(z_{k+1}) ≥ (c₀ α_k / 4t_k) ‖z_k − z̃_{k+1}‖²                      (decrease)
//! ½(F(z_k) + F(z_k + α_k(z̃_{k+1} − z_k); z_k)) − F(z_{k+1}) ≥ 0              (model)
//! ```
//!
//! hold for `z_{k+1} = Retr_{z_k}(α_k(z̃_{k+1} − z_k))`.

use log::debug;

use crate::error::{Error, Result};
use crate::manifold::{correct_drift, retract, Retraction, StiefelPoint, TangentVector};
use crate::problem::{duality_gap, CompositeProblem, SubproblemInstance};
use crate::Mat;

/// Subproblem inexactness rule with its parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InexactRule {
    /// Low accuracy: `gap ≤ ρ_l (F(z_k) − F_t(z̃; z_k))`, `ρ_l > 0`.
    Lacc(f64),
    /// High accuracy: `gap ≤ (ρ_h / 2t_k) ‖z̃ − z_k‖²`, `ρ_h ∈ (0, 1/4)`.
    Hacc(f64),
}

impl Default for InexactRule {
    fn default() -> Self {
        InexactRule::Lacc(0.2)
    }
}

impl InexactRule {
    pub fn rho(&self) -> f64 {
        match *self {
            InexactRule::Lacc(r) | InexactRule::Hacc(r) => r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            InexactRule::Lacc(r) if !(r > 0.0 && r.is_finite()) => {
                Err(Error::Parameter(format!("rho_l must be positive, got {r}")))
            }
            InexactRule::Hacc(r) if !(r > 0.0 && r < 0.25) => {
                Err(Error::Parameter(format!("rho_h must lie in (0, 1/4), got {r}")))
            }
            _ => Ok(()),
        }
    }

    /// The LACC parameter implied by HACC: `ρ_h / (1 − 2√ρ_h)`.
    pub fn implied_lacc(rho_h: f64) -> Result<f64> {
        InexactRule::Hacc(rho_h).validate()?;
        Ok(rho_h / (1.0 - 2.0 * rho_h.sqrt()))
    }

    pub fn name(&self) -> &'static str {
        match self {
            InexactRule::Lacc(_) => "LACC",
            InexactRule::Hacc(_) => "HACC",
        }
    }
}

/// Line-search constant `c₀ = 1 + 1/(√(1+ρ) + √ρ)²`, with `ρ = ρ_l` under
/// LACC and `ρ = ρ_h/(1 − 2√ρ_h)` under HACC.
pub fn c0_constant(rule: InexactRule) -> Result<f64> {
    rule.validate()?;
    let rho = match rule {
        InexactRule::Lacc(r) => r,
        InexactRule::Hacc(r) => InexactRule::implied_lacc(r)?,
    };
    Ok(1.0 + 1.0 / ((1.0 + rho).sqrt() + rho.sqrt()).powi(2))
}

/// Gap-based sufficient stopping test for a subproblem.
///
/// `f_base` is `F(z_k)`, `primal` is `F_{t_k}(z̃; z_k)`, `dual` a certified
/// lower bound on the subproblem optimum, and `step_norm_sq = ‖z̃ − z_k‖²`.
pub fn check_subproblem_stop(
    rule: InexactRule,
    f_base: f64,
    primal: f64,
    dual: f64,
    step: f64,
    step_norm_sq: f64,
) -> Result<bool> {
    let gap = duality_gap(primal, dual)?;
    Ok(stop_holds(rule, f_base, primal, gap, step, step_norm_sq))
}

/// Gaps below this multiple of `1 + |F(z_k)|` are at roundoff level and always
/// accepted; otherwise a subproblem at a stationary point could never stop.
pub const GAP_FLOOR: f64 = 1e-13;

pub(crate) fn stop_holds(rule: InexactRule, f_base: f64, primal: f64, gap: f64, step: f64, step_norm_sq: f64) -> bool {
    let rhs = match rule {
        InexactRule::Lacc(rho) => rho * (f_base - primal),
        InexactRule::Hacc(rho) => rho / (2.0 * step) * step_norm_sq,
    };
    gap <= rhs.max(GAP_FLOOR * (1.0 + f_base.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum StepSchedule {
    Fixed,
    /// `t ← α t` after a shrunk step, `t ← 2t` after a full one.
    #[default]
    HalvingDoubling,
    /// `t ← v t` after a full step, `t ← max(t₀, t/v)` otherwise; `v ≥ 1`.
    Geometric { v: f64 },
}

pub fn step_size_update(schedule: StepSchedule, t: f64, alpha: f64, t0: f64) -> f64 {
    let full = alpha >= 1.0;
    match schedule {
        StepSchedule::Fixed => t,
        StepSchedule::HalvingDoubling => {
            if full {
                2.0 * t
            } else {
                alpha * t
            }
        }
        StepSchedule::Geometric { v } => {
            if full {
                t * v
            } else {
                t0.max(t / v)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    /// Stop once `F(z_k) − F(z_{k+1}) ≤ δ`.
    DecreaseBelow(f64),
    /// Stop once `F(z_{k+1}) ≤ F_ref`.
    TargetObjective(f64),
    /// Run until `max_outer`.
    MaxIterations,
}

impl Default for Termination {
    fn default() -> Self {
        Termination::DecreaseBelow(1e-5)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub rule: InexactRule,
    pub t0: f64,
    pub schedule: StepSchedule,
    pub max_outer: usize,
    pub max_linesearch_halvings: usize,
    pub retraction: Retraction,
    pub termination: Termination,
    /// Start each subsolve from the previous outer iteration's dual variable.
    pub warm_start: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rule: InexactRule::default(),
            t0: 1.0,
            schedule: StepSchedule::default(),
            max_outer: 1000,
            max_linesearch_halvings: 60,
            retraction: Retraction::Qr,
            termination: Termination::default(),
            warm_start: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.rule.validate()?;
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::Parameter(format!("t0 must be positive, got {}", self.t0)));
        }
        if let StepSchedule::Geometric { v } = self.schedule {
            if !(v >= 1.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("geometric factor v must be >= 1, got {v}")));
            }
        }
        match self.termination {
            Termination::DecreaseBelow(d) if !(d >= 0.0) => {
                Err(Error::Parameter(format!("decrease tolerance must be nonnegative, got {d}")))
            }
            Termination::TargetObjective(f) if !f.is_finite() => {
                Err(Error::Parameter("target objective must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

/// An inexact subproblem solution `z̃ = z_k + step` with its certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    /// `z̃_{k+1} − z_k`, tangent at `z_k`.
    pub step: Mat,
    /// Final dual variable (warm-start material).
    pub dual_var: Mat,
    /// `F_{t_k}(z̃; z_k)`.
    pub primal: f64,
    /// Certified lower bound on the subproblem optimum.
    pub dual: f64,
    pub gap: f64,
    pub iterations: usize,
}

/// A solver for the tangent-space subproblem.
pub trait Subsolver {
    fn solve<P: CompositeProblem + ?Sized>(
        &self,
        sub: &SubproblemInstance<'_, P>,
        rule: InexactRule,
        warm: Option<&Mat>,
    ) -> Result<SubproblemSolution>;
}

/// `F(z_k) − F(z_{k+1}) ≥ (c₀ α / 4t) ‖z_k − z̃‖²`.
pub fn sufficient_decrease_holds(f_old: f64, f_new: f64, c0: f64, alpha: f64, t: f64, step_norm_sq: f64) -> bool {
    f_old - f_new >= c0 * alpha / (4.0 * t) * step_norm_sq
}

/// `½(F(z_k) + F(z_k + αx; z_k)) − F(z_{k+1}) ≥ 0`.
pub fn model_condition_holds(f_old: f64, model: f64, f_new: f64) -> bool {
    0.5 * (f_old + model) - f_new >= 0.0
}

#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    pub alpha: f64,
    pub point: StiefelPoint,
    pub halvings: usize,
    /// `F(z_{k+1})`.
    pub objective: f64,
    /// `F(z_k + α x; z_k)`.
    pub model: f64,
}

/// Armijo backtracking on the retraction shrink factor, from `α = 1`.
pub fn line_search<P: CompositeProblem + ?Sized>(
    sub: &SubproblemInstance<'_, P>,
    step: &TangentVector,
    c0: f64,
    max_halvings: usize,
    retraction: Retraction,
) -> Result<LineSearchOutcome> {
    let base = sub.base();
    let f_old = sub.objective();
    let t = sub.step();
    let step_norm_sq = step.matrix().norm_squared();
    let mut alpha = 1.0;
    for halvings in 0..=max_halvings {
        let scaled = step.scaled(alpha);
        let point = retract(base, &scaled, retraction)?;
        let f_new = sub.problem().objective(point.matrix());
        let model = sub.model_at(scaled.matrix());
        if sufficient_decrease_holds(f_old, f_new, c0, alpha, t, step_norm_sq)
            && model_condition_holds(f_old, model, f_new)
        {
            return Ok(LineSearchOutcome {
                alpha,
                point,
                halvings,
                objective: f_new,
                model,
            });
        }
        alpha *= 0.5;
    }
    Err(Error::LineSearch {
        halvings: max_halvings,
        step: t,
        step_norm_sq,
        objective: f_old,
    })
}

/// One accepted outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// `F(z_k)`.
    pub objective: f64,
    /// `F(z_{k+1})`.
    pub next_objective: f64,
    /// `t_k`.
    pub step: f64,
    /// `α_k`.
    pub alpha: f64,
    pub halvings: usize,
    /// Subsolver iterations `J_k`.
    pub sub_iterations: usize,
    /// `F_{t_k}(z̃_{k+1}; z_k)`.
    pub primal: f64,
    /// Certified dual value.
    pub dual: f64,
    pub gap: f64,
    /// `‖z̃_{k+1} − z_k‖²`.
    pub step_norm_sq: f64,
    /// `F(z_k + α_k(z̃_{k+1} − z_k); z_k)`.
    pub model: f64,
    /// `‖z_{k+1}ᵀz_{k+1} − I‖_F`.
    pub feasibility: f64,
}

impl IterationRecord {
    /// Stationarity surrogate `‖z̃_{k+1} − z_k‖ / t_k`.
    pub fn surrogate(&self) -> f64 {
        self.step_norm_sq.sqrt() / self.step
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    DecreaseBelow,
    TargetReached,
    MaxIterations,
    /// The proposed step is too small for the decrease test to be resolved
    /// in floating point.
    Stationary,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub rule: InexactRule,
    pub c0: f64,
    pub initial_objective: f64,
    pub records: Vec<IterationRecord>,
    pub final_point: StiefelPoint,
    pub final_objective: f64,
    pub reason: TerminationReason,
}

impl RunTrace {
    pub fn outer_iterations(&self) -> usize {
        self.records.len()
    }

    pub fn total_sub_iterations(&self) -> usize {
        self.records.iter().map(|r| r.sub_iterations).sum()
    }

    /// `min_{k < K} ‖z̃_{k+1} − z_k‖ / t_k` over the first `K` records.
    pub fn best_surrogate(&self, first: usize) -> Option<f64> {
        self.records
            .iter()
            .take(first)
            .map(IterationRecord::surrogate)
            .reduce(f64::min)
    }
}

/// Runs IManPL from `z0`.
pub fn solve<P, S>(problem: &P, subsolver: &S, config: &SolverConfig, z0: StiefelPoint) -> Result<RunTrace>
where
    P: CompositeProblem + ?Sized,
    S: Subsolver + ?Sized,
{
    config.validate()?;
    if z0.matrix().shape() != problem.point_shape() {
        return Err(Error::Dimension(format!(
            "initial point is {}x{}, problem expects {:?}",
            z0.n(),
            z0.r(),
            problem.point_shape()
        )));
    }
    let c0 = c0_constant(config.rule)?;
    let initial_objective = problem.objective(z0.matrix());
    let mut z = z0;
    let mut f_z = initial_objective;
    let mut t = config.t0;
    let mut warm: Option<Mat> = None;
    let mut records = Vec::new();
    let mut reason = TerminationReason::MaxIterations;

    for k in 0..config.max_outer {
        let sub = SubproblemInstance::new(problem, &z, t).map_err(|e| e.at_iteration(k))?;
        let sol = subsolver
            .solve(&sub, config.rule, if config.warm_start { warm.as_ref() } else { None })
            .map_err(|e| e.at_iteration(k))?;
        let step_norm_sq = sol.step.norm_squared();
        let resolution = 4.0 * f64::EPSILON * (1.0 + f_z.abs());
        if c0 / (4.0 * t) * step_norm_sq <= resolution {
            reason = TerminationReason::Stationary;
            break;
        }
        let step = TangentVector::at(&z, sol.step.clone()).map_err(|e| e.at_iteration(k))?;
        let ls = match line_search(&sub, &step, c0, config.max_linesearch_halvings, config.retraction) {
            Ok(ls) => ls,
            // A decrease this small cannot be told apart from rounding in F.
            Err(Error::LineSearch { .. }) if c0 / (4.0 * t) * step_norm_sq <= 1e-10 * (1.0 + f_z.abs()) => {
                reason = TerminationReason::Stationary;
                break;
            }
            Err(e) => return Err(e.at_iteration(k)),
        };
        let decrease = f_z - ls.objective;
        drop(sub);
        let next = correct_drift(ls.point).map_err(|e| e.at_iteration(k))?;
        records.push(IterationRecord {
            k,
            objective: f_z,
            next_objective: ls.objective,
            step: t,
            alpha: ls.alpha,
            halvings: ls.halvings,
            sub_iterations: sol.iterations,
            primal: sol.primal,
            dual: sol.dual,
            gap: sol.gap,
            step_norm_sq,
            model: ls.model,
            feasibility: next.feasibility_error(),
        });
        debug!(
            "k={k} F={:.10e} t={t:.3e} alpha={} J={} gap={:.2e}",
            ls.objective, ls.alpha, sol.iterations, sol.gap
        );
        z = next;
        f_z = ls.objective;
        t = step_size_update(config.schedule, t, ls.alpha, config.t0);
        warm = Some(sol.dual_var);
        match config.termination {
            Termination::DecreaseBelow(delta) if decrease <= delta => {
                reason = TerminationReason::DecreaseBelow;
                break;
            }
            Termination::TargetObjective(target) if f_z <= target => {
                reason = TerminationReason::TargetReached;
                break;
            }
            _ => {}
        }
    }

    Ok(RunTrace {
        rule: config.rule,
        c0,
        initial_objective,
        records,
        final_objective: f_z,
        final_point: z,
        reason,
    })
}
