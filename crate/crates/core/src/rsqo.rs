//! The sequential quadratic optimization driver and the Newton-KKT local method.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{self, ManifoldError, Point, TangentBasis, TangentVector};
use crate::problem::{
    kkt_residual, lagrangian_hessian_matrix, merit, riemannian_gradient, GradientOf, Multipliers,
    RnloProblem,
};
use crate::qp::{self, QpModel, QpSolution, QpStatus, DEFAULT_QP_TOL};

/// Steps shorter than this end the run with the current residual verdict.
pub const ZERO_STEP_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BStrategy {
    /// Lagrangian Hessian with eigenvalues floored at `delta`.
    #[default]
    ModifiedHessian,
    /// Identity operator on the tangent space.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Penalty increment.
    pub epsilon: f64,
    /// Penalty parameter before the first iteration.
    pub rho_init: f64,
    /// Backtracking factor.
    pub beta: f64,
    /// Armijo constant.
    pub gamma: f64,
    /// Eigenvalue floor of the modified Hessian.
    pub delta: f64,
    pub b_strategy: BStrategy,
    pub residual_tol: f64,
    pub max_iter: usize,
    /// Wall-clock budget in seconds.
    pub max_time: f64,
    pub max_backtracks: usize,
    pub seed: u64,
    /// KKT certificate tolerance of the subproblem solver.
    pub qp_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: 0.5,
            rho_init: 1.0,
            beta: 0.9,
            gamma: 0.25,
            delta: 1e-5,
            b_strategy: BStrategy::ModifiedHessian,
            residual_tol: 1e-6,
            max_iter: 100_000,
            max_time: 600.0,
            max_backtracks: 200,
            seed: 0,
            qp_tol: DEFAULT_QP_TOL,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Config(format!("{what} out of range: {v}")));
        if !(self.epsilon > 0.0) {
            return bad("epsilon", self.epsilon);
        }
        if !(self.rho_init > 0.0) {
            return bad("rho_init", self.rho_init);
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta", self.beta);
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma", self.gamma);
        }
        if !(self.delta > 0.0) {
            return bad("delta", self.delta);
        }
        if !(self.residual_tol >= 0.0) {
            return bad("residual_tol", self.residual_tol);
        }
        if !(self.max_time >= 0.0) {
            return bad("max_time", self.max_time);
        }
        if !(self.qp_tol > 0.0) {
            return bad("qp_tol", self.qp_tol);
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IterateState {
    pub x: Point,
    pub eta: Multipliers,
    pub rho: f64,
    pub k: usize,
}

impl IterateState {
    pub fn new(x: Point, eta: Multipliers, rho: f64) -> Self {
        IterateState { x, eta, rho, k: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    MaxIter,
    MaxTime,
    Stalled,
    QpInfeasible,
    RankDrop,
    /// Ended by a [`Monitor`] request.
    Stopped,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Converged => "converged",
            Verdict::MaxIter => "max_iter",
            Verdict::MaxTime => "max_time",
            Verdict::Stalled => "stalled",
            Verdict::QpInfeasible => "qp_infeasible",
            Verdict::RankDrop => "rank_drop",
            Verdict::Stopped => "stopped",
        }
    }
}

/// One outer iteration. `f`, `merit` and `residual` are evaluated at the new
/// iterate; `merit` uses the penalty `rho` chosen in this iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// Seconds since the start of the solve, at microsecond resolution.
    pub time_s: f64,
    pub f: f64,
    pub merit: f64,
    pub residual: f64,
    pub rho: f64,
    pub alpha: f64,
    pub step_norm: f64,
    pub backtracks: usize,
    pub qp_status: QpStatus,
    /// Merit at the previous iterate under the same `rho`.
    pub merit_prev: f64,
    /// `<B[dx], dx>`.
    pub quad_form: f64,
    pub qp_kkt_error: f64,
    /// Merit at the last rejected trial point, if any.
    pub rejected_merit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub records: Vec<IterationRecord>,
    pub verdict: Verdict,
    /// Residual at the starting point.
    pub initial_residual: f64,
    pub final_residual: f64,
    pub elapsed_s: f64,
}

/// What the driver exposes about each iteration to a [`Monitor`].
pub struct IterationContext<'a> {
    pub k: usize,
    pub state: &'a IterateState,
    pub basis: &'a TangentBasis,
    /// Unmodified Lagrangian Hessian matrix in `basis`, when it was formed.
    pub hessian: Option<&'a DMatrix<f64>>,
    pub model: &'a QpModel,
    pub solution: &'a QpSolution,
}

/// Hooks into a running solve.
pub trait Monitor {
    /// Called after the subproblem of iteration `ctx.k` is solved.
    fn on_subproblem(&mut self, _ctx: &IterationContext<'_>) {}

    /// Called with each accepted iterate; returning true ends the run.
    fn should_stop(&mut self, _state: &IterateState, _record: &IterationRecord) -> bool {
        false
    }
}

impl Monitor for () {}

/// Penalty rule: keep `rho_prev` when it dominates the multipliers, otherwise
/// jump to their largest magnitude plus `epsilon`.
pub fn update_penalty(rho_prev: f64, eta_star: &Multipliers, epsilon: f64) -> f64 {
    let upsilon = eta_star.max_magnitude();
    if rho_prev >= upsilon {
        rho_prev
    } else {
        upsilon + epsilon
    }
}

#[derive(Debug, Clone)]
pub struct LineSearchResult {
    pub alpha: f64,
    pub backtracks: usize,
    pub x_next: Point,
    pub merit_prev: f64,
    pub merit_next: f64,
    pub rejected_merit: Option<f64>,
}

/// Backtracking on the l1 merit: the smallest `r >= 0` with
/// `gamma beta^r quad_form <= P(x) - P(R_x(beta^r direction))`.
pub fn line_search(
    prob: &RnloProblem,
    x: &Point,
    direction: &TangentVector,
    quad_form: f64,
    rho: f64,
    cfg: &SolverConfig,
) -> Result<LineSearchResult> {
    let merit_prev = merit(prob, x, rho);
    let mut rejected_merit = None;
    for r in 0..=cfg.max_backtracks {
        let alpha = cfg.beta.powi(r as i32);
        let trial = manifold::retract(x, &direction.scaled(alpha))?;
        let merit_next = merit(prob, &trial, rho);
        if cfg.gamma * alpha * quad_form <= merit_prev - merit_next {
            return Ok(LineSearchResult {
                alpha,
                backtracks: r,
                x_next: trial,
                merit_prev,
                merit_next,
                rejected_merit,
            });
        }
        rejected_merit = Some(merit_next);
    }
    Err(Error::Stalled {
        backtracks: cfg.max_backtracks,
    })
}

pub struct StepOutput {
    pub state: IterateState,
    pub record: IterationRecord,
}

/// One iteration from `state`; `time_s` of the record is left at zero.
pub fn step(prob: &RnloProblem, state: &IterateState, cfg: &SolverConfig) -> Result<StepOutput> {
    step_with_monitor(prob, state, cfg, &mut ())
}

pub fn step_with_monitor(
    prob: &RnloProblem,
    state: &IterateState,
    cfg: &SolverConfig,
    monitor: &mut dyn Monitor,
) -> Result<StepOutput> {
    let x = &state.x;
    let basis = manifold::orthonormal_basis(x, manifold::derive_seed(cfg.seed, state.k as u64))?;
    let (hessian, b) = match cfg.b_strategy {
        BStrategy::ModifiedHessian => {
            let h = lagrangian_hessian_matrix(prob, x, &state.eta, &basis)?;
            let b = qp::modify_hessian(&h, cfg.delta)?;
            (Some(h), b)
        }
        BStrategy::Identity => (None, DMatrix::identity(basis.len(), basis.len())),
    };
    let model = qp::build_subproblem(prob, x, &basis, &b)?;
    let mut solution = qp::solve_qp(&model, cfg.qp_tol);
    monitor.on_subproblem(&IterationContext {
        k: state.k,
        state,
        basis: &basis,
        hessian: hessian.as_ref(),
        model: &model,
        solution: &solution,
    });
    if solution.status == QpStatus::Infeasible {
        return Err(Error::QpInfeasible {
            violation: solution.min_violation.unwrap_or(f64::NAN),
        });
    }
    solution.clamp_multipliers();

    let rho = update_penalty(state.rho, &solution.eta, cfg.epsilon);
    let direction = basis.combine(&solution.d);
    let step_norm = direction.norm();
    let quad_form = solution.d.dot(&(&b * &solution.d));

    let search = if step_norm <= ZERO_STEP_TOL {
        let m = merit(prob, x, rho);
        LineSearchResult {
            alpha: 0.0,
            backtracks: 0,
            x_next: x.clone(),
            merit_prev: m,
            merit_next: m,
            rejected_merit: None,
        }
    } else {
        line_search(prob, x, &direction, quad_form, rho, cfg)?
    };

    let next = IterateState {
        x: search.x_next,
        eta: solution.eta.clone(),
        rho,
        k: state.k + 1,
    };
    let residual = kkt_residual(prob, &next.x, &next.eta)?.residual;
    let record = IterationRecord {
        k: state.k,
        time_s: 0.0,
        f: prob.f(&next.x),
        merit: search.merit_next,
        residual,
        rho,
        alpha: search.alpha,
        step_norm,
        backtracks: search.backtracks,
        qp_status: solution.status,
        merit_prev: search.merit_prev,
        quad_form,
        qp_kkt_error: solution.kkt_error,
        rejected_merit: search.rejected_merit,
    };
    Ok(StepOutput {
        state: next,
        record,
    })
}

/// Runs the method from `(x0, eta0)` with `rho = cfg.rho_init`.
pub fn solve(
    prob: &RnloProblem,
    x0: &Point,
    eta0: &Multipliers,
    cfg: &SolverConfig,
) -> Result<(IterateState, SolveTrace)> {
    solve_with_monitor(prob, x0, eta0, cfg, &mut ())
}

pub fn solve_with_monitor(
    prob: &RnloProblem,
    x0: &Point,
    eta0: &Multipliers,
    cfg: &SolverConfig,
    monitor: &mut dyn Monitor,
) -> Result<(IterateState, SolveTrace)> {
    cfg.validate()?;
    if x0.kind() != prob.manifold() {
        return Err(Error::Dimension(format!(
            "start point on {:?} for a problem on {:?}",
            x0.kind(),
            prob.manifold()
        )));
    }
    if let Some(why) = x0.invariant_violation() {
        return Err(ManifoldError::NotOnManifold(why).into());
    }
    prob.check_multipliers(eta0)?;

    let start = Instant::now();
    let budget = Duration::from_secs_f64(cfg.max_time);
    let mut state = IterateState::new(x0.clone(), eta0.clone(), cfg.rho_init);
    let initial_residual = kkt_residual(prob, &state.x, &state.eta)?.residual;
    let mut residual = initial_residual;
    let mut records = Vec::new();

    let verdict = loop {
        if residual <= cfg.residual_tol {
            break Verdict::Converged;
        }
        if state.k >= cfg.max_iter {
            break Verdict::MaxIter;
        }
        if start.elapsed() >= budget {
            break Verdict::MaxTime;
        }
        let out = match step_with_monitor(prob, &state, cfg, monitor) {
            Ok(out) => out,
            Err(Error::QpInfeasible { .. }) => break Verdict::QpInfeasible,
            Err(Error::Stalled { .. }) => break Verdict::Stalled,
            Err(Error::Manifold(ManifoldError::RankDrop { .. })) => break Verdict::RankDrop,
            Err(e) => return Err(e),
        };
        let mut record = out.record;
        record.time_s = micros(start.elapsed());
        residual = record.residual;
        let unchanged = out.state.x.ambient() == state.x.ambient() && out.state.rho == state.rho;
        let zero_step = record.step_norm <= ZERO_STEP_TOL;
        let stop = monitor.should_stop(&out.state, &record);
        records.push(record);
        state = out.state;
        if stop {
            break Verdict::Stopped;
        }
        if zero_step || unchanged {
            break if residual <= cfg.residual_tol {
                Verdict::Converged
            } else {
                Verdict::Stalled
            };
        }
    };
    let trace = SolveTrace {
        records,
        verdict,
        initial_residual,
        final_residual: residual,
        elapsed_s: micros(start.elapsed()),
    };
    Ok((state, trace))
}

fn micros(d: Duration) -> f64 {
    d.as_micros() as f64 / 1e6
}

/// One Newton step on the KKT system with every inequality treated as active,
/// using the unmodified Lagrangian Hessian in the coordinates of `basis`.
pub fn newton_kkt_step(
    prob: &RnloProblem,
    x: &Point,
    eta: &Multipliers,
    basis: &TangentBasis,
) -> Result<(Point, Multipliers)> {
    let h = lagrangian_hessian_matrix(prob, x, eta, basis)?;
    let d = basis.len();
    let (m, n) = (prob.m(), prob.n());
    let size = d + m + n;
    let mut k = DMatrix::zeros(size, size);
    let mut rhs = DVector::zeros(size);
    k.view_mut((0, 0), (d, d)).copy_from(&h);
    let dl = basis.coordinates(riemannian_gradient(prob, x, GradientOf::Lagrangian(eta))?.data());
    rhs.rows_mut(0, d).copy_from(&(-dl));
    let g = prob.ineq_values(x);
    let hv = prob.eq_values(x);
    for i in 0..m {
        let col =
            basis.coordinates(riemannian_gradient(prob, x, GradientOf::Inequality(i))?.data());
        k.view_mut((0, d + i), (d, 1)).copy_from(&col);
        k.view_mut((d + i, 0), (1, d)).copy_from(&col.transpose());
        rhs[d + i] = -g[i];
    }
    for j in 0..n {
        let col = basis.coordinates(riemannian_gradient(prob, x, GradientOf::Equality(j))?.data());
        k.view_mut((0, d + m + j), (d, 1)).copy_from(&col);
        k.view_mut((d + m + j, 0), (1, d))
            .copy_from(&col.transpose());
        rhs[d + m + j] = -hv[j];
    }
    let lu = k.full_piv_lu();
    if !lu.is_invertible() {
        return Err(Error::SingularKkt);
    }
    let sol = lu.solve(&rhs).ok_or(Error::SingularKkt)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularKkt);
    }
    let dx = basis.combine(&sol.rows(0, d).into_owned());
    let x_next = manifold::retract(x, &dx)?;
    let eta_next = Multipliers::new(
        &eta.mu + sol.rows(d, m).into_owned(),
        &eta.lambda + sol.rows(d + m, n).into_owned(),
    );
    Ok((x_next, eta_next))
}
