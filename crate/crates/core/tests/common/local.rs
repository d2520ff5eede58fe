//! Local convergence run on the sphere fixture with a Newton-KKT step
//! computed alongside every iteration.

use nalgebra::DVector;
use rsqo::manifold::{orthonormal_basis, retract, Point};
use rsqo::problem::Multipliers;
use rsqo::rsqo::{
    newton_kkt_step, solve_with_monitor, IterateState, IterationContext, IterationRecord, Monitor,
    SolverConfig,
};

use super::fixtures::{sphere, SphereFixture};

/// Iterates below this distance to the solution are treated as having hit
/// machine precision.
pub const PRECISION_FLOOR: f64 = 1e-13;

#[derive(Debug)]
pub struct LocalRun {
    /// Distance to the KKT triplet, starting with the initial point.
    pub errors: Vec<f64>,
    /// `e_{k+1} / e_k^2` for the steps whose result is above the precision floor.
    pub ratios: Vec<f64>,
    /// Distance between the accepted iterate and the Newton-KKT iterate from
    /// the same state and basis, per step.
    pub newton_gaps: Vec<f64>,
    pub alphas: Vec<f64>,
    /// Whether the eigenvalue floor left the Hessian untouched at every step.
    pub floor_inactive: bool,
    /// Whether every subproblem had all inequalities active with positive multipliers.
    pub all_active: bool,
}

struct LocalMonitor<'a> {
    fx: &'a SphereFixture,
    errors: Vec<f64>,
    newton: Option<(Point, Multipliers)>,
    gaps: Vec<f64>,
    floor_inactive: bool,
    all_active: bool,
}

fn distance(x: &Point, eta: &Multipliers, fx: &SphereFixture) -> f64 {
    ((x.ambient() - fx.x_star.ambient()).norm_squared() + eta.distance(&fx.eta_star).powi(2)).sqrt()
}

impl Monitor for LocalMonitor<'_> {
    fn on_subproblem(&mut self, ctx: &IterationContext<'_>) {
        let h = ctx.hessian.expect("modified-Hessian strategy");
        self.floor_inactive &= *h == ctx.model.h;
        let slack = &ctx.model.a_ineq * &ctx.solution.d - &ctx.model.b_ineq;
        self.all_active &=
            slack.iter().all(|s| s.abs() <= 1e-12) && ctx.solution.eta.mu.iter().all(|m| *m > 0.0);
        self.newton =
            newton_kkt_step(&self.fx.problem, &ctx.state.x, &ctx.state.eta, ctx.basis).ok();
    }

    fn should_stop(&mut self, state: &IterateState, _record: &IterationRecord) -> bool {
        self.errors.push(distance(&state.x, &state.eta, self.fx));
        let gap = match self.newton.take() {
            Some((x, eta)) => ((x.ambient() - state.x.ambient()).norm_squared()
                + eta.distance(&state.eta).powi(2))
            .sqrt(),
            None => f64::INFINITY,
        };
        self.gaps.push(gap);
        false
    }
}

/// Starts at distance about 1e-2 from the KKT triplet: the point is moved
/// along a random tangent direction and both multipliers are perturbed.
pub fn run(seed: u64) -> LocalRun {
    let fx = sphere();
    let basis = orthonormal_basis(&fx.x_star, 100 + seed).expect("basis");
    let v = basis.combine(&DVector::from_column_slice(&[0.006, -0.006, 0.0048]));
    let x0 = retract(&fx.x_star, &v).expect("retraction");
    let eta0 = Multipliers::new(
        &fx.eta_star.mu + DVector::from_element(1, 0.003),
        &fx.eta_star.lambda - DVector::from_element(1, 0.003),
    );
    let cfg = SolverConfig {
        residual_tol: 1e-15,
        max_iter: 8,
        seed,
        ..SolverConfig::default()
    };
    let mut mon = LocalMonitor {
        fx: &fx,
        errors: vec![distance(&x0, &eta0, &fx)],
        newton: None,
        gaps: Vec::new(),
        floor_inactive: true,
        all_active: true,
    };
    let (_, trace) = solve_with_monitor(&fx.problem, &x0, &eta0, &cfg, &mut mon).expect("solve");
    let e = &mon.errors;
    let ratios = (0..e.len() - 1)
        .take_while(|&k| e[k + 1] >= PRECISION_FLOOR)
        .map(|k| e[k + 1] / (e[k] * e[k]))
        .collect();
    LocalRun {
        errors: mon.errors.clone(),
        ratios,
        newton_gaps: mon.gaps.clone(),
        alphas: trace.records.iter().map(|r| r.alpha).collect(),
        floor_inactive: mon.floor_inactive,
        all_active: mon.all_active,
    }
}
