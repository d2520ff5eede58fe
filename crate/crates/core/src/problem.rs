//! Constrained problems over a manifold and the derived Riemannian quantities.
//!
//! A problem is `min f(x)` over `x` on a manifold subject to `g_i(x) <= 0` and
//! `h_j(x) = 0`. Each function is supplied through its ambient value, ambient
//! gradient and ambient Hessian-vector product; Riemannian gradients and
//! Hessians are recovered by tangent projection plus the curvature term of the
//! embedding.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{self, ManifoldKind, Point, TangentBasis, TangentVector};

/// A twice differentiable function on the ambient matrix space.
pub trait SmoothFunction: Send + Sync {
    fn value(&self, x: &DMatrix<f64>) -> f64;
    fn gradient(&self, x: &DMatrix<f64>) -> DMatrix<f64>;
    /// `D^2 f(x)[dir]`.
    fn hess_vec(&self, x: &DMatrix<f64>, dir: &DMatrix<f64>) -> DMatrix<f64>;
}

type ValueFn = dyn Fn(&DMatrix<f64>) -> f64 + Send + Sync;
type GradFn = dyn Fn(&DMatrix<f64>) -> DMatrix<f64> + Send + Sync;
type HessVecFn = dyn Fn(&DMatrix<f64>, &DMatrix<f64>) -> DMatrix<f64> + Send + Sync;

/// Closure-backed [`SmoothFunction`].
pub struct FnFunction {
    value: Box<ValueFn>,
    gradient: Box<GradFn>,
    hess_vec: Box<HessVecFn>,
}

impl FnFunction {
    pub fn new<V, G, H>(value: V, gradient: G, hess_vec: H) -> Self
    where
        V: Fn(&DMatrix<f64>) -> f64 + Send + Sync + 'static,
        G: Fn(&DMatrix<f64>) -> DMatrix<f64> + Send + Sync + 'static,
        H: Fn(&DMatrix<f64>, &DMatrix<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        FnFunction {
            value: Box::new(value),
            gradient: Box::new(gradient),
            hess_vec: Box::new(hess_vec),
        }
    }
}

impl SmoothFunction for FnFunction {
    fn value(&self, x: &DMatrix<f64>) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        (self.gradient)(x)
    }
    fn hess_vec(&self, x: &DMatrix<f64>, dir: &DMatrix<f64>) -> DMatrix<f64> {
        (self.hess_vec)(x, dir)
    }
}

/// `<C, X> + offset`.
#[derive(Debug, Clone)]
pub struct LinearFunction {
    pub coeff: DMatrix<f64>,
    pub offset: f64,
}

impl LinearFunction {
    pub fn new(coeff: DMatrix<f64>, offset: f64) -> Self {
        LinearFunction { coeff, offset }
    }

    /// `sign * X[row, col] + offset`.
    pub fn entry(shape: (usize, usize), row: usize, col: usize, sign: f64, offset: f64) -> Self {
        let mut coeff = DMatrix::zeros(shape.0, shape.1);
        coeff[(row, col)] = sign;
        LinearFunction { coeff, offset }
    }
}

impl SmoothFunction for LinearFunction {
    fn value(&self, x: &DMatrix<f64>) -> f64 {
        self.coeff.dot(x) + self.offset
    }
    fn gradient(&self, _x: &DMatrix<f64>) -> DMatrix<f64> {
        self.coeff.clone()
    }
    fn hess_vec(&self, x: &DMatrix<f64>, _dir: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::zeros(x.nrows(), x.ncols())
    }
}

/// `0.5 <X, A X> + <B, X> + c` on column vectors (`A` symmetric).
#[derive(Debug, Clone)]
pub struct QuadraticFunction {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: f64,
}

impl SmoothFunction for QuadraticFunction {
    fn value(&self, x: &DMatrix<f64>) -> f64 {
        0.5 * x.dot(&(&self.a * x)) + self.b.dot(x) + self.c
    }
    fn gradient(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        &self.a * x + &self.b
    }
    fn hess_vec(&self, _x: &DMatrix<f64>, dir: &DMatrix<f64>) -> DMatrix<f64> {
        &self.a * dir
    }
}

/// Which aggregate [`kkt_residual`] reports as the headline residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualKind {
    /// `sqrt(stationarity^2 + inequality terms + equality terms) + indicator`,
    /// where the indicator is infinite off the manifold.
    #[default]
    Kkt,
    /// `sqrt(stationarity^2 + inequality terms + equality terms + manifold_violation^2)`.
    KktWithManifoldViolation,
}

/// Selects the function whose Riemannian gradient is wanted.
#[derive(Debug, Clone, Copy)]
pub enum GradientOf<'a> {
    Objective,
    Inequality(usize),
    Equality(usize),
    Lagrangian(&'a Multipliers),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    /// Inequality multipliers.
    pub mu: DVector<f64>,
    /// Equality multipliers.
    pub lambda: DVector<f64>,
}

impl Multipliers {
    pub fn new(mu: DVector<f64>, lambda: DVector<f64>) -> Self {
        Multipliers { mu, lambda }
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        Multipliers {
            mu: DVector::zeros(m),
            lambda: DVector::zeros(n),
        }
    }

    /// `max(max_i mu_i, max_j |lambda_j|)`, or 0 when both sets are empty.
    pub fn max_magnitude(&self) -> f64 {
        let mu = self.mu.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let la = self
            .lambda
            .iter()
            .map(|l| l.abs())
            .fold(f64::NEG_INFINITY, f64::max);
        let v = mu.max(la);
        if v == f64::NEG_INFINITY {
            0.0
        } else {
            v
        }
    }

    pub fn distance(&self, other: &Multipliers) -> f64 {
        ((&self.mu - &other.mu).norm_squared() + (&self.lambda - &other.lambda).norm_squared())
            .sqrt()
    }
}

/// Components of the KKT residual at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `||grad L(x)||`.
    pub stationarity: f64,
    /// `sqrt(sum max(0, -mu_i)^2)`.
    pub dual_infeasibility: f64,
    /// `sqrt(sum max(0, g_i)^2)`.
    pub ineq_violation: f64,
    /// `sqrt(sum (mu_i g_i)^2)`.
    pub complementarity: f64,
    /// `sqrt(sum h_j^2)`.
    pub eq_violation: f64,
    /// Violation of the manifold's defining equations.
    pub manifold_violation: f64,
    /// True when the point representation violates the manifold invariants.
    pub off_manifold: bool,
    /// Aggregate with the manifold indicator (infinite when off the manifold).
    pub kkt_residual: f64,
    /// Aggregate with the manifold violation inside the square root.
    pub kkt_manifold_residual: f64,
    /// The aggregate selected by the problem's [`ResidualKind`].
    pub residual: f64,
}

/// A constrained optimization problem over a manifold.
#[derive(Clone)]
pub struct RnloProblem {
    name: String,
    manifold: ManifoldKind,
    objective: Arc<dyn SmoothFunction>,
    inequalities: Vec<Arc<dyn SmoothFunction>>,
    equalities: Vec<Arc<dyn SmoothFunction>>,
    residual_kind: ResidualKind,
}

impl fmt::Debug for RnloProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RnloProblem")
            .field("name", &self.name)
            .field("manifold", &self.manifold)
            .field("m", &self.inequalities.len())
            .field("n", &self.equalities.len())
            .field("residual_kind", &self.residual_kind)
            .finish()
    }
}

impl RnloProblem {
    pub fn new(
        name: impl Into<String>,
        manifold: ManifoldKind,
        objective: Arc<dyn SmoothFunction>,
    ) -> Self {
        RnloProblem {
            name: name.into(),
            manifold,
            objective,
            inequalities: Vec::new(),
            equalities: Vec::new(),
            residual_kind: ResidualKind::default(),
        }
    }

    pub fn with_inequality(mut self, g: Arc<dyn SmoothFunction>) -> Self {
        self.inequalities.push(g);
        self
    }

    pub fn with_equality(mut self, h: Arc<dyn SmoothFunction>) -> Self {
        self.equalities.push(h);
        self
    }

    pub fn with_residual_kind(mut self, kind: ResidualKind) -> Self {
        self.residual_kind = kind;
        self
    }

    /// Same manifold and constraints with a different objective.
    pub fn with_objective(
        &self,
        name: impl Into<String>,
        objective: Arc<dyn SmoothFunction>,
    ) -> Self {
        RnloProblem {
            name: name.into(),
            objective,
            ..self.clone()
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn manifold(&self) -> ManifoldKind {
        self.manifold
    }

    pub fn residual_kind(&self) -> ResidualKind {
        self.residual_kind
    }

    /// Number of inequality constraints.
    pub fn m(&self) -> usize {
        self.inequalities.len()
    }

    /// Number of equality constraints.
    pub fn n(&self) -> usize {
        self.equalities.len()
    }

    pub fn objective(&self) -> &dyn SmoothFunction {
        self.objective.as_ref()
    }

    pub fn inequality(&self, i: usize) -> &dyn SmoothFunction {
        self.inequalities[i].as_ref()
    }

    pub fn equality(&self, j: usize) -> &dyn SmoothFunction {
        self.equalities[j].as_ref()
    }

    pub fn f(&self, x: &Point) -> f64 {
        self.objective.value(x.ambient())
    }

    pub fn ineq_values(&self, x: &Point) -> DVector<f64> {
        DVector::from_iterator(
            self.m(),
            self.inequalities.iter().map(|g| g.value(x.ambient())),
        )
    }

    pub fn eq_values(&self, x: &Point) -> DVector<f64> {
        DVector::from_iterator(
            self.n(),
            self.equalities.iter().map(|h| h.value(x.ambient())),
        )
    }

    /// `sum_i max(0, g_i) + sum_j |h_j|`.
    pub fn total_violation(&self, x: &Point) -> f64 {
        let g: f64 = self.ineq_values(x).iter().map(|v| v.max(0.0)).sum();
        let h: f64 = self.eq_values(x).iter().map(|v| v.abs()).sum();
        g + h
    }

    /// `max(max_i max(0, g_i), max_j |h_j|)`.
    pub fn max_violation(&self, x: &Point) -> f64 {
        let g = self.ineq_values(x).iter().fold(0.0f64, |a, v| a.max(*v));
        let h = self.eq_values(x).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        g.max(h)
    }

    pub fn check_multipliers(&self, eta: &Multipliers) -> Result<()> {
        if eta.mu.len() != self.m() || eta.lambda.len() != self.n() {
            return Err(Error::Dimension(format!(
                "multipliers ({}, {}) for a problem with m = {}, n = {}",
                eta.mu.len(),
                eta.lambda.len(),
                self.m(),
                self.n()
            )));
        }
        Ok(())
    }

    fn check_point(&self, x: &Point) -> Result<()> {
        if x.kind() != self.manifold {
            return Err(Error::Dimension(format!(
                "point on {:?} given to a problem on {:?}",
                x.kind(),
                self.manifold
            )));
        }
        Ok(())
    }

    /// Ambient gradient of the Lagrangian `f + sum mu_i g_i + sum lambda_j h_j`.
    pub fn lagrangian_ambient_gradient(&self, x: &Point, eta: &Multipliers) -> DMatrix<f64> {
        let a = x.ambient();
        let mut g = self.objective.gradient(a);
        for (fi, &w) in self.inequalities.iter().zip(eta.mu.iter()) {
            if w != 0.0 {
                g += &fi.gradient(a) * w;
            }
        }
        for (hj, &w) in self.equalities.iter().zip(eta.lambda.iter()) {
            if w != 0.0 {
                g += &hj.gradient(a) * w;
            }
        }
        g
    }

    fn lagrangian_hess_vec(
        &self,
        x: &Point,
        eta: &Multipliers,
        dir: &DMatrix<f64>,
    ) -> DMatrix<f64> {
        let a = x.ambient();
        let mut hv = self.objective.hess_vec(a, dir);
        for (fi, &w) in self.inequalities.iter().zip(eta.mu.iter()) {
            if w != 0.0 {
                hv += &fi.hess_vec(a, dir) * w;
            }
        }
        for (hj, &w) in self.equalities.iter().zip(eta.lambda.iter()) {
            if w != 0.0 {
                hv += &hj.hess_vec(a, dir) * w;
            }
        }
        hv
    }

    /// Value of the Lagrangian at `x`.
    pub fn lagrangian(&self, x: &Point, eta: &Multipliers) -> f64 {
        self.f(x) + eta.mu.dot(&self.ineq_values(x)) + eta.lambda.dot(&self.eq_values(x))
    }
}

/// Riemannian gradient: tangent projection of the ambient gradient.
pub fn riemannian_gradient(
    prob: &RnloProblem,
    x: &Point,
    which: GradientOf<'_>,
) -> Result<TangentVector> {
    prob.check_point(x)?;
    let a = x.ambient();
    let egrad = match which {
        GradientOf::Objective => prob.objective.gradient(a),
        GradientOf::Inequality(i) => prob
            .inequalities
            .get(i)
            .ok_or(Error::ConstraintIndex {
                index: i,
                count: prob.m(),
            })?
            .gradient(a),
        GradientOf::Equality(j) => prob
            .equalities
            .get(j)
            .ok_or(Error::ConstraintIndex {
                index: j,
                count: prob.n(),
            })?
            .gradient(a),
        GradientOf::Lagrangian(eta) => {
            prob.check_multipliers(eta)?;
            prob.lagrangian_ambient_gradient(x, eta)
        }
    };
    Ok(manifold::project_tangent(x, &egrad)?)
}

/// Riemannian Hessian of the Lagrangian applied to a tangent vector.
pub fn lagrangian_hessian_apply(
    prob: &RnloProblem,
    x: &Point,
    eta: &Multipliers,
    u: &TangentVector,
) -> Result<TangentVector> {
    prob.check_point(x)?;
    prob.check_multipliers(eta)?;
    let egrad = prob.lagrangian_ambient_gradient(x, eta);
    let hv = hessian_ambient(prob, x, eta, &egrad, u.data());
    Ok(manifold::project_tangent(x, &hv)?)
}

fn hessian_ambient(
    prob: &RnloProblem,
    x: &Point,
    eta: &Multipliers,
    egrad: &DMatrix<f64>,
    u: &DMatrix<f64>,
) -> DMatrix<f64> {
    let hv = prob.lagrangian_hess_vec(x, eta, u);
    let mut out = manifold::project_ambient(x, &hv);
    if let Some(c) = manifold::curvature_term(x, u, egrad) {
        out += c;
    }
    out
}

/// Coordinate matrix `<Hess L(x)[e_i], e_j>` of the Lagrangian Hessian in `basis`,
/// symmetrized by averaging with its transpose.
pub fn lagrangian_hessian_matrix(
    prob: &RnloProblem,
    x: &Point,
    eta: &Multipliers,
    basis: &TangentBasis,
) -> Result<DMatrix<f64>> {
    prob.check_point(x)?;
    prob.check_multipliers(eta)?;
    if !basis.anchor().same_anchor(x) {
        return Err(manifold::ManifoldError::AnchorMismatch.into());
    }
    let d = basis.len();
    let egrad = prob.lagrangian_ambient_gradient(x, eta);
    let mut h = DMatrix::zeros(d, d);
    for (i, e) in basis.vectors().iter().enumerate() {
        let he = hessian_ambient(prob, x, eta, &egrad, e.data());
        for (j, ej) in basis.vectors().iter().enumerate() {
            h[(i, j)] = he.dot(ej.data());
        }
    }
    Ok((&h + h.transpose()) * 0.5)
}

/// The l1 penalty `f(x) + rho (sum max(0, g_i) + sum |h_j|)`.
pub fn merit(prob: &RnloProblem, x: &Point, rho: f64) -> f64 {
    prob.f(x) + rho * prob.total_violation(x)
}

/// KKT residual components and aggregates at `(x, eta)`.
pub fn kkt_residual(prob: &RnloProblem, x: &Point, eta: &Multipliers) -> Result<KktReport> {
    prob.check_point(x)?;
    prob.check_multipliers(eta)?;
    let grad = manifold::project_ambient(x, &prob.lagrangian_ambient_gradient(x, eta));
    let stationarity = grad.norm();
    let g = prob.ineq_values(x);
    let h = prob.eq_values(x);

    let dual_sq: f64 = eta.mu.iter().map(|m| (-m).max(0.0).powi(2)).sum();
    let ineq_sq: f64 = g.iter().map(|v| v.max(0.0).powi(2)).sum();
    let comp_sq: f64 = eta
        .mu
        .iter()
        .zip(g.iter())
        .map(|(m, v)| (m * v).powi(2))
        .sum();
    let eq_sq = h.norm_squared();
    let manifold_violation = x.manifold_violation();
    let off_manifold = !x.satisfies_invariants();

    let core = stationarity.powi(2) + dual_sq + ineq_sq + comp_sq + eq_sq;
    let kkt_residual = core.sqrt() + if off_manifold { f64::INFINITY } else { 0.0 };
    let kkt_manifold_residual = (core + manifold_violation.powi(2)).sqrt();
    let residual = match prob.residual_kind {
        ResidualKind::Kkt => kkt_residual,
        ResidualKind::KktWithManifoldViolation => kkt_manifold_residual,
    };
    Ok(KktReport {
        stationarity,
        dual_infeasibility: dual_sq.sqrt(),
        ineq_violation: ineq_sq.sqrt(),
        complementarity: comp_sq.sqrt(),
        eq_violation: eq_sq.sqrt(),
        manifold_violation,
        off_manifold,
        kkt_residual,
        kkt_manifold_residual,
        residual,
    })
}
