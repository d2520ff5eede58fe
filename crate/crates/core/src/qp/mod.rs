//! Coordinate quadratic subproblems.
//!
//! At each outer iteration the tangent-space subproblem is written in the
//! coordinates of an orthonormal tangent basis:
//!
//! ```text
//! min  0.5 d^T H d + c^T d
//! s.t. A_ineq d <= b_ineq
//!      A_eq   d  = b_eq
//! ```
//!
//! `H` is a positive-definite modification of the Lagrangian Hessian matrix, so
//! the problem is strictly convex and has a unique solution whenever it is
//! feasible.

mod ipm;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{ManifoldError, Point, TangentBasis};
use crate::problem::{riemannian_gradient, GradientOf, Multipliers, RnloProblem};

pub use ipm::{solve_qp, solve_qp_with, QpOptions};

/// Default KKT certificate tolerance of the subproblem solver.
pub const DEFAULT_QP_TOL: f64 = 1e-10;
/// Inequality multipliers in `[-MU_CLAMP, 0)` are treated as solver noise.
pub const MU_CLAMP: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct QpModel {
    pub h: DMatrix<f64>,
    pub c: DVector<f64>,
    pub a_ineq: DMatrix<f64>,
    pub b_ineq: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
}

impl QpModel {
    pub fn new(
        h: DMatrix<f64>,
        c: DVector<f64>,
        a_ineq: DMatrix<f64>,
        b_ineq: DVector<f64>,
        a_eq: DMatrix<f64>,
        b_eq: DVector<f64>,
    ) -> Result<Self> {
        let d = c.len();
        let ok = h.shape() == (d, d)
            && a_ineq.ncols() == d
            && a_eq.ncols() == d
            && a_ineq.nrows() == b_ineq.len()
            && a_eq.nrows() == b_eq.len();
        if !ok {
            return Err(Error::Dimension(format!(
                "QP blocks H {:?}, c {}, A_ineq {:?}, b_ineq {}, A_eq {:?}, b_eq {}",
                h.shape(),
                d,
                a_ineq.shape(),
                b_ineq.len(),
                a_eq.shape(),
                b_eq.len()
            )));
        }
        Ok(QpModel {
            h,
            c,
            a_ineq,
            b_ineq,
            a_eq,
            b_eq,
        })
    }

    /// Unconstrained model.
    pub fn unconstrained(h: DMatrix<f64>, c: DVector<f64>) -> Self {
        let d = c.len();
        QpModel {
            h,
            c,
            a_ineq: DMatrix::zeros(0, d),
            b_ineq: DVector::zeros(0),
            a_eq: DMatrix::zeros(0, d),
            b_eq: DVector::zeros(0),
        }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn m(&self) -> usize {
        self.b_ineq.len()
    }

    pub fn n(&self) -> usize {
        self.b_eq.len()
    }

    pub fn objective(&self, d: &DVector<f64>) -> f64 {
        0.5 * d.dot(&(&self.h * d)) + self.c.dot(d)
    }

    /// Plain-text dump: a header line per block followed by its rows.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# qp-model d={} m={} n={}",
            self.dim(),
            self.m(),
            self.n()
        );
        write_block(&mut out, "H", &self.h);
        write_block(
            &mut out,
            "c",
            &DMatrix::from_column_slice(self.dim(), 1, self.c.as_slice()),
        );
        write_block(&mut out, "A_ineq", &self.a_ineq);
        write_block(
            &mut out,
            "b_ineq",
            &DMatrix::from_column_slice(self.m(), 1, self.b_ineq.as_slice()),
        );
        write_block(&mut out, "A_eq", &self.a_eq);
        write_block(
            &mut out,
            "b_eq",
            &DMatrix::from_column_slice(self.n(), 1, self.b_eq.as_slice()),
        );
        out
    }
}

fn write_block(out: &mut String, name: &str, m: &DMatrix<f64>) {
    let _ = writeln!(out, "{name} {} {}", m.nrows(), m.ncols());
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

impl QpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            QpStatus::Optimal => "optimal",
            QpStatus::Infeasible => "infeasible",
            QpStatus::MaxIter => "max_iter",
        }
    }
}

/// Violations of the subproblem KKT conditions at a candidate solution.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QpCertificate {
    /// `||H d + c + A_ineq^T mu + A_eq^T lambda||_inf`.
    pub stationarity: f64,
    /// `max(0, max_i (A_ineq d - b_ineq)_i)`.
    pub ineq_feasibility: f64,
    /// `||A_eq d - b_eq||_inf`.
    pub eq_feasibility: f64,
    /// `max(0, -min_i mu_i)`.
    pub dual_feasibility: f64,
    /// `max_i |mu_i (A_ineq d - b_ineq)_i|`.
    pub complementarity: f64,
}

impl QpCertificate {
    pub fn evaluate(model: &QpModel, d: &DVector<f64>, eta: &Multipliers) -> Self {
        let stat = &model.h * d
            + &model.c
            + model.a_ineq.transpose() * &eta.mu
            + model.a_eq.transpose() * &eta.lambda;
        let slack = &model.a_ineq * d - &model.b_ineq;
        let eq = &model.a_eq * d - &model.b_eq;
        QpCertificate {
            stationarity: stat.amax(),
            ineq_feasibility: slack.iter().fold(0.0f64, |a, v| a.max(*v)),
            eq_feasibility: eq.amax(),
            dual_feasibility: eta.mu.iter().fold(0.0f64, |a, v| a.max(-v)),
            complementarity: eta
                .mu
                .iter()
                .zip(slack.iter())
                .fold(0.0f64, |a, (m, s)| a.max((m * s).abs())),
        }
    }

    /// Largest component; infinite if any component is NaN.
    pub fn max_violation(&self) -> f64 {
        let parts = [
            self.stationarity,
            self.ineq_feasibility,
            self.eq_feasibility,
            self.dual_feasibility,
            self.complementarity,
        ];
        if parts.iter().any(|v| v.is_nan()) {
            return f64::INFINITY;
        }
        self.stationarity
            .max(self.ineq_feasibility)
            .max(self.eq_feasibility)
            .max(self.dual_feasibility)
            .max(self.complementarity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub d: DVector<f64>,
    pub eta: Multipliers,
    pub kkt_error: f64,
    pub status: QpStatus,
    pub iterations: usize,
    /// Minimum total violation of the linearized constraints when the phase-1
    /// problem was run.
    pub min_violation: Option<f64>,
}

impl QpSolution {
    pub fn certificate(&self, model: &QpModel) -> QpCertificate {
        QpCertificate::evaluate(model, &self.d, &self.eta)
    }

    /// Sets multipliers in `[-MU_CLAMP, 0)` to zero.
    pub fn clamp_multipliers(&mut self) {
        for m in self.eta.mu.iter_mut() {
            if *m < 0.0 && *m >= -MU_CLAMP {
                *m = 0.0;
            }
        }
    }
}

/// Floors the eigenvalues of a symmetric matrix at `delta`.
///
/// A matrix whose smallest eigenvalue is already at least `delta` is returned
/// unchanged.
pub fn modify_hessian(h: &DMatrix<f64>, delta: f64) -> Result<DMatrix<f64>> {
    if !h.is_square() {
        return Err(Error::Dimension(format!(
            "Hessian of shape {:?}",
            h.shape()
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::Config(format!(
            "eigenvalue floor must be positive, got {delta}"
        )));
    }
    let asym = (h - h.transpose()).amax();
    if asym > 1e-8 * (1.0 + h.amax()) {
        return Err(Error::Dimension(format!(
            "Hessian is not symmetric (asymmetry {asym:e})"
        )));
    }
    if h.nrows() == 0 {
        return Ok(h.clone());
    }
    let eig = SymmetricEigen::try_new(h.clone(), f64::EPSILON, 0).ok_or(Error::Eigen)?;
    let min_eig = eig.eigenvalues.min();
    if min_eig >= delta {
        return Ok(h.clone());
    }
    let floored = eig.eigenvalues.map(|l| l.max(delta));
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&floored) * v.transpose();
    Ok((&out + out.transpose()) * 0.5)
}

/// Coordinate form of the tangent-space subproblem at `x` in `basis`.
pub fn build_subproblem(
    prob: &RnloProblem,
    x: &Point,
    basis: &TangentBasis,
    h_plus: &DMatrix<f64>,
) -> Result<QpModel> {
    if !basis.anchor().same_anchor(x) {
        return Err(ManifoldError::AnchorMismatch.into());
    }
    let d = basis.len();
    if h_plus.shape() != (d, d) {
        return Err(Error::Dimension(format!(
            "B matrix {:?} for a {d}-dimensional tangent space",
            h_plus.shape()
        )));
    }
    let c = basis.coordinates(riemannian_gradient(prob, x, GradientOf::Objective)?.data());
    let (m, n) = (prob.m(), prob.n());
    let g = prob.ineq_values(x);
    let h = prob.eq_values(x);
    let mut a_ineq = DMatrix::zeros(m, d);
    for i in 0..m {
        let row =
            basis.coordinates(riemannian_gradient(prob, x, GradientOf::Inequality(i))?.data());
        a_ineq.row_mut(i).copy_from(&row.transpose());
    }
    let mut a_eq = DMatrix::zeros(n, d);
    for j in 0..n {
        let row = basis.coordinates(riemannian_gradient(prob, x, GradientOf::Equality(j))?.data());
        a_eq.row_mut(j).copy_from(&row.transpose());
    }
    QpModel::new(h_plus.clone(), c, a_ineq, -g, a_eq, -h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{orthonormal_basis, ManifoldKind, TangentVector};
    use crate::problem::{LinearFunction, QuadraticFunction};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn dm(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn modify_diagonal() {
        let h = dm(2, 2, &[3.0, 0.0, 0.0, -1.0]);
        let out = modify_hessian(&h, 1e-5).unwrap();
        assert!((out - dm(2, 2, &[3.0, 0.0, 0.0, 1e-5])).amax() < 1e-15);
    }

    #[test]
    fn modify_leaves_pd_matrix_alone() {
        let eye = DMatrix::<f64>::identity(3, 3);
        assert_eq!(modify_hessian(&eye, 1.0).unwrap(), eye);
        assert_eq!(modify_hessian(&eye, 0.3).unwrap(), eye);
    }

    #[test]
    fn modify_off_diagonal_two_by_two() {
        // eigenpairs: 1 on (1,1)/sqrt2, -1 on (1,-1)/sqrt2; floor -1 -> 0.5
        let h = dm(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let out = modify_hessian(&h, 0.5).unwrap();
        assert!((out - dm(2, 2, &[0.75, 0.25, 0.25, 0.75])).amax() < 1e-15);
    }

    #[test]
    fn modify_rejects_bad_input() {
        assert!(modify_hessian(&dm(2, 2, &[1.0, 2.0, 0.0, 1.0]), 1e-3).is_err());
        assert!(modify_hessian(&DMatrix::identity(2, 2), 0.0).is_err());
    }

    #[test]
    fn unconstrained_minimizer() {
        let model = QpModel::unconstrained(dm(2, 2, &[2.0, 0.5, 0.5, 1.0]), dv(&[1.0, -1.0]));
        let sol = solve_qp(&model, DEFAULT_QP_TOL);
        let expected = -model.h.clone().lu().solve(&model.c).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.d - expected).amax() < 1e-14);
    }

    #[test]
    fn scalar_examples() {
        let sol = solve_qp(
            &QpModel::unconstrained(dm(1, 1, &[1.0]), dv(&[1.0])),
            DEFAULT_QP_TOL,
        );
        assert_abs_diff_eq!(sol.d[0], -1.0, epsilon = 1e-14);
        assert_eq!(sol.eta.mu.len(), 0);

        // 0.2 + d <= 0 with H = 1, c = -1: d = -0.2, mu = 1.2
        let model = QpModel::new(
            dm(1, 1, &[1.0]),
            dv(&[-1.0]),
            dm(1, 1, &[1.0]),
            dv(&[-0.2]),
            DMatrix::zeros(0, 1),
            DVector::zeros(0),
        )
        .unwrap();
        let sol = solve_qp(&model, DEFAULT_QP_TOL);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_abs_diff_eq!(sol.d[0], -0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.eta.mu[0], 1.2, epsilon = 1e-12);
    }

    #[test]
    fn equality_example() {
        let model = QpModel::new(
            DMatrix::identity(2, 2),
            dv(&[0.0, 0.0]),
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
            dm(1, 2, &[1.0, 1.0]),
            dv(&[1.0]),
        )
        .unwrap();
        let sol = solve_qp(&model, DEFAULT_QP_TOL);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_abs_diff_eq!(sol.d[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(sol.d[1], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(sol.eta.lambda[0], -0.5, epsilon = 1e-14);
    }

    #[test]
    fn infeasible_model_is_detected() {
        // d <= -1 and -d <= -1
        let model = QpModel::new(
            dm(1, 1, &[1.0]),
            dv(&[0.0]),
            dm(2, 1, &[1.0, -1.0]),
            dv(&[-1.0, -1.0]),
            DMatrix::zeros(0, 1),
            DVector::zeros(0),
        )
        .unwrap();
        let sol = solve_qp(&model, DEFAULT_QP_TOL);
        assert_eq!(sol.status, QpStatus::Infeasible);
        assert!(sol.min_violation.unwrap() > 1.0);

        // d = 1 and d = 2
        let model = QpModel::new(
            dm(1, 1, &[1.0]),
            dv(&[0.0]),
            DMatrix::zeros(0, 1),
            DVector::zeros(0),
            dm(2, 1, &[1.0, 1.0]),
            dv(&[1.0, 2.0]),
        )
        .unwrap();
        assert_eq!(
            solve_qp(&model, DEFAULT_QP_TOL).status,
            QpStatus::Infeasible
        );
    }

    #[test]
    fn solver_is_deterministic() {
        let model = QpModel::new(
            dm(2, 2, &[2.0, 0.3, 0.3, 1.0]),
            dv(&[-1.0, 2.0]),
            dm(2, 2, &[1.0, 1.0, -1.0, 0.5]),
            dv(&[0.1, 0.2]),
            dm(1, 2, &[0.3, -1.0]),
            dv(&[0.05]),
        )
        .unwrap();
        let a = solve_qp(&model, DEFAULT_QP_TOL);
        let b = solve_qp(&model, DEFAULT_QP_TOL);
        assert_eq!(a, b);
    }

    #[test]
    fn clamp_only_touches_noise() {
        let mut sol = QpSolution {
            d: dv(&[0.0]),
            eta: Multipliers::new(dv(&[-5e-11, -1e-3, 0.2]), DVector::zeros(0)),
            kkt_error: 0.0,
            status: QpStatus::Optimal,
            iterations: 0,
            min_violation: None,
        };
        sol.clamp_multipliers();
        assert_eq!(sol.eta.mu, dv(&[0.0, -1e-3, 0.2]));
    }

    #[test]
    fn sphere_subproblem_rows() {
        // g(x) = x_1 at the north pole with basis {e1, e2}
        let kind = ManifoldKind::Sphere(3);
        let x =
            Point::from_ambient(kind, DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0])).unwrap();
        let f = QuadraticFunction {
            a: DMatrix::zeros(3, 3),
            b: DMatrix::zeros(3, 1),
            c: 0.0,
        };
        let prob = RnloProblem::new("pole", kind, Arc::new(f))
            .with_inequality(Arc::new(LinearFunction::entry((3, 1), 0, 0, 1.0, 0.0)));
        // orthonormal basis of the tangent plane with the canonical vectors
        let basis = orthonormal_basis(&x, 0).unwrap();
        let e = DMatrix::from_fn(3, 2, |i, j| basis.vectors()[j].data()[(i, 0)]);
        let model = build_subproblem(&prob, &x, &basis, &DMatrix::identity(2, 2)).unwrap();
        // row = coordinates of e1 in the drawn basis
        let expected = e.transpose() * DVector::from_column_slice(&[1.0, 0.0, 0.0]);
        assert!((model.a_ineq.row(0).transpose() - expected).amax() < 1e-15);
        assert_eq!(model.b_ineq[0], 0.0);

        // the same with the canonical basis reproduces [1, 0]
        let canon = [
            DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]),
            DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]),
        ];
        let row: Vec<f64> = canon
            .iter()
            .map(|e| {
                let g = riemannian_gradient(&prob, &x, GradientOf::Inequality(0)).unwrap();
                g.data().dot(e)
            })
            .collect();
        assert_eq!(row, vec![1.0, 0.0]);
        let _ = TangentVector::zero(&x);
    }
}
