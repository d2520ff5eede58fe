//! Small problems with known KKT points.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsqo::manifold::{ManifoldKind, Point};
use rsqo::problem::{
    FnFunction, LinearFunction, Multipliers, QuadraticFunction, RnloProblem, SmoothFunction,
};

pub fn col(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v)
}

/// min x^2 + y^2 s.t. x + y = 1; solution (0.5, 0.5) with lambda = -1.
pub fn toy() -> RnloProblem {
    let f = QuadraticFunction {
        a: DMatrix::identity(2, 2) * 2.0,
        b: DMatrix::zeros(2, 1),
        c: 0.0,
    };
    RnloProblem::new("toy", ManifoldKind::Euclidean(2), Arc::new(f))
        .with_equality(Arc::new(LinearFunction::new(col(&[1.0, 1.0]), -1.0)))
}

pub struct SphereFixture {
    pub problem: RnloProblem,
    pub x_star: Point,
    pub eta_star: Multipliers,
}

/// Quadratic objective on the unit sphere in R^4 with one active inequality
/// `x_1 <= 0.6` (multiplier 1) and one equality `x_3 = 0` (multiplier 0.5) at
/// `x* = (0.6, 0.8, 0, 0)`.
///
/// The linear term is chosen so that the ambient Lagrangian gradient at `x*`
/// is `-x*`; the Riemannian Hessian of the Lagrangian at `x*` is then
/// `P (D + I) P`, positive definite on the tangent space.
pub fn sphere_with(diag: [f64; 4]) -> SphereFixture {
    let x_star = [0.6, 0.8, 0.0, 0.0];
    let (mu, lambda) = (1.0, 0.5);
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(&diag));
    let xs = col(&x_star);
    let mut c = -&xs - &d * &xs;
    c[(0, 0)] -= mu;
    c[(2, 0)] -= lambda;
    let f = QuadraticFunction { a: d, b: c, c: 0.0 };
    let kind = ManifoldKind::Sphere(4);
    let problem = RnloProblem::new("sphere", kind, Arc::new(f))
        .with_inequality(Arc::new(LinearFunction::entry((4, 1), 0, 0, 1.0, -0.6)))
        .with_equality(Arc::new(LinearFunction::entry((4, 1), 2, 0, 1.0, 0.0)));
    SphereFixture {
        problem,
        x_star: Point::from_ambient(kind, xs).expect("unit vector"),
        eta_star: Multipliers::new(
            DVector::from_element(1, mu),
            DVector::from_element(1, lambda),
        ),
    }
}

/// Diagonal used by the local convergence checks. Its near-cancellation with
/// the curvature term leaves a small Hessian eigenvalue, so the quadratic rate
/// is visible over several iterations before rounding takes over.
pub const LOCAL_DIAG: [f64; 4] = [-0.97, -0.5, -0.97, -0.97];

pub fn sphere() -> SphereFixture {
    sphere_with(LOCAL_DIAG)
}

fn cubic(weights: DMatrix<f64>) -> Arc<dyn SmoothFunction> {
    let (w1, w2, w3) = (weights.clone(), weights.clone(), weights);
    Arc::new(FnFunction::new(
        move |x: &DMatrix<f64>| w1.component_mul(&x.map(|v| v.powi(3))).sum(),
        move |x: &DMatrix<f64>| w2.component_mul(&x.map(|v| 3.0 * v * v)),
        move |x: &DMatrix<f64>, u: &DMatrix<f64>| {
            w3.component_mul(&x.map(|v| 6.0 * v)).component_mul(u)
        },
    ))
}

/// Random quadratic objective with one cubic inequality and one cubic
/// equality, defined on any manifold.
pub fn random_problem(kind: ManifoldKind, seed: u64) -> RnloProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (r, c) = kind.ambient_shape();
    let n = r * c;
    let mut g = |rows, cols| DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>() - 0.5);
    let a = g(n, n);
    let a = &a + a.transpose();
    // the quadratic form acts on the column-major vectorization
    let b = g(r, c);
    let w = g(r, c);
    let objective = {
        let (a1, a2, a3) = (a.clone(), a.clone(), a);
        let (b1, b2) = (b.clone(), b);
        Arc::new(FnFunction::new(
            move |x: &DMatrix<f64>| {
                let v = DVector::from_column_slice(x.as_slice());
                0.5 * v.dot(&(&a1 * &v)) + b1.dot(x)
            },
            move |x: &DMatrix<f64>| {
                let v = DVector::from_column_slice(x.as_slice());
                DMatrix::from_column_slice(r, c, (&a2 * v).as_slice()) + &b2
            },
            move |_x: &DMatrix<f64>, u: &DMatrix<f64>| {
                let v = DVector::from_column_slice(u.as_slice());
                DMatrix::from_column_slice(r, c, (&a3 * v).as_slice())
            },
        ))
    };
    RnloProblem::new("random", kind, objective)
        .with_inequality(cubic(w))
        .with_equality(cubic(g(r, c)))
}
