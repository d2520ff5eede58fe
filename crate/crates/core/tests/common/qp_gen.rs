//! Random strictly convex QPs with a known feasible point.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rsqo::qp::QpModel;

fn gaussian<R: Rng>(rng: &mut R, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// `H = M^T M + 0.1 I`; constraints are built around a random point `d0`
/// so that every model is feasible, with inequality slacks at `d0` drawn
/// uniformly from `[0, 1)`.
pub fn random_qp<R: Rng>(rng: &mut R, max_d: usize, max_m: usize, max_n: usize) -> QpModel {
    let d = rng.random_range(1..=max_d);
    let m = rng.random_range(0..=max_m);
    let n = rng.random_range(0..=max_n.min(d - 1));
    let mh = gaussian(rng, d, d);
    let h = mh.transpose() * &mh + DMatrix::identity(d, d) * 0.1;
    let h = (&h + h.transpose()) * 0.5;
    let c = gaussian(rng, d, 1).column(0).into_owned() * 2.0;
    let d0 = gaussian(rng, d, 1).column(0).into_owned();
    let a_ineq = gaussian(rng, m, d);
    let slack = DVector::from_fn(m, |_, _| rng.random::<f64>());
    let b_ineq = &a_ineq * &d0 + slack;
    let a_eq = gaussian(rng, n, d);
    let b_eq = &a_eq * &d0;
    QpModel::new(h, c, a_ineq, b_ineq, a_eq, b_eq).expect("consistent shapes")
}
