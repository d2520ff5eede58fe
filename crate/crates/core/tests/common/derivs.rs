//! Finite-difference checks of Riemannian gradients and Hessians along curves
//! on the manifold.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsqo::manifold::{exp_map, orthonormal_basis, retract, Point, TangentVector};
use rsqo::problem::{
    lagrangian_hessian_apply, riemannian_gradient, GradientOf, Multipliers, RnloProblem,
};

#[derive(Debug, Clone)]
pub struct DerivReport {
    /// First-order remainder `|phi(t) - phi(0) - t slope| / t` at t = 1e-2, 1e-3, 1e-4.
    pub remainders: [f64; 3],
    /// Observed order of the remainder between the last two step sizes.
    pub gradient_order: f64,
    pub gradient_ok: bool,
    /// Relative error of the central second difference against `<Hess L[v], v>`.
    pub hessian_rel_err: f64,
}

/// Random unit tangent vector at `x`.
pub fn random_direction(x: &Point, seed: u64) -> TangentVector {
    let basis = orthonormal_basis(x, seed).expect("basis");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let coords = DVector::from_fn(basis.len(), |_, _| rng.random::<f64>() - 0.5);
    basis.combine(&(coords.clone() / coords.norm()))
}

fn curve(x: &Point, v: &TangentVector, t: f64) -> Point {
    let step = v.scaled(t);
    if x.kind().has_exp_map() {
        exp_map(x, &step).expect("exp map")
    } else {
        retract(x, &step).expect("retraction")
    }
}

/// Checks the Lagrangian `L(., eta)` of `prob` at `x` along a random direction.
pub fn check_lagrangian(
    prob: &RnloProblem,
    x: &Point,
    eta: &Multipliers,
    seed: u64,
) -> DerivReport {
    let v = random_direction(x, seed);
    let phi = |t: f64| prob.lagrangian(&curve(x, &v, t), eta);
    let grad = riemannian_gradient(prob, x, GradientOf::Lagrangian(eta)).expect("gradient");
    let slope = grad.data().dot(v.data());
    let phi0 = phi(0.0);

    let ts = [1e-2, 1e-3, 1e-4];
    let mut remainders = [0.0; 3];
    for (r, &t) in remainders.iter_mut().zip(ts.iter()) {
        *r = (phi(t) - phi0 - t * slope).abs() / t;
    }
    let scale = 1.0 + phi0.abs() + slope.abs();
    let gradient_order = (remainders[1] / remainders[2]).log10();
    let exact = remainders[2] <= 1e-9 * scale;
    let gradient_ok = exact || (0.7..=1.3).contains(&gradient_order);

    let h = 1e-3;
    let second = (phi(h) - 2.0 * phi0 + phi(-h)) / (h * h);
    let hvv = lagrangian_hessian_apply(prob, x, eta, &v)
        .expect("hessian")
        .data()
        .dot(v.data());
    let hessian_rel_err = (second - hvv).abs() / hvv.abs().max(1.0);
    DerivReport {
        remainders,
        gradient_order,
        gradient_ok,
        hessian_rel_err,
    }
}
