//! Contract of the eigenvalue-floor Hessian modification.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rsqo::qp::modify_hessian;

/// Symmetric matrix of size 1..=12 with entries spanning four decades, and a
/// floor in `[1e-8, 1)`.
pub fn random_symmetric(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, f64) {
    let n = rng.random_range(1..=12);
    let scale = 10f64.powf(rng.random_range(-2.0..2.0));
    let a = DMatrix::from_fn(n, n, |_, _| (rng.random::<f64>() - 0.5) * scale);
    let delta = 10f64.powf(rng.random_range(-8.0..0.0));
    ((&a + a.transpose()) * 0.5, delta)
}

/// Eigenvalue floor, eigenvector preservation (1e-8), idempotence (1e-10)
/// and the two-sided norm bound.
pub fn check_modification(h: &DMatrix<f64>, delta: f64) -> Result<(), String> {
    let out = modify_hessian(h, delta).map_err(|e| e.to_string())?;
    let scale = 1.0 + h.amax();
    let min_eig = SymmetricEigen::new(out.clone()).eigenvalues.min();
    if min_eig < delta * (1.0 - 1e-8) - 1e-12 {
        return Err(format!("min eigenvalue {min_eig:e} below floor {delta:e}"));
    }

    // every eigenpair of h is an eigenpair of the output with floored value
    let eig = SymmetricEigen::new(h.clone());
    for (i, lam) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        let resid = (&out * v - v * lam.max(delta)).amax();
        if resid > 1e-8 * scale {
            return Err(format!("eigenvector {i} not preserved ({resid:e})"));
        }
    }
    if (h * &out - &out * h).amax() > 1e-8 * scale * scale {
        return Err("output does not commute with input".into());
    }

    let twice = modify_hessian(&out, delta).map_err(|e| e.to_string())?;
    let drift = (&twice - &out).amax();
    if drift > 1e-10 * scale {
        return Err(format!("not idempotent ({drift:e})"));
    }

    let norm = |m: &DMatrix<f64>| SymmetricEigen::new(m.clone()).eigenvalues.amax();
    if norm(&out) > delta.max(norm(h)) * (1.0 + 1e-12) + 1e-14 {
        return Err("norm bound violated".into());
    }
    Ok(())
}
