//! Exhaustive active-set enumeration for small strictly convex QPs.

use nalgebra::{DMatrix, DVector};
use rsqo::qp::QpModel;

pub struct OracleSolution {
    pub d: DVector<f64>,
    pub mu: DVector<f64>,
    pub lambda: DVector<f64>,
    pub objective: f64,
}

/// Tries every subset of inequality rows as the active set and keeps the
/// feasible, dual-feasible candidate with the lowest objective.
pub fn enumerate(model: &QpModel, tol: f64) -> Option<OracleSolution> {
    let nd = model.c.len();
    let m = model.b_ineq.len();
    let ne = model.b_eq.len();
    let mut best: Option<OracleSolution> = None;
    for mask in 0u32..(1 << m) {
        let rows: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        if rows.len() + ne > nd {
            continue;
        }
        let size = nd + rows.len() + ne;
        let mut k = DMatrix::zeros(size, size);
        let mut rhs = DVector::zeros(size);
        for i in 0..nd {
            for j in 0..nd {
                k[(i, j)] = model.h[(i, j)];
            }
            rhs[i] = -model.c[i];
        }
        let constraint_rows = rows
            .iter()
            .map(|&i| (model.a_ineq.row(i).clone_owned(), model.b_ineq[i]))
            .chain((0..ne).map(|j| (model.a_eq.row(j).clone_owned(), model.b_eq[j])));
        for (r, (row, b)) in constraint_rows.enumerate() {
            for l in 0..nd {
                k[(nd + r, l)] = row[l];
                k[(l, nd + r)] = row[l];
            }
            rhs[nd + r] = b;
        }
        let Some(sol) = k.lu().solve(&rhs) else {
            continue;
        };
        if sol.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let d = sol.rows(0, nd).into_owned();
        let mut mu = DVector::zeros(m);
        for (a, &i) in rows.iter().enumerate() {
            mu[i] = sol[nd + a];
        }
        let lambda = sol.rows(nd + rows.len(), ne).into_owned();
        let slack = &model.a_ineq * &d - &model.b_ineq;
        let eq = &model.a_eq * &d - &model.b_eq;
        let feasible = slack.iter().all(|s| *s <= tol) && eq.iter().all(|e| e.abs() <= tol);
        let dual = mu.iter().all(|v| *v >= -tol);
        if !(feasible && dual) {
            continue;
        }
        let objective = 0.5 * d.dot(&(&model.h * &d)) + model.c.dot(&d);
        if best.as_ref().is_none_or(|b| objective < b.objective) {
            best = Some(OracleSolution {
                d,
                mu,
                lambda,
                objective,
            });
        }
    }
    best
}
