//! Primal-dual interior-point method for strictly convex QPs.
//!
//! Mehrotra predictor-corrector on the slack formulation
//! `A_ineq d + s = b_ineq, s >= 0`, using the normal-equations-reduced KKT
//! system with one dense LU factorization per iteration. The interior-point
//! answer is then polished by solving the equality-constrained KKT system on
//! the identified active set, and an elastic phase-1 problem separates
//! infeasible models from solver failures.

use nalgebra::{DMatrix, DVector};

use super::{QpCertificate, QpModel, QpSolution, QpStatus, DEFAULT_QP_TOL};
use crate::problem::Multipliers;

const STEP_FRACTION: f64 = 0.995;
const EQ_REGULARIZATION: f64 = 1e-13;
const PHASE1_REGULARIZATION: f64 = 1e-10;
const POLISH_ROUNDS: usize = 8;
const DIVERGENCE_BOUND: f64 = 1e14;
const STALL_ITERATIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpOptions {
    /// KKT certificate tolerance for declaring a solution optimal.
    pub tol: f64,
    pub max_iter: usize,
    /// Total violation of the linearized constraints above which a model is
    /// declared infeasible.
    pub infeasibility_tol: f64,
}

impl Default for QpOptions {
    fn default() -> Self {
        QpOptions {
            tol: DEFAULT_QP_TOL,
            max_iter: 200,
            infeasibility_tol: 1e-8,
        }
    }
}

pub fn solve_qp(model: &QpModel, tol: f64) -> QpSolution {
    solve_qp_with(
        model,
        &QpOptions {
            tol,
            ..QpOptions::default()
        },
    )
}

pub fn solve_qp_with(model: &QpModel, opts: &QpOptions) -> QpSolution {
    let (cand, iterations) = solve_core(model, opts);
    let kkt_error = cand.cert.max_violation();
    if kkt_error <= opts.tol {
        return QpSolution {
            d: cand.d,
            eta: cand.eta,
            kkt_error,
            status: QpStatus::Optimal,
            iterations,
            min_violation: None,
        };
    }
    let (phase1_d, violation) = phase_one(model, opts);
    if violation > opts.infeasibility_tol {
        let eta = Multipliers::zeros(model.m(), model.n());
        let kkt_error = QpCertificate::evaluate(model, &phase1_d, &eta).max_violation();
        return QpSolution {
            d: phase1_d,
            eta,
            kkt_error,
            status: QpStatus::Infeasible,
            iterations,
            min_violation: Some(violation),
        };
    }
    QpSolution {
        d: cand.d,
        eta: cand.eta,
        kkt_error,
        status: QpStatus::MaxIter,
        iterations,
        min_violation: Some(violation),
    }
}

struct Candidate {
    d: DVector<f64>,
    eta: Multipliers,
    cert: QpCertificate,
}

impl Candidate {
    fn new(model: &QpModel, d: DVector<f64>, eta: Multipliers) -> Self {
        let cert = QpCertificate::evaluate(model, &d, &eta);
        Candidate { d, eta, cert }
    }

    fn score(&self) -> f64 {
        let v = self.cert.max_violation();
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    }
}

fn solve_core(model: &QpModel, opts: &QpOptions) -> (Candidate, usize) {
    let ipm = interior_point(model, opts);
    let mut best = Candidate::new(
        model,
        ipm.d.clone(),
        Multipliers::new(ipm.z.clone(), ipm.y.clone()),
    );
    let active: Vec<bool> = (0..model.m()).map(|i| ipm.z[i] > ipm.s[i]).collect();
    if let Some(polished) = polish(model, active) {
        if polished.score() <= best.score() {
            best = polished;
        }
    }
    (best, ipm.iterations)
}

struct IpmResult {
    d: DVector<f64>,
    s: DVector<f64>,
    z: DVector<f64>,
    y: DVector<f64>,
    iterations: usize,
}

struct Residuals {
    r_d: DVector<f64>,
    r_e: DVector<f64>,
    r_i: DVector<f64>,
    comp: DVector<f64>,
}

impl Residuals {
    fn new(
        model: &QpModel,
        d: &DVector<f64>,
        s: &DVector<f64>,
        z: &DVector<f64>,
        y: &DVector<f64>,
    ) -> Self {
        Residuals {
            r_d: &model.h * d + &model.c + model.a_ineq.tr_mul(z) + model.a_eq.tr_mul(y),
            r_e: &model.a_eq * d - &model.b_eq,
            r_i: &model.a_ineq * d + s - &model.b_ineq,
            comp: s.component_mul(z),
        }
    }

    fn error(&self) -> f64 {
        self.r_d
            .amax()
            .max(self.r_e.amax())
            .max(self.r_i.amax())
            .max(self.comp.amax())
    }
}

/// Newton systems at one interior point, sharing a factorization of the
/// reduced matrix `[H + A_in^T (Z/S) A_in, A_eq^T; A_eq, -reg I]`.
struct NewtonSystem<'a> {
    model: &'a QpModel,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    s: &'a DVector<f64>,
    z: &'a DVector<f64>,
}

type Direction = (DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>);

impl<'a> NewtonSystem<'a> {
    fn new(model: &'a QpModel, s: &'a DVector<f64>, z: &'a DVector<f64>) -> Self {
        let nd = model.dim();
        let ne = model.n();
        let w = z.component_div(s);
        let mut k = DMatrix::zeros(nd + ne, nd + ne);
        let scaled = DMatrix::from_fn(model.m(), nd, |i, j| model.a_ineq[(i, j)] * w[i]);
        let top = &model.h + model.a_ineq.tr_mul(&scaled);
        k.view_mut((0, 0), (nd, nd)).copy_from(&top);
        k.view_mut((0, nd), (nd, ne))
            .copy_from(&model.a_eq.transpose());
        k.view_mut((nd, 0), (ne, nd)).copy_from(&model.a_eq);
        for j in 0..ne {
            k[(nd + j, nd + j)] = -EQ_REGULARIZATION;
        }
        NewtonSystem {
            model,
            lu: k.lu(),
            s,
            z,
        }
    }

    /// Step `(dd, ds, dz, dy)` for complementarity right-hand side `r_c`.
    fn solve(&self, res: &Residuals, r_c: &DVector<f64>) -> Option<Direction> {
        let nd = self.model.dim();
        let ne = self.model.n();
        let inner = (self.z.component_mul(&res.r_i) - r_c).component_div(self.s);
        let mut rhs = DVector::zeros(nd + ne);
        rhs.rows_mut(0, nd)
            .copy_from(&(-&res.r_d - self.model.a_ineq.tr_mul(&inner)));
        rhs.rows_mut(nd, ne).copy_from(&(-&res.r_e));
        let sol = self.lu.solve(&rhs)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let dd = sol.rows(0, nd).into_owned();
        let dy = sol.rows(nd, ne).into_owned();
        let ds = -&res.r_i - &self.model.a_ineq * &dd;
        let dz = (-r_c - self.z.component_mul(&ds)).component_div(self.s);
        Some((dd, ds, dz, dy))
    }
}

fn interior_point(model: &QpModel, opts: &QpOptions) -> IpmResult {
    let nd = model.dim();
    let m = model.m();
    let ne = model.n();

    let mut d = DVector::zeros(nd);
    let mut y = DVector::zeros(ne);
    if let Some((d0, y0)) = solve_equality_kkt(model, &[]) {
        d = d0;
        y = y0;
    }
    let mut s = (&model.b_ineq - &model.a_ineq * &d).map(|v| v.max(1.0));
    let mut z = DVector::from_element(m, 1.0);

    // shift the starting slacks and multipliers by the affine-scaling step
    if m > 0 {
        let res = Residuals::new(model, &d, &s, &z, &y);
        let shifted = NewtonSystem::new(model, &s, &z).solve(&res, &res.comp);
        if let Some((dd, ds, dz, dy)) = shifted {
            let s1 = (&s + ds).map(|v| v.abs().max(1.0));
            let z1 = (&z + dz).map(|v| v.abs().max(1.0));
            d += dd;
            y += dy;
            s = s1;
            z = z1;
        }
    }

    let target = 1e-2 * opts.tol;
    let mut iterations = 0;
    let mut best: Option<(f64, [DVector<f64>; 4])> = None;
    let mut since_best = 0;
    for _ in 0..opts.max_iter {
        let res = Residuals::new(model, &d, &s, &z, &y);
        let err = res.error();
        if !err.is_finite() {
            break;
        }
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, [d.clone(), s.clone(), z.clone(), y.clone()]));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if err <= target || z.amax() > DIVERGENCE_BOUND || since_best >= STALL_ITERATIONS {
            break;
        }
        iterations += 1;
        let mu = if m > 0 {
            res.comp.sum() / m as f64
        } else {
            0.0
        };

        let system = NewtonSystem::new(model, &s, &z);
        let Some((_, ds_aff, dz_aff, _)) = system.solve(&res, &res.comp) else {
            break;
        };
        let sigma = if m > 0 {
            let ap = max_step(&s, &ds_aff).min(1.0);
            let ad = max_step(&z, &dz_aff).min(1.0);
            let mu_aff = (&s + &ds_aff * ap).dot(&(&z + &dz_aff * ad)) / m as f64;
            (mu_aff / mu).powi(3).min(1.0)
        } else {
            0.0
        };
        let r_c = &res.comp + ds_aff.component_mul(&dz_aff) - DVector::from_element(m, sigma * mu);
        let Some((dd, ds, dz, dy)) = system.solve(&res, &r_c) else {
            break;
        };
        let alpha = (STEP_FRACTION * max_step(&s, &ds).min(max_step(&z, &dz))).min(1.0);
        if !(alpha > 1e-14) {
            break;
        }
        d += &dd * alpha;
        s += &ds * alpha;
        z += &dz * alpha;
        y += &dy * alpha;
    }
    if let Some((best_err, [bd, bs, bz, by])) = best {
        let current = Residuals::new(model, &d, &s, &z, &y).error();
        if !(current <= best_err) {
            (d, s, z, y) = (bd, bs, bz, by);
        }
    }
    IpmResult {
        d,
        s,
        z,
        y,
        iterations,
    }
}

/// Largest `a` in `(0, inf]` keeping `v + a dv >= 0`, capped at a large value.
fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, dvi)| **dvi < 0.0)
        .map(|(vi, dvi)| -vi / dvi)
        .fold(1e300, f64::min)
}

/// Solves `min 0.5 d'Hd + c'd` subject to the listed inequality rows and all
/// equality rows holding with equality. Returns `d` and the multipliers of the
/// listed rows followed by the equality multipliers.
fn solve_kkt_rows(model: &QpModel, rows: &[usize]) -> Option<(DVector<f64>, DVector<f64>)> {
    let nd = model.dim();
    let na = rows.len();
    let ne = model.n();
    let size = nd + na + ne;
    let mut k = DMatrix::zeros(size, size);
    let mut rhs = DVector::zeros(size);
    k.view_mut((0, 0), (nd, nd)).copy_from(&model.h);
    rhs.rows_mut(0, nd).copy_from(&(-&model.c));
    for (a, &i) in rows.iter().enumerate() {
        let row = model.a_ineq.row(i);
        k.view_mut((nd + a, 0), (1, nd)).copy_from(&row);
        k.view_mut((0, nd + a), (nd, 1)).copy_from(&row.transpose());
        rhs[nd + a] = model.b_ineq[i];
    }
    for j in 0..ne {
        let row = model.a_eq.row(j);
        k.view_mut((nd + na + j, 0), (1, nd)).copy_from(&row);
        k.view_mut((0, nd + na + j), (nd, 1))
            .copy_from(&row.transpose());
        rhs[nd + na + j] = model.b_eq[j];
    }
    let lu = k.full_piv_lu();
    if !lu.is_invertible() {
        return None;
    }
    let sol = lu.solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((
        sol.rows(0, nd).into_owned(),
        sol.rows(nd, na + ne).into_owned(),
    ))
}

fn solve_equality_kkt(model: &QpModel, rows: &[usize]) -> Option<(DVector<f64>, DVector<f64>)> {
    let na = rows.len();
    solve_kkt_rows(model, rows).map(|(d, mult)| (d, mult.rows(na, model.n()).into_owned()))
}

/// Active-set refinement starting from the interior-point guess: solve the
/// equality KKT system, drop rows with negative multipliers, add violated
/// rows, and repeat while the active set changes.
fn polish(model: &QpModel, mut active: Vec<bool>) -> Option<Candidate> {
    let m = model.m();
    let mut best: Option<Candidate> = None;
    for _ in 0..POLISH_ROUNDS {
        let rows: Vec<usize> = (0..m).filter(|&i| active[i]).collect();
        let Some((d, mult)) = solve_kkt_rows(model, &rows) else {
            break;
        };
        let mut mu = DVector::zeros(m);
        for (a, &i) in rows.iter().enumerate() {
            mu[i] = mult[a];
        }
        let lambda = mult.rows(rows.len(), model.n()).into_owned();
        let cand = Candidate::new(model, d, Multipliers::new(mu, lambda));

        let slack = &model.a_ineq * &cand.d - &model.b_ineq;
        let mut next = active.clone();
        for i in 0..m {
            if active[i] && cand.eta.mu[i] < 0.0 {
                next[i] = false;
            } else if !active[i] && slack[i] > 0.0 {
                next[i] = true;
            }
        }
        let better = best.as_ref().is_none_or(|b| cand.score() < b.score());
        if better {
            best = Some(cand);
        }
        if next == active {
            break;
        }
        active = next;
    }
    best
}

/// Minimizes the total violation of the linearized constraints with an
/// elastic reformulation; returns the minimizing `d` and its total violation.
fn phase_one(model: &QpModel, opts: &QpOptions) -> (DVector<f64>, f64) {
    let nd = model.dim();
    let m = model.m();
    let ne = model.n();
    let nw = nd + m + 2 * ne;

    let h = DMatrix::identity(nw, nw) * PHASE1_REGULARIZATION;
    let mut c = DVector::zeros(nw);
    c.rows_mut(nd, m + 2 * ne).fill(1.0);

    // A_in d - t <= b_in and -w_k <= 0 on every elastic variable
    let mut a_in = DMatrix::zeros(m + m + 2 * ne, nw);
    let mut b_in = DVector::zeros(m + m + 2 * ne);
    a_in.view_mut((0, 0), (m, nd)).copy_from(&model.a_ineq);
    for i in 0..m {
        a_in[(i, nd + i)] = -1.0;
        b_in[i] = model.b_ineq[i];
    }
    for k in 0..m + 2 * ne {
        a_in[(m + k, nd + k)] = -1.0;
    }
    // A_eq d - u + v = b_eq
    let mut a_eq = DMatrix::zeros(ne, nw);
    a_eq.view_mut((0, 0), (ne, nd)).copy_from(&model.a_eq);
    for j in 0..ne {
        a_eq[(j, nd + m + j)] = -1.0;
        a_eq[(j, nd + m + ne + j)] = 1.0;
    }
    let elastic = QpModel {
        h,
        c,
        a_ineq: a_in,
        b_ineq: b_in,
        a_eq,
        b_eq: model.b_eq.clone(),
    };
    let (cand, _) = solve_core(&elastic, opts);
    let d = cand.d.rows(0, nd).into_owned();
    (d.clone(), total_violation(model, &d))
}

fn total_violation(model: &QpModel, d: &DVector<f64>) -> f64 {
    let ineq: f64 = (&model.a_ineq * d - &model.b_ineq)
        .iter()
        .map(|v| v.max(0.0))
        .sum();
    let eq: f64 = (&model.a_eq * d - &model.b_eq)
        .iter()
        .map(|v| v.abs())
        .sum();
    ineq + eq
}
