//! Independent re-checks of solver traces and subproblem certificates.

use rsqo::rsqo::{IterationContext, Monitor, SolveTrace, SolverConfig, Verdict};

/// Recomputes the subproblem optimality conditions from the raw model and
/// solution of every iteration.
#[derive(Debug, Default)]
pub struct CertificateMonitor {
    pub worst: f64,
    pub subproblems: usize,
}

impl Monitor for CertificateMonitor {
    fn on_subproblem(&mut self, ctx: &IterationContext<'_>) {
        let (model, sol) = (ctx.model, ctx.solution);
        let stat = &model.h * &sol.d
            + &model.c
            + model.a_ineq.transpose() * &sol.eta.mu
            + model.a_eq.transpose() * &sol.eta.lambda;
        let slack = &model.a_ineq * &sol.d - &model.b_ineq;
        let eq = &model.a_eq * &sol.d - &model.b_eq;
        let mut worst = stat.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (i, s) in slack.iter().enumerate() {
            let mu = sol.eta.mu[i];
            worst = worst
                .max(s.max(0.0))
                .max((-mu).max(0.0))
                .max((mu * s).abs());
        }
        for e in eq.iter() {
            worst = worst.max(e.abs());
        }
        if worst.is_nan() {
            worst = f64::INFINITY;
        }
        self.worst = self.worst.max(worst);
        self.subproblems += 1;
    }
}

fn rel_tol(v: f64) -> f64 {
    1e-12 * v.abs().max(1.0)
}

/// Armijo acceptance and minimality, penalty monotonicity and stabilization,
/// merit monotonicity after stabilization and multiplier sign, re-derived
/// from the stored records. Returns a description of every violation.
pub fn trace_violations(trace: &SolveTrace, cfg: &SolverConfig) -> Vec<String> {
    let mut out = Vec::new();
    let recs = &trace.records;
    for r in recs {
        if r.alpha == 0.0 {
            continue;
        }
        let lhs = cfg.gamma * r.alpha * r.quad_form;
        let drop = r.merit_prev - r.merit;
        if lhs > drop + rel_tol(r.merit_prev) {
            out.push(format!("iter {}: Armijo fails ({lhs:e} > {drop:e})", r.k));
        }
        if r.backtracks > 0 {
            let rejected = r.rejected_merit.expect("rejected trial merit");
            let prev_lhs = cfg.gamma * (r.alpha / cfg.beta) * r.quad_form;
            if prev_lhs <= r.merit_prev - rejected - rel_tol(r.merit_prev) {
                out.push(format!(
                    "iter {}: larger step {:e} was acceptable",
                    r.k,
                    r.alpha / cfg.beta
                ));
            }
        } else if r.alpha != 1.0 {
            out.push(format!(
                "iter {}: alpha {} without backtracks",
                r.k, r.alpha
            ));
        }
    }
    let mut prev_rho = cfg.rho_init;
    for r in recs {
        if r.rho < prev_rho {
            out.push(format!(
                "iter {}: rho decreased {prev_rho} -> {}",
                r.k, r.rho
            ));
        }
        prev_rho = r.rho;
    }
    if let Some(last) = recs.last() {
        if trace.verdict == Verdict::Converged {
            let half = recs.len() / 2;
            if recs[half..].iter().any(|r| r.rho != last.rho) {
                out.push("rho changed during the final half of the run".to_string());
            }
        }
        let stable_from = recs
            .iter()
            .rposition(|r| r.rho != last.rho)
            .map_or(0, |i| i + 1);
        for w in recs[stable_from..].windows(2) {
            if w[1].merit > w[0].merit {
                out.push(format!(
                    "iter {}: merit increased after rho stabilized",
                    w[1].k
                ));
            }
        }
    }
    out
}
