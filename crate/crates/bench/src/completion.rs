//! Nonnegative low-rank matrix completion on the fixed-rank manifold.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsqo::manifold::derive_seed;
use rsqo::problem::{LinearFunction, Multipliers, SmoothFunction};
use rsqo::rsqo::{solve_with_monitor, IterateState, IterationRecord, Monitor};
use rsqo::{ManifoldKind, Point, RnloProblem, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::instance::rows;

/// Random starts tried by [`CompletionInstance::feasible_start`].
pub const FEASIBILITY_ATTEMPTS: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionInstance {
    pub q: usize,
    pub s: usize,
    pub p: usize,
    pub seed: u64,
    /// Target matrix `T V`.
    #[serde(with = "rows")]
    pub a: DMatrix<f64>,
    /// Known entries `J`, row-major sorted.
    pub known: Vec<[usize; 2]>,
    /// Exactly matched entries `C`, a subset of `known`.
    pub exact: Vec<[usize; 2]>,
}

/// `0.5 ||W o (X - A)||^2` for a 0/1 mask `W`.
#[derive(Debug, Clone)]
pub struct MaskedLeastSquares {
    pub mask: DMatrix<f64>,
    pub target: DMatrix<f64>,
}

impl SmoothFunction for MaskedLeastSquares {
    fn value(&self, x: &DMatrix<f64>) -> f64 {
        0.5 * (x - &self.target).component_mul(&self.mask).norm_squared()
    }
    fn gradient(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        (x - &self.target).component_mul(&self.mask)
    }
    fn hess_vec(&self, _x: &DMatrix<f64>, dir: &DMatrix<f64>) -> DMatrix<f64> {
        dir.component_mul(&self.mask)
    }
}

fn rank(a: &DMatrix<f64>) -> usize {
    let sv = a.singular_values();
    let tol = sv.max() * a.nrows().max(a.ncols()) as f64 * f64::EPSILON;
    sv.iter().filter(|v| **v > tol).count()
}

impl CompletionInstance {
    /// Draws `A = T V` with uniform factors until it has rank `p`, then a random
    /// half of the entries as `J` and a random half of `J` as `C`.
    pub fn generate(q: usize, s: usize, p: usize, seed: u64) -> Result<Self> {
        if p == 0 || p > q.min(s) {
            return Err(BenchError::Params(format!("rank {p} for a {q}x{s} matrix")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = loop {
            let t = DMatrix::from_fn(q, p, |_, _| rng.random::<f64>());
            let v = DMatrix::from_fn(p, s, |_, _| rng.random::<f64>());
            let a = t * v;
            if rank(&a) == p {
                break a;
            }
        };
        let mut grid: Vec<[usize; 2]> = (0..q).flat_map(|i| (0..s).map(move |j| [i, j])).collect();
        grid.shuffle(&mut rng);
        let mut known = grid[..(q * s).div_ceil(2)].to_vec();
        let mut exact = known[..known.len().div_ceil(2)].to_vec();
        known.sort_unstable();
        exact.sort_unstable();
        Ok(CompletionInstance {
            q,
            s,
            p,
            seed,
            a,
            known,
            exact,
        })
    }

    pub fn manifold(&self) -> ManifoldKind {
        ManifoldKind::FixedRank(self.q, self.s, self.p)
    }

    /// Entries outside `J`, row-major.
    pub fn unknown(&self) -> Vec<[usize; 2]> {
        (0..self.q)
            .flat_map(|i| (0..self.s).map(move |j| [i, j]))
            .filter(|e| self.known.binary_search(e).is_err())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(BenchError::Params(msg));
        self.manifold().validate()?;
        if self.a.shape() != (self.q, self.s) {
            return bad(format!(
                "target is {:?}, expected {:?}",
                self.a.shape(),
                (self.q, self.s)
            ));
        }
        let in_grid = |e: &[usize; 2]| e[0] < self.q && e[1] < self.s;
        if !self.known.iter().all(in_grid) || !self.known.windows(2).all(|w| w[0] < w[1]) {
            return bad("known entries must be sorted, distinct and inside the grid".into());
        }
        if !self
            .exact
            .iter()
            .all(|e| self.known.binary_search(e).is_ok())
            || !self.exact.windows(2).all(|w| w[0] < w[1])
        {
            return bad("exact entries must be sorted, distinct known entries".into());
        }
        Ok(())
    }

    /// Objective on `J \ C`, `-X_ij <= 0` outside `J`, `X_ij = A_ij` on `C`.
    pub fn problem(&self) -> RnloProblem {
        let shape = (self.q, self.s);
        let mut mask = DMatrix::zeros(self.q, self.s);
        for &[i, j] in &self.known {
            mask[(i, j)] = 1.0;
        }
        for &[i, j] in &self.exact {
            mask[(i, j)] = 0.0;
        }
        let f = MaskedLeastSquares {
            mask,
            target: self.a.clone(),
        };
        let name = format!("completion-{}x{}-r{}", self.q, self.s, self.p);
        let mut prob = RnloProblem::new(name, self.manifold(), Arc::new(f));
        for [i, j] in self.unknown() {
            prob = prob.with_inequality(Arc::new(LinearFunction::entry(shape, i, j, -1.0, 0.0)));
        }
        for &[i, j] in &self.exact {
            prob = prob.with_equality(Arc::new(LinearFunction::entry(
                shape,
                i,
                j,
                1.0,
                -self.a[(i, j)],
            )));
        }
        prob
    }

    /// Rank-`p` projection of a matrix that matches `A` on `C` and is uniform
    /// in `[0, max A)` elsewhere. Fully random points usually have infeasible
    /// linearized constraints.
    pub fn initial_guess(&self, seed: u64) -> Result<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let top = self.a.max();
        let mut m = DMatrix::from_fn(self.q, self.s, |_, _| rng.random::<f64>() * top);
        for &[i, j] in &self.exact {
            m[(i, j)] = self.a[(i, j)];
        }
        Ok(Point::project_onto(self.manifold(), m)?)
    }

    /// A point whose largest constraint violation is at most `tol`, found by
    /// running the solver on the constraints alone from seeded initial guesses.
    pub fn feasible_start(&self, tol: f64, seed: u64) -> Result<Point> {
        let mut best = f64::INFINITY;
        for attempt in 0..FEASIBILITY_ATTEMPTS {
            let s = derive_seed(seed, attempt);
            let x0 = self.initial_guess(s)?;
            match self.feasible_start_from(&x0, tol, s) {
                Ok(x) => return Ok(x),
                Err(BenchError::NoFeasibleStart { violation, .. }) => best = best.min(violation),
                Err(e) => return Err(e),
            }
        }
        Err(BenchError::NoFeasibleStart {
            tol,
            violation: best,
        })
    }

    /// Like [`feasible_start`](Self::feasible_start) from a given point; a point
    /// that is already within `tol` is returned as is.
    pub fn feasible_start_from(&self, x0: &Point, tol: f64, seed: u64) -> Result<Point> {
        let prob = self.problem();
        if prob.max_violation(x0) <= tol {
            return Ok(x0.clone());
        }
        let zero = Arc::new(LinearFunction::new(DMatrix::zeros(self.q, self.s), 0.0));
        let feas = prob.with_objective(format!("{}-feasibility", prob.name()), zero);
        let cfg = SolverConfig {
            seed,
            residual_tol: 0.0,
            max_iter: 500,
            max_time: 60.0,
            ..SolverConfig::default()
        };
        let mut stop = StopWhenFeasible { prob: &feas, tol };
        let eta0 = Multipliers::zeros(feas.m(), feas.n());
        let (state, _) = solve_with_monitor(&feas, x0, &eta0, &cfg, &mut stop)?;
        let violation = feas.max_violation(&state.x);
        if violation <= tol {
            Ok(state.x)
        } else {
            Err(BenchError::NoFeasibleStart { tol, violation })
        }
    }
}

struct StopWhenFeasible<'a> {
    prob: &'a RnloProblem,
    tol: f64,
}

impl Monitor for StopWhenFeasible<'_> {
    fn should_stop(&mut self, state: &IterateState, _record: &IterationRecord) -> bool {
        self.prob.max_violation(&state.x) <= self.tol
    }
}
