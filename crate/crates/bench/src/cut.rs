//! Minimum balanced cut relaxed to the oblique manifold.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsqo::manifold::random_point;
use rsqo::problem::{LinearFunction, QuadraticFunction};
use rsqo::{ManifoldKind, Point, ResidualKind, RnloProblem};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::instance::rows;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutInstance {
    pub q: usize,
    pub s: usize,
    pub density: f64,
    pub seed: u64,
    /// Graph Laplacian `D - W`.
    #[serde(with = "rows")]
    pub l: DMatrix<f64>,
}

impl CutInstance {
    /// Each of the `q(q-1)/2` possible edges is present independently with
    /// probability `density`, with unit weight.
    pub fn generate(q: usize, s: usize, density: f64, seed: u64) -> Result<Self> {
        if !(density > 0.0 && density <= 1.0) {
            return Err(BenchError::Params(format!(
                "density {density} outside (0, 1]"
            )));
        }
        ManifoldKind::Oblique(q, s).validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut l = DMatrix::zeros(q, q);
        for i in 0..q {
            for j in i + 1..q {
                if rng.random::<f64>() < density {
                    l[(i, j)] = -1.0;
                    l[(j, i)] = -1.0;
                    l[(i, i)] += 1.0;
                    l[(j, j)] += 1.0;
                }
            }
        }
        Ok(CutInstance {
            q,
            s,
            density,
            seed,
            l,
        })
    }

    pub fn manifold(&self) -> ManifoldKind {
        ManifoldKind::Oblique(self.q, self.s)
    }

    pub fn validate(&self) -> Result<()> {
        self.manifold().validate()?;
        if self.l.shape() != (self.q, self.q) || self.l != self.l.transpose() {
            return Err(BenchError::Params(
                "L must be a symmetric q x q matrix".into(),
            ));
        }
        Ok(())
    }

    /// `-1/4 tr(X^T L X)` subject to `X^T e = 0`.
    pub fn problem(&self) -> RnloProblem {
        let f = QuadraticFunction {
            a: &self.l * -0.5,
            b: DMatrix::zeros(self.q, self.s),
            c: 0.0,
        };
        let mut prob = RnloProblem::new(
            format!("balanced-cut-{}x{}", self.q, self.s),
            self.manifold(),
            Arc::new(f),
        )
        .with_residual_kind(ResidualKind::KktWithManifoldViolation);
        for j in 0..self.s {
            let mut coeff = DMatrix::zeros(self.q, self.s);
            coeff.column_mut(j).fill(1.0);
            prob = prob.with_equality(Arc::new(LinearFunction::new(coeff, 0.0)));
        }
        prob
    }

    pub fn start(&self, seed: u64) -> Result<Point> {
        Ok(random_point(self.manifold(), seed)?)
    }
}
