//! Problem parameters and serialized instances.

use rsqo::{Point, RnloProblem, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::completion::CompletionInstance;
use crate::cut::CutInstance;
use crate::error::Result;

/// Dense matrices as arrays of rows.
pub(crate) mod rows {
    use nalgebra::DMatrix;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, ser: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(de)?;
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
    }
}

/// Which benchmark family to generate, with its size parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "snake_case")]
pub enum ProblemParams {
    Completion { q: usize, s: usize, p: usize },
    BalancedCut { q: usize, s: usize, density: f64 },
}

impl ProblemParams {
    pub fn generate(&self, seed: u64) -> Result<Instance> {
        Ok(match *self {
            ProblemParams::Completion { q, s, p } => {
                Instance::Completion(CompletionInstance::generate(q, s, p, seed)?)
            }
            ProblemParams::BalancedCut { q, s, density } => {
                Instance::BalancedCut(CutInstance::generate(q, s, density, seed)?)
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemParams::Completion { .. } => "completion",
            ProblemParams::BalancedCut { .. } => "balanced_cut",
        }
    }

    /// Solver defaults for the family: the Hessian floor is 1e-5 for
    /// completion and 1e-8 for balanced cut.
    pub fn default_config(&self) -> SolverConfig {
        let delta = match self {
            ProblemParams::Completion { .. } => 1e-5,
            ProblemParams::BalancedCut { .. } => 1e-8,
        };
        SolverConfig {
            delta,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "snake_case")]
pub enum Instance {
    Completion(CompletionInstance),
    BalancedCut(CutInstance),
}

impl Instance {
    pub fn params(&self) -> ProblemParams {
        match self {
            Instance::Completion(c) => ProblemParams::Completion {
                q: c.q,
                s: c.s,
                p: c.p,
            },
            Instance::BalancedCut(c) => ProblemParams::BalancedCut {
                q: c.q,
                s: c.s,
                density: c.density,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Instance::Completion(c) => c.validate(),
            Instance::BalancedCut(c) => c.validate(),
        }
    }

    pub fn problem(&self) -> RnloProblem {
        match self {
            Instance::Completion(c) => c.problem(),
            Instance::BalancedCut(c) => c.problem(),
        }
    }

    /// Starting point: a feasible start within `tol` for completion, a random
    /// point for balanced cut.
    pub fn start(&self, tol: f64, seed: u64) -> Result<Point> {
        match self {
            Instance::Completion(c) => c.feasible_start(tol, seed),
            Instance::BalancedCut(c) => c.start(seed),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: Instance = serde_json::from_str(text)?;
        inst.validate()?;
        Ok(inst)
    }
}
