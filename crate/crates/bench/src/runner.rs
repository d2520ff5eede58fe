//! Seeded trials and batch summaries.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use rsqo::manifold::derive_seed;
use rsqo::problem::{kkt_residual, Multipliers};
use rsqo::rsqo::{solve_with_monitor, Monitor};
use rsqo::{SolveTrace, SolverConfig, Verdict};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{BenchError, Result};
use crate::instance::{Instance, ProblemParams};
use crate::trace::{crossings, write_trace, Crossing};

/// Seed stream used for the starting point of a trial.
const START_STREAM: u64 = 1;

/// Constraint violation accepted for a completion start point.
pub const DEFAULT_START_TOL: f64 = 1e-2;

fn default_start_tol() -> f64 {
    DEFAULT_START_TOL
}

/// A batch of seeded trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    #[serde(flatten)]
    pub params: ProblemParams,
    pub trials: usize,
    /// Base seed; trial `t` uses `derive_seed(seed, t)` for its instance,
    /// start and solver.
    #[serde(default)]
    pub seed: u64,
    /// Solver settings overriding the family defaults, keyed like [`SolverConfig`].
    #[serde(default)]
    pub solver: Map<String, Value>,
    #[serde(default = "default_start_tol")]
    pub start_tol: f64,
    /// Output directory used when none is given on the command line.
    #[serde(default)]
    pub out: Option<String>,
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(BenchError::Params("trials must be at least 1".into()));
        }
        self.config()?;
        Ok(())
    }

    /// Family defaults with the run spec's overrides applied.
    pub fn config(&self) -> Result<SolverConfig> {
        let mut base = match serde_json::to_value(self.params.default_config())? {
            Value::Object(m) => m,
            _ => unreachable!("config serializes to an object"),
        };
        for (k, v) in &self.solver {
            if !base.contains_key(k) {
                return Err(BenchError::Params(format!("unknown solver setting `{k}`")));
            }
            base.insert(k.clone(), v.clone());
        }
        let cfg: SolverConfig = serde_json::from_value(Value::Object(base))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn trial_seed(&self, t: usize) -> u64 {
        derive_seed(self.seed, t as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOptions {
    pub start_tol: f64,
    /// When false, every recorded time is written as zero so that traces are
    /// reproducible byte for byte.
    pub timing: bool,
}

impl Default for TrialOptions {
    fn default() -> Self {
        TrialOptions {
            start_tol: DEFAULT_START_TOL,
            timing: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    /// Absent when the trial failed before or outside the solver loop.
    pub verdict: Option<Verdict>,
    pub error: Option<String>,
    pub success: bool,
    pub iterations: usize,
    /// Time of the last iteration.
    pub time_s: f64,
    pub initial_residual: f64,
    pub final_residual: f64,
    pub crossings: Vec<Crossing>,
    #[serde(skip)]
    pub trace: Option<SolveTrace>,
}

impl TrialResult {
    fn failed(seed: u64, err: BenchError) -> Self {
        TrialResult {
            seed,
            verdict: None,
            error: Some(err.to_string()),
            success: false,
            iterations: 0,
            time_s: 0.0,
            initial_residual: f64::NAN,
            final_residual: f64::NAN,
            crossings: Vec::new(),
            trace: None,
        }
    }
}

/// Solves one instance from its seeded start with `eta0 = 0`. Solver errors
/// are folded into the result.
pub fn run_trial(
    inst: &Instance,
    cfg: &SolverConfig,
    opts: TrialOptions,
    monitor: &mut dyn Monitor,
) -> TrialResult {
    let seed = cfg.seed;
    match try_trial(inst, cfg, opts, monitor) {
        Ok(r) => r,
        Err(e) => TrialResult::failed(seed, e),
    }
}

fn try_trial(
    inst: &Instance,
    cfg: &SolverConfig,
    opts: TrialOptions,
    monitor: &mut dyn Monitor,
) -> Result<TrialResult> {
    let prob = inst.problem();
    let x0 = inst.start(opts.start_tol, derive_seed(cfg.seed, START_STREAM))?;
    let eta0 = Multipliers::zeros(prob.m(), prob.n());
    let (_, mut trace) = solve_with_monitor(&prob, &x0, &eta0, cfg, monitor)?;
    if !opts.timing {
        trace.elapsed_s = 0.0;
        for r in &mut trace.records {
            r.time_s = 0.0;
        }
    }
    debug_assert_eq!(
        trace.initial_residual,
        kkt_residual(&prob, &x0, &eta0)?.residual
    );
    Ok(TrialResult {
        seed: cfg.seed,
        verdict: Some(trace.verdict),
        error: None,
        success: trace.verdict == Verdict::Converged,
        iterations: trace.records.len(),
        time_s: trace.records.last().map_or(0.0, |r| r.time_s),
        initial_residual: trace.initial_residual,
        final_residual: trace.final_residual,
        crossings: crossings(trace.initial_residual, &trace.records),
        trace: Some(trace),
    })
}

/// Success ratio and means over successful trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub problem: String,
    pub params: ProblemParams,
    pub trials: usize,
    pub successes: usize,
    pub success_ratio: f64,
    /// Absent when no trial succeeded.
    pub mean_time_s: Option<f64>,
    pub mean_iters: Option<f64>,
    pub seeds: Vec<u64>,
}

impl Summary {
    pub fn from_trials(params: ProblemParams, results: &[TrialResult]) -> Self {
        let ok: Vec<&TrialResult> = results.iter().filter(|r| r.success).collect();
        let mean = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        Summary {
            problem: params.name().to_string(),
            params,
            trials: results.len(),
            successes: ok.len(),
            success_ratio: ok.len() as f64 / results.len() as f64,
            mean_time_s: mean(ok.iter().map(|r| r.time_s).collect()),
            mean_iters: mean(ok.iter().map(|r| r.iterations as f64).collect()),
            seeds: results.iter().map(|r| r.seed).collect(),
        }
    }
}

pub fn trace_file_name(t: usize) -> String {
    format!("trial_{t:03}.csv")
}

/// Runs every trial of `spec`, writing `trial_NNN.csv`, `trials.json` and
/// `summary.json` into `out_dir`.
pub fn run(spec: &RunSpec, out_dir: &Path, timing: bool) -> Result<Summary> {
    spec.validate()?;
    let base = spec.config()?;
    fs::create_dir_all(out_dir)?;
    let opts = TrialOptions {
        start_tol: spec.start_tol,
        timing,
    };
    let mut results = Vec::with_capacity(spec.trials);
    for t in 0..spec.trials {
        let seed = spec.trial_seed(t);
        let cfg = SolverConfig {
            seed,
            ..base.clone()
        };
        let result = match spec.params.generate(seed) {
            Ok(inst) => run_trial(&inst, &cfg, opts, &mut ()),
            Err(e) => TrialResult::failed(seed, e),
        };
        let records = result.trace.as_ref().map_or(&[][..], |tr| &tr.records[..]);
        write_trace(
            BufWriter::new(File::create(out_dir.join(trace_file_name(t)))?),
            records,
        )?;
        results.push(result);
    }
    let summary = Summary::from_trials(spec.params, &results);
    fs::write(
        out_dir.join("trials.json"),
        serde_json::to_string_pretty(&results)?,
    )?;
    fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(summary)
}
