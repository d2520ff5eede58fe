use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rsqo::rsqo::{IterationContext, Monitor};
use rsqo::{BStrategy, SolverConfig, Verdict};
use rsqo_bench::runner::DEFAULT_START_TOL;
use rsqo_bench::trace::write_trace;
use rsqo_bench::{run, run_trial, BenchError, Instance, ProblemParams, RunSpec, TrialOptions};

#[derive(Parser)]
#[command(
    name = "rsqo",
    version,
    about = "Constrained optimization on Riemannian manifolds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark instance and write it as JSON.
    Gen {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one instance.
    Solve(Box<SolveArgs>),
    /// Run a batch of seeded trials described by a JSON spec.
    Bench {
        #[arg(long)]
        spec: PathBuf,
        /// Output directory; defaults to the run spec's `out` field.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record every time as zero.
        #[arg(long)]
        no_timing: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Completion,
    BalancedCut,
}

#[derive(Args)]
struct ProblemArgs {
    #[arg(long, value_enum, default_value = "completion")]
    problem: Family,
    #[arg(long, default_value_t = 4)]
    q: usize,
    #[arg(long, default_value_t = 8)]
    s: usize,
    /// Rank (completion).
    #[arg(long, default_value_t = 2)]
    p: usize,
    /// Edge probability (balanced cut).
    #[arg(long, default_value_t = 0.01)]
    density: f64,
}

impl ProblemArgs {
    fn params(&self) -> ProblemParams {
        match self.problem {
            Family::Completion => ProblemParams::Completion {
                q: self.q,
                s: self.s,
                p: self.p,
            },
            Family::BalancedCut => ProblemParams::BalancedCut {
                q: self.q,
                s: self.s,
                density: self.density,
            },
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BArg {
    ModifiedHessian,
    Identity,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Read the instance from a file written by `gen` instead of generating it.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Seed for the instance, start point and tangent bases.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    rho_init: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Hessian eigenvalue floor; defaults to 1e-5 (completion) or 1e-8 (balanced cut).
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_enum)]
    b_strategy: Option<BArg>,
    #[arg(long)]
    residual_tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    max_time: Option<f64>,
    /// Constraint violation accepted for a completion start point.
    #[arg(long, default_value_t = DEFAULT_START_TOL)]
    start_tol: f64,
    /// Per-iteration trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write every subproblem in plain text to this file.
    #[arg(long)]
    dump_qp: Option<PathBuf>,
    /// Record every time as zero.
    #[arg(long)]
    no_timing: bool,
}

impl SolveArgs {
    fn config(&self, params: &ProblemParams) -> SolverConfig {
        let mut cfg = params.default_config();
        cfg.seed = self.seed;
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut cfg.rho_init, self.rho_init);
        set(&mut cfg.beta, self.beta);
        set(&mut cfg.gamma, self.gamma);
        set(&mut cfg.epsilon, self.epsilon);
        set(&mut cfg.delta, self.delta);
        set(&mut cfg.residual_tol, self.residual_tol);
        set(&mut cfg.max_time, self.max_time);
        if let Some(n) = self.max_iter {
            cfg.max_iter = n;
        }
        if let Some(b) = self.b_strategy {
            cfg.b_strategy = match b {
                BArg::ModifiedHessian => BStrategy::ModifiedHessian,
                BArg::Identity => BStrategy::Identity,
            };
        }
        cfg
    }
}

struct QpDump<W: Write> {
    out: W,
    error: Option<std::io::Error>,
}

impl<W: Write> Monitor for QpDump<W> {
    fn on_subproblem(&mut self, ctx: &IterationContext<'_>) {
        if self.error.is_none() {
            let r = writeln!(self.out, "# iteration {}\n{}", ctx.k, ctx.model.to_text());
            self.error = r.err();
        }
    }
}

fn exit_code(v: Verdict) -> u8 {
    match v {
        Verdict::Converged => 0,
        Verdict::MaxIter => 2,
        Verdict::MaxTime => 3,
        Verdict::Stalled => 4,
        Verdict::QpInfeasible => 5,
        Verdict::RankDrop => 6,
        Verdict::Stopped => 7,
    }
}

fn solve(args: &SolveArgs) -> Result<u8, BenchError> {
    let inst = match &args.instance {
        Some(path) => Instance::from_json(&fs::read_to_string(path)?)?,
        None => args.problem.params().generate(args.seed)?,
    };
    let cfg = args.config(&inst.params());
    cfg.validate()?;
    let opts = TrialOptions {
        start_tol: args.start_tol,
        timing: !args.no_timing,
    };
    let result = match &args.dump_qp {
        Some(path) => {
            let mut dump = QpDump {
                out: BufWriter::new(File::create(path)?),
                error: None,
            };
            let result = run_trial(&inst, &cfg, opts, &mut dump);
            if let Some(e) = dump.error {
                return Err(e.into());
            }
            dump.out.flush()?;
            result
        }
        None => run_trial(&inst, &cfg, opts, &mut ()),
    };
    if let Some(path) = &args.trace {
        let records = result.trace.as_ref().map_or(&[][..], |t| &t.records[..]);
        write_trace(BufWriter::new(File::create(path)?), records)?;
    }
    match (result.verdict, &result.error) {
        (Some(v), _) => {
            println!(
                "{} verdict={} iterations={} residual={:e} time_s={:.6}",
                inst.problem().name(),
                v.as_str(),
                result.iterations,
                result.final_residual,
                result.time_s
            );
            Ok(exit_code(v))
        }
        (None, Some(e)) => Err(BenchError::Params(e.clone())),
        (None, None) => unreachable!("a trial without verdict carries an error"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen { problem, seed, out } => problem
            .params()
            .generate(seed)
            .and_then(|inst| Ok(fs::write(&out, inst.to_json()?)?))
            .map(|_| 0),
        Command::Solve(args) => solve(&args),
        Command::Bench {
            spec,
            out,
            no_timing,
        } => (|| {
            let spec: RunSpec = serde_json::from_str(&fs::read_to_string(&spec)?)?;
            let dir = out
                .or_else(|| spec.out.as_ref().map(PathBuf::from))
                .ok_or_else(|| {
                    BenchError::Params("no output directory (--out or the run spec's `out`)".into())
                })?;
            let summary = run(&spec, &dir, !no_timing)?;
            println!("{}", serde_json::to_string(&summary)?);
            Ok(0)
        })(),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
