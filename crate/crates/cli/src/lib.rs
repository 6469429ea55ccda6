//! Command dispatch for the `robust-split` binary.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use robust_split::certify::{check_nominal_conditions, check_slater, core_error_bound, estimate_c_hat, SlaterConfig};
use robust_split::instances::{builtin, run_pipeline, summary, PipelineOptions, BUILTIN_NAMES};
use robust_split::oracle::empirical_tau;
use robust_split::solver::{polish_polyhedral, solve, solve_multistart, solve_with_fallback, SolveConfig, StepRule, Verdict};
use robust_split::{residual, subgradient, Error, Problem, Vector};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "robust-split", version, about = "Robust split feasibility with polytopic matrix uncertainty")]
struct Cli {
    /// Emit machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct ProblemArg {
    /// Problem file (JSON).
    #[arg(long)]
    problem: Option<PathBuf>,
    /// Use a built-in instance instead of a file.
    #[arg(long)]
    builtin: Option<String>,
}

impl ProblemArg {
    fn load(&self) -> Result<Problem, CliError> {
        match (&self.problem, &self.builtin) {
            (Some(path), _) => Problem::load(path).map_err(CliError::from),
            (None, Some(name)) => builtin(name).ok_or_else(|| CliError::Usage(unknown_builtin(name))),
            (None, None) => Err(CliError::Usage("one of --problem or --builtin is required".into())),
        }
    }
}

#[derive(Debug, Args)]
struct Sampling {
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    #[arg(long, default_value_t = 10.0)]
    radius: f64,
    #[arg(long, env = "ROBUST_SPLIT_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimize the residual by subgradient descent.
    Solve {
        #[command(flatten)]
        problem: ProblemArg,
        /// `polyak` or `dim:<s0>`; without it Polyak runs first and falls back to `dim:0.5`.
        #[arg(long)]
        step: Option<StepRule>,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
        #[arg(long, env = "ROBUST_SPLIT_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        multistart: usize,
        /// Starting point, comma separated.
        #[arg(long)]
        x0: Option<String>,
        /// Start from a random unit vector when the origin is already feasible.
        #[arg(long)]
        nontrivial: bool,
        /// Project the best point onto the solution set (polyhedral instances).
        #[arg(long)]
        polish: bool,
    },
    /// Evaluate the residual, its parts and a subgradient at a point.
    Residual {
        #[command(flatten)]
        problem: ProblemArg,
        /// Point, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
    },
    /// Slater margin and the error bound it certifies.
    Certify {
        #[command(flatten)]
        problem: ProblemArg,
        #[arg(long, env = "ROBUST_SPLIT_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Sampled lower estimate of the min-norm subgradient constant.
    EstimateBound {
        #[command(flatten)]
        problem: ProblemArg,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Search for a Slater point and report its margin.
    CheckSlater {
        #[command(flatten)]
        problem: ProblemArg,
        #[arg(long, env = "ROBUST_SPLIT_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Cone conditions for a single uncertainty matrix.
    CheckNominal {
        #[command(flatten)]
        problem: ProblemArg,
    },
    /// Largest sampled ratio dist(x, Solv)/p(x).
    EmpiricalTau {
        #[command(flatten)]
        problem: ProblemArg,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 10.0)]
        radius: f64,
        #[arg(long, env = "ROBUST_SPLIT_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// List the built-in instances or run one and check its known constants.
    Examples {
        name: Option<String>,
        /// Print the instance as a problem file instead of running it.
        #[arg(long)]
        dump_problem: bool,
        #[arg(long, env = "ROBUST_SPLIT_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failure(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NotConverged { .. } | Error::NoSamples { .. } => CliError::Failure(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn unknown_builtin(name: &str) -> String {
    format!("unknown built-in instance {name:?}; available: {}", BUILTIN_NAMES.join(", "))
}

fn parse_point(s: &str, n: usize) -> Result<Vector, CliError> {
    let vals = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(format!("bad point {s:?}: {e}")))?;
    if vals.len() != n {
        return Err(CliError::Usage(format!("point has {} coordinates, problem has n = {n}", vals.len())));
    }
    Ok(Vector::from_vec(vals))
}

fn fmt_vec(x: &Vector) -> String {
    let parts: Vec<String> = x.iter().map(|t| format!("{t:.6}")).collect();
    format!("({})", parts.join(", "))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |t| format!("{t:.6e}"))
}

struct Output<'a> {
    json: bool,
    out: &'a mut dyn Write,
}

impl Output<'_> {
    fn emit<T: Serialize>(&mut self, value: &T, text: impl FnOnce() -> Vec<String>) -> std::io::Result<()> {
        if self.json {
            let s = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
            writeln!(self.out, "{s}")
        } else {
            for line in text() {
                writeln!(self.out, "{line}")?;
            }
            Ok(())
        }
    }
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code: 0 on success, 1 when a check or numeric
/// routine fails, 2 on usage or input errors.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_command_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_command_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let mut output = Output { json: cli.json, out };
    match dispatch(cli.command, &mut output) {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Failure(msg)) => {
            let _ = writeln!(err, "failure: {msg}");
            EXIT_FAILURE
        }
    }
}

fn io(e: std::io::Error) -> CliError {
    CliError::Failure(format!("write failed: {e}"))
}

fn dispatch(cmd: Command, out: &mut Output<'_>) -> Result<i32, CliError> {
    match cmd {
        Command::Solve { problem, step, max_iter, seed, multistart, x0, nontrivial, polish } => {
            let p = problem.load()?;
            let x0 = x0.map(|s| parse_point(&s, p.n())).transpose()?;
            let cfg = SolveConfig {
                max_iter,
                tol_feas: p.tol.tol_feas,
                step_rule: step.unwrap_or(StepRule::Polyak),
                seed,
                x0,
                nontrivial_start: nontrivial,
                trace_stride: 0,
            };
            let report = if multistart > 1 {
                solve_multistart(&p, &cfg, multistart)?
            } else if step.is_some() {
                solve(&p, &cfg)?
            } else {
                solve_with_fallback(&p, &cfg, 0.5)?
            };
            let polished = if polish { Some(polish_polyhedral(&p, &report.x_best)?) } else { None };
            let verdict = match &report.verdict {
                Verdict::Feasible => format!("feasible: p = {:.3e} after {} iterations", report.p_best, report.iterations),
                Verdict::ResidualFloor { p_floor } => {
                    format!("residual-floor: p_floor = {p_floor:.6} after {} iterations", report.iterations)
                }
            };
            let value = json!({ "report": report, "polish": polished });
            out.emit(&value, || {
                let mut lines = vec![
                    verdict,
                    format!("x_best = {}", fmt_vec(&report.x_best)),
                    format!("region = {}", report.region_best),
                ];
                if let Some(pol) = &polished {
                    lines.push(format!("polish = {}", serde_json::to_string(pol).unwrap_or_default()));
                }
                lines
            })
            .map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::Residual { problem, point } => {
            let p = problem.load()?;
            let x = parse_point(&point, p.n())?;
            let ev = residual(&p, &x)?;
            let g = subgradient(&p, &x)?;
            let value = json!({
                "value": ev.value,
                "excess_part": ev.excess,
                "dist_part": ev.dist,
                "region": ev.region,
                "subgradient": g.as_slice(),
            });
            out.emit(&value, || {
                vec![
                    format!("value = {:.12}", ev.value),
                    format!("excess_part = {:.12}", ev.excess),
                    format!("dist_part = {:.12}", ev.dist),
                    format!("region = {}", ev.region),
                    format!("subgradient = {}", fmt_vec(&g)),
                ]
            })
            .map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::Certify { problem, seed } => {
            let p = problem.load()?;
            let slater = check_slater(&p, &SlaterConfig { seed, ..Default::default() })?;
            if !slater.found {
                let value = json!({ "slater": slater, "certificate": null });
                out.emit(&value, || {
                    vec![format!(
                        "no Slater point: {}",
                        slater.reason.clone().unwrap_or_default()
                    )]
                })
                .map_err(io)?;
                return Ok(EXIT_FAILURE);
            }
            let cert = core_error_bound(&p, &slater)?;
            let value = json!({ "slater": slater, "certificate": cert });
            out.emit(&value, || {
                let mut lines = vec![
                    format!("eta = {:.6e} at u = {}", slater.eta, fmt_vec(&slater.u)),
                    format!("tau = {} (scope rigorous-core)", fmt_opt(cert.tau)),
                ];
                lines.extend(cert.notes.iter().cloned());
                lines
            })
            .map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::EstimateBound { problem, sampling } => {
            let p = problem.load()?;
            let cert = estimate_c_hat(&p, sampling.samples, sampling.radius, sampling.seed)?;
            out.emit(&cert, || {
                let meta = cert.sample_meta.as_ref();
                let mut lines = vec![
                    format!("c_hat = {} (scope heuristic-sampled)", fmt_opt(cert.c_hat)),
                    format!("tau = {}", fmt_opt(cert.tau)),
                ];
                if let Some(m) = meta {
                    lines.push(format!(
                        "samples = {}, accepted = {}, seed = {}, radius = {}, max gap = {:.3e}",
                        m.count, m.accepted, m.seed, m.box_radius, m.max_gap
                    ));
                }
                lines.extend(cert.notes.iter().cloned());
                lines
            })
            .map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::CheckSlater { problem, seed } => {
            let p = problem.load()?;
            let slater = check_slater(&p, &SlaterConfig { seed, ..Default::default() })?;
            out.emit(&slater, || {
                if slater.found {
                    vec![
                        format!("found: eta = {:.6e}", slater.eta),
                        format!("u = {}", fmt_vec(&slater.u)),
                    ]
                } else {
                    vec![format!("not found: {}", slater.reason.clone().unwrap_or_default())]
                }
            })
            .map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::CheckNominal { problem } => {
            let p = problem.load()?;
            let cert = check_nominal_conditions(&p)?;
            out.emit(&cert, || {
                let mut lines = Vec::new();
                if let Some(r) = &cert.nominal {
                    lines.push(format!("ker Aᵀ ∩ Q° = {{0}}: {}", serde_json::to_string(&r.kernel_condition).unwrap_or_default()));
                    lines.push(format!(
                        "Aᵀ(Q°) ∩ (−C°) = {{0}}: {}",
                        serde_json::to_string(&r.constraint_condition).unwrap_or_default()
                    ));
                }
                lines.extend(cert.notes.iter().cloned());
                lines
            })
            .map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::EmpiricalTau { problem, samples, radius, seed } => {
            let p = problem.load()?;
            let tau = empirical_tau(&p, samples, radius, seed)?;
            out.emit(&tau, || {
                vec![
                    format!("sup ratio = {:.9} at {}", tau.sup_ratio, fmt_vec(&tau.argmax_point)),
                    format!("evaluated {} of {} samples (seed {})", tau.evaluated, tau.samples, tau.seed),
                    format!("solution set empty suspected: {}", tau.solv_empty_suspected),
                ]
            })
            .map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::Examples { name: None, .. } => {
            let list: Vec<_> = BUILTIN_NAMES.iter().map(|n| json!({ "name": n, "summary": summary(n) })).collect();
            out.emit(&list, || BUILTIN_NAMES.iter().map(|n| format!("{n:<18} {}", summary(n).unwrap_or(""))).collect())
                .map_err(io)?;
            Ok(EXIT_OK)
        }
        Command::Examples { name: Some(name), dump_problem, seed, samples } => {
            let p = builtin(&name).ok_or_else(|| CliError::Usage(unknown_builtin(&name)))?;
            if dump_problem {
                writeln!(out.out, "{}", p.to_json()).map_err(io)?;
                return Ok(EXIT_OK);
            }
            let opts = PipelineOptions { seed, c_hat_samples: samples, ..Default::default() };
            let report = run_pipeline(&name, &opts)?.expect("instance exists");
            out.emit(&report, || {
                let mut lines = vec![format!("{} (seed {})", report.instance, report.seed)];
                for c in &report.checks {
                    lines.push(format!(
                        "{} {}: {:.9} (expected {}, {})",
                        if c.passed { "PASS" } else { "FAIL" },
                        c.name,
                        c.value,
                        c.expected,
                        serde_json::to_value(c.basis).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
                    ));
                }
                lines
            })
            .map_err(io)?;
            Ok(if report.passed { EXIT_OK } else { EXIT_FAILURE })
        }
    }
}
