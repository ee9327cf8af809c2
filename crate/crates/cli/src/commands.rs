use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;

use affproj::batch::{map_parallel, map_sequential};
use affproj::diagnostics::Phase;
use affproj::io::{bench_to_string, trace_to_string, write_atomic, BenchRow};
use affproj::mmup::{self, MmupProblem};
use affproj::oracle::{direct_projection, oracle_projection};
use affproj::solver::{StopReason, StoppingRule};
use affproj::{solve, Algorithm, DenseMatrix, Point, SolveResult, SolverConfig, WindowPolicy};

use crate::config::{load_source, Instance, RunArgs, RunConfig, Source, SEED_ENV};

/// Fejér margins above this fail `verify`.
const FEJER_LIMIT: f64 = 1e-9;
/// Distance from the easy set above which `verify` fails for the second algorithm.
const M1_LIMIT: f64 = 1e-8;

/// Writes `text` to `path`, or to stdout for `-`.
fn emit(path: &Path, text: &str) -> Result<()> {
    if path == Path::new("-") {
        std::io::stdout().write_all(text.as_bytes())?;
        Ok(())
    } else {
        write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
    }
}

fn to_stdout(path: &Option<PathBuf>) -> bool {
    path.as_deref() == Some(Path::new("-"))
}

/// Prints the summary where it does not collide with data on stdout.
fn report(text: &str, data_on_stdout: bool) {
    if data_on_stdout {
        eprint!("{text}");
    } else {
        print!("{text}");
    }
}

fn exact_projection(inst: &Instance) -> Result<Point> {
    let p = match &inst.mmup {
        Some(prob) => direct_projection(&inst.x0, &prob.export_rows()?)?,
        None => oracle_projection(&inst.sets, &inst.x0)?,
    };
    Ok(p)
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>().join(" ")
}

fn solve_configured(cfg: &RunConfig, inst: &Instance, oracle: Option<Point>) -> Result<SolveResult> {
    let solver = cfg.solver_config(oracle, inst.mmup.is_some());
    let result = solve(&inst.sets, &inst.x0, &solver)?;
    if result.stop_reason == StopReason::Infeasible {
        bail!("iterate became non-finite after {} iterations; the problem looks infeasible", result.iterations);
    }
    Ok(result)
}

fn summary(cfg: &RunConfig, inst: &Instance, result: &SolveResult, oracle: Option<&Point>) -> String {
    let mut s = String::new();
    match cfg.algorithm {
        Algorithm::Map => {
            let _ = writeln!(s, "algorithm      map");
        }
        alg => {
            let _ = writeln!(s, "algorithm      {alg} ({})", cfg.policy);
        }
    }
    let _ = writeln!(s, "dimension      {} ({} sets)", inst.x0.dim(), inst.k());
    let _ = writeln!(
        s,
        "iterations     {} ({})",
        result.iterations,
        if result.converged { "converged" } else { "not converged" }
    );
    let _ = writeln!(s, "residuals      {}", fmt_list(&result.final_residuals));
    if let Some(m) = oracle {
        let _ = writeln!(s, "dist to oracle {:.3e}", result.solution.distance(m));
    }
    if let Some(prob) = &inst.mmup {
        let curve = mmup::residual_per_v_projection(prob, result);
        let head: Vec<f64> = curve.iter().copied().take(6).collect();
        let _ = writeln!(s, "V projections  {}", result.projections_onto(mmup::SET_V));
        let _ = writeln!(s, "pencil resid.  {}{}", fmt_list(&head), if curve.len() > head.len() { " ..." } else { "" });
        let _ = writeln!(s, "final pencil   {:.3e}", mmup::pencil_residual_flat(prob, &result.solution));
        let _ = writeln!(s, "update norm    {:.6}", result.solution.distance(&inst.x0));
    }
    s
}

pub fn cmd_run(args: &RunArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let inst = cfg.load()?;
    let oracle = if cfg.oracle { Some(exact_projection(&inst)?) } else { None };
    let result = solve_configured(&cfg, &inst, oracle.clone())?;
    if let Some(path) = &cfg.output {
        emit(path, &trace_to_string(&result.trace, inst.k())?)?;
    }
    report(&summary(&cfg, &inst, &result, oracle.as_ref()), to_stdout(&cfg.output));
    Ok(())
}

fn format_vector(p: &Point) -> String {
    let mut s = p.as_slice().iter().map(f64::to_string).collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

fn format_matrix(m: &DenseMatrix) -> String {
    let mut s = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|j| m.get(i, j).to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn format_update(prob: &MmupProblem, p: &Point) -> Result<String> {
    let (k, d) = mmup::extract_update(&prob.to_matrix(p)?)?;
    Ok(format!("# K\n{}# D\n{}", format_matrix(&k), format_matrix(&d)))
}

/// Prints the direct projection `P_M(x0)`.
pub fn cmd_oracle(args: &RunArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let inst = cfg.load()?;
    let exact = exact_projection(&inst)?;
    let text = match &inst.mmup {
        Some(prob) => format_update(prob, &exact)?,
        None => format_vector(&exact),
    };
    let out = cfg.output.clone().unwrap_or_else(|| PathBuf::from("-"));
    emit(&out, &text)?;
    let residuals: Vec<f64> = inst.sets.iter().map(|s| affproj::sets::residual(s, &exact)).collect();
    let mut s = String::new();
    let _ = writeln!(s, "distance from x0 {:.6e}", exact.distance(&inst.x0));
    let _ = writeln!(s, "residuals        {}", fmt_list(&residuals));
    eprint!("{s}");
    Ok(())
}

/// Runs with monitors on and reports the convergence conditions.
pub fn cmd_verify(args: &RunArgs) -> Result<bool> {
    let mut cfg = args.resolve()?;
    cfg.monitors = true;
    let inst = cfg.load()?;
    let oracle = match exact_projection(&inst) {
        Ok(p) => Some(p),
        Err(e) if cfg.oracle => return Err(e),
        Err(e) => {
            eprintln!("note: no oracle ({e}); Fejér tracking disabled");
            None
        }
    };
    let result = solve_configured(&cfg, &inst, oracle.clone())?;
    let rep = result.report.clone().unwrap_or_default();

    let mut s = summary(&cfg, &inst, &result, oracle.as_ref());
    let mut ok = true;
    if let Some(f) = &rep.fejer {
        let pass = f.worst_margin <= FEJER_LIMIT;
        ok &= pass;
        let _ = writeln!(
            s,
            "fejer          worst margin {:.2e}, {} violations [{}]",
            f.worst_margin,
            f.violations,
            verdict(pass)
        );
    }
    if !rep.condition_b_residuals.is_empty() {
        let _ = writeln!(s, "condition B    span residual {:.2e}", rep.max_condition_b_residual());
    }
    if !rep.condition_b_inner.is_empty() {
        let _ = writeln!(s, "condition B    |<x0-xi, xi-m>| {:.2e}", rep.max_condition_b_inner());
    }
    if !rep.b_prime_ratios.is_empty() {
        let _ = writeln!(s, "condition B'   max ratio {:.6}", rep.max_b_prime_ratio());
    }
    if let Some(m) = &oracle {
        let bound = inst.x0.distance(m).powi(2);
        let _ = writeln!(s, "sum of squares {:.6e} (bound {:.6e})", rep.total_sum_of_squares(), bound);
    }
    if cfg.algorithm == Algorithm::Alg2 {
        let worst = rep.m1_residuals.iter().copied().fold(0.0, f64::max);
        let pass = worst <= M1_LIMIT;
        ok &= pass;
        let _ = writeln!(s, "easy set       max residual {worst:.2e} [{}]", verdict(pass));
        let gap = rep.equal_projection_gaps.iter().copied().fold(0.0, f64::max);
        let _ = writeln!(s, "window gap     |P_H(x_i) - P_H(x''_i)| {gap:.2e}");
    }
    if let Some(path) = &cfg.output {
        emit(path, &(serde_json::to_string_pretty(&rep)? + "\n"))?;
    }
    report(&s, to_stdout(&cfg.output));
    Ok(ok)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "ok"
    } else {
        "FAIL"
    }
}

#[derive(Args, Debug, Clone)]
pub struct BenchArgs {
    /// Built-in model-updating experiment (1 or 2). Default when no source is given: 1.
    #[arg(long, value_name = "ID", group = "source")]
    pub experiment: Option<u8>,

    /// JSON problem file `{M, D, K, targets}`.
    #[arg(long, value_name = "FILE", group = "source")]
    pub problem: Option<PathBuf>,

    /// Random family, e.g. `dim=20,k=3,seed=7`.
    #[arg(long, value_name = "SPEC", group = "source")]
    pub random: Option<String>,

    /// Algorithms to sweep (comma separated). Default: map,alg1,alg2.
    #[arg(long, value_name = "ALG", value_delimiter = ',')]
    pub alg: Vec<Algorithm>,

    /// Window sizes to sweep (comma separated). Default: 2..8 for alg1, 1..5 for alg2.
    #[arg(long, value_name = "Q", value_delimiter = ',')]
    pub q: Vec<usize>,

    /// Also run alg1 and alg2 with every hyperplane kept.
    #[arg(long)]
    pub with_all: bool,

    /// Set-residual stopping tolerance. Tighter than for `run` so the last
    /// threshold column is reachable.
    #[arg(long, value_name = "TOL", default_value_t = 1e-12)]
    pub stop_tol: f64,

    #[arg(long, value_name = "N", default_value_t = StoppingRule::default().max_iter)]
    pub max_iter: usize,

    /// Comparison CSV; `-` or absent for standard output.
    #[arg(long, short, value_name = "FILE")]
    pub output: Option<PathBuf>,

    /// Directory receiving one trace CSV per configuration.
    #[arg(long, value_name = "DIR")]
    pub trace_dir: Option<PathBuf>,

    /// Seed for random families. Overridden by AFFPROJ_SEED.
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,

    /// Run configurations one after another.
    #[arg(long)]
    pub sequential: bool,
}

impl BenchArgs {
    fn source(&self) -> Result<Source> {
        let args = RunArgs {
            experiment: self.experiment,
            problem: self.problem.clone(),
            random: self.random.clone(),
            seed: self.seed,
            ..Default::default()
        };
        if args.experiment.is_none() && args.problem.is_none() && args.random.is_none() {
            return Ok(Source::Experiment(1));
        }
        Ok(args.resolve()?.source)
    }

    /// Algorithm and policy pairs in sweep order.
    fn sweep(&self) -> Result<Vec<(Algorithm, WindowPolicy)>> {
        let algs =
            if self.alg.is_empty() { vec![Algorithm::Map, Algorithm::Alg1, Algorithm::Alg2] } else { self.alg.clone() };
        let mut out = Vec::new();
        for alg in algs {
            let default_qs: Vec<usize> = match alg {
                Algorithm::Map => vec![],
                Algorithm::Alg1 => (2..=8).collect(),
                Algorithm::Alg2 => (1..=5).collect(),
            };
            if alg == Algorithm::Map {
                out.push((alg, WindowPolicy::last_q(1)?));
                continue;
            }
            let qs = if self.q.is_empty() { default_qs } else { self.q.clone() };
            for q in qs {
                out.push((alg, WindowPolicy::last_q(q)?));
            }
            if self.with_all {
                out.push((alg, WindowPolicy::All));
            }
        }
        Ok(out)
    }
}

/// Residual of the point each projection onto `V` (or any set, for generic
/// families) is applied to, plus the final point when converged.
fn generic_curve(result: &SolveResult) -> Vec<f64> {
    let mut curve: Vec<f64> =
        result.trace.windows(2).filter(|w| w[1].phase == Phase::SetProjection).map(|w| w[0].residual_max()).collect();
    if result.converged {
        curve.push(result.residual_max());
    }
    curve
}

fn policy_label(alg: Algorithm, policy: WindowPolicy) -> String {
    match alg {
        Algorithm::Map => "-".into(),
        _ => policy.to_string(),
    }
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    if std::env::var(SEED_ENV).is_ok() && args.random.is_none() {
        eprintln!("note: {SEED_ENV} only affects random families");
    }
    let source = args.source()?;
    let inst = load_source(&source)?;
    let sweep = args.sweep()?;
    let stop = StoppingRule { stop_tol: args.stop_tol, max_iter: args.max_iter };
    let keep_points = inst.mmup.is_some();

    let job = |&(alg, policy): &(Algorithm, WindowPolicy)| -> Result<(BenchRow, SolveResult)> {
        let mut cfg = SolverConfig::new(alg, policy);
        cfg.options.stop = stop;
        cfg.options.keep_points = keep_points;
        let result = solve(&inst.sets, &inst.x0, &cfg)?;
        let curve = match &inst.mmup {
            Some(prob) => mmup::residual_per_v_projection(prob, &result),
            None => generic_curve(&result),
        };
        let row = BenchRow::from_curve(
            alg.to_string(),
            policy_label(alg, policy),
            result.iterations,
            result.converged,
            &curve,
        );
        Ok((row, result))
    };
    let results = if args.sequential { map_sequential(&sweep, job) } else { map_parallel(&sweep, job) };

    let mut rows = Vec::with_capacity(results.len());
    for ((alg, policy), r) in sweep.iter().zip(results) {
        let (row, result) = r.with_context(|| format!("{alg} {policy}"))?;
        if let Some(dir) = &args.trace_dir {
            std::fs::create_dir_all(dir)?;
            let name = match alg {
                Algorithm::Map => "trace_map.csv".to_string(),
                _ => format!("trace_{alg}_{}.csv", policy.to_string().replace('-', "_")),
            };
            emit(&dir.join(name), &trace_to_string(&result.trace, inst.k())?)?;
        }
        rows.push(row);
    }
    let out = args.output.clone().unwrap_or_else(|| PathBuf::from("-"));
    emit(&out, &bench_to_string(&rows)?)
}
