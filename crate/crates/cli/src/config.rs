//! Run configuration: command-line flags layered over an optional JSON file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Deserialize;

use affproj::mmup::{self, MmupProblem};
use affproj::random::{random_family, FamilySpec};
use affproj::solver::{SolveOptions, StoppingRule};
use affproj::{AffineSet, Algorithm, Point, SolverConfig, WindowPolicy};

pub const SEED_ENV: &str = "AFFPROJ_SEED";

/// Flags shared by `run`, `oracle` and `verify`.
#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// Built-in model-updating experiment (1 or 2).
    #[arg(long, value_name = "ID", group = "source")]
    pub experiment: Option<u8>,

    /// JSON problem file `{M, D, K, targets}`.
    #[arg(long, value_name = "FILE", group = "source")]
    pub problem: Option<PathBuf>,

    /// Random family, e.g. `dim=20,k=3,seed=7` (optional `codims=2:3:4`, `linear`).
    #[arg(long, value_name = "SPEC", group = "source")]
    pub random: Option<String>,

    /// Algorithm: map, alg1 or alg2.
    #[arg(long, value_name = "ALG")]
    pub alg: Option<Algorithm>,

    /// Window policy: all, condition-b or last-<q>.
    #[arg(long, value_name = "POLICY")]
    pub policy: Option<WindowPolicy>,

    /// Window size; shorthand for `--policy last-<q>`.
    #[arg(long, value_name = "Q")]
    pub q: Option<usize>,

    /// Stop once every set residual is at or below this value.
    #[arg(long, value_name = "TOL")]
    pub stop_tol: Option<f64>,

    /// Cap on outer iterations.
    #[arg(long, value_name = "N")]
    pub max_iter: Option<usize>,

    /// Record the convergence-condition monitors.
    #[arg(long)]
    pub monitors: bool,

    /// Compute the direct projection and track the distance to it.
    #[arg(long)]
    pub oracle: bool,

    /// Output file; `-` for standard output.
    #[arg(long, short, value_name = "FILE")]
    pub output: Option<PathBuf>,

    /// Seed for random families. Overridden by AFFPROJ_SEED.
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,

    /// JSON file with defaults for any of the flags above.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RandomField {
    Text(String),
    Spec(FamilySpec),
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    experiment: Option<u8>,
    problem: Option<PathBuf>,
    random: Option<RandomField>,
    alg: Option<Algorithm>,
    policy: Option<String>,
    q: Option<usize>,
    stop_tol: Option<f64>,
    max_iter: Option<usize>,
    monitors: Option<bool>,
    oracle: Option<bool>,
    output: Option<PathBuf>,
    seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub enum Source {
    Experiment(u8),
    Problem(PathBuf),
    Random(FamilySpec),
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: Source,
    pub algorithm: Algorithm,
    pub policy: WindowPolicy,
    pub stop: StoppingRule,
    pub monitors: bool,
    pub oracle: bool,
    pub output: Option<PathBuf>,
}

/// A loaded problem ready to solve.
pub struct Instance {
    pub sets: Vec<AffineSet>,
    pub x0: Point,
    pub mmup: Option<MmupProblem>,
}

impl Instance {
    pub fn k(&self) -> usize {
        self.sets.len()
    }
}

fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => Ok(Some(v.trim().parse().with_context(|| format!("{SEED_ENV}={v:?} is not an integer"))?)),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(e).context(SEED_ENV),
    }
}

fn read_file_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

impl RunArgs {
    /// Merges flags over the config file, then applies the seed override.
    pub fn resolve(&self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(p) => read_file_config(p)?,
            None => FileConfig::default(),
        };
        let flag_source = self.experiment.is_some() || self.problem.is_some() || self.random.is_some();
        let (experiment, problem, random) = if flag_source {
            (self.experiment, self.problem.clone(), self.random.clone().map(RandomField::Text))
        } else {
            (file.experiment, file.problem, file.random)
        };
        let seed = seed_from_env()?.or(self.seed).or(file.seed);

        let source = match (experiment, problem, random) {
            (Some(id), None, None) => {
                if !(1..=2).contains(&id) {
                    bail!("unknown experiment {id}; expected 1 or 2");
                }
                Source::Experiment(id)
            }
            (None, Some(p), None) => Source::Problem(p),
            (None, None, Some(r)) => {
                let mut spec = match r {
                    RandomField::Text(s) => s.parse::<FamilySpec>()?,
                    RandomField::Spec(s) => s,
                };
                if let Some(seed) = seed {
                    spec.seed = seed;
                }
                Source::Random(spec)
            }
            (None, None, None) => bail!("no problem given; use --experiment, --problem or --random"),
            _ => bail!("give exactly one of experiment, problem or random"),
        };

        let algorithm = self.alg.or(file.alg).unwrap_or(Algorithm::Alg1);
        let policy_flag = match (self.policy, self.q) {
            (Some(p), None) => Some(p),
            (None, Some(q)) => Some(WindowPolicy::last_q(q)?),
            (Some(p), Some(q)) => match p {
                WindowPolicy::LastQ { q: pq } if pq == q => Some(p),
                _ => bail!("--policy {p} conflicts with --q {q}"),
            },
            (None, None) => None,
        };
        let policy = match policy_flag {
            Some(p) => p,
            None => match (file.policy, file.q) {
                (Some(p), _) => p.parse()?,
                (None, Some(q)) => WindowPolicy::last_q(q)?,
                (None, None) => WindowPolicy::All,
            },
        };

        let defaults = StoppingRule::default();
        let stop = StoppingRule {
            stop_tol: self.stop_tol.or(file.stop_tol).unwrap_or(defaults.stop_tol),
            max_iter: self.max_iter.or(file.max_iter).unwrap_or(defaults.max_iter),
        };
        if !(stop.stop_tol.is_finite() && stop.stop_tol > 0.0) {
            bail!("stop tolerance must be positive, got {}", stop.stop_tol);
        }
        if stop.max_iter == 0 {
            bail!("max-iter must be positive");
        }

        Ok(RunConfig {
            source,
            algorithm,
            policy,
            stop,
            monitors: self.monitors || file.monitors.unwrap_or(false),
            oracle: self.oracle || file.oracle.unwrap_or(false),
            output: self.output.clone().or(file.output),
        })
    }
}

impl RunConfig {
    pub fn load(&self) -> Result<Instance> {
        load_source(&self.source)
    }

    pub fn solver_config(&self, oracle: Option<Point>, keep_points: bool) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.algorithm, self.policy);
        cfg.options = SolveOptions { stop: self.stop, monitors: self.monitors, keep_points, oracle };
        cfg
    }
}

pub fn load_source(source: &Source) -> Result<Instance> {
    let prob = match source {
        Source::Experiment(1) => mmup::experiment1()?,
        Source::Experiment(2) => mmup::experiment2()?,
        Source::Experiment(id) => bail!("unknown experiment {id}"),
        Source::Problem(p) => mmup::load_problem(p).with_context(|| format!("loading {}", p.display()))?,
        Source::Random(spec) => {
            let fam = random_family(spec)?;
            return Ok(Instance { sets: fam.sets, x0: fam.x0, mmup: None });
        }
    };
    Ok(Instance { sets: prob.sets(), x0: prob.x0_point(), mmup: Some(prob) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args() -> RunArgs {
        RunArgs { random: Some("dim=10,k=2,seed=3".into()), ..Default::default() }
    }

    #[test]
    fn q_flag_becomes_last_q() {
        let cfg = RunArgs { q: Some(4), ..args() }.resolve().unwrap();
        assert_eq!(cfg.policy, WindowPolicy::LastQ { q: 4 });
    }

    #[test]
    fn conflicting_policy_and_q_rejected() {
        let a = RunArgs { q: Some(4), policy: Some(WindowPolicy::All), ..args() };
        assert!(a.resolve().is_err());
    }

    #[test]
    fn missing_source_rejected() {
        assert!(RunArgs::default().resolve().is_err());
    }

    #[test]
    fn seed_flag_reaches_family() {
        let cfg = RunArgs { seed: Some(99), ..args() }.resolve().unwrap();
        match cfg.source {
            Source::Random(spec) if std::env::var(SEED_ENV).is_err() => assert_eq!(spec.seed, 99),
            Source::Random(_) => {}
            other => panic!("unexpected source {other:?}"),
        }
    }

    #[test]
    fn file_config_fills_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"experiment": 2, "alg": "alg2", "q": 3, "max_iter": 7}"#).unwrap();
        let cfg = RunArgs { config: Some(path), ..Default::default() }.resolve().unwrap();
        assert!(matches!(cfg.source, Source::Experiment(2)));
        assert_eq!(cfg.algorithm, Algorithm::Alg2);
        assert_eq!(cfg.policy, WindowPolicy::LastQ { q: 3 });
        assert_eq!(cfg.stop.max_iter, 7);
    }

    #[test]
    fn unknown_config_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"experiment": 2, "speed": 11}"#).unwrap();
        assert!(RunArgs { config: Some(path), ..Default::default() }.resolve().is_err());
    }
}
