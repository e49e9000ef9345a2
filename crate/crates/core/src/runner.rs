//! Experiment runner: JSON run configurations, artifacts on disk and the
//! comparison table.
//!
//! A run writes three files into the output directory, all prefixed with
//! the run name: `.trace.csv`, `.summary.json` and `.config.json` (the
//! configuration with every default filled in).

use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::baselines::{run_relaxation_from, RelaxationConfig};
use crate::benchmarks::{
    gap_percent, gen_infeasible, gen_netflow, gen_random_consensus, gen_sphere, gen_toy,
    solve_centralized, CentralizedConfig,
};
use crate::error::{Error, Result};
use crate::outer::{run_outer, OuterConfig, SafeguardedDual, SolveResult, SolveStatus, ZeroDual};
use crate::problem::{Instance, ResidualReport};
use crate::tensor_pca::{gen_pca_data, run_pca, write_pca_trace_csv, PcaConfig, PcaDataConfig};
use crate::trace::{write_trace_csv, Scope};

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;
/// Environment variable that overrides the output directory of a config.
pub const OUT_DIR_ENV: &str = "TWOLEVEL_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    TwoLevel,
    Penalty,
    Relaxation,
    Pca,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::TwoLevel => "two_level",
            SolverKind::Penalty => "penalty",
            SolverKind::Relaxation => "relaxation",
            SolverKind::Pca => "pca",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceLevel {
    None,
    #[default]
    Outer,
    Inner,
}

/// Either a generator family with parameters or an instance file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSource {
    pub family: Option<String>,
    pub params: Value,
    pub file: Option<PathBuf>,
}

impl ProblemSource {
    pub fn generator(family: &str, params: Value) -> Self {
        Self {
            family: Some(family.into()),
            params,
            file: None,
        }
    }

    pub fn file(path: impl Into<PathBuf>) -> Self {
        Self {
            family: None,
            params: Value::Null,
            file: Some(path.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSource,
    pub solver: SolverKind,
    /// Parameters of `two_level` and `penalty`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer: Option<OuterConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relaxation: Option<RelaxationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pca: Option<PcaConfig>,
    /// Seed for generators and random starts.
    #[serde(default)]
    pub seed: u64,
    /// Artifact prefix; defaults to the solver name.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub trace: TraceLevel,
    /// Worker threads for block-parallel steps; 0 uses every core.
    #[serde(default = "one")]
    pub threads: usize,
    /// Compare the final objective against a multi-start centralized solve.
    #[serde(default)]
    pub centralized: Option<CentralizedConfig>,
}

fn one() -> usize {
    1
}

impl RunConfig {
    pub fn new(problem: ProblemSource, solver: SolverKind) -> Self {
        Self {
            problem,
            solver,
            outer: None,
            relaxation: None,
            pca: None,
            seed: 0,
            name: None,
            out_dir: None,
            trace: TraceLevel::Outer,
            threads: 1,
            centralized: None,
        }
    }

    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or(self.solver.name())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: String| {
            Err(Error::Config {
                field: field.into(),
                message,
            })
        };
        match (&self.problem.family, &self.problem.file) {
            (Some(_), Some(_)) | (None, None) => {
                return bad("problem", "set exactly one of `family` and `file`".into())
            }
            (None, Some(f)) if !f.is_file() => {
                return bad("problem.file", format!("{} does not exist", f.display()))
            }
            _ => {}
        }
        let sections = [
            ("outer", self.outer.is_some(), matches!(self.solver, SolverKind::TwoLevel | SolverKind::Penalty)),
            ("relaxation", self.relaxation.is_some(), self.solver == SolverKind::Relaxation),
            ("pca", self.pca.is_some(), self.solver == SolverKind::Pca),
        ];
        for (field, given, wanted) in sections {
            if given && !wanted {
                return bad(field, format!("not used by solver `{}`", self.solver.name()));
            }
        }
        let is_pca_data = self.problem.family.as_deref() == Some("pca");
        if is_pca_data != (self.solver == SolverKind::Pca) {
            return bad("solver", "the `pca` solver runs exactly on the `pca` family".into());
        }
        if self.centralized.is_some() && self.solver == SolverKind::Pca {
            return bad("centralized", "not available for tensor PCA".into());
        }
        if let Some(c) = &self.outer {
            c.inner.validate()?;
        }
        if let Some(c) = &self.relaxation {
            c.validate()?;
        }
        if let Some(c) = &self.pca {
            c.validate()?;
        }
        Ok(())
    }
}

/// Parses a JSON run configuration. Errors name the offending field and
/// position.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
        field: match e.path().to_string() {
            p if p == "." => "<root>".into(),
            p => p,
        },
        message: e.inner().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    parse_config(&fs::read_to_string(path)?)
}

fn params<T: for<'de> Deserialize<'de> + Default>(v: &Value) -> Result<T> {
    if v.is_null() {
        return Ok(T::default());
    }
    serde_path_to_error::deserialize(v).map_err(|e| Error::Config {
        field: format!("problem.params.{}", e.path()),
        message: e.inner().to_string(),
    })
}

fn usize_param(v: &Value, key: &str, default: usize) -> Result<usize> {
    match v.get(key) {
        None => Ok(default),
        Some(x) => x.as_u64().map(|n| n as usize).ok_or_else(|| Error::Config {
            field: format!("problem.params.{key}"),
            message: "expected a nonnegative integer".into(),
        }),
    }
}

/// Builds an instance of a generator family: `toy`, `infeasible` (`n`),
/// `sphere` (`n_p`), `netflow` and `random_consensus` (their config
/// fields).
pub fn generate_instance(family: &str, params_v: &Value, seed: u64) -> Result<Instance> {
    match family {
        "toy" => gen_toy(),
        "infeasible" => gen_infeasible(usize_param(params_v, "n", 2)?, seed),
        "sphere" => gen_sphere(usize_param(params_v, "n_p", 30)?, seed),
        "netflow" => gen_netflow(&params(params_v)?, seed),
        "random_consensus" => gen_random_consensus(&params(params_v)?, seed),
        other => Err(Error::Config {
            field: "problem.family".into(),
            message: format!("unknown family `{other}`"),
        }),
    }
}

/// Everything `run` reports, also written as `<name>.summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub schema_version: u32,
    pub name: String,
    pub solver: SolverKind,
    /// Absent for tensor PCA.
    pub status: Option<SolveStatus>,
    pub exit_code: i32,
    pub instance_hash: String,
    pub seed: u64,
    pub threads: usize,
    /// Absent for tensor PCA.
    pub objective: Option<f64>,
    pub centralized_objective: Option<f64>,
    pub gap_percent: Option<f64>,
    pub outer_iters: usize,
    pub total_inner_iters: usize,
    /// `‖Ax + Bx̄‖`, or `‖𝒵 + 𝓔 + 𝓑 − 𝒯‖` for tensor PCA.
    pub primal_gap: f64,
    pub residuals: Option<ResidualReport>,
    /// Relative error against the ground truth (tensor PCA).
    pub rel_error: Option<f64>,
    pub wall_time: f64,
    pub trace_file: String,
    pub config_file: String,
}

impl Summary {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let s: Summary = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            field: format!("summary.{}", e.path()),
            message: format!("{}: {}", path.display(), e.inner()),
        })?;
        if s.schema_version != SUMMARY_SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "{}: unsupported summary schema {}",
                path.display(),
                s.schema_version
            )));
        }
        Ok(s)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: Summary,
    pub summary_path: PathBuf,
    /// Present for the consensus solvers.
    pub result: Option<SolveResult>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.summary.exit_code
    }
}

/// Output directory: explicit override, then the environment variable,
/// then the config, then `runs`.
pub fn resolve_out_dir(cfg: &RunConfig, cli: Option<&Path>) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Runs the configured solver inside a pool of `cfg.threads` workers and
/// writes the artifacts into `out_dir`.
pub fn run(cfg: &RunConfig, out_dir: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| run_in_pool(cfg, out_dir, pool.current_num_threads()))
}

fn run_in_pool(cfg: &RunConfig, out_dir: &Path, threads: usize) -> Result<RunOutcome> {
    fs::create_dir_all(out_dir)?;
    let name = cfg.name().to_string();
    let trace_file = format!("{name}.trace.csv");
    let config_file = format!("{name}.config.json");
    let mut resolved = cfg.clone();
    resolved.out_dir = Some(out_dir.to_path_buf());
    resolved.threads = threads;
    match cfg.solver {
        SolverKind::TwoLevel | SolverKind::Penalty => {
            resolved.outer.get_or_insert_with(OuterConfig::default);
        }
        SolverKind::Relaxation => {
            resolved.relaxation.get_or_insert_with(RelaxationConfig::default);
        }
        SolverKind::Pca => {
            resolved.pca.get_or_insert_with(PcaConfig::default);
        }
    }
    fs::write(out_dir.join(&config_file), serde_json::to_string_pretty(&resolved)?)?;

    let mut summary = Summary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        name: name.clone(),
        solver: cfg.solver,
        status: None,
        exit_code: 0,
        instance_hash: String::new(),
        seed: cfg.seed,
        threads,
        objective: None,
        centralized_objective: None,
        gap_percent: None,
        outer_iters: 0,
        total_inner_iters: 0,
        primal_gap: f64::NAN,
        residuals: None,
        rel_error: None,
        wall_time: 0.0,
        trace_file: trace_file.clone(),
        config_file,
    };
    let trace_w = BufWriter::new(File::create(out_dir.join(&trace_file))?);
    let mut result = None;

    if cfg.solver == SolverKind::Pca {
        let data_cfg: PcaDataConfig = params(&cfg.problem.params)?;
        let data = gen_pca_data(&data_cfg, cfg.seed)?;
        let mut pcfg = resolved.pca.clone().unwrap_or_default();
        pcfg.seed = cfg.seed;
        let mut h = Sha256::new();
        h.update(b"pca");
        h.update(serde_json::to_vec(&data_cfg)?);
        h.update(cfg.seed.to_le_bytes());
        summary.instance_hash = hex::encode(h.finalize());
        let started = Instant::now();
        let out = run_pca(&data.observed, &pcfg, Some(&data.truth))?;
        summary.wall_time = started.elapsed().as_secs_f64();
        let records = match cfg.trace {
            TraceLevel::None => &[][..],
            _ => &out.trace[..],
        };
        write_pca_trace_csv(trace_w, "pca", records)?;
        let last = out.trace.last();
        summary.primal_gap = out.final_residual();
        summary.rel_error = last.and_then(|r| r.rel_error);
        summary.outer_iters = out.state.k_out;
        summary.total_inner_iters = out.trace.len();
        let reached = pcfg.stop_tol.is_none_or(|t| summary.primal_gap <= t);
        summary.exit_code = if reached { 0 } else { 3 };
    } else {
        let inst = match (&cfg.problem.family, &cfg.problem.file) {
            (Some(f), _) => generate_instance(f, &cfg.problem.params, cfg.seed)?,
            (None, Some(path)) => Instance::load(path)?,
            (None, None) => unreachable!("validated"),
        };
        summary.instance_hash = inst.hash()?;
        let p = &inst.problem;
        let x0 = inst.initial_x.as_deref();
        let started = Instant::now();
        let res = match cfg.solver {
            SolverKind::Relaxation => {
                let mut rc = resolved.relaxation.clone().unwrap_or_default();
                rc.record_trace = cfg.trace == TraceLevel::Inner;
                run_relaxation_from(p, &rc, x0, None)?
            }
            kind => {
                let mut oc = resolved.outer.clone().unwrap_or_default();
                oc.inner.record_trace = cfg.trace == TraceLevel::Inner;
                if kind == SolverKind::Penalty {
                    run_outer(p, &oc, x0, &mut ZeroDual, "penalty", None)?
                } else {
                    run_outer(p, &oc, x0, &mut SafeguardedDual, "two_level", None)?
                }
            }
        };
        summary.wall_time = started.elapsed().as_secs_f64();
        let records: Vec<_> = match cfg.trace {
            TraceLevel::None => Vec::new(),
            TraceLevel::Outer if cfg.solver != SolverKind::Relaxation => res
                .trace
                .iter()
                .filter(|r| r.scope == Scope::Outer)
                .cloned()
                .collect(),
            _ => res.trace.clone(),
        };
        let timed = records.iter().any(|r| r.wall_time.is_some());
        write_trace_csv(trace_w, cfg.solver.name(), &records, timed)?;
        if let Some(cc) = &cfg.centralized {
            let cc = CentralizedConfig {
                seed: cfg.seed,
                ..cc.clone()
            };
            let (c, _) = solve_centralized(&inst, &cc)?;
            summary.centralized_objective = Some(c);
            summary.gap_percent = Some(gap_percent(res.objective, c));
        }
        summary.status = Some(res.status);
        summary.exit_code = res.status.exit_code();
        summary.objective = Some(res.objective);
        summary.outer_iters = res.outer_iters;
        summary.total_inner_iters = res.total_inner_iters;
        summary.primal_gap = res.report.primal_gap;
        summary.residuals = Some(res.report);
        result = Some(res);
    }

    let summary_path = out_dir.join(format!("{name}.summary.json"));
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    Ok(RunOutcome {
        summary,
        summary_path,
        result,
    })
}

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub name: String,
    pub outer: usize,
    pub inner: usize,
    pub primal_gap: f64,
    pub objective: Option<f64>,
    pub gap_percent: Option<f64>,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub instance_hash: String,
    pub rows: Vec<ComparisonRow>,
}

/// Builds the table from two or more summaries of runs on one instance.
pub fn compare(summaries: &[Summary]) -> Result<Comparison> {
    if summaries.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "compare needs at least 2 runs, got {}",
            summaries.len()
        )));
    }
    let hash = &summaries[0].instance_hash;
    if let Some(s) = summaries.iter().find(|s| &s.instance_hash != hash) {
        return Err(Error::InstanceMismatch(format!(
            "run `{}` used instance {} but `{}` used {}",
            s.name, s.instance_hash, summaries[0].name, hash
        )));
    }
    Ok(Comparison {
        instance_hash: hash.clone(),
        rows: summaries
            .iter()
            .map(|s| ComparisonRow {
                name: s.name.clone(),
                outer: s.outer_iters,
                inner: s.total_inner_iters,
                primal_gap: s.primal_gap,
                objective: s.objective,
                gap_percent: s.gap_percent,
                time: s.wall_time,
            })
            .collect(),
    })
}

pub fn compare_files(paths: &[PathBuf]) -> Result<Comparison> {
    let summaries = paths
        .iter()
        .map(|p| Summary::load(p))
        .collect::<Result<Vec<_>>>()?;
    compare(&summaries)
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |x| format!("{x:.prec$}"));
        writeln!(
            f,
            // the combining macron takes no column of its own
            "{:<16} {:>6} {:>8} {:>12} {:>14} {:>9} {:>9}",
            "Solver", "Outer", "Inner", "‖Ax+Bx̄‖", "Obj", "Gap (%)", "Time (s)"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<16} {:>6} {:>8} {:>11.3e} {:>14} {:>9} {:>9.2}",
                r.name,
                r.outer,
                r.inner,
                r.primal_gap,
                opt(r.objective, 6),
                opt(r.gap_percent, 3),
                r.time
            )?;
        }
        Ok(())
    }
}
