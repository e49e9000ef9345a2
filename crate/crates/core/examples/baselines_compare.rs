//! Runs the two-level method, the penalty method and the one-level
//! relaxation through the experiment runner and prints the comparison
//! table. Artifacts land in a temporary directory unless one is given.
//!
//! `cargo run --release --example baselines_compare -- [n_p] [out_dir]`

use std::path::PathBuf;

use serde_json::json;
use twolevel::baselines::RelaxationConfig;
use twolevel::benchmarks::CentralizedConfig;
use twolevel::outer::OuterConfig;
use twolevel::runner::{compare, run, ProblemSource, RunConfig, SolverKind};

fn main() -> twolevel::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_p: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(12);
    let tmp = tempfile::tempdir()?;
    let dir = args.next().map(PathBuf::from).unwrap_or_else(|| tmp.path().to_path_buf());
    let eps = (3.0 * n_p as f64).sqrt() * 1e-6;
    let outer = OuterConfig {
        beta_init: 100.0,
        gamma: 2.0,
        omega: 0.5,
        eps,
        primal_stop: true,
        max_outer: 30,
        ..OuterConfig::default()
    };

    let mut summaries = Vec::new();
    for solver in [SolverKind::TwoLevel, SolverKind::Penalty, SolverKind::Relaxation] {
        let mut cfg = RunConfig::new(ProblemSource::generator("sphere", json!({ "n_p": n_p })), solver);
        match solver {
            SolverKind::Relaxation => {
                cfg.relaxation = Some(RelaxationConfig {
                    eps: 1e-3,
                    ..RelaxationConfig::default()
                })
            }
            _ => cfg.outer = Some(outer.clone()),
        }
        cfg.centralized = Some(CentralizedConfig::default());
        let out = run(&cfg, &dir)?;
        summaries.push(out.summary);
    }
    print!("{}", compare(&summaries)?);
    println!("artifacts in {}", dir.display());
    Ok(())
}
