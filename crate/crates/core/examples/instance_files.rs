//! Generates an instance, writes it to JSON, reads it back and solves it
//! from the file through a run configuration.
//!
//! `cargo run --release --example instance_files -- [family] [seed]`

use serde_json::json;
use twolevel::problem::Instance;
use twolevel::runner::{generate_instance, parse_config, run};

fn main() -> twolevel::Result<()> {
    let mut args = std::env::args().skip(1);
    let family = args.next().unwrap_or_else(|| "random_consensus".into());
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("instance.json");

    let inst = generate_instance(&family, &serde_json::Value::Null, seed)?;
    inst.save(&path)?;
    let back = Instance::load(&path)?;
    println!(
        "{family} seed {seed}: {} blocks, n₁ = {}, n₂ = {}, m = {}",
        back.problem.num_blocks(),
        back.problem.n1(),
        back.problem.n2(),
        back.problem.m()
    );
    println!("hash {} (matches: {})", back.hash()?, back.hash()? == inst.hash()?);

    let cfg = parse_config(
        &json!({
            "problem": { "file": path },
            "solver": "two_level",
            "outer": { "eps": 1e-6 },
            "trace": "outer"
        })
        .to_string(),
    )?;
    let out = run(&cfg, dir.path())?;
    let s = &out.summary;
    println!(
        "{:?} (exit {}): {} outer, {} inner, objective {:.6}",
        s.status.unwrap(),
        s.exit_code,
        s.outer_iters,
        s.total_inner_iters,
        s.objective.unwrap()
    );
    let rows = std::fs::read_to_string(dir.path().join(&s.trace_file))?.lines().count() - 1;
    println!("{rows} trace rows in {}", s.trace_file);
    Ok(())
}
