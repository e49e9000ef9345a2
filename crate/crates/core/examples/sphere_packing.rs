//! Coulomb energy of points on the unit sphere split over three agents:
//! two-level vs the pure penalty method, both stopped once
//! `‖Ax + Bx̄‖ ≤ √(3 n_p)·10⁻⁶`, against a multi-start centralized solve.
//!
//! `cargo run --release --example sphere_packing -- [n_p] [seed]`

use std::time::Instant;

use twolevel::benchmarks::{gap_percent, gen_sphere, solve_centralized, CentralizedConfig};
use twolevel::outer::{run_outer, OuterConfig, SafeguardedDual, ZeroDual};

fn main() -> twolevel::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_p: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(30);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let inst = gen_sphere(n_p, seed)?;
    let p = &inst.problem;
    println!("n_p = {n_p}: n₁ = {}, n₂ = {}, m = {}", p.n1(), p.n2(), p.m());

    let t = Instant::now();
    let (central, _) = solve_centralized(&inst, &CentralizedConfig::default())?;
    println!("centralized {central:.6} ({:.1} s)", t.elapsed().as_secs_f64());

    let cfg = OuterConfig {
        beta_init: 100.0,
        gamma: 2.0,
        omega: 0.5,
        eps: (3.0 * n_p as f64).sqrt() * 1e-6,
        primal_stop: true,
        max_outer: 30,
        ..OuterConfig::default()
    };
    let x0 = inst.initial_x.as_deref();
    println!("{:<10} {:>6} {:>8} {:>11} {:>12} {:>8} {:>8}", "solver", "outer", "inner", "gap", "energy", "gap %", "time");
    for name in ["two_level", "penalty"] {
        let t = Instant::now();
        let r = if name == "penalty" {
            run_outer(p, &cfg, x0, &mut ZeroDual, name, None)?
        } else {
            run_outer(p, &cfg, x0, &mut SafeguardedDual, name, None)?
        };
        println!(
            "{:<10} {:>6} {:>8} {:>11.3e} {:>12.6} {:>8.4} {:>7.1}s",
            name,
            r.outer_iters,
            r.total_inner_iters,
            r.report.primal_gap,
            r.objective,
            gap_percent(r.objective, central),
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
