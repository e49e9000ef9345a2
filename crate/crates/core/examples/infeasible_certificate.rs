//! A unit sphere that must equal a point of the box `[2, 3]ⁿ`. The
//! two-level method detects the infeasibility and stops at a stationary
//! point of `½‖Ax + Bx̄‖²`, with `‖z‖` equal to the distance between the
//! sets. The one-level relaxation just returns a point.
//!
//! `cargo run --release --example infeasible_certificate -- [n]`

use twolevel::baselines::{run_relaxation, RelaxationConfig};
use twolevel::benchmarks::{gen_infeasible, infeasible_gap};
use twolevel::outer::{feasibility_residual, run_two_level, OuterConfig};

fn main() -> twolevel::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let inst = gen_infeasible(n, 0)?;
    let p = &inst.problem;

    let r = run_two_level(p, &OuterConfig::default())?;
    println!("two_level: {:?} after {} rounds", r.status, r.outer_iters);
    println!("  ‖z‖ = {:.6}, distance between the sets = {:.6}", r.report.z_norm, infeasible_gap(n));
    println!("  x = {:?}", r.x);
    println!("  x̄ = {:?}", r.xbar);
    println!("  feasibility-problem residual {:.2e}", feasibility_residual(p, &r.x, &r.xbar)?);

    let rel = run_relaxation(p, &RelaxationConfig::default())?;
    println!(
        "relaxation: {:?} after {} iterations, ‖Ax+Bx̄‖ = {:.4}",
        rel.status, rel.total_inner_iters, rel.report.primal_gap
    );
    Ok(())
}
