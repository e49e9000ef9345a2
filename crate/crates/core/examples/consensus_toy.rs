//! Two agents holding one scalar each must agree on a shared value:
//! `min ½(x₁ − 1)² + ½(x₂ + 1)²` s.t. `x₁ = x̄ = x₂`. Prints the outer
//! rounds of the two-level method and the multipliers at the end.
//!
//! `cargo run --release --example consensus_toy`

use twolevel::benchmarks::gen_toy;
use twolevel::outer::{run_two_level, OuterConfig};
use twolevel::trace::Scope;

fn main() -> twolevel::Result<()> {
    let inst = gen_toy()?;
    let cfg = OuterConfig {
        eps: 1e-8,
        ..OuterConfig::default()
    };
    let r = run_two_level(&inst.problem, &cfg)?;
    println!("{:>3} {:>9} {:>10} {:>10} {:>7}", "k", "beta", "‖z‖", "‖Ax+Bx̄‖", "inner");
    for rec in r.trace.iter().filter(|t| t.scope == Scope::Outer) {
        println!(
            "{:>3} {:>9.1e} {:>10.2e} {:>10.2e} {:>7}",
            rec.k, rec.beta, rec.z_norm, rec.gap, rec.inner_iters
        );
    }
    println!("status {:?}", r.status);
    println!("x = {:?}, x̄ = {:?}", r.x, r.xbar);
    // at a KKT point the inner multiplier y balances the gradients
    println!("y = {:?} (expected [1, -1])", r.y);
    Ok(())
}
