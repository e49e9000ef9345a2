//! Block updates of the inner ADMM: a descent-guaranteed local solver for
//! `x` and closed-form minimizers for `x̄` and `z`.

mod closed_form;
mod newton;
mod pg;
mod xblock;

pub use closed_form::{solve_xbar_block, solve_xbar_prox, solve_z_block, z_update};
pub use xblock::{solve_x_block, XBlockReport, XBlockSolver, XSolverConfig};
