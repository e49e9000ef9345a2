//! Two-level distributed solver for nonconvex problems with linear
//! consensus coupling.
//!
//! An outer augmented-Lagrangian loop drives a slack variable `z` to zero
//! while a three-block ADMM solves each subproblem, block-parallel across
//! agents. The crate also ships a pure penalty method, a one-level
//! relaxation solver, a robust tensor PCA specialization and generators for
//! benchmark families.

pub mod error;
pub mod baselines;
pub mod benchmarks;
pub mod linalg;
pub mod outer;
pub mod problem;
pub mod runner;
pub mod inner;
pub mod subsolvers;
pub mod tensor_pca;
pub mod trace;

pub use error::{Error, Result};
